"""
File: util.py
Description:  Generic utility functions, complex (de)serialization
and canonical hashing used by the artifact writers
"""

import json
import hashlib

import numpy as np

def to_pair(value):
    """ complex number to a [re, im] list """
    value = complex(value)
    return [value.real, value.imag]

def from_pair(pair):
    """ [re, im] list (or plain real) to a complex number """
    if isinstance(pair, (list, tuple)):
        if len(pair) != 2:
            raise ValueError("complex values are encoded as [re, im], got %r" % (pair,))
        return complex(float(pair[0]), float(pair[1]))
    return complex(pair)

def to_pairs(array):
    """ complex ndarray to nested lists of [re, im] pairs """
    array = np.asarray(array, dtype=complex)
    if array.ndim == 0:
        return to_pair(array)
    return [to_pairs(row) for row in array]

def from_pairs(nested):
    """ nested lists of [re, im] pairs back to a complex ndarray """
    array = np.asarray(nested, dtype=float)
    return array[..., 0] + 1j * array[..., 1]

def canonical_json(obj):
    """ json text with sorted keys, stable across runs """
    return json.dumps(obj, sort_keys=True, indent=2, separators=(',', ': '))

def stable_hash(obj, digits=16):
    """ sha256 of the canonical json of obj, truncated """
    text = json.dumps(obj, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()[:digits]
