#!/usr/bin/env python
"""
File: tomography.py
Description:  Command line front-end for simulated homodyne tomography
campaigns: information analysis, single simulations and reconstructions,
Monte-Carlo campaigns, Q-function tables and campaign reports
"""
import sys
import logging
import argparse
import traceback

from rootomo.tomography import campaign
from rootomo.tomography.data import parse_config
from rootomo.tomography.errors import TomographyError

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def run(args):
    """ dispatch one verb """
    if args.verb == 'report':
        campaign.cmd_report(args.out, check=args.check, svg=args.svg)
        return
    config = campaign.with_overrides(parse_config(args.config), seed=args.seed, runs=args.runs,
                                     out=args.out, threads=args.threads)
    logging.debug(config)
    if args.verb == 'analyze':
        campaign.cmd_analyze(config, config.output, check=args.check)
    elif args.verb == 'simulate':
        campaign.cmd_simulate(config, args.run_index, config.output)
    elif args.verb == 'reconstruct':
        campaign.cmd_reconstruct(config, args.counts, config.output)
    elif args.verb == 'montecarlo':
        campaign.cmd_montecarlo(config, config.output)
        if args.check or args.svg:
            campaign.cmd_report(config.output, check=args.check, svg=args.svg)
    elif args.verb == 'qfunc':
        campaign.cmd_qfunc(config, config.output)


def main():
    """ main function, parses args and runs the verb """
    parser = argparse.ArgumentParser(description='Simulated homodyne tomography experiments')
    parser.add_argument('-d', '--debug', help='enable debug logging', action='store_true')
    verbs = parser.add_subparsers(dest='verb')
    verbs.required = True

    def with_config(name, help_text):
        sub = verbs.add_parser(name, help=help_text)
        sub.add_argument('--config',
                         type=argparse.FileType('r'),
                         required=True,
                         help='path to an experiment config (json)')
        sub.add_argument('--seed', type=int, default=None, help='master seed override')
        sub.add_argument('--runs', type=int, default=None, help='number of runs override')
        sub.add_argument('--out', default=None, help='output directory override')
        sub.add_argument('--threads', type=int, default=None, help='worker processes')
        return sub

    analyze = with_config('analyze', 'information matrix, e_P and loss distribution')
    analyze.add_argument('--check', action='store_true', help='compare with config checks')
    simulate = with_config('simulate', 'one simulated count record')
    simulate.add_argument('--run_index', type=int, default=0, help='run index of the seed')
    reconstruct = with_config('reconstruct', 'reconstruct a recorded count file')
    reconstruct.add_argument('counts', help='count record csv')
    montecarlo = with_config('montecarlo', 'simulate, reconstruct and test many runs')
    montecarlo.add_argument('--check', action='store_true', help='compare with config checks')
    montecarlo.add_argument('--svg', action='store_true', help='render the loss histogram')
    with_config('qfunc', 'Q-function and wave function tables of the true state')
    report = verbs.add_parser('report', help='summarize a finished campaign directory')
    report.add_argument('--out', required=True, help='campaign output directory')
    report.add_argument('--check', action='store_true', help='compare with config checks')
    report.add_argument('--svg', action='store_true', help='render the loss histogram')

    args = parser.parse_args(sys.argv[1:])
    logging.basicConfig(level=logging.DEBUG if args.debug else logging.INFO, format=LOG_FORMAT)
    logging.debug(args)

    try:
        run(args)
    except KeyboardInterrupt:
        logging.info("Quitting")
        sys.exit(130)
    except TomographyError as e:
        logging.error("%s: %s", type(e).__name__, e)
        sys.exit(e.exit_code)
    except Exception as e:
        logging.info("Uncaught exception: %s", e)
        exc_type, exc_value, exc_traceback = sys.exc_info()
        traceback.print_exception(exc_type, exc_value, exc_traceback,
                                  limit=2, file=sys.stdout)
        sys.exit(1)

if __name__ == '__main__':
    main()
