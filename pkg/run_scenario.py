import argparse
import glob
import json
import os.path as osp
import sys
from multiprocessing import Pool

from ddq_helper.errors import AnalysisError, ValidationError
from ddq_helper.runs import analyze_run, replay_verify, run_scenario
from ddq_helper.scenario import ANALYSES


EXIT_OK, EXIT_FAIL, EXIT_VALIDATION, EXIT_ANALYSIS = 0, 1, 2, 3


parser = argparse.ArgumentParser(description='DDQ cellular-automaton scenario runner')
subparsers = parser.add_subparsers(dest='command')

run_parser = subparsers.add_parser('run', help='simulate scenario file(s) into run directories')
run_parser.add_argument('scenarios', nargs='+', help='scenario YAML file(s)')
run_parser.add_argument('-o', '--output_dir', type=str, default='results',
                        help='run directory; with several scenarios, one subdirectory per '
                             'scenario name (default: results)')
run_parser.add_argument('-f', '--frames', action='store_true', help='write PPM frames')
run_parser.add_argument('-p', '--plots', action='store_true', help='write matplotlib plots')
run_parser.add_argument('-j', '--jobs', type=int, default=1,
                        help='scenarios run in parallel (default: 1)')
run_parser.add_argument('-q', '--quiet', action='store_true', help='no per-scan progress')

verify_parser = subparsers.add_parser('verify', help='replay a run directory bit-exactly')
verify_parser.add_argument('run_dir', type=str)

analyze_parser = subparsers.add_parser('analyze', help='recompute analyses of a run directory')
analyze_parser.add_argument('run_dir', type=str)
analyze_parser.add_argument('-k', '--kind', type=str, default=None,
                            help='|'.join(ANALYSES) + ' (default: all requested by the scenario)')


def run_one(args):
    path, out_dir, frames, plots, progress = args
    try:
        report = run_scenario(path, out_dir, frames, plots, progress)
    except ValidationError as e:
        print('Error: {}: {}'.format(path, e))
        return EXIT_VALIDATION
    except AnalysisError as e:
        print('Error: {}: {}'.format(path, e))
        return EXIT_ANALYSIS
    print('{} -> {}'.format(path, out_dir))
    print(json.dumps(report['analyses'], indent=2))
    return EXIT_OK


def main():
    args = parser.parse_args()
    if args.command is None:
        parser.print_help()
        return EXIT_FAIL

    if args.command == 'run':
        paths = []
        for pattern in args.scenarios:
            paths += sorted(glob.glob(pattern)) or [pattern]
        if len(paths) == 1:
            dirs = [args.output_dir]
        else:
            dirs = [osp.join(args.output_dir, osp.splitext(osp.basename(p))[0]) for p in paths]
        tasks = [(p, d, args.frames, args.plots, not args.quiet and args.jobs == 1)
                 for p, d in zip(paths, dirs)]
        if args.jobs > 1:
            with Pool(args.jobs) as pool:
                codes = pool.map(run_one, tasks)
        else:
            codes = [run_one(t) for t in tasks]
        return max(codes)

    if args.command == 'verify':
        try:
            result = replay_verify(args.run_dir)
        except ValidationError as e:
            print('Error: {}'.format(e))
            return EXIT_VALIDATION
        print('{}: {}'.format(args.run_dir, result))
        return EXIT_OK if result.ok else EXIT_FAIL

    if args.command == 'analyze':
        if args.kind is not None and args.kind not in ANALYSES:
            print('Error: unknown analysis {!r}, expected {}'.format(args.kind, '|'.join(ANALYSES)))
            return EXIT_VALIDATION
        try:
            results = analyze_run(args.run_dir, None if args.kind is None else [args.kind])
        except ValidationError as e:
            print('Error: {}'.format(e))
            return EXIT_VALIDATION
        except AnalysisError as e:
            print('Error: {}'.format(e))
            return EXIT_ANALYSIS
        print(json.dumps(results, indent=2))
        return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
