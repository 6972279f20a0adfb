import argparse
import json
import os
import os.path as osp

from ddq_helper.experiments import calibrate, cancer_sweep, cin_sweep, diffusion_sweep, gate_sweep
from ddq_helper.visualize import plot_half_life


parser = argparse.ArgumentParser()
parser.add_argument('-t', '--task', type=str, default='cancer',
                    help='cancer|gate|cin|diffusion|calibrate (default: cancer)')
parser.add_argument('-n', '--seeds', type=int, default=20, help='seeds per setting (default: 20)')
parser.add_argument('-s', '--seed', type=int, default=0, help='base seed (default: 0)')
parser.add_argument('--scans', type=int, default=None,
                    help='scans per run (default: 15 for cancer/cin, 12 otherwise)')
parser.add_argument('-j', '--jobs', type=int, default=1, help='worker processes (default: 1)')
parser.add_argument('--p_s1', type=float, default=None, help='override S1 base mobility')
parser.add_argument('--p_s3', type=float, default=None, help='override S3 base mobility')
parser.add_argument('--micro_steps', type=int, default=None, help='override micro-steps per scan')
parser.add_argument('-o', '--output_dir', type=str, default='results/experiments',
                    help='default: results/experiments')


def main():
    args = parser.parse_args()
    assert args.task in ['cancer', 'gate', 'cin', 'diffusion', 'calibrate']
    if not osp.exists(args.output_dir):
        os.makedirs(args.output_dir)
    engine = {k: getattr(args, k) for k in ('p_s1', 'p_s3', 'micro_steps')
              if getattr(args, k) is not None}
    scans = args.scans or (15 if args.task in ('cancer', 'cin') else 12)

    if args.task == 'cancer':
        result = cancer_sweep(seeds=args.seeds, scans=scans, base_seed=args.seed, engine=engine,
                              jobs=args.jobs)
        summary = {n: (r['t_half'], r['t_half_std'], r['t_half_runs']) for n, r in result.items()}
        plot_half_life(summary, osp.join(args.output_dir, 'half_life.png'), 't_half vs N')
        for n, r in result.items():
            print('N={:4d}\tc {:.3g}\tp {:.2f}\tt_half {}'.format(n, r.get('c', float('nan')),
                                                                 r.get('p', float('nan')),
                                                                 r['t_half']))
    elif args.task == 'cin':
        result = cin_sweep(seeds=args.seeds, scans=scans, base_seed=args.seed, engine=engine,
                           jobs=args.jobs)
        print('u2 intact {u2_intact}\tu2 deleted {u2_deleted}\tratio {ratio}'.format(**result))
    elif args.task == 'gate':
        result = gate_sweep(seeds=args.seeds, scans=scans, base_seed=args.seed, engine=engine,
                            jobs=args.jobs)
        for inputs, r in result.items():
            print('AB={}\texpected {}\tsuccess {:.2f}'.format(inputs, r['expected'], r['success']))
    elif args.task == 'diffusion':
        result = diffusion_sweep(seeds=args.seeds, scans=scans, base_seed=args.seed, engine=engine,
                                 jobs=args.jobs)
        print(json.dumps(result, indent=2))
    else:
        result = calibrate(seeds=args.seeds, scans=scans, base_seed=args.seed, jobs=args.jobs)
        best = result[0]
        print('Best: p_s1 {p_s1}\tp_s3 {p_s3}\tmicro_steps {micro_steps}\tscore {score:.3f}'.format(
            **best))

    with open(osp.join(args.output_dir, '{}.json'.format(args.task)), 'w') as f:
        json.dump(result, f, indent=2, default=str)


if __name__ == '__main__':
    main()
