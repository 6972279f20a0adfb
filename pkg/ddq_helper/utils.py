import numpy as np


class ScanMeter(object):
    """Tracks one per-scan quantity: its latest value and the drift since the first scan"""
    def __init__(self, name, fmt=':d'):
        self.name = name
        self.fmt = fmt
        self.first = None
        self.val = None
        self.history = []

    def update(self, val):
        if self.first is None:
            self.first = val
        self.val = val
        self.history.append(val)

    @property
    def drift(self):
        return 0 if self.first is None else self.val - self.first

    def __str__(self):
        fmtstr = '{name} {val' + self.fmt + '} ({drift:+' + self.fmt[1:] + '})'
        return fmtstr.format(name=self.name, val=self.val, drift=self.drift)


class ScanProgress(object):
    def __init__(self, num_scans, meters, prefix='Scan: '):
        self.num_scans = num_scans
        self.meters = meters
        self.prefix = prefix

    def display(self, scan, elapsed):
        width = len(str(self.num_scans))
        counter = '[{:{w}d}/{:{w}d}]'.format(scan, self.num_scans, w=width)
        entries = [self.prefix + counter, 't {}s'.format(elapsed)]
        entries += [str(meter) for meter in self.meters]
        print('\t'.join(entries))


def state_counts(grid):
    """Number of S0..S3 cells"""
    return np.bincount(grid.states.ravel(), minlength=4)[:4]


def spawn_seeds(seed, n):
    """n independent, reproducible child seeds for multi-seed sweeps"""
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1)[0]) for c in children]
