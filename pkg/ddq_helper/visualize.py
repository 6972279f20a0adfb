import os.path as osp

import cv2
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np


# BGR, indexed by state: S0 blue, S1 green, S2 yellow, S3 red
STATE_COLORS = np.array([[255, 0, 0],
                         [0, 255, 0],
                         [0, 255, 255],
                         [0, 0, 255]], dtype=np.uint8)


def render_frame(grid, cell=6):
    """(H, W, 3) BGR image with one cell x cell block per molecule; even rows
    are shifted right by half a block like the lattice."""
    half = cell // 2
    image = np.zeros((grid.height * cell, grid.width * cell + half, 3), dtype=np.uint8)
    colors = STATE_COLORS[grid.states]
    for row in range(grid.height):
        x0 = half if row % 2 == 0 else 0
        block = np.repeat(np.repeat(colors[row][None], cell, axis=0), cell, axis=1)
        image[row * cell:(row + 1) * cell, x0:x0 + grid.width * cell] = block
    return image


def save_frame(grid, path, cell=6):
    if not cv2.imwrite(path, render_frame(grid, cell)):
        raise IOError('Could not write frame {}'.format(path))


def save_frames(grids, out_dir, cell=6):
    paths = []
    for k, grid in enumerate(grids):
        path = osp.join(out_dir, 'scan_{:03d}.ppm'.format(k))
        save_frame(grid, path, cell)
        paths.append(path)
    return paths


def plot_counts(times, counts, path, title=''):
    plt.figure()
    for s in range(4):
        plt.plot(times, counts[:, s], color='bgyr'[s], label='S{}'.format(s))
    plt.xlabel('Time (s)')
    plt.ylabel('Cells')
    plt.title(title)
    plt.legend()
    plt.savefig(path)
    plt.close()


def plot_flux_profile(phi, times, path, title=''):
    """phi vs unit-cell rank, one curve per snapshot"""
    plt.figure()
    z = np.arange(phi.shape[1])
    for k in range(phi.shape[0]):
        plt.plot(z, phi[k], color=plt.cm.viridis(k / max(1, phi.shape[0] - 1)),
                 label='{}s'.format(times[k]) if k in (0, phi.shape[0] - 1) else None)
    plt.xlabel('Z')
    plt.ylabel('phi (e/nm^2)')
    plt.title(title)
    plt.legend()
    plt.savefig(path)
    plt.close()


def plot_diffusion_scatter(fit, path, title=''):
    plt.figure()
    plt.scatter(fit.curvature, fit.rate, s=8)
    x = np.linspace(fit.curvature.min(), fit.curvature.max(), 2) if len(fit.curvature) else []
    if len(x):
        plt.plot(x, fit.D * x + fit.intercept, color='red',
                 label='D={:.3g}, R2={:.3f}'.format(fit.D, fit.r2))
        plt.legend()
    plt.xlabel('d2phi/dA2')
    plt.ylabel('dphi/dt (e/nm^2/min)')
    plt.title(title)
    plt.savefig(path)
    plt.close()


def plot_n3(times, n3, path, fit=None, title=''):
    plt.figure()
    t = np.asarray(times, dtype=np.float64) / 60.
    plt.plot(t, n3, 'o', label='N3')
    if fit is not None:
        plt.plot(t, fit.c * t ** fit.p, label='{:.3g} t^{:.2f}'.format(fit.c, fit.p))
    plt.xlabel('Time (min)')
    plt.ylabel('N3')
    plt.title(title)
    plt.legend()
    plt.savefig(path)
    plt.close()


def plot_half_life(summary, path, title=''):
    ns = [n for n, (mean, _, _) in summary.items() if mean is not None]
    plt.figure()
    plt.errorbar(ns, [summary[n][0] for n in ns], yerr=[summary[n][1] for n in ns], fmt='o-')
    plt.xlabel('N')
    plt.ylabel('t_half (s)')
    plt.title(title)
    plt.savefig(path)
    plt.close()
