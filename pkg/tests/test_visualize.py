import os.path as osp

import numpy as np

from ddq_helper.kinetics import KineticsFit
from ddq_helper.lattice import HexGrid
from ddq_helper.visualize import (STATE_COLORS, plot_counts, plot_half_life, plot_n3,
                                  render_frame, save_frames)


def test_render_frame_offsets_even_rows():
    grid = HexGrid(2, 2, states=[[0, 1], [2, 3]])
    image = render_frame(grid, cell=4)
    assert image.shape == (8, 10, 3)
    assert image[0, 2].tolist() == STATE_COLORS[0].tolist()
    assert image[0, 6].tolist() == STATE_COLORS[1].tolist()
    assert image[4, 0].tolist() == STATE_COLORS[2].tolist()
    assert image[4, 4].tolist() == STATE_COLORS[3].tolist()
    assert image[0, 0].tolist() == [0, 0, 0]


def test_save_frames(tmp_path):
    paths = save_frames([HexGrid(4, 4), HexGrid(4, 4)], str(tmp_path))
    assert [osp.basename(p) for p in paths] == ['scan_000.ppm', 'scan_001.ppm']
    assert all(osp.getsize(p) > 0 for p in paths)


def test_plots(tmp_path):
    times = np.array([0, 40, 80])
    plot_counts(times, np.array([[10, 0, 0, 1], [9, 1, 0, 1], [8, 1, 1, 1]]),
                str(tmp_path / 'counts.png'))
    plot_n3([40, 80, 120], [1, 4, 9], str(tmp_path / 'n3.png'), KineticsFit(2.25, 2., 1.))
    plot_half_life({286: (30., 5., 4), 456: (None, None, 0)}, str(tmp_path / 'half_life.png'))
    for name in ('counts.png', 'n3.png', 'half_life.png'):
        assert (tmp_path / name).exists()
