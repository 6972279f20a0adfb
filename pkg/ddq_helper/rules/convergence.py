import functools
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ddq_helper.errors import ConfigError, PreconditionError
from ddq_helper.lattice import (CHARGE, SQRT3, CellCoord, CellState, axial_to_xy, neighbors,
                                offset_to_axial, row_major_key)
from ddq_helper.rules.intents import MoveIntent


INTERACTION_RADIUS = 15
CLEARANCE = 0.5
TOLERANCE = 1e-9


@dataclass(frozen=True)
class PPC:
    position: tuple  # (x, y) in nm
    visible_charge: int


@dataclass(frozen=True)
class Mobility:
    """Hold probabilities of Rule 2: p = p_base(state) * (1 + slope * (spacing - reference))"""
    p_s1: float = 0.25
    p_s3: float = 0.50
    slope: float = 4.0
    reference_spacing: float = 0.98

    def __post_init__(self):
        if not 0. <= self.p_s1 <= self.p_s3 <= 1.:
            raise ConfigError('Need 0 <= p_s1 <= p_s3 <= 1, got {} and {}'.format(
                self.p_s1, self.p_s3))

    def hold_probability(self, state, spacing):
        base = self.p_s3 if state == CellState.S3 else self.p_s1
        scale = 1. + self.slope * (spacing - self.reference_spacing)
        return float(np.clip(base * scale, 0., 1.))


DEFAULT_MOBILITY = Mobility()


def mobility_hold(state, spacing, target_state, rng, mobility=DEFAULT_MOBILITY):
    """True when the charge stays put this step. Moves onto S2 are never held
    and consume no random draw."""
    state = CellState(state)
    if not state.charged:
        raise PreconditionError('Only S1/S3 cells move, got {}'.format(state.name))
    if CellState(target_state) == CellState.S2:
        return False
    return bool(rng.random() < mobility.hold_probability(state, spacing))


def _visible(origin, targets, occluders, clearance):
    """Mask over targets: no occluder lies within clearance of the segment
    origin -> target. Everything in lattice units."""
    if len(targets) == 0 or len(occluders) == 0:
        return np.ones(len(targets), dtype=bool)
    seg = targets - origin                                      # (m, 2)
    rel = occluders - origin                                    # (k, 2)
    length2 = np.maximum((seg ** 2).sum(axis=-1), 1e-12)
    t = np.clip(rel @ seg.T / length2, 0., 1.)                  # (k, m)
    closest = origin + t[..., None] * seg[None]                 # (k, m, 2)
    dist = np.linalg.norm(occluders[:, None] - closest, axis=-1)
    itself = np.all(np.abs(occluders[:, None] - targets[None]) < 1e-6, axis=-1)
    blocked = (dist <= clearance + TOLERANCE) & ~itself
    return ~blocked.any(axis=0)


@functools.lru_cache(maxsize=4)
def sight_lines(radius=INTERACTION_RADIUS, clearance=CLEARANCE):
    """Lattice offsets that block the view along each displacement within radius.

    Returns (slot, start, stop, blockers). slot[dr + radius, dq + radius] numbers
    the displacement (-1 outside the radius); its blockers, as (dq, dr) rows,
    are blockers[start[i]:stop[i]]: every lattice point other than both ends
    within clearance of the segment.
    """
    span = np.arange(-radius, radius + 1)
    vr, vq = [a.ravel() for a in np.meshgrid(span, span, indexing='ij')]
    hexd = (np.abs(vq) + np.abs(vr) + np.abs(vq + vr)) // 2
    keep = (hexd >= 1) & (hexd <= radius)
    vq, vr = vq[keep], vr[keep]
    reach = int(np.ceil((radius + clearance) * 2. / SQRT3)) + 1
    span = np.arange(-reach, reach + 1)
    ur, uq = [a.ravel() for a in np.meshgrid(span, span, indexing='ij')]
    hexd = (np.abs(uq) + np.abs(ur) + np.abs(uq + ur)) // 2
    keep = (hexd >= 1) & (hexd <= reach)
    uq, ur = uq[keep], ur[keep]

    seg = np.stack(axial_to_xy(vq, vr), axis=-1)                  # (V, 2)
    pts = np.stack(axial_to_xy(uq, ur), axis=-1)                  # (U, 2)
    t = np.clip(seg @ pts.T / (seg ** 2).sum(axis=-1)[:, None], 0., 1.)
    closest = t[..., None] * seg[:, None]                         # (V, U, 2)
    dist = np.linalg.norm(pts[None] - closest, axis=-1)
    blocked = (dist <= clearance + TOLERANCE)
    blocked &= ~((vq[:, None] == uq[None]) & (vr[:, None] == ur[None]))
    vi, ui = np.nonzero(blocked)

    stop = np.cumsum(np.bincount(vi, minlength=len(vq)))
    start = stop - np.bincount(vi, minlength=len(vq))
    slot = np.full((2 * radius + 1, 2 * radius + 1), -1, dtype=np.int64)
    slot[vr + radius, vq + radius] = np.arange(len(vq))
    return slot, start, stop, np.stack((uq[ui], ur[ui]), axis=-1)


class ChargeField(object):
    """The charged cells of one snapshot, in row-major order, for PPC queries"""

    def __init__(self, grid):
        self.grid = grid
        rows, cols = np.nonzero(grid.charged_mask())
        self.q, self.r = offset_to_axial(cols, rows)
        x, y = axial_to_xy(self.q, self.r)
        self.xy = np.stack((x, y), axis=-1).astype(np.float64).reshape(-1, 2)
        self.charge = CHARGE[grid.states[rows, cols]]
        self._index = {(int(q), int(r)): i for i, (q, r) in enumerate(zip(self.q, self.r))}

    def __len__(self):
        return len(self.charge)

    def coords(self):
        return [CellCoord(int(q), int(r)) for q, r in zip(self.q, self.r)]

    def _centroid(self, mask):
        if not mask.any():
            return None
        w = self.charge[mask].astype(np.float64)
        pos = (self.xy[mask] * w[:, None]).sum(axis=0) / w.sum() * self.grid.spacing
        return PPC((float(pos[0]), float(pos[1])), int(w.sum()))

    def _occupancy(self, pad):
        grid = self.grid
        occ = grid.to_axial(grid.charged_mask(), fill=False)
        return np.pad(occ, pad, constant_values=False), grid.axial_shift + pad

    def ppc(self, observer, radius=INTERACTION_RADIUS, clearance=CLEARANCE):
        """Charge-weighted centroid of the charges the observer can see"""
        return self.ppc_many([observer], radius, clearance)[0]

    def ppc_many(self, observers, radius=INTERACTION_RADIUS, clearance=CLEARANCE, batch=64):
        """PPC of each observer, None where it sees no charge.

        A charge within hex distance radius is visible unless another charged
        cell lies within clearance of the line of sight.
        """
        obs = []
        for c in observers:
            c = CellCoord(*c)
            if (c.q, c.r) not in self._index:
                raise PreconditionError('PPC observer {} holds {}'.format(
                    tuple(c), self.grid[c].name))
            obs.append(self._index[c.q, c.r])
        obs = np.array(obs, dtype=np.int64)
        slot, start, stop, blockers = sight_lines(radius, clearance)
        pad = int(np.abs(blockers).max(initial=0)) + 1
        occ, shift = self._occupancy(pad)

        w = np.zeros(len(obs))
        wx, wy = np.zeros(len(obs)), np.zeros(len(obs))
        for lo in range(0, len(obs), batch):
            oq, orr = self.q[obs[lo:lo + batch]], self.r[obs[lo:lo + batch]]
            dq = self.q[None] - oq[:, None]
            dr = self.r[None] - orr[:, None]
            hexd = (np.abs(dq) + np.abs(dr) + np.abs(dq + dr)) // 2
            oi, tj = np.nonzero((hexd >= 1) & (hexd <= radius))
            s = slot[dr[oi, tj] + radius, dq[oi, tj] + radius]
            count = stop[s] - start[s]
            pair = np.repeat(np.arange(len(oi)), count)
            k = np.arange(count.sum()) - np.repeat(np.cumsum(count) - count, count)
            b = blockers[np.repeat(start[s], count) + k]
            occupied = occ[orr[oi][pair] + b[:, 1] + pad, oq[oi][pair] + b[:, 0] + shift]
            visible = np.bincount(pair[occupied], minlength=len(oi)) == 0
            oi, tj = oi[visible], tj[visible]
            q = self.charge[tj].astype(np.float64)
            w[lo:lo + batch] = np.bincount(oi, q, minlength=len(oq))
            wx[lo:lo + batch] = np.bincount(oi, q * self.xy[tj, 0], minlength=len(oq))
            wy[lo:lo + batch] = np.bincount(oi, q * self.xy[tj, 1], minlength=len(oq))

        out = []
        for i in range(len(obs)):
            if w[i] == 0:
                out.append(None)
                continue
            pos = np.array([wx[i], wy[i]]) / w[i] * self.grid.spacing
            out.append(PPC((float(pos[0]), float(pos[1])), int(w[i])))
        return out

    def group_ppc(self, members, radius=INTERACTION_RADIUS, clearance=CLEARANCE):
        """PPC seen from a group's centroid; own members neither attract nor occlude"""
        member_set = {CellCoord(*c) for c in members}
        own = np.array([CellCoord(int(q), int(r)) in member_set
                        for q, r in zip(self.q, self.r)], dtype=bool)
        origin = np.mean([axial_to_xy(c.q, c.r) for c in member_set], axis=0)
        dist = np.linalg.norm(self.xy - origin, axis=-1)
        candidates = ~own & (dist <= radius)
        near = ~own & (dist <= radius + clearance + 1)
        visible = np.zeros(len(self), dtype=bool)
        visible[candidates] = _visible(origin, self.xy[candidates], self.xy[near], clearance)
        return self._centroid(visible)


def compute_ppc(grid, observer, radius=INTERACTION_RADIUS, clearance=CLEARANCE):
    return ChargeField(grid).ppc(observer, radius, clearance)


def group_ppc(grid, members, radius=INTERACTION_RADIUS, clearance=CLEARANCE):
    return ChargeField(grid).group_ppc(members, radius, clearance)


def best_step(grid, coord, goal, degree):
    """Free neighbor (S0/S2, within degree) strictly closest to goal (nm), or None"""
    pos = grid.position(coord)
    best, best_dist = None, np.linalg.norm(pos - goal) - 1e-12
    for n in neighbors(coord, degree, grid):
        if grid[n].charged:
            continue
        d = np.linalg.norm(grid.position(n) - goal)
        if d < best_dist:
            best, best_dist = n, d - 1e-12
    return best


def converge_intents(grid, circuit_map, rng, mobility=DEFAULT_MOBILITY, cells=None,
                     radius=INTERACTION_RADIUS, clearance=CLEARANCE, charge_field=None):
    """Rule 1 with Rule 2 holds: every charged cell (or the given subset) steps
    toward its PPC unless held. Held cells and cells without a PPC stay."""
    field = ChargeField(grid) if charge_field is None else charge_field
    if cells is None:
        cells = field.coords()
    cells = sorted((CellCoord(*c) for c in cells), key=row_major_key)
    intents = []
    for coord, ppc in zip(cells, field.ppc_many(cells, radius, clearance)):
        if ppc is None:
            continue
        degree = circuit_map.circuit_of(coord).neighborhood_degree
        target = best_step(grid, coord, np.array(ppc.position), degree)
        if target is None:
            continue
        state = grid[coord]
        if mobility_hold(state, grid.spacing, grid[target], rng, mobility):
            continue
        intents.append(MoveIntent(coord, target, state, grid[target]))
    return intents


CROWD_RADIUS = 2


def _repulsion_kernel(radius):
    # [dr + radius, dq + radius] -> 1/d for hex distance 1 <= d <= radius
    span = np.arange(-radius, radius + 1)
    dr, dq = np.meshgrid(span, span, indexing='ij')
    d = (np.abs(dq) + np.abs(dr) + np.abs(dq + dr)) // 2
    return np.where((d >= 1) & (d <= radius), 1. / np.maximum(d, 1), 0.)


def crowding(grid, radius=CROWD_RADIUS):
    """(height, width) repulsive potential sum(q / d) of the charges within hex
    distance radius of each cell, the cell's own charge excluded"""
    charge = grid.to_axial(grid.charge_map().astype(np.float64))
    return grid.from_axial(ndimage.correlate(charge, _repulsion_kernel(radius), mode='constant',
                                             cval=0.))


def disperse_intents(grid, cells, rng, mobility=DEFAULT_MOBILITY, radius=CROWD_RADIUS):
    """Broken chain parts drift down the local repulsion.

    Each cell steps to the free neighbor where the others push least, when
    that is strictly less than where it stands; ties are drawn at random and
    Rule 2 holds apply. The moves are repulsive and carry rule 3.
    """
    crowd = crowding(grid, radius)
    intents = []
    for coord in sorted((CellCoord(*c) for c in cells), key=row_major_key):
        state = grid[coord]
        here = crowd[grid.index(coord)]
        options = [n for n in neighbors(coord, 6, grid) if not grid[n].charged]
        # the mover sits next to each option and must not count against it
        levels = np.array([crowd[grid.index(n)] for n in options]) - state.charge
        if not options or levels.min() >= here - TOLERANCE:
            continue
        best = [n for n, v in zip(options, levels) if v <= levels.min() + TOLERANCE]
        target = best[int(rng.integers(len(best)))] if len(best) > 1 else best[0]
        if mobility_hold(state, grid.spacing, grid[target], rng, mobility):
            continue
        intents.append(MoveIntent(coord, target, state, grid[target], rule=3))
    return intents
