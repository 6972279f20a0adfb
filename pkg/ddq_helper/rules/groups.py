from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, sparse
from scipy.sparse import csgraph

from ddq_helper.lattice import (DIRECTION_XY, HEX_STRUCTURE, CellCoord, CellState, offset_to_axial,
                                row_major_key, step)
from ddq_helper.rules.convergence import (CLEARANCE, DEFAULT_MOBILITY, INTERACTION_RADIUS,
                                          ChargeField)
from ddq_helper.rules.intents import GroupMove, Transition


@dataclass
class Group:
    """Charged cells moving as one entity (Rule 5).

    contacts maps the label of every touching group to the number of
    adjacent member pairs; dissolved groups came from a multi-point merge and
    their members act individually.
    """
    label: int
    members: tuple
    states: tuple
    centroid: tuple  # (x, y) in nm, geometric
    contacts: dict = field(default_factory=dict)
    dissolved: bool = False

    def __len__(self):
        return len(self.members)

    @property
    def cohesive(self):
        return not self.dissolved and len(self.members) >= 2

    def cells(self):
        return dict(zip(self.members, self.states))


@dataclass
class LabelMap:
    labels: np.ndarray      # (height, width) int64, 0 on uncharged cells
    dissolved: frozenset
    next_label: int
    contacts: dict          # (a, b) with a < b -> adjacent pairs


# forward half of the hex neighborhood on the axial embedding, (dq, dr)
_HALF_NEIGHBORHOOD = ((1, 0), (0, 1), (-1, 1))


def _neighbor_pairs(arr, dq, dr):
    h, w = arr.shape
    r0, r1 = max(0, -dr), h - max(0, dr)
    c0, c1 = max(0, -dq), w - max(0, dq)
    return arr[r0:r1, c0:c1], arr[r0 + dr:r1 + dr, c0 + dq:c1 + dq]


def label_contacts(grid, labels):
    """Adjacent member pairs between every two distinct labels"""
    axial = grid.to_axial(labels, fill=0)
    pairs = []
    for dq, dr in _HALF_NEIGHBORHOOD:
        a, b = _neighbor_pairs(axial, dq, dr)
        m = (a > 0) & (b > 0) & (a != b)
        pairs.append(np.stack((np.minimum(a[m], b[m]), np.maximum(a[m], b[m])), axis=-1))
    pairs = np.concatenate(pairs)
    if len(pairs) == 0:
        return {}
    keys, counts = np.unique(pairs, axis=0, return_counts=True)
    return {(int(a), int(b)): int(n) for (a, b), n in zip(keys, counts)}


def connected_components(grid, mask):
    comp, n = ndimage.label(grid.to_axial(mask, fill=False), structure=HEX_STRUCTURE)
    comp = grid.from_axial(comp)
    pieces = [comp == k for k in range(1, n + 1)]
    # flat index order is row-major order
    pieces.sort(key=lambda m: (-m.sum(), np.flatnonzero(m)[0]))
    return pieces


def split_labels(grid, labels):
    """Labels whose cells no longer form one connected piece"""
    axial = grid.to_axial(labels, fill=0)
    occupied = axial > 0
    n = int(occupied.sum())
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    node = np.full(axial.shape, -1, dtype=np.int64)
    node[occupied] = np.arange(n)
    src, dst = [], []
    for dq, dr in _HALF_NEIGHBORHOOD:
        a, b = _neighbor_pairs(axial, dq, dr)
        na, nb = _neighbor_pairs(node, dq, dr)
        same = (a > 0) & (a == b)
        src.append(na[same])
        dst.append(nb[same])
    src, dst = np.concatenate(src), np.concatenate(dst)
    graph = sparse.coo_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    _, comp = csgraph.connected_components(graph, directed=False)
    pieces = np.unique(np.stack((axial[occupied], comp), axis=-1), axis=0)
    labs, count = np.unique(pieces[:, 0], return_counts=True)
    return labs[count > 1]


def resolve_labels(grid, labels, dissolved=frozenset(), next_label=1, fragments=frozenset()):
    """Bring group labels in line with the current charges.

    Unlabelled charged cells get one fresh label per connected run, a label
    split into several pieces keeps it on the largest piece only, and labels
    touching with two or more adjacent pairs merge into a new dissolved label.
    Fragments of a broken chain never merge.
    """
    charged = grid.charged_mask()
    labels = np.where(charged, np.asarray(labels, dtype=np.int64), 0)
    next_label = max(int(next_label), int(labels.max(initial=0)) + 1)
    dissolved = set(dissolved)

    for piece in connected_components(grid, charged & (labels == 0)):
        labels[piece] = next_label
        next_label += 1

    for lab in split_labels(grid, labels):
        pieces = connected_components(grid, labels == lab)
        for piece in pieces[1:]:
            labels[piece] = next_label
            if lab in dissolved:
                dissolved.add(next_label)
            next_label += 1

    while True:
        contacts = label_contacts(grid, labels)
        merging = [pair for pair, n in contacts.items()
                   if n >= 2 and not fragments.intersection(pair)]
        if not merging:
            break
        # union-find over labels joined by multi-point contacts
        parent = {}

        def find(x):
            while parent.get(x, x) != x:
                x = parent[x]
            return x

        for a, b in merging:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        roots = {}
        for lab in sorted(parent):
            roots.setdefault(find(lab), []).append(lab)
        for root in sorted(roots):
            joined = [root] + roots[root]
            labels[np.isin(labels, joined)] = next_label
            dissolved.add(next_label)
            next_label += 1

    present = set(np.unique(labels[labels > 0]).tolist())
    return LabelMap(labels, frozenset(dissolved & present), next_label, contacts)


def build_groups(grid, label_map):
    labels = label_map.labels
    rows, cols = np.nonzero(labels > 0)
    order = np.argsort(labels[rows, cols], kind='stable')
    rows, cols = rows[order], cols[order]
    labs, start = np.unique(labels[rows, cols], return_index=True)
    stop = np.append(start[1:], len(rows))
    q, r = offset_to_axial(cols, rows)
    states = grid.states[rows, cols]
    xy = grid.xy()

    contacts = {}
    for (a, b), n in label_map.contacts.items():
        contacts.setdefault(a, {})[b] = n
        contacts.setdefault(b, {})[a] = n

    groups = []
    for lab, lo, hi in zip(labs.tolist(), start, stop):
        members = tuple(CellCoord(int(q[i]), int(r[i])) for i in range(lo, hi))
        centroid = xy[rows[lo:hi], cols[lo:hi]].mean(axis=0)
        groups.append(Group(lab, members, tuple(CellState(int(s)) for s in states[lo:hi]),
                            (float(centroid[0]), float(centroid[1])),
                            dict(sorted(contacts.get(lab, {}).items())),
                            lab in label_map.dissolved))
    groups.sort(key=lambda g: row_major_key(g.members[0]))
    return groups


def detect_groups(grid, labels=None, dissolved=frozenset()):
    """Groups of charged cells. Without labels every connected component is
    one group; with labels the persistent group identities are resolved first."""
    if labels is None:
        labels = np.zeros(grid.shape, dtype=np.int64)
        pieces = connected_components(grid, grid.charged_mask())
        for k, piece in enumerate(pieces, start=1):
            labels[piece] = k
        return build_groups(grid, LabelMap(labels, frozenset(), len(pieces) + 1, {}))
    return build_groups(grid, resolve_labels(grid, labels, dissolved))


def group_move(grid, group, direction, rule):
    """Shift all members one step; None when a target is off-grid or charged by someone else"""
    members = set(group.members)
    targets = {}
    for coord, state in zip(group.members, group.states):
        t = step(coord, direction)
        if not grid.in_bounds(t) or (t not in members and grid[t].charged):
            return None
        targets[t] = state
    touched = sorted(members | set(targets), key=row_major_key)
    cells = tuple((c, grid[c], targets.get(c, CellState.S2)) for c in touched)
    label_moves = tuple((c, step(c, direction)) for c in group.members)
    return GroupMove(group.label, direction, rule,
                     Transition(rule, group.members[0], cells, label_moves))


def best_direction(vector):
    """Direction index best aligned with vector, or None for a zero vector"""
    vector = np.asarray(vector, dtype=np.float64)
    if np.linalg.norm(vector) < 1e-12:
        return None
    return int(np.argmax(DIRECTION_XY @ vector))


def collide_rule3(grid, groups):
    """Rule 3: groups touching another at a single point are pushed one step
    away, along centroid(other) -> centroid(self)."""
    by_label = {g.label: g for g in groups}
    moves = []
    for g in groups:
        partners = [other for other, n in sorted(g.contacts.items())
                    if n == 1 and other in by_label]
        if not partners:
            continue
        away = sum(np.subtract(g.centroid, by_label[o].centroid) for o in partners)
        direction = best_direction(away)
        if direction is None:
            continue
        move = group_move(grid, g, direction, rule=3)
        if move is not None:
            moves.append(move)
    return moves


def approach_direction(group, goal, spacing):
    """Direction whose one-step shift brings the centroid strictly closest to goal (nm)"""
    centroid = np.asarray(group.centroid)
    goal = np.asarray(goal)
    best, best_dist = None, np.linalg.norm(centroid - goal) - 1e-12
    for d in range(6):
        dist = np.linalg.norm(centroid + DIRECTION_XY[d] * spacing - goal)
        if dist < best_dist:
            best, best_dist = d, dist - 1e-12
    return best


def rigid_intents(grid, groups, rng, mobility=DEFAULT_MOBILITY, radius=INTERACTION_RADIUS,
                  clearance=CLEARANCE, charge_field=None):
    """Rule 5: cohesive groups move rigidly toward the PPC they see.

    Returns (moves, loose, unaimed); loose groups see no outside charge and
    let their members converge individually, unaimed ones see a PPC no step
    brings them closer to. A blocked or held group stays put.
    """
    if charge_field is None:
        charge_field = ChargeField(grid)
    moves, loose, unaimed = [], [], []
    for g in groups:
        if not g.cohesive:
            continue
        ppc = charge_field.group_ppc(g.members, radius, clearance)
        if ppc is None:
            loose.append(g)
            continue
        direction = approach_direction(g, ppc.position, grid.spacing)
        if direction is None:
            unaimed.append(g)
            continue
        move = group_move(grid, g, direction, rule=5)
        if move is None:
            continue
        own = set(g.members)
        entering = [b for c, b, _ in move.transition.cells if c not in own]
        if any(b != CellState.S2 for b in entering):
            heaviest = CellState.S3 if CellState.S3 in g.states else CellState.S1
            if rng.random() < mobility.hold_probability(heaviest, grid.spacing):
                continue
        moves.append(move)
    return moves, loose, unaimed


def is_straight_chain(group):
    """Three or more members on one lattice line with no gap"""
    if len(group) < 3 or not group.cohesive:
        return False
    cells = set(group.members)
    for d in (0, 1, 2):
        ends = [c for c in cells if step(c, (d + 3) % 6) not in cells]
        if len(ends) == 1 and all(step(ends[0], d, k) in cells for k in range(len(cells))):
            return True
    return False
