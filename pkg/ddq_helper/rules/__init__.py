from .intents import Transition, MoveIntent, GroupMove, as_transition
from .convergence import (PPC, Mobility, DEFAULT_MOBILITY, ChargeField, compute_ppc, group_ppc,
                          mobility_hold, converge_intents, crowding, disperse_intents)
from .groups import (Group, LabelMap, detect_groups, resolve_labels, build_groups, group_move,
                     collide_rule3, rigid_intents, connected_components, is_straight_chain)
from .decay import find_flowers, hex_decay_rule4
from .symmetry import asymmetry_score, symmetrize_rule6
