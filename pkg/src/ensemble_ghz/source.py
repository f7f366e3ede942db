"""Ensemble/Stokes-photon source states.

Each channel holds the unnormalized state ``sum_j (sqrt(p) H)^j / j! |0>`` with
``H = (r^dag h^dag + l^dag v^dag) / sqrt(2)``, truncated at ``j_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .fock import Ket, apply_creation, tensor, vacuum, h, l, r, v


@dataclass(frozen=True)
class SourceParams:
    p: float
    j_max: int = 2

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"emission probability p must lie in (0, 1), got {self.p}")
        if int(self.j_max) != self.j_max or self.j_max < 0:
            raise ValueError(f"j_max must be a non-negative integer, got {self.j_max}")


def apply_pair_creation(ket: Ket, channel: int) -> Ket:
    """Apply H for ``channel`` once."""
    rh = apply_creation(apply_creation(ket, h(channel)), r(channel))
    lv = apply_creation(apply_creation(ket, v(channel)), l(channel))
    return (rh + lv) * (1 / math.sqrt(2))


def pair_state(params: SourceParams, channel: int = 1) -> Ket:
    if channel < 1:
        raise ValueError(f"channel must be >= 1, got {channel}")
    term = vacuum()
    total = term
    for j in range(1, params.j_max + 1):
        term = apply_pair_creation(term, channel) * (math.sqrt(params.p) / j)
        total = total + term
    return total


def system_state(n: int, params: SourceParams) -> Ket:
    """Product of ``n`` pair states on channels 1..n."""
    if n < 2:
        raise ValueError(f"need at least two parties, got n={n}")
    state = pair_state(params, 1)
    for i in range(2, n + 1):
        state = tensor(state, pair_state(params, i))
    return state
