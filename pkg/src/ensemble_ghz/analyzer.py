"""The n-photon GHZ analyzer, click-pattern classification, and readout helpers.

Station ``i`` owns detectors ``Dh_i`` and ``Dv_i``. The analyzer sends
``h_i -> (Dh_i + Dv_i)/sqrt2`` and ``v_i -> (Dh_{i-1} - Dv_{i-1})/sqrt2`` with
station 0 identified with station n.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .fock import FockBasisState, Kind, Ket, ModeId, basis_ket, dh, dv, h, l, r, relabel, v
from .optics import (
    ClickPattern,
    DetectorModel,
    ModeUnitary,
    OutcomeBranch,
    apply_mode_unitary,
    compose,
    hwp45,
    measure_modes,
    pattern_distribution,
    pbs,
    relabeling,
)


class PatternClass(enum.Enum):
    M_PLUS = "MPlus"
    M_MINUS = "MMinus"
    OTHER = "Other"


class BellClass(enum.Enum):
    PHI_PLUS = "PhiPlus"
    PHI_MINUS = "PhiMinus"
    PSI = "PsiClass"
    MIXED = "Mixed"


def detector_modes(n: int) -> list[ModeId]:
    return [m for i in range(1, n + 1) for m in (dh(i), dv(i))]


def photon_modes(channels: Iterable[int]) -> list[ModeId]:
    return [m for c in channels for m in (h(c), v(c))]


def ghz_analyzer_unitary(n: int, channels: Sequence[int] | None = None) -> ModeUnitary:
    """Analyzer from the photon modes of ``channels`` (station order) onto detectors.

    ``channels`` defaults to ``1..n``; pass other channel numbers to route
    readout photons through the same stations.
    """
    if n < 2:
        raise ValueError(f"the analyzer needs n >= 2, got {n}")
    channels = list(range(1, n + 1)) if channels is None else list(channels)
    if len(channels) != n:
        raise ValueError(f"expected {n} input channels, got {len(channels)}")
    s = 1 / math.sqrt(2)
    mat = np.zeros((2 * n, 2 * n))
    for i in range(n):
        prev = (i - 1) % n
        mat[2 * i, 2 * i] = s
        mat[2 * i + 1, 2 * i] = s
        mat[2 * prev, 2 * i + 1] = s
        mat[2 * prev + 1, 2 * i + 1] = -s
    return ModeUnitary(tuple(photon_modes(channels)), mat, out_modes=tuple(detector_modes(n)))


def analyzer_from_elements(n: int) -> ModeUnitary:
    """Build the analyzer from a PBS chain, a half-wave-plate layer and detection ports."""
    if n < 2:
        raise ValueError(f"the analyzer needs n >= 2, got {n}")
    # adjacent PBS swaps compose into the cyclic shift v_i -> v_{i-1}
    ring = [pbs(h(i), v(i), h(i + 1), v(i + 1)) for i in range(1, n)]
    plates = [hwp45(h(i), v(i)) for i in range(1, n + 1)]
    ports = relabeling({m: d for m, d in zip(photon_modes(range(1, n + 1)), detector_modes(n))})
    return compose(*ring, *plates, ports)


def station_counts(pattern: ClickPattern, n: int) -> list[tuple[int, int]]:
    counts = dict(pattern.clicks)
    return [(counts.get(dh(i), 0), counts.get(dv(i), 0)) for i in range(1, n + 1)]


def classify_pattern(pattern: ClickPattern, n: int) -> PatternClass:
    """Heralding rule: exactly one single click per station, sign from v-click parity."""
    if len(pattern.clicks) != n:
        return PatternClass.OTHER
    stations = set()
    v_clicks = 0
    for m, c in pattern.clicks:
        if c != 1 or m.kind not in (Kind.DETECTOR_H, Kind.DETECTOR_V) or m.index > n:
            return PatternClass.OTHER
        stations.add(m.index)
        v_clicks += m.kind is Kind.DETECTOR_V
    if len(stations) != n:
        return PatternClass.OTHER
    return PatternClass.M_PLUS if v_clicks % 2 == 0 else PatternClass.M_MINUS


def enumerate_outcomes(
    ket: Ket,
    n: int,
    model: DetectorModel = DetectorModel(),
    channels: Sequence[int] | None = None,
) -> list[OutcomeBranch]:
    """Send the photons of ``channels`` through the analyzer and measure every detector."""
    u = ghz_analyzer_unitary(n, channels)
    out = apply_mode_unitary(ket, u)
    branches = measure_modes(out, detector_modes(n), model)
    return [replace(b, pattern_class=classify_pattern(b.pattern, n)) for b in branches]


def class_probabilities(branches: Iterable[OutcomeBranch]) -> dict[PatternClass, float]:
    probs = {c: 0.0 for c in PatternClass}
    for b in branches:
        probs[b.pattern_class] += b.probability
    return probs


def ghz_ket(n: int, sign: int = +1, kind: str = "photon", channels: Sequence[int] | None = None) -> Ket:
    """Normalized (prod a^dag + sign * prod b^dag)/sqrt2 |0>.

    ``kind`` is ``"photon"`` (h/v modes) or ``"ensemble"`` (r/l modes).
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    channels = list(range(1, n + 1)) if channels is None else list(channels)
    first, second = (h, v) if kind == "photon" else (r, l) if kind == "ensemble" else (None, None)
    if first is None:
        raise ValueError(f"unknown kind {kind!r}")
    a = basis_ket({first(c): 1 for c in channels})
    b = basis_ket({second(c): 1 for c in channels})
    return (a + b * sign) * (1 / math.sqrt(2))


def one_per_party(channels: Iterable[int], kind: str = "ensemble") -> Callable[[FockBasisState], bool]:
    """Predicate: every listed channel holds exactly one excitation of the given kind."""
    kinds = {"ensemble": (Kind.ENSEMBLE_R, Kind.ENSEMBLE_L), "photon": (Kind.PHOTON_H, Kind.PHOTON_V)}[kind]
    wanted = frozenset(channels)

    def predicate(state: FockBasisState) -> bool:
        per = dict.fromkeys(wanted, 0)
        for m, c in state:
            if m.kind in kinds and m.index in per:
                per[m.index] += c
        return all(x == 1 for x in per.values())

    return predicate


def bell_states() -> dict[str, Ket]:
    """The four two-photon Bell states on channels 1 and 2."""
    s = 1 / math.sqrt(2)
    hh = basis_ket({h(1): 1, h(2): 1})
    vv = basis_ket({v(1): 1, v(2): 1})
    hv = basis_ket({h(1): 1, v(2): 1})
    vh = basis_ket({v(1): 1, h(2): 1})
    return {
        "PhiPlus": (hh + vv) * s,
        "PhiMinus": (hh - vv) * s,
        "PsiPlus": (hv + vh) * s,
        "PsiMinus": (hv - vh) * s,
    }


def bell_classes(branches: Sequence[OutcomeBranch]) -> BellClass:
    """Class of a two-photon input from the branches its analysis produced."""
    if not branches:
        raise ValueError("empty branch list")
    n_detectors = max(len(b.detected) for b in branches)
    if n_detectors != 4:
        raise ValueError("Bell classification needs the n=2 analyzer")
    classes = set()
    for b in branches:
        arrived = [d + k for d, k in zip(b.detected, b.lost)]
        per_station = (arrived[0] + arrived[1], arrived[2] + arrived[3])
        if b.pattern_class is PatternClass.M_PLUS:
            classes.add(BellClass.PHI_PLUS)
        elif b.pattern_class is PatternClass.M_MINUS:
            classes.add(BellClass.PHI_MINUS)
        elif 0 in per_station and sum(per_station) > 0:
            classes.add(BellClass.PSI)
        else:
            classes.add(BellClass.MIXED)
    return classes.pop() if len(classes) == 1 else BellClass.MIXED


@dataclass(frozen=True)
class BellRow:
    state: str
    bell_class: BellClass
    distribution: dict[ClickPattern, float]


def bell_report(model: DetectorModel = DetectorModel()) -> list[BellRow]:
    """Feed each Bell state straight into the n=2 analyzer and classify it."""
    rows = []
    for name, ket in bell_states().items():
        branches = enumerate_outcomes(ket, 2, model)
        rows.append(BellRow(name, bell_classes(branches), pattern_distribution(branches)))
    return rows


def transfer_ensemble_to_photons(ket: Ket, channels: Sequence[int], offset: int | None = None) -> Ket:
    """Map r_c -> h_{c+offset}, l_c -> v_{c+offset} for each listed channel.

    ``offset`` defaults to ``max(channels)`` so the readout photons land on
    fresh channels.
    """
    channels = list(channels)
    if not channels:
        return ket
    offset = max(channels) if offset is None else offset
    mapping = {}
    for c in channels:
        mapping[r(c)] = h(c + offset)
        mapping[l(c)] = v(c + offset)
    busy = ket.modes & set(mapping.values())
    if busy:
        raise ValueError("readout modes already occupied: " + ", ".join(m.label for m in sorted(busy)))
    return relabel(ket, mapping)


def project_N_basis(ket: Ket, n: int, model: DetectorModel = DetectorModel()) -> list[OutcomeBranch]:
    """Measure ensembles 1..n in the |N>^+- basis via photon readout and the analyzer.

    Conditioned states live on the remaining Stokes-photon modes.
    """
    channels = list(range(1, n + 1))
    readout = transfer_ensemble_to_photons(ket, channels, offset=n)
    return enumerate_outcomes(readout, n, model, channels=[c + n for c in channels])
