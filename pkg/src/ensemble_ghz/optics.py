"""Linear-optical elements, the creation-operator substitution engine, and detection.

A :class:`ModeUnitary` maps input creation operators to output creation
operators, ``a_i^dag -> sum_j U[j, i] b_j^dag``. Column ``i`` of the matrix is
therefore the image of input mode ``i``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .fock import FockBasisState, Ket, ModeId, ZeroNormError

UNITARY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ModeUnitary:
    """Unitary on creation operators of ``modes``.

    ``out_modes`` defaults to ``modes``. When it differs, the element relabels
    its inputs onto fresh output modes (e.g. onto detector modes); output-only
    modes must then be empty in any state it is applied to.
    """

    modes: tuple[ModeId, ...]
    matrix: np.ndarray
    out_modes: tuple[ModeId, ...] | None = None

    def __post_init__(self):
        modes = tuple(self.modes)
        out = modes if self.out_modes is None else tuple(self.out_modes)
        mat = np.asarray(self.matrix, dtype=complex)
        k = len(modes)
        if len(set(modes)) != k or len(set(out)) != len(out):
            raise ValueError("duplicate modes in ModeUnitary")
        if mat.shape != (len(out), k) or len(out) != k:
            raise ValueError(f"matrix shape {mat.shape} does not match {k} modes")
        if k and np.max(np.abs(mat.conj().T @ mat - np.eye(k))) > UNITARY_TOL:
            raise ValueError("matrix is not unitary")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "out_modes", out)
        object.__setattr__(self, "matrix", mat)

    @property
    def is_relabeling(self) -> bool:
        return self.out_modes != self.modes

    def unitarity_error(self) -> float:
        k = len(self.modes)
        return float(np.max(np.abs(self.matrix.conj().T @ self.matrix - np.eye(k)))) if k else 0.0

    def entry(self, out_mode: ModeId, in_mode: ModeId) -> complex:
        return complex(self.matrix[self.out_modes.index(out_mode), self.modes.index(in_mode)])

    def submatrix(self, out_modes: Sequence[ModeId], in_modes: Sequence[ModeId]) -> np.ndarray:
        rows = [self.out_modes.index(m) for m in out_modes]
        cols = [self.modes.index(m) for m in in_modes]
        return self.matrix[np.ix_(rows, cols)]

    def embed(self, space: Sequence[ModeId]) -> np.ndarray:
        """Square matrix of this element on ``space`` (identity elsewhere).

        For relabeling elements the output-only modes are sent back onto the
        input-only modes in canonical order, which completes the map to a
        unitary on the whole space.
        """
        space = list(space)
        pos = {m: i for i, m in enumerate(space)}
        full = np.eye(len(space), dtype=complex)
        for c, m in enumerate(self.modes):
            full[:, pos[m]] = 0
            for rr, o in enumerate(self.out_modes):
                full[pos[o], pos[m]] = self.matrix[rr, c]
        out_only = sorted(set(self.out_modes) - set(self.modes))
        in_only = sorted(set(self.modes) - set(self.out_modes))
        for o, m in zip(out_only, in_only):
            full[:, pos[o]] = 0
            full[pos[m], pos[o]] = 1
        return full


def identity(modes: Iterable[ModeId]) -> ModeUnitary:
    modes = tuple(modes)
    return ModeUnitary(modes, np.eye(len(modes)))


def hwp45(h: ModeId, v: ModeId) -> ModeUnitary:
    """Half-wave plate rotating polarization by 45 degrees: h -> (h+v)/sqrt2, v -> (h-v)/sqrt2."""
    if h == v:
        raise ValueError("hwp45 needs two distinct modes")
    return ModeUnitary((h, v), np.array([[1, 1], [1, -1]]) / math.sqrt(2))


def pbs(h1: ModeId, v1: ModeId, h2: ModeId, v2: ModeId) -> ModeUnitary:
    """Polarizing beam splitter: horizontal transmitted, vertical swaps ports.

    Pure permutation, no reflection phase.
    """
    modes = (h1, v1, h2, v2)
    if len(set(modes)) != 4:
        raise ValueError("pbs needs four distinct modes")
    perm = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]])
    return ModeUnitary(modes, perm)


def phase_plate(mode: ModeId, phi: float) -> ModeUnitary:
    return ModeUnitary((mode,), np.array([[np.exp(1j * phi)]]))


def beam_splitter(a: ModeId, b: ModeId, transmissivity: float) -> ModeUnitary:
    """Real beam splitter ``a -> sqrt(T) a + sqrt(1-T) b``."""
    if not 0.0 <= transmissivity <= 1.0:
        raise ValueError("transmissivity must lie in [0, 1]")
    t, rr = math.sqrt(transmissivity), math.sqrt(1.0 - transmissivity)
    return ModeUnitary((a, b), np.array([[t, -rr], [rr, t]]))


def relabeling(mapping: dict[ModeId, ModeId]) -> ModeUnitary:
    ins = tuple(mapping)
    return ModeUnitary(ins, np.eye(len(ins)), out_modes=tuple(mapping[m] for m in ins))


def compose(first: ModeUnitary, *rest: ModeUnitary) -> ModeUnitary:
    """Element equal to applying ``first`` and then each of ``rest`` in order."""
    elements = (first, *rest)
    space = sorted({m for u in elements for m in (*u.modes, *u.out_modes)})
    total = np.eye(len(space), dtype=complex)
    for u in elements:
        total = u.embed(space) @ total
    return ModeUnitary(tuple(space), total)


_SQRT_FACT = [math.sqrt(math.factorial(k)) for k in range(64)]


def _expand(cols: list[list[tuple[int, complex]]], occ: tuple[int, ...], k_out: int) -> dict[tuple[int, ...], complex]:
    """Expand prod_i (sum_j U_ji b_j^dag)^{n_i} / sqrt(n_i!) |0> into output Fock amplitudes."""
    poly: dict[tuple[int, ...], complex] = {(0,) * k_out: 1.0 + 0j}
    for i, n in enumerate(occ):
        for _ in range(n):
            nxt: dict[tuple[int, ...], complex] = {}
            for key, c in poly.items():
                for j, u in cols[i]:
                    t = key[:j] + (key[j] + 1,) + key[j + 1:]
                    nxt[t] = nxt.get(t, 0j) + c * u
            poly = nxt
    norm_in = 1.0
    for n in occ:
        norm_in *= _SQRT_FACT[n]
    out = {}
    for key, c in poly.items():
        f = c / norm_in
        for m in key:
            if m > 1:
                f *= _SQRT_FACT[m]
        out[key] = f
    return out


def apply_mode_unitary(ket: Ket, u: ModeUnitary, prune_tol: float | None = None) -> Ket:
    """Transform ``ket`` by substituting creation operators according to ``u``.

    Photon number is conserved term by term. Modes outside ``u`` pass through.
    """
    tol = ket.prune_tol if prune_tol is None else prune_tol
    in_modes = u.modes
    out_modes = u.out_modes
    in_pos = {m: i for i, m in enumerate(in_modes)}
    out_only = set(out_modes) - set(in_modes)
    cols = [
        [(j, complex(u.matrix[j, i])) for j in range(len(out_modes)) if u.matrix[j, i] != 0]
        for i in range(len(in_modes))
    ]
    cache: dict[tuple[int, ...], list[tuple[FockBasisState, complex]]] = {}
    acc: dict[FockBasisState, complex] = {}
    for state, amp in ket.terms.items():
        occ = [0] * len(in_modes)
        rest = []
        for m, c in state:
            idx = in_pos.get(m)
            if idx is None:
                if m in out_only:
                    raise ValueError(f"output mode {m.label} is already occupied")
                rest.append((m, c))
            else:
                occ[idx] = c
        key = tuple(occ)
        images = cache.get(key)
        if images is None:
            images = [
                (FockBasisState._raw(sorted((out_modes[j], c) for j, c in enumerate(k) if c)), coef)
                for k, coef in _expand(cols, key, len(out_modes)).items()
            ]
            cache[key] = images
        for image, coef in images:
            if not rest:
                target = image
            elif not image or rest[-1] < image[0]:
                target = FockBasisState._raw(rest + list(image))
            else:
                target = FockBasisState._raw(sorted(rest + list(image)))
            acc[target] = acc.get(target, 0j) + amp * coef
    return Ket._wrap(acc, tol)


@dataclass(frozen=True)
class DetectorModel:
    """Photodetector response shared by every detector of a measurement."""

    resolving: bool = False
    efficiency: float = 1.0
    dark_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if not 0.0 <= self.dark_rate < 1.0:
            raise ValueError(f"dark_rate must lie in [0, 1), got {self.dark_rate}")

    @property
    def ideal(self) -> bool:
        return self.efficiency == 1.0 and self.dark_rate == 0.0

    def register(self, counts: Sequence[int]) -> tuple[int, ...]:
        """What the detector reports for the given absorbed photon numbers."""
        if self.resolving:
            return tuple(counts)
        return tuple(min(c, 1) for c in counts)


@dataclass(frozen=True, order=True)
class ClickPattern:
    """Reported detector outcome; only detectors with nonzero count are stored."""

    clicks: tuple[tuple[ModeId, int], ...] = ()

    @classmethod
    def from_counts(cls, modes: Sequence[ModeId], counts: Sequence[int]) -> "ClickPattern":
        return cls(tuple(sorted((m, int(c)) for m, c in zip(modes, counts) if c)))

    @classmethod
    def of(cls, *modes: ModeId) -> "ClickPattern":
        """Threshold pattern in which exactly ``modes`` fired."""
        return cls.from_counts(modes, [1] * len(modes))

    def count(self, mode: ModeId) -> int:
        return dict(self.clicks).get(mode, 0)

    @property
    def fired(self) -> tuple[ModeId, ...]:
        return tuple(m for m, _ in self.clicks)

    def coarsen(self) -> "ClickPattern":
        return ClickPattern(tuple((m, 1) for m, _ in self.clicks))

    @property
    def label(self) -> str:
        if not self.clicks:
            return "-"
        return " ".join(m.label if c == 1 else f"{m.label}x{c}" for m, c in self.clicks)

    def __repr__(self) -> str:
        return f"ClickPattern({self.label})"


@dataclass(frozen=True)
class OutcomeBranch:
    """One physically distinct measurement record.

    ``conditioned`` is the unnormalized post-measurement state of the
    undetected modes, scaled so that its squared norm equals ``probability``.
    ``detected`` holds the photon numbers actually absorbed by each detector
    (before threshold coarsening and without dark counts). Several branches may
    report the same ``pattern``; together they form a mixture.
    """

    probability: float
    pattern: ClickPattern
    conditioned: Ket
    detected: tuple[int, ...] = ()
    lost: tuple[int, ...] = ()
    dark: tuple[int, ...] = ()
    pattern_class: object = field(default=None)


def _binomial_thinning(d: int, eta: float) -> list[tuple[int, int, float]]:
    """(seen, lost, amplitude factor) for d photons through efficiency eta."""
    if eta == 1.0 or d == 0:
        return [(d, 0, 1.0)]
    out = []
    for k in range(d + 1):
        w = math.comb(d, k) * eta ** (d - k) * (1 - eta) ** k
        if w > 0:
            out.append((d - k, k, math.sqrt(w)))
    return out


def measure_modes(ket: Ket, detector_modes: Sequence[ModeId], model: DetectorModel = DetectorModel()) -> list[OutcomeBranch]:
    """Measure ``detector_modes`` and return the complete, normalized branch list.

    Inefficiency is treated exactly as a beam splitter onto an untracked loss
    mode, so each branch is labelled by (seen, lost) counts per detector; dark
    counts are independent per detector and only add clicks.
    """
    n2 = ket.norm_sq()
    if n2 <= 0.0:
        raise ZeroNormError("cannot measure the zero ket")
    scale = 1.0 / math.sqrt(n2)
    dmodes = tuple(detector_modes)
    dset = set(dmodes)
    dpos = {m: i for i, m in enumerate(dmodes)}
    eta = model.efficiency
    no_loss = (0,) * len(dmodes)

    records: dict[tuple[tuple[int, ...], tuple[int, ...]], dict[FockBasisState, complex]] = {}
    for state, amp in ket.terms.items():
        counts = [0] * len(dmodes)
        rest = []
        for m, c in state:
            if m in dset:
                counts[dpos[m]] = c
            else:
                rest.append((m, c))
        rest_state = FockBasisState._raw(rest)
        amp = amp * scale
        if eta == 1.0:
            bucket = records.setdefault((tuple(counts), no_loss), {})
            bucket[rest_state] = bucket.get(rest_state, 0j) + amp
            continue
        for combo in itertools.product(*(_binomial_thinning(c, eta) for c in counts)):
            seen = tuple(s for s, _, _ in combo)
            lost = tuple(k for _, k, _ in combo)
            factor = math.prod(f for _, _, f in combo)
            bucket = records.setdefault((seen, lost), {})
            bucket[rest_state] = bucket.get(rest_state, 0j) + amp * factor

    branches: list[OutcomeBranch] = []
    for (seen, lost), terms in records.items():
        cond = Ket._wrap(terms, ket.prune_tol)
        prob = cond.norm_sq()
        if prob == 0.0:
            continue
        reported = model.register(seen)
        if model.dark_rate == 0.0:
            branches.append(OutcomeBranch(prob, ClickPattern.from_counts(dmodes, reported), cond, seen, lost,
                                          (0,) * len(dmodes)))
            continue
        # under threshold detection a dark count on a detector that already fired changes nothing
        free = [i for i, c in enumerate(reported) if model.resolving or c == 0]
        for dark_set in itertools.product((0, 1), repeat=len(free)):
            w = math.prod(model.dark_rate if x else 1 - model.dark_rate for x in dark_set)
            if w == 0.0:
                continue
            dark = [0] * len(dmodes)
            for i, x in zip(free, dark_set):
                dark[i] = x
            final = tuple(c + x for c, x in zip(reported, dark))
            branches.append(OutcomeBranch(prob * w, ClickPattern.from_counts(dmodes, final),
                                          cond * math.sqrt(w), seen, lost, tuple(dark)))
    branches.sort(key=lambda b: (b.pattern.clicks, b.detected, b.lost, b.dark))
    return branches


def pattern_distribution(branches: Iterable[OutcomeBranch]) -> dict[ClickPattern, float]:
    """Reported-pattern probabilities, summing branches that share a pattern."""
    dist: dict[ClickPattern, float] = {}
    for b in branches:
        dist[b.pattern] = dist.get(b.pattern, 0.0) + b.probability
    return dict(sorted(dist.items(), key=lambda kv: kv[0].clicks))


def group_by_pattern(branches: Iterable[OutcomeBranch]) -> dict[ClickPattern, list[OutcomeBranch]]:
    groups: dict[ClickPattern, list[OutcomeBranch]] = {}
    for b in branches:
        groups.setdefault(b.pattern, []).append(b)
    return dict(sorted(groups.items(), key=lambda kv: kv[0].clicks))

