"""Sparse multi-mode Fock-space algebra.

States are stored as maps from canonical occupation-number basis states to
complex amplitudes. Only the handful of occupied terms is ever stored, so
the dense dimension of the mode space never matters.
"""

from __future__ import annotations

import enum
import json
import math
import re
from types import MappingProxyType
from typing import Callable, Iterable, Iterator, Mapping, NamedTuple

DEFAULT_PRUNE_TOL = 1e-14


class ZeroNormError(ValueError):
    """Raised when an operation needs a state with nonzero norm."""


class Kind(enum.IntEnum):
    """Mode families, in canonical sort order."""

    ENSEMBLE_R = 0
    ENSEMBLE_L = 1
    PHOTON_H = 2
    PHOTON_V = 3
    DETECTOR_H = 4
    DETECTOR_V = 5
    LOSS = 6


_PREFIX = {
    Kind.ENSEMBLE_R: "r",
    Kind.ENSEMBLE_L: "l",
    Kind.PHOTON_H: "h",
    Kind.PHOTON_V: "v",
    Kind.DETECTOR_H: "Dh",
    Kind.DETECTOR_V: "Dv",
    Kind.LOSS: "loss",
}
_KIND_OF_PREFIX = {v: k for k, v in _PREFIX.items()}
_LABEL_RE = re.compile(r"^(r|l|h|v|Dh|Dv|loss)(\d+)$")


class ModeId(NamedTuple):
    """A bosonic mode: a kind plus a 1-based channel index."""

    kind: Kind
    index: int

    @property
    def label(self) -> str:
        return f"{_PREFIX[self.kind]}{self.index}"

    def __repr__(self) -> str:
        return self.label

    @classmethod
    def parse(cls, label: str) -> "ModeId":
        m = _LABEL_RE.match(label)
        if m is None:
            raise ValueError(f"bad mode label {label!r}")
        index = int(m.group(2))
        if index < 1:
            raise ValueError(f"mode index must be >= 1, got {label!r}")
        return cls(_KIND_OF_PREFIX[m.group(1)], index)


def _mode(kind: Kind, index: int) -> ModeId:
    if index < 1:
        raise ValueError(f"channel index must be >= 1, got {index}")
    return ModeId(kind, index)


def r(i: int) -> ModeId:
    return _mode(Kind.ENSEMBLE_R, i)


def l(i: int) -> ModeId:  # noqa: E741 - mirrors the physics symbol
    return _mode(Kind.ENSEMBLE_L, i)


def h(i: int) -> ModeId:
    return _mode(Kind.PHOTON_H, i)


def v(i: int) -> ModeId:
    return _mode(Kind.PHOTON_V, i)


def dh(i: int) -> ModeId:
    return _mode(Kind.DETECTOR_H, i)


def dv(i: int) -> ModeId:
    return _mode(Kind.DETECTOR_V, i)


def loss(i: int) -> ModeId:
    return _mode(Kind.LOSS, i)


class FockBasisState(tuple):
    """Canonical occupation vector: sorted ``(mode, count)`` pairs, no zeros.

    The empty state is the global vacuum.
    """

    __slots__ = ()

    def __new__(cls, occupations: Mapping[ModeId, int] | Iterable[tuple[ModeId, int]] = ()):
        items = occupations.items() if isinstance(occupations, Mapping) else occupations
        merged: dict[ModeId, int] = {}
        for mode, count in items:
            if not isinstance(mode, ModeId):
                mode = ModeId.parse(mode) if isinstance(mode, str) else ModeId(*mode)
            count = int(count)
            if count < 0:
                raise ValueError(f"negative occupation {count} for mode {mode.label}")
            if mode in merged:
                raise ValueError(f"mode {mode.label} given twice")
            merged[mode] = count
        return tuple.__new__(cls, sorted((m, c) for m, c in merged.items() if c))

    @classmethod
    def _raw(cls, pairs: Iterable[tuple[ModeId, int]]) -> "FockBasisState":
        # caller guarantees canonical input
        return tuple.__new__(cls, pairs)

    def occupation(self, mode: ModeId) -> int:
        for m, c in self:
            if m == mode:
                return c
        return 0

    def as_dict(self) -> dict[ModeId, int]:
        return dict(self)

    @property
    def modes(self) -> tuple[ModeId, ...]:
        return tuple(m for m, _ in self)

    @property
    def total(self) -> int:
        return sum(c for _, c in self)

    def with_count(self, mode: ModeId, count: int) -> "FockBasisState":
        d = dict(self)
        if count:
            d[mode] = count
        else:
            d.pop(mode, None)
        return FockBasisState._raw(sorted(d.items()))

    def split(self, modes: Iterable[ModeId]) -> tuple["FockBasisState", "FockBasisState"]:
        """Split into (part on ``modes``, remainder)."""
        keep = set(modes)
        inside = [(m, c) for m, c in self if m in keep]
        outside = [(m, c) for m, c in self if m not in keep]
        return FockBasisState._raw(inside), FockBasisState._raw(outside)

    def __repr__(self) -> str:
        if not self:
            return "|vac>"
        return "|" + ",".join(f"{c}_{m.label}" for m, c in self) + ">"


def _merge(a: FockBasisState, b: FockBasisState) -> FockBasisState:
    """Join two basis states on disjoint modes."""
    return FockBasisState._raw(sorted(a + b))


class Ket:
    """Sparse, possibly unnormalized superposition of Fock basis states.

    Kets are treated as immutable; every operation returns a new one.
    Amplitudes with magnitude below ``prune_tol`` are dropped.
    """

    __slots__ = ("_terms", "prune_tol")

    def __init__(
        self,
        terms: Mapping[FockBasisState, complex] | Iterable[tuple[FockBasisState, complex]] = (),
        prune_tol: float = DEFAULT_PRUNE_TOL,
    ):
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[FockBasisState, complex] = {}
        for state, amp in items:
            if not isinstance(state, FockBasisState):
                state = FockBasisState(state)
            amp = complex(amp)
            if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
                raise ValueError(f"non-finite amplitude {amp} on {state!r}")
            acc[state] = acc.get(state, 0j) + amp
        self._terms = {s: a for s, a in acc.items() if abs(a) >= prune_tol}
        self.prune_tol = prune_tol

    @classmethod
    def _wrap(cls, acc: dict[FockBasisState, complex], prune_tol: float) -> "Ket":
        ket = cls.__new__(cls)
        ket._terms = {s: a for s, a in acc.items() if abs(a) >= prune_tol}
        ket.prune_tol = prune_tol
        return ket

    @property
    def terms(self) -> Mapping[FockBasisState, complex]:
        return MappingProxyType(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[FockBasisState, complex]]:
        return iter(sorted(self._terms.items()))

    def __bool__(self) -> bool:
        return bool(self._terms)

    def amplitude(self, occupations: Mapping[ModeId, int] | FockBasisState) -> complex:
        if not isinstance(occupations, FockBasisState):
            occupations = FockBasisState(occupations)
        return self._terms.get(occupations, 0j)

    @property
    def modes(self) -> set[ModeId]:
        return {m for s in self._terms for m, _ in s}

    def norm_sq(self) -> float:
        return sum(a.real * a.real + a.imag * a.imag for a in self._terms.values())

    def __add__(self, other: "Ket") -> "Ket":
        acc = dict(self._terms)
        for s, a in other._terms.items():
            acc[s] = acc.get(s, 0j) + a
        return Ket._wrap(acc, self.prune_tol)

    def __neg__(self) -> "Ket":
        return Ket._wrap({s: -a for s, a in self._terms.items()}, self.prune_tol)

    def __sub__(self, other: "Ket") -> "Ket":
        return self + (-other)

    def __mul__(self, scalar: complex) -> "Ket":
        return Ket._wrap({s: a * scalar for s, a in self._terms.items()}, self.prune_tol)

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> "Ket":
        return self * (1 / scalar)

    def isclose(self, other: "Ket", atol: float = 1e-12) -> bool:
        """Componentwise comparison with absolute tolerance."""
        for s in self._terms.keys() | other._terms.keys():
            if abs(self._terms.get(s, 0j) - other._terms.get(s, 0j)) > atol:
                return False
        return True

    def __repr__(self) -> str:
        if not self._terms:
            return "Ket(0)"
        return " + ".join(f"({a:.6g}){s!r}" for s, a in self)

    def to_json(self) -> list[dict]:
        return [
            {"occupations": {m.label: c for m, c in s}, "re": a.real, "im": a.imag}
            for s, a in self
        ]

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, doc: list[dict], prune_tol: float = DEFAULT_PRUNE_TOL) -> "Ket":
        return cls(
            ((FockBasisState({ModeId.parse(k): c for k, c in t["occupations"].items()}),
              complex(t["re"], t["im"])) for t in doc),
            prune_tol=prune_tol,
        )


def basis_ket(occupations: Mapping[ModeId, int] | None = None, prune_tol: float = DEFAULT_PRUNE_TOL) -> Ket:
    return Ket({FockBasisState(occupations or {}): 1.0}, prune_tol=prune_tol)


def vacuum() -> Ket:
    return basis_ket({})


def apply_creation(ket: Ket, mode: ModeId) -> Ket:
    acc: dict[FockBasisState, complex] = {}
    for s, a in ket._terms.items():
        n = s.occupation(mode)
        t = s.with_count(mode, n + 1)
        acc[t] = acc.get(t, 0j) + a * math.sqrt(n + 1)
    return Ket._wrap(acc, ket.prune_tol)


def apply_annihilation(ket: Ket, mode: ModeId) -> Ket:
    acc: dict[FockBasisState, complex] = {}
    for s, a in ket._terms.items():
        n = s.occupation(mode)
        if n == 0:
            continue
        t = s.with_count(mode, n - 1)
        acc[t] = acc.get(t, 0j) + a * math.sqrt(n)
    return Ket._wrap(acc, ket.prune_tol)


def inner_product(a: Ket, b: Ket) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if len(a._terms) > len(b._terms):
        return sum((x.conjugate() * a._terms[s] for s, x in b._terms.items() if s in a._terms), 0j).conjugate()
    return sum((x.conjugate() * b._terms[s] for s, x in a._terms.items() if s in b._terms), 0j)


def norm_sq(ket: Ket) -> float:
    return ket.norm_sq()


def normalize(ket: Ket) -> Ket:
    n2 = ket.norm_sq()
    if n2 <= 0.0:
        raise ZeroNormError("cannot normalize the zero ket")
    return ket * (1.0 / math.sqrt(n2))


def tensor(a: Ket, b: Ket) -> Ket:
    overlap = a.modes & b.modes
    if overlap:
        labels = ", ".join(m.label for m in sorted(overlap))
        raise ValueError(f"tensor factors share modes: {labels}")
    acc: dict[FockBasisState, complex] = {}
    for sa, xa in a._terms.items():
        for sb, xb in b._terms.items():
            acc[_merge(sa, sb)] = xa * xb
    return Ket._wrap(acc, min(a.prune_tol, b.prune_tol))


def project_sector(ket: Ket, predicate: Callable[[FockBasisState], bool]) -> Ket:
    """Unnormalized restriction of ``ket`` to basis states accepted by ``predicate``."""
    return Ket._wrap({s: a for s, a in ket._terms.items() if predicate(s)}, ket.prune_tol)


def relabel(ket: Ket, mapping: Mapping[ModeId, ModeId]) -> Ket:
    """Rename modes term by term; amplitudes are untouched."""
    acc: dict[FockBasisState, complex] = {}
    for s, a in ket._terms.items():
        t = FockBasisState((mapping.get(m, m), c) for m, c in s)
        acc[t] = acc.get(t, 0j) + a
    return Ket._wrap(acc, ket.prune_tol)
