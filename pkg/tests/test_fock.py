import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ensemble_ghz.fock import (
    FockBasisState,
    Ket,
    ModeId,
    ZeroNormError,
    apply_annihilation,
    apply_creation,
    basis_ket,
    h,
    inner_product,
    l,
    norm_sq,
    normalize,
    project_sector,
    r,
    tensor,
    v,
    vacuum,
)

ATOL = 1e-12
MODES = [r(1), l(1), h(1), v(1), h(2)]

amplitudes = st.complex_numbers(min_magnitude=0.05, max_magnitude=2.0, allow_nan=False, allow_infinity=False)


@st.composite
def small_kets(draw, max_photons=4, modes=MODES):
    n_terms = draw(st.integers(1, 4))
    terms = {}
    for _ in range(n_terms):
        occ = {}
        budget = draw(st.integers(0, max_photons))
        for m in draw(st.permutations(modes)):
            if budget == 0:
                break
            c = draw(st.integers(0, budget))
            occ[m] = c
            budget -= c
        terms[FockBasisState(occ)] = draw(amplitudes)
    return Ket(terms)


def test_mode_labels_round_trip():
    for m in [r(3), l(1), h(12), v(2), ModeId.parse("Dh4"), ModeId.parse("loss2")]:
        assert ModeId.parse(m.label) == m
    with pytest.raises(ValueError):
        ModeId.parse("x1")
    with pytest.raises(ValueError):
        h(0)


def test_mode_order_is_kind_then_index():
    assert sorted([h(2), r(3), v(1), h(1), l(1)]) == [r(3), l(1), h(1), h(2), v(1)]


def test_basis_ket_examples():
    vac = basis_ket({})
    assert vac.terms == {FockBasisState(): 1}
    k = basis_ket({r(1): 1, h(1): 1})
    assert k.amplitude({h(1): 1, r(1): 1}) == 1
    assert basis_ket({h(1): 2}).amplitude({h(1): 2}) == 1


def test_basis_ket_rejects_negative():
    with pytest.raises(ValueError):
        basis_ket({h(1): -1})


def test_zero_occupations_are_not_stored():
    assert FockBasisState({h(1): 0, v(1): 2}) == FockBasisState({v(1): 2})


def test_creation_examples():
    assert apply_creation(vacuum(), h(1)).isclose(basis_ket({h(1): 1}), ATOL)
    three = apply_creation(basis_ket({h(1): 2}), h(1))
    assert three.amplitude({h(1): 3}) == pytest.approx(math.sqrt(3), abs=ATOL)
    psi = (vacuum() + basis_ket({h(1): 1})) * (1 / math.sqrt(2))
    expected = (basis_ket({h(1): 1}) + basis_ket({h(1): 2}) * math.sqrt(2)) * (1 / math.sqrt(2))
    assert apply_creation(psi, h(1)).isclose(expected, ATOL)


def test_annihilation_examples():
    assert len(apply_annihilation(vacuum(), h(1))) == 0
    out = apply_annihilation(basis_ket({h(1): 3}), h(1))
    assert out.amplitude({h(1): 2}) == pytest.approx(math.sqrt(3), abs=ATOL)


def test_inner_product_examples():
    assert inner_product(vacuum(), vacuum()) == 1
    assert inner_product(basis_ket({h(1): 1}), basis_ket({v(1): 1})) == 0
    a = basis_ket({h(1): 1}) * 1j
    assert inner_product(a, basis_ket({h(1): 1})) == pytest.approx(-1j)


def test_norm_and_normalize():
    assert norm_sq(vacuum() + basis_ket({h(1): 1})) == pytest.approx(2)
    assert normalize(vacuum() * 2).isclose(vacuum(), ATOL)
    with pytest.raises(ZeroNormError):
        normalize(Ket())


def test_tensor_examples():
    psi = basis_ket({h(1): 1}) + basis_ket({v(1): 2}) * 0.5
    assert tensor(vacuum(), psi).isclose(psi, ATOL)
    assert tensor(basis_ket({h(1): 1}), basis_ket({h(2): 1})).isclose(basis_ket({h(1): 1, h(2): 1}), ATOL)
    with pytest.raises(ValueError):
        tensor(basis_ket({h(1): 1}), basis_ket({h(1): 1}))


def test_project_sector_examples():
    psi = basis_ket({r(1): 1}) * 0.3 + basis_ket({r(1): 2}) * 0.4
    assert project_sector(psi, lambda s: True).isclose(psi, ATOL)
    kept = project_sector(psi, lambda s: s.occupation(r(1)) + s.occupation(l(1)) == 1)
    assert kept.isclose(basis_ket({r(1): 1}) * 0.3, ATOL)


def test_pruning_drops_tiny_terms():
    k = Ket({FockBasisState(): 1.0, FockBasisState({h(1): 1}): 1e-16})
    assert len(k) == 1
    loose = Ket({FockBasisState(): 1.0, FockBasisState({h(1): 1}): 1e-9}, prune_tol=1e-6)
    assert len(loose) == 1


def test_non_finite_amplitude_rejected():
    with pytest.raises(ValueError):
        Ket({FockBasisState(): float("nan")})


@settings(max_examples=60, deadline=None)
@given(small_kets(), small_kets(), st.sampled_from(MODES))
def test_ladder_duality(psi, phi, mode):
    lhs = inner_product(apply_creation(psi, mode), phi)
    rhs = inner_product(psi, apply_annihilation(phi, mode))
    assert abs(lhs - rhs) < ATOL


@settings(max_examples=60, deadline=None)
@given(small_kets(), st.sampled_from(MODES))
def test_commutator_is_identity(psi, mode):
    aad = apply_annihilation(apply_creation(psi, mode), mode)
    ada = apply_creation(apply_annihilation(psi, mode), mode)
    assert (aad - ada).isclose(psi, ATOL)


@settings(max_examples=40, deadline=None)
@given(
    small_kets(modes=[r(1), h(1)]),
    small_kets(modes=[l(2), v(2)]),
    small_kets(modes=[h(3), v(3)]),
)
def test_tensor_associative_and_norm_multiplicative(a, b, c):
    left = tensor(tensor(a, b), c)
    right = tensor(a, tensor(b, c))
    assert left.isclose(right, ATOL)
    assert norm_sq(left) == pytest.approx(norm_sq(a) * norm_sq(b) * norm_sq(c), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(small_kets())
def test_json_round_trip_is_identical(psi):
    back = Ket.from_json(json.loads(psi.dumps()))
    assert dict(back.terms) == dict(psi.terms)


def test_json_layout():
    doc = (basis_ket({h(1): 1, r(1): 2}) * 0.5j).to_json()
    assert doc == [{"occupations": {"r1": 2, "h1": 1}, "re": 0.0, "im": 0.5}]


@settings(max_examples=60, deadline=None)
@given(small_kets())
def test_project_sector_idempotent_and_contracting(psi):
    def pred(s):
        return s.total % 2 == 0

    once = project_sector(psi, pred)
    assert dict(project_sector(once, pred).terms) == dict(once.terms)
    assert norm_sq(once) <= norm_sq(psi) + ATOL
