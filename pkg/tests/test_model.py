import itertools
import random

import numpy as np
import pytest

from chiral_magic.exactnum import MU, OMEGA, ONE, SQRT3, CycloNum, gamma
from chiral_magic.model import (
    InconsistentPotentialError,
    LatticeSite,
    PoleError,
    Potential,
    build_stencil,
    canonical_potential,
    count_closed_walks_dp,
    enumerate_theta,
    lambda_value,
    orbit_next,
    orbit_prev,
    symmetry_complete,
)
from chiral_magic.spectra import materialize

from conftest import random_symmetric_potential


def test_canonical_has_three_modes(canonical):
    assert len(canonical) == 3
    assert canonical.real
    assert canonical.is_symmetric()


def test_orbit_closure(canonical):
    for n, c in canonical.modes.items():
        assert c == OMEGA * canonical.modes[orbit_next(n)]
        # three steps return to the start with phase omega^3 = 1
        m = orbit_next(orbit_next(orbit_next(n)))
        assert m == n
        assert orbit_prev(orbit_next(n)) == n


def test_seed_orbit():
    p = symmetry_complete({(0, 0): ONE})
    assert len(p) == 3
    assert p.is_symmetric()
    vals = sorted(p.modes.values(), key=repr)
    assert {v for v in vals} == {ONE, OMEGA, OMEGA * OMEGA}


def test_empty_seed():
    assert len(symmetry_complete({})) == 0


def test_inconsistent_seed():
    with pytest.raises(InconsistentPotentialError):
        symmetry_complete({(0, 0): ONE, orbit_next((0, 0)): ONE})


def test_json_roundtrip_and_digest(canonical):
    again = Potential.from_json(canonical.to_json())
    assert again == canonical
    assert again.digest() == canonical.digest()
    bumped = symmetry_complete({(0, 0): SQRT3 * 2}, want_real=True)
    assert bumped.digest() != canonical.digest()


def test_from_json_rejects_broken_orbit():
    with pytest.raises(InconsistentPotentialError):
        Potential.from_json({"modes": [{"n": [1, 0], "c": ["1", "0", "0", "0"]}]})


def test_canonical_stencil(canonical):
    st = build_stencil(canonical)
    assert len(st.terms) == 9
    assert st.raw_count == 9
    nets = sorted(t.net_shift for t in st.terms)
    want = sorted([(0, 0)] * 3 + [(3, 0), (0, 3), (-3, 0), (0, -3), (-3, 3), (3, -3)])
    assert nets == want
    assert st.prefactor == CycloNum(3)


def test_single_mode_stencil():
    st = build_stencil(Potential({(0, 0): ONE}))
    assert len(st.terms) == 1


def test_six_mode_stencil(random_potential):
    st = build_stencil(random_potential)
    assert st.raw_count == 36
    pairs = {
        ((m[0] + p[0], m[1] + p[1]), m)
        for (m, _), (p, _) in itertools.product(random_potential.minus_steps(), random_potential.plus_steps())
    }
    assert len(st.terms) <= len(pairs)


def test_lambda_value_examples():
    assert lambda_value(LatticeSite(0, 0), CycloNum(0)) == MU.inv()
    site = LatticeSite(2, -1)
    with pytest.raises(PoleError):
        lambda_value(site, -gamma(2, -1) * 3 - MU)


def test_denominator_norm():
    g = gamma(4, 1)  # omega^2*4 - omega*1
    assert g * g.conj() == CycloNum(21)


def test_one_step_walks(canonical):
    walks = list(enumerate_theta(1, build_stencil(canonical)))
    assert len(walks) == 3
    for w in walks:
        assert w.steps[0] == (-w.steps[1][0], -w.steps[1][1])
    w = next(w for w in walks if w.steps[0] == (1, 1))
    assert w.m_pi == 0


@pytest.mark.parametrize("ell", [1, 2, 3, 4])
def test_walk_count_matches_dp(canonical, ell):
    st = build_stencil(canonical)
    assert sum(1 for _ in enumerate_theta(ell, st)) == count_closed_walks_dp(ell, st)


def test_two_step_walks_brute_force(canonical):
    st = build_stencil(canonical)
    brute = 0
    for a, b, c, d in itertools.product(st.minus, st.plus, st.minus, st.plus):
        if sum(s[0][0] for s in (a, b, c, d)) == 0 and sum(s[0][1] for s in (a, b, c, d)) == 0:
            brute += 1
    assert brute == sum(1 for _ in enumerate_theta(2, st)) == 15


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_walk_invariants(seed):
    p = random_symmetric_potential(seed)
    st = build_stencil(p)
    for w in enumerate_theta(2, st):
        xs = sum(s[0] for s in w.steps)
        ys = sum(s[1] for s in w.steps)
        assert (xs, ys) == (0, 0)
        assert w.m_pi % 2 == 0
        assert w.labels_even[0] == (0, 0)
        assert len(w.labels) == 2 * w.ell


def _direct_truncation(p: Potential, k: complex, M: int) -> np.ndarray:
    """P_M D^-1 V_+ D^-1 V_- P_M assembled from the raw mode lists."""
    w = np.exp(2j * np.pi / 3)
    mu = w * w - w

    def lam(x, y):
        return 1 / (k + w * w * x - w * y + mu)

    side = 2 * M + 1
    idx = {(3 * a, 3 * b): i for i, (a, b) in enumerate(itertools.product(range(-M, M + 1), repeat=2))}
    mids = sorted({(x + s[0], y + s[1]) for (x, y) in idx for s, _ in p.minus_steps()})
    mid_idx = {m: i for i, m in enumerate(mids)}
    Vm = np.zeros((len(mids), side * side), dtype=complex)
    for (x, y), i in idx.items():
        for s, c in p.minus_steps():
            Vm[mid_idx[(x + s[0], y + s[1])], i] += complex(c)
    Vp = np.zeros((side * side, len(mids)), dtype=complex)
    for (x, y), i in mid_idx.items():
        for s, c in p.plus_steps():
            t = (x + s[0], y + s[1])
            if t in idx:
                Vp[idx[t], i] += complex(c)
    D0 = np.diag([lam(*o) for o in idx])
    D1 = np.diag([lam(*m) for m in mids])
    return D0 @ Vp @ D1 @ Vm


@pytest.mark.parametrize("which", ["canonical", "random"])
def test_materialize_matches_direct_assembly(which, canonical, random_potential):
    p = canonical if which == "canonical" else random_potential
    k = 0.13 + 0.07j
    op = materialize(build_stencil(p), k, 5)
    ref = _direct_truncation(p, k, 5)
    assert np.max(np.abs(op.matrix.toarray() - ref)) < 1e-12


def test_origin_row(canonical):
    st = build_stencil(canonical)
    k = 0.1
    op = materialize(st, k, 2)
    row = op.matrix.getrow(op.index(0, 0)).toarray().ravel()
    assert np.count_nonzero(np.abs(row) > 1e-14) == 7  # 9 terms, three share net shift 0
    # diagonal entry by hand: Lambda(0) * sum_terms coeff * Lambda(first)
    w = np.exp(2j * np.pi / 3)
    mu = w * w - w
    lam = lambda x, y: 1 / (k + w * w * x - w * y + mu)
    want = sum(complex(t.coeff) * lam(0, 0) * lam(*t.first_offset) for t in st.terms if t.net_shift == (0, 0))
    assert abs(row[op.index(0, 0)] - want) < 1e-14


def test_materialize_small_windows(canonical):
    op = materialize(build_stencil(canonical), 0.1, 0)
    assert op.matrix.shape == (1, 1)
    with pytest.raises(ValueError):
        materialize(build_stencil(canonical), 0.1, -1)
