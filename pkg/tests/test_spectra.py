import math
import random

import numpy as np
import pytest

from chiral_magic.fredholm import det2_taylor
from chiral_magic.spectra import (
    MagicSet,
    PoleProximityError,
    aberth_roots,
    band_profile,
    bloch_operator,
    det2_float_coeffs,
    flat_band_alpha,
    flat_band_check,
    kgrid,
    magic_angles,
    materialize,
    refine_first_magic,
    smallest_singular_values,
)
from chiral_magic.model import build_stencil
from chiral_magic.traces import TraceTable

TABLE1 = TraceTable.canonical_table1()


def test_float_coefficients_match_exact(table):
    exact = det2_taylor(table, 12).float_beta_coeffs()
    sig = [float(table.sigma(j)) for j in range(2, 13)]
    approx = det2_float_coeffs(sig).real
    assert np.allclose(approx, exact, rtol=1e-10, atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_aberth_against_companion(seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=12) + 1j * rng.normal(size=12)
    got = np.sort_complex(aberth_roots(c))
    want = np.sort_complex(np.polynomial.polynomial.polyroots(c))
    for g in got:
        assert np.min(np.abs(want - g)) < 1e-8


def test_aberth_known_roots():
    roots = [0.5, -2.0, 1 + 1j, 1 - 1j]
    c = np.polynomial.polynomial.polyfromroots(roots)
    got = aberth_roots(c)
    for r in roots:
        assert np.min(np.abs(got - r)) < 1e-10


def test_first_magic_angle(table):
    ms = magic_angles(table, 1, 16)
    first = ms.real_alphas()[0]
    assert 0.583 < first < 0.589
    assert abs(first - 0.5857) < 2e-3
    assert ms.is_conjugation_closed()


def test_magic_angles_stable_in_order(table):
    a16 = magic_angles(table, 1, 16).real_alphas()[0]
    a24 = magic_angles(table, 1, 24).real_alphas()[0]
    assert abs(a16 - a24) < 1e-9


@pytest.mark.parametrize("seed", range(3))
def test_conjugation_closure_random(seed):
    rng = random.Random(seed)
    sig = {j: rng.uniform(-3, 3) * 3 ** j for j in range(2, 13)}
    ms = magic_angles(sig, 1, 12, filtered=False)
    assert ms.is_conjugation_closed()
    assert sum(ms.multiplicities) == 12


def test_magic_set_json(table):
    ms = magic_angles(table, 2, 16)
    d = ms.to_json()
    assert d["trace_order"] == 16
    assert all({"re", "im", "multiplicity", "error_estimate"} <= set(a) for a in d["alphas"])


def test_magic_angles_precondition(table):
    with pytest.raises(ValueError):
        magic_angles(table, 5, 8)


def test_numeric_traces_fill_gaps(canonical):
    # only sigma_2..sigma_8 exact; sigma_9, sigma_10 from a truncated window
    ms = magic_angles(TABLE1, 1, 10, potential=canonical, M=40)
    assert abs(ms.real_alphas()[0] - 0.5857) < 2e-3


def test_refined_magic_angle(table):
    a = refine_first_magic(table, 20)
    assert abs(a - 0.58566355838956) < 1e-11
    assert abs(refine_first_magic(table, 16) - a) < 1e-11


def test_ratio_diagnostic(table):
    r = float(table.q(8) / table.q(7))
    assert abs(r - 2.91507) / 2.91507 < 0.02


def test_pole_proximity(canonical):
    mu = complex(-1j * math.sqrt(3))
    with pytest.raises(PoleProximityError):
        materialize(build_stencil(canonical), -mu, 3)


# ---- Bloch operator ----------------------------------------------------------


def test_kgrid():
    g = kgrid(5)
    assert len(g) == 25
    assert (0.0, 0.0) in kgrid(2)
    assert all(-1.5 <= a < 1.5 and -1.5 <= b < 1.5 for a, b in g)


def test_free_dirac_point():
    prof = band_profile(0.0, 2, 1, 10)
    for k1, k2, s in prof:
        if (k1, k2) == (0.0, 0.0):
            assert s[0] < 1e-12
        else:
            assert s[0] > 0.1


def test_singular_values_against_dense():
    B = bloch_operator(0.3, 0.2 + 0.1j, 4)
    dense = np.linalg.svd(B.toarray(), compute_uv=False)
    got = smallest_singular_values(B, 3)
    assert np.allclose(got, np.sort(dense)[:3], rtol=1e-8)


def test_periodicity():
    w = complex(-0.5, math.sqrt(3) / 2)
    g = lambda a, b: w.conjugate() * a - w * b
    s1 = smallest_singular_values(bloch_operator(0.3, g(0.4, -0.2), 20), 2)
    s2 = smallest_singular_values(bloch_operator(0.3, g(3.4, -0.2), 20), 2)
    s3 = smallest_singular_values(bloch_operator(0.3, g(0.4, 2.8), 20), 2)
    assert np.allclose(s1, s2, rtol=1e-8) and np.allclose(s1, s3, rtol=1e-8)


def test_band_profile_sorted_nonnegative():
    for _, _, s in band_profile(0.3, 2, 4, 12):
        assert all(v >= 0 for v in s)
        assert s == sorted(s)


def test_truncation_stability(table):
    alpha = refine_first_magic(table, 20)
    a = flat_band_check(alpha, 2, 16)["max_min_singular"]
    b = flat_band_check(alpha, 2, 24)["max_min_singular"]
    assert a < 1e-6 and b < 1e-6
    c = flat_band_check(0.3, 2, 16)["per_k"]
    d = flat_band_check(0.3, 2, 24)["per_k"]
    for (_, _, x), (_, _, y) in zip(c, d):
        assert abs(x - y) < 1e-6


@pytest.mark.slow
def test_singular_value_route_matches_polynomial_root(table):
    a = flat_band_alpha(0.57, 0.60, grid=2, M=16, xtol=1e-7)
    assert abs(a - refine_first_magic(table, 20)) < 1e-3


def test_grid_guard():
    with pytest.raises(ValueError):
        band_profile(0.3, 1, 1, 10)
