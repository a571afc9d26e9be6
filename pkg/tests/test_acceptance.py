"""Acceptance criteria 1-10, one PASS/FAIL line each.

Lines are printed as each check runs and repeated in the pytest terminal
summary.  Criteria 5 and 6 are checked exactly as stated; each is followed by a
companion line for the corrected statement.
"""

import io
import json
import math
import random
import time
from contextlib import redirect_stdout
from fractions import Fraction

import numpy as np
import pytest

from chiral_magic.cli import run
from chiral_magic.exactnum import ONE, ZERO, CycloNum, PiPoly, gamma
from chiral_magic.fredholm import certify_first_magic, newton_elementary, plemelj_smithies
from chiral_magic.model import build_stencil, enumerate_theta
from chiral_magic.spectra import band_profile, flat_band_check, magic_angles, refine_first_magic
from chiral_magic.traces import TraceTable, pole_residues, trace_exact, trace_numeric, trace_oracle_walks, trace_T_even

from conftest import random_cyclo, random_symmetric_potential

LINES: list[str] = []
PI3 = math.pi / math.sqrt(3)
TABLE1 = TraceTable.canonical_table1()


def report(label: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    LINES.append(line)
    print(line)


def test_criterion_01_exact_traces(tmp_path):
    t0 = time.perf_counter()
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = run(["traces", "--ell-max", "6", "--no-cache"])
    got = [r["q"] for r in json.loads(buf.getvalue())["payload"]]
    want = ["4", "96/7", "40", "28680/247", "2206080/6517"]
    dt = time.perf_counter() - t0
    ok = code == 0 and got == want and dt <= 600
    report("criterion 1", ok, f"q2..q6 = {got} in {dt:.1f}s")
    t0 = time.perf_counter()
    ext = [trace_exact(_canon(), l).coeff(1) for l in (7, 8)]
    dt = time.perf_counter() - t0
    ext_ok = ext == [Fraction(1957475168, 1983163), Fraction(39948260880, 13882141)] and dt <= 7200
    report("criterion 1 (extended)", ext_ok, f"q7, q8 = {ext[0]}, {ext[1]} in {dt:.1f}s")
    assert ok and ext_ok


def _canon():
    from chiral_magic.model import canonical_potential

    return canonical_potential()


def test_criterion_02_oracle_equivalence():
    t0 = time.perf_counter()
    checks = []
    for name, p in (("canonical", _canon()), ("random", random_symmetric_potential(7))):
        for ell in (2, 3, 4):
            checks.append((name, ell, trace_exact(p, ell) == trace_oracle_walks(p, ell)))
    dt = time.perf_counter() - t0
    ok = all(c[2] for c in checks) and dt <= 300
    report("criterion 2", ok, f"{sum(c[2] for c in checks)}/{len(checks)} exact agreements in {dt:.1f}s")
    assert ok


def test_criterion_03_consistency():
    q2 = trace_exact(_canon(), 2).coeff(1)
    ok = 2 * q2 == 8 and trace_T_even(_canon(), 4) == PiPoly.pi(8)
    report("criterion 3", ok, f"2*q2 = {2 * q2}, tr T^4 = {trace_T_even(_canon(), 4)}")
    assert ok


def test_criterion_04_k_independence():
    rng = random.Random(2024)
    ks = [complex(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)) for _ in range(3)]
    worst_pair = worst_exact = 0.0
    for ell, q in ((2, 4), (3, Fraction(96, 7))):
        exact = float(q) * PI3
        vals = [trace_numeric(_canon(), ell, k, 60) for k in ks]
        for a in vals:
            worst_exact = max(worst_exact, abs(a - exact) / exact)
            for b in vals:
                worst_pair = max(worst_pair, abs(a - b) / abs(a))
    ok = worst_pair < 1e-8 and worst_exact < 1e-6
    report("criterion 4", ok, f"pairwise rel {worst_pair:.1e} (< 1e-8), vs exact rel {worst_exact:.1e} (< 1e-6)")
    assert ok


def _det_and_newton(table, n):
    sig = {j: table.sigma(j) for j in range(2, n + 1)}
    mu = plemelj_smithies(sig, n).mu
    e = newton_elementary([PiPoly()] + [sig[j] for j in range(2, n + 1)], n)
    return mu, e


def test_criterion_05_determinant_identities(table):
    t0 = time.perf_counter()
    mu, e = _det_and_newton(table, 10)
    base = mu[1] == PiPoly() and mu[2] == -table.sigma(2)
    literal = [j for j in range(1, 11) if e[j - 1] * ((-1) ** j * math.factorial(j)) != mu[j]]
    ok = base and not literal
    report(
        "criterion 5",
        ok,
        f"mu1 = 0 and mu2 = -sigma2: {base}; (-1)^j j! e_j = mu_j fails for j = {literal} "
        f"({time.perf_counter() - t0:.2f}s)",
    )
    fixed = [j for j in range(1, 11) if e[j - 1] * math.factorial(j) != mu[j]]
    report("criterion 5 (sign-corrected: mu_j = j! e_j)", base and not fixed, f"mismatches at j = {fixed}")
    assert ok


def test_criterion_06_certificate(table, hs_report):
    t0 = time.perf_counter()
    lit = certify_first_magic(table, hs_report, taylor_n=16, tail_N=17, g_order=20)
    dt = time.perf_counter() - t0
    checks = {n: ok for n, ok, _ in lit.checks()}
    ok = lit.verdict and lit.interval == (Fraction(583, 1000), Fraction(589, 1000))
    report(
        "criterion 6",
        ok,
        f"N=17: verdict {lit.verdict}; "
        + ", ".join(f"{n} {'ok' if v else 'FAILS'}" for n, v in checks.items())
        + f"; r0 <= {float(lit.tail_r0.hi):.4g}, r1 <= {float(lit.tail_r1.hi):.4g} ({dt:.1f}s)",
    )
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = run(["certify", "--no-cache"])
    out = json.loads(buf.getvalue())["payload"]
    cli_ok = code == 0 and out["verdict"] is True and out["interval"] == ["583/1000", "589/1000"]
    report(
        "criterion 6 (companion: taylor 20, tail N=21)",
        cli_ok,
        f"certify exit {code}, verdict {out['verdict']}, r0 <= {float(Fraction(out['tail_r0'][1])):.4g}, "
        f"r1 <= {float(Fraction(out['tail_r1'][1])):.4g}",
    )
    assert ok


def test_criterion_07_first_magic_angle():
    t0 = time.perf_counter()
    ms = magic_angles(_full_table(), 1, 16)
    reals = [a for a in ms.real_alphas() if 0.583 < a < 0.589]
    ok = bool(reals) and abs(reals[0] - 0.5857) < 2e-3
    report("criterion 7", ok, f"alpha = {reals[0] if reals else None!r} ({time.perf_counter() - t0:.2f}s)")
    assert ok


def _full_table():
    from chiral_magic.traces import bundled_table

    return bundled_table(_canon())


def test_criterion_08_ratio(table):
    r = float(table.q(8) / table.q(7))
    ok = abs(r - 2.91507) / 2.91507 < 0.02
    report("criterion 8", ok, f"q8/q7 = {r:.5f} vs 2.91507 (rel {abs(r - 2.91507) / 2.91507:.2e} < 2e-2)")
    assert ok


def test_criterion_09_flat_band(table):
    t0 = time.perf_counter()
    alpha = refine_first_magic(table, 20)
    at_magic = flat_band_check(alpha, 5, 30)["max_min_singular"]
    at_03 = flat_band_check(0.3, 5, 30)["max_min_singular"]
    second = min(s[1] for _, _, s in band_profile(alpha, 5, 2, 30))
    dt = time.perf_counter() - t0
    ok = at_magic < 1e-3 and at_03 > 10 * at_magic and second > 0.1 and dt <= 120
    report(
        "criterion 9",
        ok,
        f"alpha* = {alpha:.12f}: max s1 = {at_magic:.2e}; alpha = 0.3: {at_03:.3f}; "
        f"min s2 at alpha* = {second:.3f} ({dt:.1f}s)",
    )
    assert ok


def test_criterion_10_properties():
    rng = random.Random(10)
    failures = []
    for _ in range(200):
        a, b, c = (random_cyclo(rng, 9) for _ in range(3))
        if (a * b) * c != a * (b * c) or a * (b + c) != a * b + a * c:
            failures.append("ring")
        if not a.is_zero() and a * a.inv() != ONE:
            failures.append("inverse")
        for k in (5, 7, 11):
            if (a * b).galois(k) != a.galois(k) * b.galois(k):
                failures.append("galois")
        x, y = rng.randint(-99, 99), rng.randint(-99, 99)
        if gamma(x, y) * gamma(x, y).conj() != CycloNum(x * x + x * y + y * y):
            failures.append("gamma")
    for seed in range(3):
        p = random_symmetric_potential(seed)
        for w in enumerate_theta(2, build_stencil(p)):
            if sum(s[0] for s in w.steps) or sum(s[1] for s in w.steps) or w.m_pi % 2:
                failures.append("walk")
        for ell in (2, 3):
            if sum(pole_residues(p, ell).values(), ZERO) != ZERO:
                failures.append("residue")
    for seed in range(3):
        r = random.Random(seed)
        sig = {j: r.uniform(-3, 3) * 3 ** j for j in range(2, 15)}
        if not magic_angles(sig, 1, 14, filtered=False).is_conjugation_closed():
            failures.append("conjugation")
    ok = not failures
    report("criterion 10", ok, "field, automorphism, |gamma|^2, walk, residue and conjugation laws" + (
        "" if ok else f"; failing: {sorted(set(failures))}"))
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
