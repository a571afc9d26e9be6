"""Floating-point spectral exploration.

The chiral operator restricted to one symmetry class acts on the two site
families o = 0 and o = (1,1) mod 3 (offset coordinates) as

    B(alpha, k) = [[D_0(k), alpha V_+], [alpha V_-, D_1(k)]],   D(k)_o = k + gamma_o + mu,

and B has a kernel iff 1/alpha^2 is an eigenvalue of A_k.  The Bloch momentum
used for grids is kappa = k + mu, so that the free Dirac points sit at
kappa = 0 and kappa = -mu.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import minimize_scalar

from .exactnum import MU
from .model import Potential, Stencil, build_stencil, canonical_potential
from .traces import TraceTable

log = logging.getLogger(__name__)

__all__ = [
    "PoleProximityError",
    "RootFindingError",
    "TruncatedOp",
    "MagicSet",
    "materialize",
    "det2_float_coeffs",
    "aberth_roots",
    "magic_angles",
    "refine_first_magic",
    "bloch_operator",
    "smallest_singular_values",
    "flat_band_check",
    "band_profile",
    "flat_band_alpha",
    "kgrid",
]

W = complex(-0.5, math.sqrt(3) / 2)
W2 = W.conjugate()
MU_F = complex(MU)


class PoleProximityError(ValueError):
    pass


class RootFindingError(RuntimeError):
    pass


def _gamma_f(a, b):
    return W2 * a - W * b


# --------------------------------------------------------------------------
# Truncated A_k
# --------------------------------------------------------------------------


@dataclass
class TruncatedOp:
    M: int
    k: complex
    matrix: sp.csr_matrix
    sites: np.ndarray  # (n, 2) offsets, row-major in (m, n)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def index(self, m: int, n: int) -> int:
        return (m + self.M) * (2 * self.M + 1) + (n + self.M)


def materialize(stencil: Stencil, k: complex, M: int, min_pole_distance: float = 1e-6) -> TruncatedOp:
    """P_M A_k P_M over the offsets (3m, 3n), |m|, |n| <= M."""
    if M < 0:
        raise ValueError("M must be >= 0")
    side = 2 * M + 1
    r = np.arange(-M, M + 1)
    mm, nn = np.meshgrid(r, r, indexing="ij")
    mm, nn = mm.ravel(), nn.ravel()
    ox, oy = 3 * mm, 3 * nn

    def lam(x, y):
        d = k + _gamma_f(x, y) + MU_F
        if np.min(np.abs(d)) < min_pole_distance:
            raise PoleProximityError(f"k = {k} lies within {min_pole_distance} of a resolvent pole")
        return 1.0 / d

    lam_t = lam(ox, oy)
    rows, cols, vals = [], [], []
    for t in stencil.terms:
        net, first = t.net_shift, t.first_offset
        sm, sn = mm - net[0] // 3, nn - net[1] // 3
        ok = (np.abs(sm) <= M) & (np.abs(sn) <= M)
        src = (sm + M) * side + (sn + M)
        mid = lam(ox - net[0] + first[0], oy - net[1] + first[1])
        v = complex(t.coeff) * lam_t * mid
        idx = np.nonzero(ok)[0]
        rows.append(idx)
        cols.append(src[ok])
        vals.append(v[ok])
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(side * side, side * side)
    ).tocsr()
    A.sum_duplicates()
    return TruncatedOp(M, k, A, np.stack([ox, oy], axis=1))


# --------------------------------------------------------------------------
# Magic angles from det_2
# --------------------------------------------------------------------------


def det2_float_coeffs(sigmas: Sequence[float]) -> np.ndarray:
    """Coefficients c_0..c_n of det_2(1 - beta A) = sum c_j beta^j from sigma_2..sigma_n.

    From D'/D = -sum sigma_i beta^(i-1): j c_j = -sum_{i=2}^j sigma_i c_{j-i}.
    """
    s = [0.0, 0.0] + [complex(x) for x in sigmas]
    n = len(s) - 1
    c = np.zeros(n + 1, dtype=complex)
    c[0] = 1.0
    for j in range(1, n + 1):
        c[j] = -sum(s[i] * c[j - i] for i in range(2, j + 1)) / j
    return c


def aberth_roots(coeffs: Sequence[complex], tol: float = 1e-14, max_iter: int = 500) -> np.ndarray:
    """All roots of sum coeffs[j] x^j by Aberth-Ehrlich iteration."""
    c = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    n = len(c) - 1
    if n < 1:
        return np.zeros(0, dtype=complex)
    monic = c / c[-1]
    # deterministic start on a circle of the Fujiwara radius
    radius = 2 * max(abs(monic[j]) ** (1.0 / (n - j)) for j in range(n))
    radius = max(radius, 1e-3)
    z = radius * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    p = np.polynomial.polynomial.Polynomial(monic)
    dp = p.deriv()
    pabs = np.polynomial.polynomial.Polynomial(np.abs(monic))
    eps = np.finfo(float).eps
    done = np.zeros(n, dtype=bool)
    for _ in range(max_iter):
        pv, dv = p(z), dp(z)
        # backward-error stop: |p(z)| at rounding level of the evaluation
        done |= np.abs(pv) <= 16 * n * eps * pabs(np.abs(z))
        ratio = np.where(dv != 0, pv / np.where(dv != 0, dv, 1), 0)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1)
        inv = 1 / diff
        np.fill_diagonal(inv, 0)
        s = inv.sum(axis=1)
        step = np.where(done, 0, ratio / (1 - ratio * s))
        z = z - step
        done |= np.abs(step) <= tol * np.maximum(1, np.abs(z))
        if done.all():
            return z
    raise RootFindingError("Aberth iteration did not converge; raise trace_order or check coefficients")


@dataclass
class MagicSet:
    alphas: list[complex]
    multiplicities: list[int]
    trace_order: int
    truncation: Optional[int] = None
    betas: list[complex] = field(default_factory=list)
    error_estimates: list[float] = field(default_factory=list)

    def real_alphas(self, tol: float = 1e-8) -> list[float]:
        return [a.real for a in self.alphas if abs(a.imag) <= tol]

    def is_conjugation_closed(self, tol: float = 1e-6) -> bool:
        # alpha and -alpha describe the same eigenvalue 1/alpha^2
        for a in self.alphas:
            if min(min(abs(a.conjugate() - b), abs(a.conjugate() + b)) for b in self.alphas) > tol:
                return False
        return True

    def to_json(self) -> dict:
        return {
            "trace_order": self.trace_order,
            "truncation": self.truncation,
            "alphas": [
                {"re": a.real, "im": a.imag, "multiplicity": m, "error_estimate": e}
                for a, m, e in zip(self.alphas, self.multiplicities, self.error_estimates)
            ],
        }


def _tail_at(beta_abs: float, n: int, hs: float) -> float:
    x = math.sqrt(math.e) * hs * beta_abs
    total = 0.0
    for j in range(n + 1, n + 400):
        t = (x / math.sqrt(j)) ** j
        total += t
        if t < 1e-300 or (j > n + 5 and t < 1e-18 * total):
            break
    else:
        return math.inf
    return total


def _sigma_floats(source, trace_order: int, potential: Optional[Potential], M: int) -> list[float]:
    out = []
    for ell in range(2, trace_order + 1):
        if isinstance(source, TraceTable) and ell in source.entries:
            out.append(float(source.entries[ell]))
        elif isinstance(source, dict) and ell in source:
            out.append(complex(source[ell]))
        else:
            from .traces import trace_numeric

            p = potential or canonical_potential()
            log.info("sigma_%d not available exactly; using trace_numeric with M=%d", ell, M)
            out.append(trace_numeric(p, ell, 0.1 + 0.2j, max(M, 4 * ell)))
    return out


def magic_angles(
    source: Union[TraceTable, dict],
    count: int = 1,
    trace_order: int = 16,
    *,
    potential: Optional[Potential] = None,
    M: int = 80,
    hs: float = 5.5,
    filtered: bool = True,
    cluster_tol: float = 1e-4,
) -> MagicSet:
    """Magic alphas from the roots of the degree-n Taylor polynomial of det_2 in beta = alpha^2.

    Each root carries the estimate tail/|P'(beta)| from the a-priori tail
    bound; with ``filtered`` only roots whose estimate is below half their
    distance to the nearest other root are kept.
    """
    if trace_order < 2 * count:
        raise ValueError("trace_order must be at least 2*count")
    sig = _sigma_floats(source, trace_order, potential, M)
    c = det2_float_coeffs(sig)
    if all(abs(complex(x).imag) == 0 for x in sig):
        c = c.real.astype(complex)
    betas = aberth_roots(c)
    if np.all(c.imag == 0):
        # real coefficients: roots within rounding of the real axis are real
        snap = np.abs(betas.imag) < 1e-12 * np.maximum(1.0, np.abs(betas))
        betas = np.where(snap, betas.real + 0j, betas)
    dp = np.polynomial.polynomial.Polynomial(c).deriv()
    est = []
    for b in betas:
        tail = _tail_at(abs(b), trace_order, hs)
        d = abs(dp(b))
        est.append(tail / d if d > 0 else math.inf)
    keep = []
    for i, b in enumerate(betas):
        others = [abs(b - o) for j, o in enumerate(betas) if j != i]
        sep = min(others) if others else math.inf
        if not filtered or est[i] < sep / 2:
            keep.append(i)
    keep.sort(key=lambda i: (abs(betas[i]), betas[i].imag))
    # principal square root; the spectrum is symmetric under alpha -> -alpha
    alphas = [complex(np.sqrt(betas[i])) for i in keep]
    mults, groups, gb, ge = [], [], [], []
    for a, i in zip(alphas, keep):
        for g_i, g in enumerate(groups):
            if abs(g - a) < cluster_tol:
                mults[g_i] += 1
                break
        else:
            groups.append(a)
            mults.append(1)
            gb.append(complex(betas[i]))
            ge.append(est[i])
    # real-coefficient polynomials: snap conjugate pairs
    for i, a in enumerate(groups):
        if abs(a.imag) < 1e-12:
            groups[i] = complex(a.real, 0.0)
    return MagicSet(groups, mults, trace_order, M, gb, ge)


def refine_first_magic(source: Union[TraceTable, dict], trace_order: int = 20) -> float:
    """First real magic alpha by Newton polishing of the smallest positive real beta root."""
    ms = magic_angles(source, 1, trace_order, filtered=False)
    reals = [b.real for b in ms.betas if abs(b.imag) < 1e-9 and b.real > 0]
    if not reals:
        raise RootFindingError("no positive real root")
    c = det2_float_coeffs(_sigma_floats(source, trace_order, None, 80)).real
    p = np.polynomial.polynomial.Polynomial(c)
    dp = p.deriv()
    b = min(reals)
    for _ in range(50):
        step = p(b) / dp(b)
        b -= step
        if abs(step) < 1e-16:
            break
    return math.sqrt(b)


# --------------------------------------------------------------------------
# Flat bands via singular values
# --------------------------------------------------------------------------


def kgrid(grid: int) -> list[tuple[float, float]]:
    """(k1, k2) in [-3/2, 3/2)^2; the Bloch momentum is gamma(k1, k2)."""
    vals = [-1.5 + 3.0 * j / grid for j in range(grid)]
    return [(a, b) for a in vals for b in vals]


def bloch_operator(alpha: float, kappa: complex, M: int, potential: Optional[Potential] = None) -> sp.csc_matrix:
    """B(alpha, kappa - mu) on both site families, |m|, |n| <= M."""
    p = potential or canonical_potential()
    k = kappa - MU_F
    side = 2 * M + 1
    n0 = side * side
    r = np.arange(-M, M + 1)
    mm, nn = np.meshgrid(r, r, indexing="ij")
    mm, nn = mm.ravel(), nn.ravel()

    def idx(m, n):
        return (m + M) * side + (n + M)

    d0 = k + _gamma_f(3 * mm, 3 * nn) + MU_F
    d1 = k + _gamma_f(3 * mm + 1, 3 * nn + 1) + MU_F
    rows = [np.arange(n0), n0 + np.arange(n0)]
    cols = [np.arange(n0), n0 + np.arange(n0)]
    vals = [d0, d1]
    # V_-: family 0 -> family 1, target o' = o + s
    for s, c in p.minus_steps():
        tm, tn = mm + (s[0] - 1) // 3, nn + (s[1] - 1) // 3  # (3m + s) = 3 m' + 1
        ok = (np.abs(tm) <= M) & (np.abs(tn) <= M)
        rows.append(n0 + idx(tm[ok], tn[ok]))
        cols.append(np.arange(n0)[ok])
        vals.append(np.full(ok.sum(), alpha * complex(c)))
    # V_+: family 1 -> family 0, target o = o' + s
    for s, c in p.plus_steps():
        tm, tn = mm + (s[0] + 1) // 3, nn + (s[1] + 1) // 3  # (3m + 1 + s) = 3 m'
        ok = (np.abs(tm) <= M) & (np.abs(tn) <= M)
        rows.append(idx(tm[ok], tn[ok]))
        cols.append(n0 + np.arange(n0)[ok])
        vals.append(np.full(ok.sum(), alpha * complex(c)))
    B = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(2 * n0, 2 * n0)
    )
    return B.tocsc()


def smallest_singular_values(B: sp.spmatrix, j: int = 1, tol: float = 1e-12) -> np.ndarray:
    """The j smallest singular values of a square sparse matrix, ascending.

    Uses shift-invert Lanczos on the Hermitian dilation [[0, B], [B*, 0]],
    whose eigenvalues are +-s_i.  The small real shift keeps the factorization
    regular even when B is singular, and unlike iterating on (BB*)^-1 it does
    not let a near-zero s_1 swamp the accuracy of s_2, s_3, ...
    """
    B = sp.csc_matrix(B)
    n = B.shape[0]
    if B.shape != (n, n):
        raise ValueError("B must be square")
    H = sp.bmat([[None, B], [B.getH(), None]], format="csc")
    scale = max(1.0, float(abs(B).max()))
    shift = 1e-7 * scale
    want = min(2 * j + 2, 2 * n - 1)
    if 2 * n <= 200:
        ev = np.linalg.eigvalsh(H.toarray())
    else:
        v0 = np.ones(2 * n, dtype=complex) / math.sqrt(2 * n)
        try:
            ev = spla.eigsh(H, k=want, sigma=shift, which="LM", tol=tol, v0=v0,
                            return_eigenvectors=False, maxiter=5000)
        except spla.ArpackNoConvergence as exc:
            raise RootFindingError("singular value iteration did not converge") from exc
    s = np.sort(np.abs(np.real(ev)))
    # eigenvalues come in pairs +-s_i; keep one of each pair
    return s[0::2][:j]


def band_profile(
    alpha: float, grid: int, num_bands: int = 5, M: int = 30, potential: Optional[Potential] = None
) -> list[tuple[float, float, list[float]]]:
    """Lowest singular values of the truncated B at each grid momentum."""
    if grid < 2 or M < 8:
        raise ValueError("need grid >= 2 and M >= 8")
    out = []
    for k1, k2 in kgrid(grid):
        kappa = _gamma_f(k1, k2)
        s = smallest_singular_values(bloch_operator(alpha, kappa, M, potential), num_bands)
        out.append((k1, k2, [float(v) for v in s]))
    return out


def flat_band_check(alpha: float, grid: int = 5, M: int = 30, potential: Optional[Potential] = None) -> dict:
    prof = band_profile(alpha, grid, 1, M, potential)
    per_k = [(k1, k2, s[0]) for k1, k2, s in prof]
    return {"max_min_singular": max(s for _, _, s in per_k), "per_k": per_k}


def flat_band_alpha(lo: float, hi: float, grid: int = 3, M: int = 20, xtol: float = 1e-6) -> float:
    """Minimize the flat-band metric over alpha in [lo, hi]."""
    res = minimize_scalar(
        lambda a: flat_band_check(a, grid, M)["max_min_singular"],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": xtol},
    )
    return float(res.x)
