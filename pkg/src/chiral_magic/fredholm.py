"""Regularized determinant det_2(1 - alpha^2 A) and the first-magic-angle certificate.

Conventions: with beta = alpha^2,

    det_2(1 - beta A) = exp(-sum_{j>=2} sigma_j beta^j / j) = sum_j mu_j (-beta)^j / j!,

so mu_0 = 1, mu_1 = 0, mu_2 = -sigma_2, mu_3 = 2 sigma_3.  All algebra is done
on exact polynomials in Pi = pi/sqrt(3); pi enters only when an inequality is
finally checked, through a rational enclosure.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .exactnum import (
    PI_OVER_SQRT3,
    CycloNum,
    PiPoly,
    RatInterval,
    gamma,
    pipoly_eval,
    rat_from_str,
    rat_to_str,
)
from .model import Potential, build_stencil, canonical_potential
from .traces import TraceTable

log = logging.getLogger(__name__)

__all__ = [
    "DetPoly",
    "HsReport",
    "Certificate",
    "MissingTraceError",
    "TailDivergenceError",
    "plemelj_smithies",
    "plemelj_smithies_det",
    "newton_elementary",
    "det2_taylor",
    "tail_bound",
    "tail_bound_closed_form",
    "hs_window_sum",
    "hs_norm_certified",
    "g_main_sum",
    "schatten4_factor",
    "certify_first_magic",
    "recheck_certificate",
]

PI = RatInterval(
    Fraction("3.14159265358979323846264338327950288"),
    Fraction("3.14159265358979323846264338327950289"),
)
E = RatInterval(Fraction("2.71828182845904523536028747135266249"), Fraction("2.7182818284590452353602874713526625"))

HS_CAP = Fraction(11, 2)
TAIL_CONSTANT = Fraction(213, 10)


class MissingTraceError(KeyError):
    def __init__(self, missing: Sequence[int]):
        self.missing = list(missing)
        super().__init__(f"trace table lacks sigma_l for l = {self.missing}")


class TailDivergenceError(ValueError):
    pass


# --------------------------------------------------------------------------
# Rational roots
# --------------------------------------------------------------------------


def sqrt_up(x: Fraction, bits: int = 96) -> Fraction:
    """Rational upper bound for sqrt(x), x >= 0."""
    x = Fraction(x)
    if x < 0:
        raise ValueError("negative radicand")
    s = 1 << bits
    r = math.isqrt(x.numerator * s * s // x.denominator)
    return Fraction(r + 1, s)


def sqrt_down(x: Fraction, bits: int = 96) -> Fraction:
    x = Fraction(x)
    s = 1 << bits
    return Fraction(math.isqrt(x.numerator * s * s // x.denominator), s)


def root4_up(x: Fraction, bits: int = 96) -> Fraction:
    return sqrt_up(sqrt_up(x, bits + 8), bits)


def root4_down(x: Fraction, bits: int = 96) -> Fraction:
    return sqrt_down(sqrt_down(x, bits + 8), bits)


# --------------------------------------------------------------------------
# Taylor coefficients
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DetPoly:
    """Truncated Taylor data of det_2(1 - alpha^2 A): mu_0 .. mu_n."""

    mu: tuple[PiPoly, ...]

    def __post_init__(self):
        if self.mu[0] != PiPoly.const(1):
            raise ValueError("mu_0 must be 1")
        if len(self.mu) > 1 and self.mu[1] != PiPoly():
            raise ValueError("mu_1 must vanish")

    @property
    def n(self) -> int:
        return len(self.mu) - 1

    def beta_coeffs(self, upto: Optional[int] = None) -> list[PiPoly]:
        """c_j with det_2 = sum_j c_j beta^j, c_j = mu_j (-1)^j / j!."""
        upto = self.n if upto is None else upto
        return [self.mu[j] * Fraction((-1) ** j, math.factorial(j)) for j in range(upto + 1)]

    def value_poly(self, alpha: Fraction, upto: Optional[int] = None) -> PiPoly:
        beta = Fraction(alpha) ** 2
        out = PiPoly()
        for j, c in enumerate(self.beta_coeffs(upto)):
            out = out + c * beta ** j
        return out

    def evaluate(self, alpha, upto: Optional[int] = None, pi: RatInterval = PI_OVER_SQRT3) -> RatInterval:
        return pipoly_eval(self.value_poly(Fraction(alpha), upto), pi)

    def float_beta_coeffs(self) -> np.ndarray:
        return np.array([float(c) for c in self.beta_coeffs()])

    def to_json(self) -> list:
        return [m.to_json() for m in self.mu]

    @classmethod
    def from_json(cls, data) -> "DetPoly":
        return cls(tuple(PiPoly.from_json(m) for m in data))


def _sigma_lookup(sigma) -> dict[int, PiPoly]:
    if isinstance(sigma, TraceTable):
        return dict(sigma.entries)
    if isinstance(sigma, dict):
        return {int(k): v for k, v in sigma.items()}
    # list indexed 2..n
    return {j + 2: v for j, v in enumerate(sigma)}


def plemelj_smithies(sigma, n: Optional[int] = None) -> DetPoly:
    """mu_0..mu_n from sigma_2..sigma_n (sigma_1 is dropped by the regularization).

    Uses the recursion mu_j = sum_{i=2}^j (-1)^(i-1) sigma_i mu_{j-i} (j-1)!/(j-i)!,
    which is the cofactor expansion of the Plemelj-Smithies determinant.
    """
    s = _sigma_lookup(sigma)
    n = max(s, default=1) if n is None else n
    missing = [j for j in range(2, n + 1) if j not in s]
    if missing:
        raise MissingTraceError(missing)
    mu = [PiPoly.const(1), PiPoly()]
    for j in range(2, n + 1):
        acc = PiPoly()
        for i in range(2, j + 1):
            ratio = Fraction(math.factorial(j - 1), math.factorial(j - i))
            acc = acc + s[i] * mu[j - i] * (ratio * (-1) ** (i - 1))
        mu.append(acc)
    return DetPoly(tuple(mu[: n + 1]))


def plemelj_smithies_det(sigma, j: int) -> PiPoly:
    """mu_j as the literal j x j determinant (Laplace expansion, for testing)."""
    s = _sigma_lookup(sigma)
    s[1] = PiPoly()
    if j == 0:
        return PiPoly.const(1)

    def entry(r: int, c: int) -> PiPoly:
        if c == r + 1:
            return PiPoly.const(j - 1 - r)
        if c <= r:
            return s[r - c + 1]
        return PiPoly()

    @lru_cache(maxsize=None)
    def minor(row: int, cols: frozenset) -> PiPoly:
        if row == j:
            return PiPoly.const(1)
        out = PiPoly()
        for pos, c in enumerate(sorted(cols)):
            e = entry(row, c)
            if e == PiPoly():
                continue
            term = e * minor(row + 1, cols - {c})
            out = out + (term if pos % 2 == 0 else -term)
        return out

    return minor(0, frozenset(range(j)))


def newton_elementary(power_sums: Sequence, N: int) -> list:
    """e_1..e_N from power sums p_1..p_N via Newton's identities."""
    p = list(power_sums)
    if len(p) < N:
        raise ValueError(f"need {N} power sums, got {len(p)}")
    zero = p[0] * 0 if p else 0
    e = [zero + 1]
    for k in range(1, N + 1):
        acc = zero
        for i in range(1, k + 1):
            term = e[k - i] * p[i - 1]
            acc = acc + (term if i % 2 == 1 else -term)
        e.append(acc / k)
    return e[1:]


def det2_taylor(table: TraceTable, n: int) -> DetPoly:
    missing = table.missing(range(2, n + 1))
    if missing:
        raise MissingTraceError(missing)
    return plemelj_smithies({j: table.sigma(j) for j in range(2, n + 1)}, n)


# --------------------------------------------------------------------------
# Tail bounds
# --------------------------------------------------------------------------


def _ratio_upper(N: int, hs: Fraction, alpha: Fraction, e_upper: Fraction = E.hi) -> Fraction:
    """Upper bound for x = sqrt(e) hs alpha^2 / sqrt(N)."""
    return sqrt_up(e_upper * hs * hs * alpha ** 4 / N)


def tail_bound(N: int, m: int, hs, alpha, e_upper: Fraction = E.hi) -> RatInterval:
    """Enclosure [0, U] of sum_{j>=N} d^m/d|alpha|^m (sqrt(e) hs alpha^2 / sqrt(j))^j.

    With x = sqrt(e) hs alpha^2 / sqrt(N) < 1 every term is dominated by x^j, so
    r_0 <= x^N/(1-x) and r_1 <= (2/alpha) sum_{j>=N} j x^j
                              = (2/alpha) x^N (N/(1-x) + x/(1-x)^2).
    """
    if m not in (0, 1):
        raise ValueError("derivative order must be 0 or 1")
    hs, alpha = Fraction(hs), Fraction(alpha)
    if alpha == 0:
        return RatInterval(0, 0)
    x = _ratio_upper(N, hs, abs(alpha), e_upper)
    if x >= 1:
        raise TailDivergenceError(f"sqrt(e)*hs*alpha^2 = {float(x) * math.sqrt(N):.4f} >= sqrt({N})")
    head = x ** N
    if m == 0:
        return RatInterval(0, head / (1 - x))
    return RatInterval(0, 2 / abs(alpha) * head * (N / (1 - x) + x / (1 - x) ** 2))


def tail_bound_closed_form(N: int, m: int, hs, alpha) -> RatInterval:
    """The single-term geometric expression (2 nu/alpha)^m (nu/sqrt N)^(N-m) / (1 - nu/sqrt N).

    For m = 0 this equals ``tail_bound``; for m = 1 it omits the growing factor j
    and is not an upper bound for the derivative tail.  Kept for comparison.
    """
    hs, alpha = Fraction(hs), Fraction(alpha)
    if alpha == 0:
        return RatInterval(0, 0)
    x = _ratio_upper(N, hs, alpha)
    if x >= 1:
        raise TailDivergenceError("geometric domination fails")
    nu = x * sqrt_up(Fraction(N))
    return RatInterval(0, (2 * nu / alpha) ** m * x ** (N - m) / (1 - x))


# --------------------------------------------------------------------------
# Hilbert-Schmidt norm of A_0
# --------------------------------------------------------------------------


def g_value(m1: int, m2: int) -> Fraction:
    return Fraction(3 * ((m1 + 1) ** 2 + (m2 + 1) ** 2 + (m1 + m2) ** 2), 2) - 2


def g_main_sum(radius: int = 6) -> Fraction:
    """Exact sum of 1/g(m)^2 over |m|_inf <= radius."""
    return sum(
        (1 / g_value(a, b) ** 2 for a in range(-radius, radius + 1) for b in range(-radius, radius + 1)),
        Fraction(0),
    )


def schatten4_factor() -> RatInterval:
    """Enclosure of (8/21 + pi/549)^(1/4) = (1/sqrt3) (24/7 + pi/61)^(1/4)."""
    lo = Fraction(8, 21) + PI.lo / 549
    hi = Fraction(8, 21) + PI.hi / 549
    return RatInterval(root4_down(lo), root4_up(hi))


def operator_norm_bound(p: Optional[Potential] = None) -> Fraction:
    """||A_0|| <= ||V_+|| ||V_-|| / min |Lambda^-1|^2; gives 9 for the canonical potential."""
    p = p or canonical_potential()
    # ||V|| <= sum |c| and (sum |c|)^2 <= count * sum |c|^2
    sq = Fraction(len(p.plus_steps())) * sum(((c * c.conj()).to_rational() for _, c in p.plus_steps()), Fraction(0))
    sq *= Fraction(len(p.minus_steps())) * sum(((c * c.conj()).to_rational() for _, c in p.minus_steps()), Fraction(0))
    root = math.isqrt(sq.numerator // sq.denominator) if sq.denominator == 1 else None
    vv = Fraction(root) if root is not None and root * root == sq else sqrt_up(sq)
    # both site families have min |gamma + mu|^2 = 3
    return vv / 3


def _window_offsets(M: int):
    r = np.arange(-M, M + 1)
    m, n = np.meshgrid(r, r, indexing="ij")
    return 3 * m.ravel(), 3 * n.ravel()


def _net_groups(p: Potential):
    groups: dict = {}
    for t in build_stencil(p).terms:
        groups.setdefault(t.net_shift, []).append(t)
    return [groups[k] for k in sorted(groups)]


def _norm_int(a, b):
    return a * a + a * b + b * b


def hs_window_sum(M: int, mode: str = "dyadic", p: Optional[Potential] = None) -> RatInterval:
    """Enclosure of ||P_M A_0||_2^2, rows over (3{-M..M}+1)^2.

    ``exact`` sums every entry in Q(zeta_12).  ``dyadic`` evaluates in double
    precision and widens by a rigorous a-priori rounding-error bound.
    """
    p = p or canonical_potential()
    groups = _net_groups(p)
    if mode == "exact":
        total = Fraction(0)
        for x, y in zip(*_window_offsets(M)):
            x, y = int(x), int(y)
            lam_t = gamma(x + 1, y + 1).inv()
            for grp in groups:
                z = CycloNum(0)
                for t in grp:
                    net, first = t.net_shift, t.first_offset
                    mx, my = x - net[0] + first[0], y - net[1] + first[1]
                    z = z + t.coeff * gamma(mx + 1, my + 1).inv()
                z = z * lam_t
                total += (z * z.conj()).to_rational()
        return RatInterval.point(total)
    if mode != "dyadic":
        raise ValueError(f"unknown mode {mode!r}")
    x, y = _window_offsets(M)
    w = complex(-0.5, math.sqrt(3) / 2)
    w2 = w.conjugate()
    nt = _norm_int(x + 1, y + 1).astype(np.float64)
    rows = np.zeros(x.shape, dtype=np.float64)
    absrows = np.zeros(x.shape, dtype=np.float64)
    for grp in groups:
        z = np.zeros(x.shape, dtype=np.complex128)
        za = np.zeros(x.shape, dtype=np.float64)
        for t in grp:
            net, first = t.net_shift, t.first_offset
            a = x - net[0] + first[0] + 1
            b = y - net[1] + first[1] + 1
            g = w2 * a - w * b
            c = complex(t.coeff)
            z += c / g
            za += abs(c) / np.sqrt(_norm_int(a, b).astype(np.float64))
        rows += (z.real ** 2 + z.imag ** 2) / nt
        absrows += za * za / nt
    u = 2.0 ** -53
    n = rows.size
    # each row carries < 64 roundings relative to its absolute majorant
    per_row = 64 * u / (1 - 64 * u)
    s = math.fsum(rows.tolist())
    a = math.fsum(absrows.tolist())
    slack = Fraction(per_row) * Fraction(a) * (1 + Fraction(4 * u)) + Fraction(s) * Fraction(4 * u)
    return RatInterval(max(Fraction(0), Fraction(s) - slack), Fraction(s) + slack)


@dataclass(frozen=True)
class HsReport:
    M: int
    window_norm_sq: RatInterval
    tail_bound: RatInterval
    total: Fraction
    tail_factor: RatInterval
    main_sum: Fraction
    mode: str = "dyadic"

    @property
    def window_norm_upper(self) -> Fraction:
        return sqrt_up(self.window_norm_sq.hi, 64)

    def to_json(self) -> dict:
        return {
            "M": self.M,
            "mode": self.mode,
            "window_norm_sq": self.window_norm_sq.to_json(),
            "window_norm_upper": rat_to_str(self.window_norm_upper),
            "tail_bound": self.tail_bound.to_json(),
            "total": rat_to_str(self.total),
            "tail_factor": self.tail_factor.to_json(),
            "main_sum": rat_to_str(self.main_sum),
        }

    @classmethod
    def from_json(cls, d: dict) -> "HsReport":
        return cls(
            M=d["M"],
            window_norm_sq=RatInterval.from_json(d["window_norm_sq"]),
            tail_bound=RatInterval.from_json(d["tail_bound"]),
            total=rat_from_str(d["total"]),
            tail_factor=RatInterval.from_json(d["tail_factor"]),
            main_sum=rat_from_str(d["main_sum"]),
            mode=d.get("mode", "dyadic"),
        )


def hs_tail(M: int) -> RatInterval:
    """(213/10)(1/sqrt3)(int_M^inf 2 pi r/(r^2+(M-1)^2)^2 dr)^(1/4), the integral being pi/(M^2+(M-1)^2)."""
    q = TAIL_CONSTANT ** 4 / 9 * PI.hi / (M * M + (M - 1) ** 2)
    return RatInterval(0, root4_up(q, 64))


def hs_norm_certified(M: int = 760, mode: str = "dyadic") -> HsReport:
    """Certified upper bound on ||A_0||_2 for the canonical potential."""
    if M < 1:
        raise ValueError("M must be >= 1")
    window = hs_window_sum(M, mode)
    tail = hs_tail(M)
    wn = sqrt_up(window.hi, 64)
    total = wn + tail.hi
    # keep the certificate compact: round up to a 10^-12 grid
    total = Fraction(math.ceil(total * 10**12), 10**12)
    factor = schatten4_factor() * 27
    return HsReport(M, window, tail, total, factor, g_main_sum(), mode)


# --------------------------------------------------------------------------
# Certificate
# --------------------------------------------------------------------------

ALPHA_LEFT = Fraction(583, 1000)
ALPHA_RIGHT = Fraction(589, 1000)
ALPHA_LOW = Fraction(1, 3)
ALPHA_HIGH = Fraction(3, 5)
F_MARGIN = Fraction(1, 40)
G_LIMIT = Fraction(-7, 10)
R0_LIMIT = Fraction(1, 50)
R1_LIMIT = Fraction(1, 2)
WINDOW_LIMIT = Fraction(5)


def _g_majorant(mu: Sequence[PiPoly], order: int, pi: RatInterval) -> RatInterval:
    """Upper bound of sum_{k=2}^{order} d/dalpha [mu_k (-alpha^2)^k / k!] on (1/3, 3/5)."""
    total = RatInterval.point(0)
    for k in range(2, order + 1):
        c = pipoly_eval(mu[k] * (-1) ** k, pi)
        scale = Fraction(2, math.factorial(k - 1))
        at_low = c * (scale * ALPHA_LOW ** (2 * k - 1))
        at_high = c * (scale * ALPHA_HIGH ** (2 * k - 1))
        if c.hi < 0:
            a = at_low
        elif c.lo >= 0:
            a = at_high
        else:
            a = RatInterval(min(at_low.lo, at_high.lo), max(at_low.hi, at_high.hi))
        total = total + a
    return total


@dataclass
class Certificate:
    hs_window_bound: RatInterval  # enclosure of ||P_M A_0||_2^2
    hs_total_bound: Fraction
    taylor_order: int
    tail_N: int
    g_order: int
    tail_r0: RatInterval
    tail_r1: RatInterval
    f_left: RatInterval
    f_right: RatInterval
    g_bound: RatInterval
    interval: tuple[Fraction, Fraction]
    verdict: bool
    failures: list[str] = field(default_factory=list)
    mu: list[PiPoly] = field(default_factory=list)
    hs_used: Fraction = HS_CAP
    pi_over_sqrt3: RatInterval = PI_OVER_SQRT3
    e_upper: Fraction = E.hi
    alpha_floor: Fraction = ALPHA_LOW
    M: int = 760
    note: str = (
        "certifies a simple eigenvalue 1/alpha*^2 of A_k on the scalar space; "
        "the Hamiltonian doubles its multiplicity"
    )

    def checks(self) -> list[tuple[str, bool, str]]:
        """(name, passed, statement) for every inequality the verdict depends on."""
        wn = sqrt_up(self.hs_window_bound.hi, 64)
        return [
            ("window_norm", wn <= WINDOW_LIMIT, f"||P_M A_0||_2 <= {rat_to_str(wn)} <= 5"),
            ("hs_total", self.hs_total_bound <= HS_CAP, f"||A_0||_2 <= {rat_to_str(self.hs_total_bound)} <= 11/2"),
            ("f_left", self.f_left.lo > F_MARGIN, "f(583/1000) > 1/40"),
            ("f_right", self.f_right.hi < -F_MARGIN, "f(589/1000) < -1/40"),
            ("g", self.g_bound.hi < G_LIMIT, "g(3/5) < -7/10"),
            ("r0", self.tail_r0.hi <= R0_LIMIT, f"r_0(N={self.tail_N}) <= 1/50"),
            ("r1", self.tail_r1.hi <= R1_LIMIT, f"r_1(N={self.tail_N}) <= 1/2"),
        ]

    def to_json(self) -> dict:
        return {
            "hs_window_bound": self.hs_window_bound.to_json(),
            "hs_total_bound": rat_to_str(self.hs_total_bound),
            "taylor_order": self.taylor_order,
            "tail_N": self.tail_N,
            "g_order": self.g_order,
            "tail_r0": self.tail_r0.to_json(),
            "tail_r1": self.tail_r1.to_json(),
            "f_left": self.f_left.to_json(),
            "f_right": self.f_right.to_json(),
            "g_bound": self.g_bound.to_json(),
            "interval": [rat_to_str(self.interval[0]), rat_to_str(self.interval[1])],
            "verdict": self.verdict,
            "failures": list(self.failures),
            "mu": [m.to_json() for m in self.mu],
            "hs_used": rat_to_str(self.hs_used),
            "pi_over_sqrt3": self.pi_over_sqrt3.to_json(),
            "e_upper": rat_to_str(self.e_upper),
            "alpha_floor": rat_to_str(self.alpha_floor),
            "M": self.M,
            "note": self.note,
            "inequalities": [{"name": n, "holds": ok, "statement": s} for n, ok, s in self.checks()],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Certificate":
        return cls(
            hs_window_bound=RatInterval.from_json(d["hs_window_bound"]),
            hs_total_bound=rat_from_str(d["hs_total_bound"]),
            taylor_order=d["taylor_order"],
            tail_N=d["tail_N"],
            g_order=d["g_order"],
            tail_r0=RatInterval.from_json(d["tail_r0"]),
            tail_r1=RatInterval.from_json(d["tail_r1"]),
            f_left=RatInterval.from_json(d["f_left"]),
            f_right=RatInterval.from_json(d["f_right"]),
            g_bound=RatInterval.from_json(d["g_bound"]),
            interval=(rat_from_str(d["interval"][0]), rat_from_str(d["interval"][1])),
            verdict=bool(d["verdict"]),
            failures=list(d.get("failures", [])),
            mu=[PiPoly.from_json(m) for m in d.get("mu", [])],
            hs_used=rat_from_str(d["hs_used"]),
            pi_over_sqrt3=RatInterval.from_json(d["pi_over_sqrt3"]),
            e_upper=rat_from_str(d["e_upper"]),
            alpha_floor=rat_from_str(d["alpha_floor"]),
            M=d.get("M", 760),
            note=d.get("note", ""),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _evaluate(mu, taylor_n, g_order, tail_N, hs_used, pi, e_upper):
    det = DetPoly(tuple(mu))
    f_left = det.evaluate(ALPHA_LEFT, taylor_n, pi)
    f_right = det.evaluate(ALPHA_RIGHT, taylor_n, pi)
    g = _g_majorant(mu, g_order, pi)
    r0 = tail_bound(tail_N, 0, hs_used, ALPHA_HIGH, e_upper)
    r1 = tail_bound(tail_N, 1, hs_used, ALPHA_HIGH, e_upper)
    return f_left, f_right, g, r0, r1


def certify_first_magic(
    table: TraceTable,
    hs: HsReport,
    *,
    taylor_n: int = 20,
    tail_N: int = 21,
    g_order: int = 20,
) -> Certificate:
    """Integer-checkable proof that det_2(1 - alpha^2 A) has exactly one simple zero in (0.583, 0.589)
    and none in (0, 0.583].

    The tails r_0, r_1 are evaluated at alpha = 3/5 (they increase with alpha),
    so ``tail_N`` may not exceed the first omitted order of either sum.
    """
    if tail_N > min(taylor_n, g_order) + 1:
        raise ValueError("tail_N must be <= min(taylor_n, g_order) + 1 for the tails to cover the omitted terms")
    top = max(taylor_n, g_order)
    missing = table.missing(range(2, top + 1))
    if missing:
        raise MissingTraceError(missing)
    mu = list(det2_taylor(table, top).mu)
    failures: list[str] = []
    try:
        f_left, f_right, g, r0, r1 = _evaluate(mu, taylor_n, g_order, tail_N, HS_CAP, PI_OVER_SQRT3, E.hi)
    except TailDivergenceError as exc:
        raise ValueError(str(exc)) from exc
    cert = Certificate(
        hs_window_bound=hs.window_norm_sq,
        hs_total_bound=hs.total,
        taylor_order=taylor_n,
        tail_N=tail_N,
        g_order=g_order,
        tail_r0=r0,
        tail_r1=r1,
        f_left=f_left,
        f_right=f_right,
        g_bound=g,
        interval=(ALPHA_LEFT, ALPHA_RIGHT),
        verdict=False,
        mu=mu,
        M=hs.M,
    )
    failures = [name for name, ok, _ in cert.checks() if not ok]
    cert.failures = failures
    cert.verdict = not failures
    return cert


def recheck_certificate(cert: Certificate) -> tuple[bool, list[str]]:
    """Recompute every stored quantity from the stored rationals and re-derive the verdict.

    Returns (verdict, problems); problems lists mismatches between stored and
    recomputed enclosures as well as failed inequalities.
    """
    problems: list[str] = []
    if len(cert.mu) < max(cert.taylor_order, cert.g_order) + 1:
        return False, ["certificate lacks Taylor coefficients"]
    try:
        DetPoly(tuple(cert.mu))
    except ValueError as exc:
        return False, [str(exc)]
    if cert.tail_N > min(cert.taylor_order, cert.g_order) + 1:
        problems.append("tail_N does not cover the omitted Taylor orders")
    from .traces import bundled_table

    shipped = bundled_table(canonical_potential())
    n = len(cert.mu) - 1
    if shipped is not None and not shipped.missing(range(2, n + 1)):
        if list(det2_taylor(shipped, n).mu) != list(cert.mu):
            problems.append("Taylor coefficients disagree with the shipped exact traces")
    if not machin_contains(cert.pi_over_sqrt3):
        problems.append("stored pi/sqrt(3) enclosure is wrong")
    if cert.e_upper < E.lo:
        problems.append("stored upper bound for e is too small")
    f_left, f_right, g, r0, r1 = _evaluate(
        cert.mu, cert.taylor_order, cert.g_order, cert.tail_N, cert.hs_used, cert.pi_over_sqrt3, cert.e_upper
    )
    for name, new, old in (
        ("f_left", f_left, cert.f_left),
        ("f_right", f_right, cert.f_right),
        ("g_bound", g, cert.g_bound),
        ("tail_r0", r0, cert.tail_r0),
        ("tail_r1", r1, cert.tail_r1),
    ):
        if new != old:
            problems.append(f"{name} does not match its recomputation")
    if cert.hs_used < cert.hs_total_bound:
        problems.append("tails use a Hilbert-Schmidt bound below the certified one")
    failed = [name for name, ok, _ in cert.checks() if not ok]
    problems.extend(f"inequality {n} fails" for n in failed)
    verdict = not problems
    if verdict != cert.verdict:
        problems.append("stored verdict disagrees with recomputation")
    return verdict and not problems, problems


def machin_contains(enc: RatInterval) -> bool:
    """True if ``enc`` contains pi/sqrt(3) (checked against an independent Machin enclosure)."""
    from .exactnum import machin_pi_over_sqrt3

    m = machin_pi_over_sqrt3(45)
    return enc.lo <= m.lo and m.hi <= enc.hi
