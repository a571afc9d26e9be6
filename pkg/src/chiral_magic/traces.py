"""Exact traces sigma_l = tr(A_k^l) = (pi/sqrt3) q_l via residues.

The diagonal entry F_l(k) = <A_k^l e_0, e_0> is a rational function whose
poles sit at k = -gamma_L - mu for prefix-sum labels L = (a, b).  Integrating
the (k-independent) trace along lines parallel to omega^2 and telescoping over
the strips between them gives

    sigma_l = -(2 pi i omega / 9) * sum_L b * Res(F_l, -gamma_L - mu),

using that the residues of each label family sum to zero.  Residues are
computed per pole by pushing a vector of truncated Laurent series through the
2l half-steps of the stencil.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

import numpy as np

from .exactnum import (
    MU,
    OMEGA2,
    ONE,
    ZERO,
    CycloNum,
    LaurentSeries,
    PiPoly,
    gamma,
    rat_to_str,
)
from .model import Index, Potential, Stencil, build_stencil, enumerate_theta

log = logging.getLogger(__name__)

__all__ = [
    "PoleSite",
    "TraceTable",
    "RationalityError",
    "TRACE_SCALE",
    "reachable_sites",
    "candidate_poles",
    "pole_residues",
    "trace_exact",
    "trace_oracle_walks",
    "trace_numeric",
    "sigma1_regularized",
    "trace_T_even",
]

# q = TRACE_SCALE * sum_L b * Res_L ; TRACE_SCALE = -(2/9) * i * omega * sqrt3 = -(2/9)(omega^2 - 1)
TRACE_SCALE = (OMEGA2 - ONE) * Fraction(-2, 9)


class RationalityError(AssertionError):
    """A trace of a real potential came out irrational (implementation bug)."""


@dataclass(frozen=True, order=True)
class PoleSite:
    label: Index
    family: str = field(compare=False)

    @property
    def weight(self) -> int:
        return self.label[1]

    @property
    def location(self) -> CycloNum:
        return -gamma(*self.label) - MU


@dataclass
class TraceTable:
    potential_hash: str
    entries: dict[int, PiPoly] = field(default_factory=dict)
    provenance: dict[int, set] = field(default_factory=dict)

    def add(self, ell: int, value: PiPoly, source: str) -> None:
        old = self.entries.get(ell)
        if old is not None and old != value:
            raise ValueError(f"conflicting values for sigma_{ell}: {old} vs {value} ({source})")
        self.entries[ell] = value
        self.provenance.setdefault(ell, set()).add(source)

    def sigma(self, ell: int) -> PiPoly:
        try:
            return self.entries[ell]
        except KeyError:
            raise KeyError(f"sigma_{ell} missing from trace table") from None

    def missing(self, ells: Iterable[int]) -> list[int]:
        return [l for l in ells if l not in self.entries]

    def q(self, ell: int) -> Fraction:
        return self.sigma(ell).coeff(1)

    def to_json(self) -> dict:
        return {
            "potential_hash": self.potential_hash,
            "entries": {str(l): v.to_json() for l, v in sorted(self.entries.items())},
            "provenance": {str(l): sorted(v) for l, v in sorted(self.provenance.items())},
        }

    @classmethod
    def from_json(cls, data: dict) -> "TraceTable":
        t = cls(data["potential_hash"])
        for l, v in data["entries"].items():
            t.entries[int(l)] = PiPoly.from_json(v)
        for l, v in data.get("provenance", {}).items():
            t.provenance[int(l)] = set(v)
        return t

    @classmethod
    def canonical_table1(cls, potential_hash: str = "") -> "TraceTable":
        """Published exact values q_2..q_8 for the canonical potential."""
        t = cls(potential_hash)
        for ell, q in {
            2: Fraction(4),
            3: Fraction(96, 7),
            4: Fraction(40),
            5: Fraction(28680, 247),
            6: Fraction(2206080, 6517),
            7: Fraction(1957475168, 1983163),
            8: Fraction(39948260880, 13882141),
        }.items():
            t.add(ell, PiPoly.pi(q), "published")
        return t


# --------------------------------------------------------------------------
# Reachability
# --------------------------------------------------------------------------


def reachable_sites(stencil: Stencil, ell: int) -> list[list[Index]]:
    """Sites visited after half-step h (h = 0..2l) by some closed walk, sorted."""
    layers = [stencil.minus if h % 2 == 0 else stencil.plus for h in range(2 * ell)]
    fwd = [{(0, 0)}]
    for h in range(2 * ell):
        fwd.append({(x + s[0], y + s[1]) for (x, y) in fwd[-1] for s, _ in layers[h]})
    bwd = [set() for _ in range(2 * ell + 1)]
    bwd[2 * ell] = {(0, 0)}
    for h in range(2 * ell, 0, -1):
        bwd[h - 1] = {(x - s[0], y - s[1]) for (x, y) in bwd[h] for s, _ in layers[h - 1]}
    return [sorted(fwd[h] & bwd[h]) for h in range(2 * ell + 1)]


def candidate_poles(stencil: Stencil, ell: int, sites=None) -> list[PoleSite]:
    sites = sites if sites is not None else reachable_sites(stencil, ell)
    poles = {}
    for h in range(1, 2 * ell + 1):
        fam = "plus" if h % 2 == 0 else "minus"
        for lab in sites[h]:
            poles[lab] = PoleSite(lab, fam)
    return sorted(poles.values())


# --------------------------------------------------------------------------
# Exact residue engine
# --------------------------------------------------------------------------

_INV_GAMMA: dict[Index, CycloNum] = {}


def _inv_gamma(a: int, b: int) -> CycloNum:
    key = (a, b)
    v = _INV_GAMMA.get(key)
    if v is None:
        v = gamma(a, b).inv()
        _INV_GAMMA[key] = v
    return v


def _series_scale_add(acc: list, c: CycloNum, src: list) -> None:
    for i, x in enumerate(src):
        if x is not ZERO:
            acc[i] = acc[i] + c * x if acc[i] is not ZERO else c * x


def _pole_residue(stencil: Stencil, ell: int, pole: Index, sites: list[list[Index]]) -> CycloNum:
    """Order -1 coefficient of F_l at the pole attached to ``pole``.

    Arrays hold ``ell`` Laurent coefficients; after half-step h index i is the
    order i - V(h), V(h) being the number of half-steps so far that could land
    on the pole.  Orders outside that window cannot reach order -1.
    """
    L = ell
    par = 1 if (pole[0] % 3) == 1 else 0  # half-step parity landing on this label family
    px, py = pole
    state: dict[Index, list] = {(0, 0): [ONE] + [ZERO] * (L - 1)}
    for h in range(1, 2 * ell + 1):
        layer = stencil.minus if h % 2 == 1 else stencil.plus
        visit = (h % 2) == par
        allowed = sites[h]
        new: dict[Index, list] = {}
        for (x, y) in allowed:
            acc = None
            for s, c in layer:
                src = state.get((x - s[0], y - s[1]))
                if src is None:
                    continue
                if acc is None:
                    acc = [ZERO] * L
                _series_scale_add(acc, c, src)
            if acc is None or all(v is ZERO or v.is_zero() for v in acc):
                continue
            if visit and x == px and y == py:
                new[(x, y)] = acc  # times 1/t: window shifts with it
                continue
            inv = _inv_gamma(x - px, y - py)
            out = [ZERO] * L
            prev = ZERO
            if visit:
                for o in range(L - 1):
                    xo = acc[o]
                    if xo is ZERO and prev is ZERO:
                        continue
                    prev = (xo - prev) * inv
                    out[o + 1] = prev
            else:
                for o in range(L):
                    xo = acc[o]
                    if xo is ZERO and prev is ZERO:
                        continue
                    prev = (xo - prev) * inv
                    out[o] = prev
            new[(x, y)] = out
        state = new
    fin = state.get((0, 0))
    return fin[L - 1] if fin is not None else ZERO


def _residue_job(args):
    stencil, ell, pole, sites = args
    return pole, _pole_residue(stencil, ell, pole, sites)


def pole_residues(
    p: Potential, ell: int, *, weighted_only: bool = False, jobs: int = 1
) -> dict[PoleSite, CycloNum]:
    """Residues of F_l at every candidate pole (b = 0 labels skipped if weighted_only)."""
    stencil = build_stencil(p)
    sites = reachable_sites(stencil, ell)
    poles = candidate_poles(stencil, ell, sites)
    if weighted_only:
        poles = [q for q in poles if q.weight != 0]
    work = [(stencil, ell, q.label, sites) for q in poles]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            found = dict(ex.map(_residue_job, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        found = dict(map(_residue_job, work))
    return {q: found[q.label] for q in poles}


def _q_from_residues(residues: dict[PoleSite, CycloNum]) -> CycloNum:
    total = ZERO
    for q in sorted(residues):
        if q.weight:
            total = total + residues[q] * q.weight
    return total * TRACE_SCALE


def _as_pipoly(q: CycloNum, p: Potential) -> PiPoly:
    if p.real:
        if not q.is_rational():
            raise RationalityError(f"trace of a real potential is not rational: {q!r}")
        return PiPoly.pi(q.to_rational())
    return PiPoly([0, q.to_rational() if q.is_rational() else q])


def trace_exact(p: Potential, ell: int, *, jobs: int = 1, backend: str = "rational") -> PiPoly:
    """sigma_l as an exact PiPoly (q_l * Pi).

    ``backend="rational"`` runs the residue engine in Q(zeta_12);
    ``"modular"`` runs the same algorithm over several prime fields and
    reconstructs the rational (real potentials only); ``"auto"`` picks the
    modular backend for l > 8.
    """
    if ell < 2:
        raise ValueError("exact traces need ell >= 2")
    if backend == "auto":
        backend = "modular" if (ell > 8 and p.real) else "rational"
    if backend == "modular":
        from .modular import trace_modular

        return PiPoly.pi(trace_modular(p, ell))
    if backend != "rational":
        raise ValueError(f"unknown backend {backend!r}")
    res = pole_residues(p, ell, weighted_only=True, jobs=jobs)
    return _as_pipoly(_q_from_residues(res), p)


# --------------------------------------------------------------------------
# Per-walk oracle
# --------------------------------------------------------------------------


def trace_oracle_walks(p: Potential, ell: int) -> PiPoly:
    """sigma_l from literal per-walk partial fractions (small l only)."""
    if not 2 <= ell <= 4:
        raise ValueError("trace_oracle_walks is limited to 2 <= ell <= 4")
    stencil = build_stencil(p)
    total = ZERO
    for walk in enumerate_theta(ell, stencil):
        mult: dict[Index, int] = defaultdict(int)
        for lab in walk.labels:
            mult[lab] += 1
        for lab in sorted(mult):
            if lab[1] == 0:
                continue
            m = mult[lab]
            pole = -gamma(*lab) - MU
            series = LaurentSeries(-m, [ONE], m - 1)
            for other, mo in mult.items():
                if other == lab:
                    continue
                factor = LaurentSeries.simple_pole(-gamma(*other) - MU, pole, m - 1)
                for _ in range(mo):
                    series = series * factor
            total = total + series.residue() * walk.coeff * lab[1]
    return _as_pipoly(total * TRACE_SCALE, p)


# --------------------------------------------------------------------------
# Floating point cross-checks
# --------------------------------------------------------------------------


def trace_numeric(p: Potential, ell: int, k: complex, M: int) -> complex:
    """tr((P_M A_k P_M)^l) for the window |m|,|n| <= M."""
    from .spectra import materialize

    if ell < 2:
        raise ValueError("ell must be >= 2")
    if M < 4 * ell:
        raise ValueError("window radius must satisfy M >= 4*ell")
    op = materialize(build_stencil(p), k, M, min_pole_distance=1e-3)
    A = op.matrix
    P = A.copy()
    for _ in range(ell - 1):
        P = P @ A
    return complex(P.diagonal().sum())


def _diag_entries(p: Potential, k: complex, M: int) -> np.ndarray:
    stencil = build_stencil(p)
    m, n = np.meshgrid(np.arange(-M, M + 1), np.arange(-M, M + 1), indexing="ij")
    w = np.exp(2j * np.pi / 3)
    mu = w * w - w

    def lam(ox, oy):
        return 1.0 / (k + w * w * ox - w * oy + mu)

    ox, oy = 3 * m, 3 * n
    out = np.zeros(m.shape, dtype=complex)
    for t in stencil.terms:
        if t.net_shift != (0, 0):
            continue
        f = t.first_offset
        out += complex(t.coeff) * lam(ox, oy) * lam(ox + f[0], oy + f[1])
    return out


def sigma1_regularized(p: Potential, n_max: int, k: complex = 0.1 + 0.2j) -> list[complex]:
    """Partial sums of <A_k e_i, e_i> over square windows |i|_inf <= n, n = 1..n_max."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if len(p) == 0:
        return [0j] * n_max
    diag = _diag_entries(p, k, n_max)
    c = n_max
    radius = np.maximum(np.abs(np.arange(-c, c + 1))[:, None], np.abs(np.arange(-c, c + 1))[None, :])
    shell = np.bincount(radius.ravel(), weights=diag.real.ravel(), minlength=c + 1) + 1j * np.bincount(
        radius.ravel(), weights=diag.imag.ravel(), minlength=c + 1
    )
    partial = np.cumsum(shell)
    return [complex(v) for v in partial[1:]]


def trace_T_even(p: Potential, two_ell: int, **kw) -> PiPoly:
    """tr(T_k^{2l}) on the two-component space: twice tr(A_k^l)."""
    if two_ell % 2 or two_ell < 4:
        raise ValueError("trace_T_even needs an even power >= 4 (odd traces vanish)")
    return trace_exact(p, two_ell // 2, **kw) * 2


def q_string(v: PiPoly) -> str:
    return rat_to_str(v.coeff(1))


def engine_name(p: Potential, ell: int, backend: str = "auto") -> str:
    if backend == "auto":
        backend = "modular" if (ell > 8 and p.real) else "rational"
    return "residue" if backend == "rational" else "residue-modular"


def compute_table(
    p: Potential,
    ells: Iterable[int],
    *,
    jobs: int = 1,
    backend: str = "auto",
    cache=None,
    table: Optional[TraceTable] = None,
) -> TraceTable:
    """Fill a TraceTable for the requested orders, consulting ``cache`` first.

    ``cache`` is any object with ``lookup(digest, ell) -> (PiPoly, source) | None``
    and ``store(digest, ell, value, source)``.
    """
    digest = p.digest()
    table = table if table is not None else TraceTable(digest)
    for ell in sorted(set(ells)):
        if ell in table.entries:
            continue
        hit = cache.lookup(digest, ell) if cache is not None else None
        if hit is not None:
            table.add(ell, hit[0], hit[1])
            continue
        value = trace_exact(p, ell, jobs=jobs, backend=backend)
        source = engine_name(p, ell, backend)
        table.add(ell, value, source)
        if cache is not None:
            cache.store(digest, ell, value, source)
    return table


def bundled_table(p: Potential) -> Optional[TraceTable]:
    """Shipped exact traces for the canonical potential (None for other potentials)."""
    import json
    from importlib import resources

    try:
        data = json.loads(resources.files(__package__).joinpath("data/canonical_traces.json").read_text())
    except (OSError, ValueError):
        return None
    if data.get("potential_hash") != p.digest():
        return None
    return TraceTable.from_json(data)
