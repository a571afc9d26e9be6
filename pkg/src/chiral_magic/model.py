"""Discrete model: potentials, the Fourier stencil of A_k and closed walks.

Rectangular Fourier coordinates are used throughout.  A potential mode with
index n = (n1, n2) is the exponential e^{i j.y} of V_+(y) = V(y) with
frequency ``j = rect_shift(n) = (3 n1 - 1, -3 n2 - 1)``; V_-(y) = V(-y) carries
the negated frequencies with the same coefficients.  The operator

    A_k = D_k^-1 V_+ D_k^-1 V_-

acts on l^2 of the sublattice (3Z+1)^2; the diagonal resolvent at full site
j = (j1, j2) is 1 / (k + gamma_j) with gamma_j = omega^2 j1 - omega j2.  A site
is addressed by its offset o from the origin (1, 1), so the resolvent there is
1 / (k + gamma_o + mu), mu = omega^2 - omega.
"""

from __future__ import annotations

import hashlib
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterator, Mapping

from .exactnum import (
    MU,
    OMEGA,
    OMEGA2,
    ONE,
    SQRT3,
    CycloNum,
    gamma,
)

Index = tuple[int, int]

__all__ = [
    "InconsistentPotentialError",
    "PoleError",
    "Potential",
    "LatticeSite",
    "CompositeTerm",
    "Stencil",
    "Walk",
    "orbit_next",
    "orbit_prev",
    "reality_partner",
    "rect_shift",
    "canonical_potential",
    "symmetry_complete",
    "build_stencil",
    "lambda_value",
    "enumerate_theta",
    "count_closed_walks_dp",
    "hex_distance",
]


class InconsistentPotentialError(ValueError):
    """Symmetry relations force two different values on one Fourier index."""


class PoleError(ZeroDivisionError):
    """The spectral parameter sits on a pole of the resolvent."""


def orbit_next(n: Index) -> Index:
    """n -> (-n2, n1 - n2 - 1); c_n = omega * c_{orbit_next(n)}."""
    return (-n[1], n[0] - n[1] - 1)


def orbit_prev(n: Index) -> Index:
    """Inverse of :func:`orbit_next`; c_n = omega^2 * c_{orbit_prev(n)}."""
    return (n[1] - n[0] + 1, -n[0])


def reality_partner(n: Index) -> Index:
    """For real potentials conj(c_n) = c_{reality_partner(n)}."""
    return (-n[1], -n[0])


def rect_shift(n: Index) -> Index:
    return (3 * n[0] - 1, -3 * n[1] - 1)


@dataclass(frozen=True)
class Potential:
    """Finite Fourier potential with cyclotomic coefficients."""

    modes: Mapping[Index, CycloNum]
    real: bool = False

    def __post_init__(self):
        clean = {tuple(map(int, n)): CycloNum.coerce(c) for n, c in self.modes.items()}
        clean = {n: c for n, c in sorted(clean.items()) if not c.is_zero()}
        object.__setattr__(self, "modes", clean)

    def __len__(self) -> int:
        return len(self.modes)

    def orbit_violations(self) -> list[str]:
        bad = []
        for n, c in self.modes.items():
            nxt = self.modes.get(orbit_next(n))
            prv = self.modes.get(orbit_prev(n))
            if nxt is None or c != OMEGA * nxt:
                bad.append(f"c{n} != omega * c{orbit_next(n)}")
            if prv is None or c != OMEGA2 * prv:
                bad.append(f"c{n} != omega^2 * c{orbit_prev(n)}")
            if self.real:
                partner = self.modes.get(reality_partner(n))
                if partner is None or c.conj() != partner:
                    bad.append(f"conj(c{n}) != c{reality_partner(n)}")
        return bad

    def is_symmetric(self) -> bool:
        return not self.orbit_violations()

    def plus_steps(self) -> list[tuple[Index, CycloNum]]:
        """Shifts of V_+ (applied second in each A_k factor)."""
        return [(rect_shift(n), c) for n, c in self.modes.items()]

    def minus_steps(self) -> list[tuple[Index, CycloNum]]:
        """Shifts of V_- (applied first in each A_k factor)."""
        out = []
        for n, c in self.modes.items():
            j = rect_shift(n)
            out.append(((-j[0], -j[1]), c))
        return out

    def max_step_norm(self) -> int:
        return max((max(abs(j[0]), abs(j[1])) for j, _ in self.plus_steps()), default=0)

    def to_json(self) -> dict:
        return {
            "modes": [{"n": list(n), "c": c.to_json()} for n, c in self.modes.items()],
            "complete_symmetry": True,
            "real": self.real,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Potential":
        """Parse the potential file format; completes and validates symmetry."""
        if not isinstance(data, dict) or "modes" not in data:
            raise ValueError("potential file needs a 'modes' list")
        seed = {}
        for entry in data["modes"]:
            n = tuple(int(x) for x in entry["n"])
            if len(n) != 2:
                raise ValueError(f"mode index must have 2 entries, got {entry['n']}")
            c = CycloNum.from_json(entry["c"])
            if n in seed and seed[n] != c:
                raise InconsistentPotentialError(f"mode {n} listed twice with different values")
            seed[n] = c
        real = bool(data.get("real", False))
        if data.get("complete_symmetry", False):
            return symmetry_complete(seed, want_real=real)
        pot = cls(seed, real=real)
        bad = pot.orbit_violations()
        if bad:
            raise InconsistentPotentialError("potential violates the symmetry relations: " + "; ".join(bad[:5]))
        return pot

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def canonical_potential() -> Potential:
    """The three-mode potential V(y) = sqrt3 (e^{-i(y1+y2)} + omega e^{i(2y1-y2)} + omega^2 e^{i(-y1+2y2)})."""
    return symmetry_complete({(0, 0): SQRT3}, want_real=True)


def symmetry_complete(seed_modes: Mapping[Index, CycloNum], want_real: bool = False) -> Potential:
    """Close a partial mode map under the orbit (and optionally reality) relations."""
    known: dict[Index, CycloNum] = {}
    queue: list[tuple[Index, CycloNum]] = [
        (tuple(n), CycloNum.coerce(c)) for n, c in seed_modes.items()
    ]
    while queue:
        n, c = queue.pop()
        old = known.get(n)
        if old is not None:
            if old != c:
                raise InconsistentPotentialError(f"conflicting values forced on mode {n}: {old} vs {c}")
            continue
        known[n] = c
        queue.append((orbit_next(n), OMEGA2 * c))
        queue.append((orbit_prev(n), OMEGA * c))
        if want_real:
            queue.append((reality_partner(n), c.conj()))
    return Potential(known, real=want_real)


@dataclass(frozen=True)
class LatticeSite:
    """Site of the (3Z+1)^2 sublattice: frequency pair (3m+1, 3n+1)."""

    m: int
    n: int

    @property
    def full(self) -> Index:
        return (3 * self.m + 1, 3 * self.n + 1)

    @property
    def offset(self) -> Index:
        """Offset from the origin site (1, 1)."""
        return (3 * self.m, 3 * self.n)


def lambda_value(site: LatticeSite, k: CycloNum) -> CycloNum:
    """Diagonal resolvent 1 / (k + 3 gamma_(m,n) + mu)."""
    den = CycloNum.coerce(k) + gamma(site.m, site.n) * 3 + MU
    if den.is_zero():
        raise PoleError(f"k is a pole of the resolvent at site {site}")
    return den.inv()


@dataclass(frozen=True)
class CompositeTerm:
    """One term coeff * Lambda(target) Lambda(source + first) e_source -> e_target.

    ``first_offset`` is the V_- shift (first resolvent insertion, relative to
    the source) and ``net_shift`` the combined displacement (second insertion).
    """

    net_shift: Index
    first_offset: Index
    coeff: CycloNum


@dataclass(frozen=True)
class Stencil:
    minus: tuple[tuple[Index, CycloNum], ...]
    plus: tuple[tuple[Index, CycloNum], ...]
    terms: tuple[CompositeTerm, ...]
    prefactor: CycloNum = ONE
    raw_count: int = 0

    @property
    def max_step_norm(self) -> int:
        return max((max(abs(s[0]), abs(s[1])) for s, _ in self.minus + self.plus), default=0)

    def unit_coeffs(self) -> list[CycloNum]:
        return [t.coeff / self.prefactor for t in self.terms]


def build_stencil(p: Potential) -> Stencil:
    """Expand V_+ D^-1 V_- into composite shift terms, merging equal (net, first) pairs."""
    if len(p) == 0:
        raise ValueError("empty potential has no stencil")
    minus = tuple(p.minus_steps())
    plus = tuple(p.plus_steps())
    merged: dict[tuple[Index, Index], CycloNum] = {}
    raw = 0
    for ms, mc in minus:
        for ps, pc in plus:
            raw += 1
            key = ((ms[0] + ps[0], ms[1] + ps[1]), ms)
            merged[key] = merged.get(key, CycloNum(0)) + mc * pc
    terms = tuple(CompositeTerm(net, first, c) for (net, first), c in merged.items() if not c.is_zero())
    prefactor = ONE
    three = CycloNum(3)
    if all(((t.coeff / three) ** 3) == ONE for t in terms):
        prefactor = three
    return Stencil(minus=minus, plus=plus, terms=terms, prefactor=prefactor, raw_count=raw)


@dataclass(frozen=True)
class Walk:
    """Closed alternating walk [(a1,b1),(c1,d1),...,(al,bl),(cl,dl)].

    ``labels_even[i]`` is the prefix sum before step pair i (alpha~, beta~),
    ``labels_odd[i]`` the prefix sum after its first step (gamma~, delta~).
    """

    steps: tuple[Index, ...]
    labels_even: tuple[Index, ...]
    labels_odd: tuple[Index, ...]
    m_pi: int
    coeff: CycloNum = field(compare=False)

    @property
    def ell(self) -> int:
        return len(self.steps) // 2

    @property
    def labels(self) -> tuple[Index, ...]:
        return self.labels_even + self.labels_odd


def hex_distance(a: int, b: int) -> int:
    """Word length of (a, b) in the generators (1,0),(0,1),(1,-1) and inverses."""
    if a * b >= 0:
        return abs(a) + abs(b)
    return max(abs(a), abs(b))


def _m_pi(steps) -> int:
    total = 0
    for i in range(0, len(steps), 2):
        total += steps[i + 1][0] + steps[i][1]  # gamma_i + beta_i
    if (2 * total) % 3:
        raise AssertionError("m_pi is not an integer")
    m = (2 * total) // 3
    if m % 2:
        raise AssertionError("m_pi is odd")
    return m


def enumerate_theta(ell: int, stencil: Stencil) -> Iterator[Walk]:
    """Depth-first enumeration of closed alternating walks with 2*ell steps."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    layers = (stencil.minus, stencil.plus)
    bound = stencil.max_step_norm
    total = 2 * ell
    steps: list[Index] = []
    coeffs: list[CycloNum] = []

    def rec(x: int, y: int) -> Iterator[Walk]:
        depth = len(steps)
        if depth == total:
            if x == 0 and y == 0:
                yield _make_walk(tuple(steps), coeffs)
            return
        remaining = total - depth
        for s, c in layers[depth % 2]:
            nx, ny = x + s[0], y + s[1]
            if max(abs(nx), abs(ny)) > (remaining - 1) * bound:
                continue
            steps.append(s)
            coeffs.append(c)
            yield from rec(nx, ny)
            steps.pop()
            coeffs.pop()

    yield from rec(0, 0)


def _make_walk(steps: tuple[Index, ...], coeffs) -> Walk:
    even, odd = [], []
    x = y = 0
    for i in range(0, len(steps), 2):
        even.append((x, y))
        x += steps[i][0]
        y += steps[i][1]
        odd.append((x, y))
        x += steps[i + 1][0]
        y += steps[i + 1][1]
    c = ONE
    for cf in coeffs:
        c = c * cf
    return Walk(steps=steps, labels_even=tuple(even), labels_odd=tuple(odd), m_pi=_m_pi(steps), coeff=c)


def count_closed_walks_dp(ell: int, stencil: Stencil) -> int:
    """Number of closed alternating walks by convolution of step-count arrays."""
    counts: dict[Index, int] = {(0, 0): 1}
    for depth in range(2 * ell):
        layer = stencil.minus if depth % 2 == 0 else stencil.plus
        nxt: dict[Index, int] = defaultdict(int)
        for (x, y), c in counts.items():
            for s, _ in layer:
                nxt[(x + s[0], y + s[1])] += c
        counts = nxt
    return counts.get((0, 0), 0)
