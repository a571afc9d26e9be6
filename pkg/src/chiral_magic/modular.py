"""Multimodular backend for the residue engine.

The per-pole Laurent propagation of :mod:`chiral_magic.traces` is run in
F_p for primes p = 1 mod 12, where zeta_12 maps to a root of x^4 - x^2 + 1.
The images of q_l are combined by CRT and lifted by rational reconstruction.
A candidate is accepted once it is reproduced by ``confirm`` further primes.
"""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np
from numba import njit

from .exactnum import CycloNum
from .model import Potential, build_stencil
from .traces import TRACE_SCALE, candidate_poles, reachable_sites

log = logging.getLogger(__name__)

__all__ = ["primes_1_mod_12", "root_of_phi12", "to_mod", "rational_reconstruct", "trace_modular"]


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    for d in (2, 3, 5, 7, 11, 13):
        if n % d == 0:
            return n == d
    # deterministic Miller-Rabin for n < 3.4e14
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def primes_1_mod_12(start: int = 2**31 - 1) -> Iterator[int]:
    """Primes p = 1 (mod 12), descending from ``start``."""
    p = start - ((start - 1) % 12)
    while p > 12:
        if _is_prime(p):
            yield p
        p -= 12


def root_of_phi12(p: int) -> int:
    """A primitive 12th root of unity mod p."""
    for a in range(2, p):
        z = pow(a, (p - 1) // 12, p)
        if pow(z, 6, p) == p - 1 and pow(z, 4, p) != 1:
            return z
    raise ValueError(f"no primitive 12th root mod {p}")


def to_mod(x: CycloNum, p: int, z: int) -> int:
    den = x.denominator
    if den % p == 0:
        raise ZeroDivisionError(f"denominator divisible by {p}")
    acc = 0
    for c in reversed(x.numerators):
        acc = (acc * z + c) % p
    return acc * pow(den, -1, p) % p


def rational_reconstruct(r: int, m: int) -> Optional[Fraction]:
    """Fraction a/b with a = b r mod m, |a|, b <= sqrt(m/2), or None."""
    r %= m
    bound = math.isqrt(m // 2)
    r0, r1 = m, r
    s0, s1 = 0, 1
    while r1 > bound:
        qt = r0 // r1
        r0, r1 = r1, r0 - qt * r1
        s0, s1 = s1, s0 - qt * s1
    if s1 == 0 or abs(s1) > bound:
        return None
    f = Fraction(r1, s1)
    if (f.numerator - r * f.denominator) % m:
        return None
    return f


@njit(cache=True)
def _weighted_residue_sum(ell, offs, sizes, xs, ys, pred, nstep, coefs, pxs, pys, ppar, pw, invtab, lo, p):
    L = ell
    maxn = sizes.max()
    prev = np.zeros((maxn, L), dtype=np.int64)
    cur = np.zeros((maxn, L), dtype=np.int64)
    tmp = np.zeros(L, dtype=np.int64)
    span = invtab.shape[1]
    total = 0
    for k in range(pxs.shape[0]):
        px = pxs[k]
        py = pys[k]
        par = ppar[k]
        for o in range(L):
            prev[0, o] = 0
        prev[0, 0] = 1
        for h in range(1, 2 * ell + 1):
            n = sizes[h]
            base = offs[h]
            layer = (h - 1) % 2
            visit = (h % 2) == par
            for i in range(n):
                for o in range(L):
                    tmp[o] = 0
                nz = False
                for j in range(nstep[layer]):
                    q = pred[base + i, j]
                    if q >= 0:
                        c = coefs[layer, j]
                        for o in range(L):
                            v = prev[q, o]
                            if v != 0:
                                tmp[o] = (tmp[o] + c * v) % p
                                nz = True
                if not nz:
                    for o in range(L):
                        cur[i, o] = 0
                    continue
                x = xs[base + i]
                y = ys[base + i]
                if visit and x == px and y == py:
                    for o in range(L):
                        cur[i, o] = tmp[o]
                    continue
                inv = invtab[x - px - lo, y - py - lo]
                yprev = 0
                if visit:
                    cur[i, 0] = 0
                    for o in range(L - 1):
                        yprev = (tmp[o] - yprev + p) % p * inv % p
                        cur[i, o + 1] = yprev
                else:
                    for o in range(L):
                        yprev = (tmp[o] - yprev + p) % p * inv % p
                        cur[i, o] = yprev
            prev, cur = cur, prev
        total = (total + pw[k] * prev[0, L - 1]) % p
    return total


class _Layout:
    """Reachable sites and predecessor tables, independent of the prime."""

    def __init__(self, p: Potential, ell: int):
        stencil = build_stencil(p)
        sites = reachable_sites(stencil, ell)
        self.ell = ell
        self.stencil = stencil
        self.sizes = np.array([len(s) for s in sites], dtype=np.int64)
        self.offs = np.concatenate([[0], np.cumsum(self.sizes)[:-1]]).astype(np.int64)
        flat = [xy for s in sites for xy in s]
        self.xs = np.array([xy[0] for xy in flat], dtype=np.int64)
        self.ys = np.array([xy[1] for xy in flat], dtype=np.int64)
        layers = [stencil.minus, stencil.plus]
        width = max(len(layers[0]), len(layers[1]))
        self.nstep = np.array([len(layers[0]), len(layers[1])], dtype=np.int64)
        self.pred = -np.ones((len(flat), width), dtype=np.int64)
        for h in range(1, 2 * ell + 1):
            index = {xy: i for i, xy in enumerate(sites[h - 1])}
            layer = layers[(h - 1) % 2]
            for i, (x, y) in enumerate(sites[h]):
                for j, (s, _) in enumerate(layer):
                    self.pred[self.offs[h] + i, j] = index.get((x - s[0], y - s[1]), -1)
        poles = [q for q in candidate_poles(stencil, ell, sites) if q.weight != 0]
        self.pxs = np.array([q.label[0] for q in poles], dtype=np.int64)
        self.pys = np.array([q.label[1] for q in poles], dtype=np.int64)
        self.ppar = np.array([1 if q.label[0] % 3 == 1 else 0 for q in poles], dtype=np.int64)
        self.weights = [q.weight for q in poles]
        ext = int(max(np.abs(self.xs).max(), np.abs(self.ys).max()))
        self.lo = -2 * ext
        self.span = 4 * ext + 1

    def image(self, prime: int) -> int:
        z = root_of_phi12(prime)
        w1 = pow(z, 4, prime)
        w2 = w1 * w1 % prime
        d = np.arange(self.lo, self.lo + self.span, dtype=object)
        g = (w2 * d[:, None] - w1 * d[None, :]) % prime
        invtab = np.zeros((self.span, self.span), dtype=np.int64)
        for i in range(self.span):
            for j in range(self.span):
                v = int(g[i, j])
                invtab[i, j] = pow(v, -1, prime) if v else 0
        layers = [self.stencil.minus, self.stencil.plus]
        width = self.pred.shape[1]
        coefs = np.zeros((2, width), dtype=np.int64)
        for li, layer in enumerate(layers):
            for j, (_, c) in enumerate(layer):
                coefs[li, j] = to_mod(c, prime, z)
        pw = np.array([b % prime for b in self.weights], dtype=np.int64)
        s = _weighted_residue_sum(
            self.ell, self.offs, self.sizes, self.xs, self.ys, self.pred, self.nstep, coefs,
            self.pxs, self.pys, self.ppar, pw, invtab, self.lo, prime,
        )
        return int(s) * to_mod(TRACE_SCALE, prime, z) % prime


def trace_modular(p: Potential, ell: int, *, confirm: int = 3, max_primes: int = 64) -> Fraction:
    """q_l for a real potential, reconstructed from prime-field images."""
    if not p.real:
        raise ValueError("the modular backend handles real potentials only")
    lay = _Layout(p, ell)
    modulus, residue = 1, 0
    candidate, stable = None, 0
    for count, prime in enumerate(primes_1_mod_12(), start=1):
        if count > max_primes:
            break
        r = lay.image(prime)
        # CRT merge
        t = (r - residue) * pow(modulus, -1, prime) % prime
        residue += modulus * t
        modulus *= prime
        f = rational_reconstruct(residue, modulus)
        if f is not None and f == candidate:
            stable += 1
            if stable >= confirm:
                log.debug("q_%d reconstructed from %d primes", ell, count)
                return f
        else:
            candidate, stable = f, 0
    raise RuntimeError(f"rational reconstruction of q_{ell} did not stabilise in {max_primes} primes")
