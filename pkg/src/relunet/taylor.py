"""Reference mathematics without networks: Taylor polynomials and the two recursions.

``wide_recursion`` and ``deep_recursion`` evaluate, with plain arrays, the
quantities that the wide and deep networks compute.  They serve as build
inputs (derivative tables, correction digits) and as test oracles.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import ConstructionError, RejectedInputError
from .partitions import (CubePartition, locate_cube, snake_order,
                         subcube_offsets_deep, subcube_offsets_wide)
from .primitives import monomials

# ---------------------------------------------------------------- multi-indices


def multi_indices(d, q):
    """All l in N_0^d with |l| <= q, graded then lexicographic."""
    return monomials(d, q)


def mi_factorial(l):
    return math.prod(math.factorial(k) for k in l)


def mi_power(v, l):
    """prod_i v_i^{l_i} for v of shape (..., d)."""
    return np.prod(np.asarray(v, dtype=np.float64) ** np.asarray(l), axis=-1)


def mi_add(l, s):
    return tuple(a + b for a, b in zip(l, s))


# ---------------------------------------------------------------- smooth functions


@dataclass
class SmoothFunction:
    """A (p, C)-smooth function with p = q + s and a derivative oracle.

    ``value(X)`` and ``deriv(l, X)`` act on batches X of shape (n, d).
    ``norm(a)`` bounds max_{|l| <= q} sup_{[-a, a]^d} |d^l f| and ``holder(a)``
    bounds the Hoelder constant C of the order-q derivatives on [-a, a]^d.
    Without an analytic oracle, ``deriv`` falls back to central differences.
    """

    d: int
    q: int
    s: float
    value: Callable
    deriv: Callable = None
    norm: Callable = None
    holder: Callable = None
    name: str = "f"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 < self.s <= 1 or self.q < 0:
            raise RejectedInputError("need q >= 0 and s in (0, 1]")
        if self.deriv is None:
            self.deriv = self._fd_deriv
            self.meta["finite_differences"] = True

    @property
    def p(self):
        return self.q + self.s

    def __call__(self, X):
        return self.value(np.atleast_2d(np.asarray(X, dtype=np.float64)))

    def derivative(self, l, X):
        l = tuple(int(v) for v in l)
        if sum(l) > self.q:
            raise RejectedInputError(f"derivative order {sum(l)} exceeds q={self.q}")
        return self.deriv(l, np.atleast_2d(np.asarray(X, dtype=np.float64)))

    def C(self, a):
        return self.holder(a) if self.holder is not None else 1.0

    def norm_bound(self, a):
        if self.norm is not None:
            return self.norm(a)
        return sampled_norm(self, a)

    def _fd_deriv(self, l, X):
        if sum(l) == 0:
            return self.value(X)
        i = next(k for k, v in enumerate(l) if v > 0)
        lower = tuple(v - (k == i) for k, v in enumerate(l))
        step = np.finfo(float).eps ** (1 / 3) * np.maximum(1.0, np.abs(X[:, i]))
        Xp, Xm = X.copy(), X.copy()
        Xp[:, i] += step
        Xm[:, i] -= step
        return (self._fd_deriv(lower, Xp) - self._fd_deriv(lower, Xm)) / (2 * step)


def sampled_norm(f, a, n=4096, seed=0):
    """Max of |d^l f| over |l| <= q on random points of [-a, a]^d (a lower estimate)."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-a, a, (n, f.d))
    return max(float(np.max(np.abs(f.derivative(l, X)))) for l in multi_indices(f.d, f.q))


# ---------------------------------------------------------------- Taylor polynomials


def taylor_poly(f, q, x0, x):
    """sum_{|l| <= q} d^l f(x0) (x - x0)^l / l!, batched over rows of x0 and x."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    x0 = np.broadcast_to(x0, x.shape)
    diff = x - x0
    out = np.zeros(x.shape[0])
    for l in multi_indices(x.shape[1], q):
        out += f.derivative(l, x0) * mi_power(diff, l) / mi_factorial(l)
    return out


def c32_default(q, d):
    """Taylor remainder constant: |f - T_q| <= c32 C |x - x0|^p for (p, C)-smooth f."""
    return d ** q * (q + 1) / math.factorial(q)


def c46_value(f, a, c32=c32_default):
    return f.C(a) * f.d ** f.p * max(c32(k, f.d) for k in range(f.q + 1))


# ---------------------------------------------------------------- wide recursion


def wide_recursion(f, a, M, x, partition=None):
    """Two-scale lookup of the Taylor polynomial of f around the fine cube corner containing x.

    Stage 1 finds the coarse corner and the derivative table of its sub-cubes,
    stage 2 selects the sub-cube via the sets A^(j), stage 3 assembles the
    polynomial.  Returns phi_{1,3} for each row of x.
    """
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d, q = f.d, f.q
    P1 = partition.coarse() if partition is not None else CubePartition(a, M, d, 1)
    h = 2.0 * a / M ** 2
    V = subcube_offsets_wide(M, a, d)
    L = multi_indices(d, q)
    ci = locate_cube(P1, X)
    phi11 = X
    phi21 = P1.left(ci)
    phi31 = {}
    for j, v in enumerate(V):
        for l in L:
            phi31[l, j] = f.derivative(l, phi21 + v)
    phi12 = phi11
    phi22 = np.zeros_like(X)
    phi32 = {l: np.zeros(X.shape[0]) for l in L}
    for j, v in enumerate(V):
        inA = np.all((phi11 >= phi21 + v) & (phi11 < phi21 + v + h), axis=1)
        phi22 += (phi21 + v) * inA[:, None]
        for l in L:
            phi32[l] += phi31[l, j] * inA
    diff = phi12 - phi22
    return sum(phi32[l] * mi_power(diff, l) / mi_factorial(l) for l in L)


def fine_corner(a, M, x, partition=None):
    """Left corner of the fine cube containing x, computed as coarse corner plus offset."""
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    P1 = partition.coarse() if partition is not None else CubePartition(a, M, X.shape[1], 1)
    h = 2.0 * a / M ** 2
    left = P1.left(locate_cube(P1, X))
    k = np.clip(np.floor((X - left) / h), 0, M - 1)
    k = np.where(X < left + k * h, k - 1, k)
    k = np.where(X >= left + (k + 1) * h, k + 1, k)
    return left + np.clip(k, 0, M - 1) * h


# ---------------------------------------------------------------- deep recursion


def digit_base(d):
    return 4 + 2 * math.ceil(math.e ** d)


def digit_offset(d):
    return math.ceil(math.e ** d) + 2


@dataclass
class BCoefficients:
    """Correction digits b[k, l] (k = 0..M^d - 2) of one coarse cube and their packed reals."""

    digits: dict
    packed: dict
    base: int
    offset: int
    estimates: dict


def dyadic_base(d):
    """Smallest power of two >= digit_base(d); packed values are then exact in binary floating point."""
    return 1 << (digit_base(d) - 1).bit_length()


def pack_digits(b, d, base=None):
    """sum_{k=1}^{n} (b_k + ceil(e^d) + 2) base^-k as an exact Fraction."""
    base, off = base or digit_base(d), digit_offset(d)
    return sum(Fraction(int(bk) + off, base ** (k + 1)) for k, bk in enumerate(b))


def unpack_digits(value, n, d, base=None):
    """Digit extraction z -> base z - floor(base z), n times; returns the b_k."""
    base, off = base or digit_base(d), digit_offset(d)
    out = []
    z = value
    for _ in range(n):
        z = z * base
        t = math.floor(z)
        out.append(int(t) - off)
        z = z - t
    return out


def compute_b_coefficients(f, a, M, i, c46, partition=None):
    """Walk the snake in coarse cube i and record the integer corrections.

    The derivative estimates follow
        E_{k+1}^(l) = sum_s E_k^(l+s) v_k^s / s! + b_k^(l) c46 h^(p - |l|),
    with b chosen by rounding so that each estimate stays within
    c46 h^(p - |l|) / 2 of the true derivative.
    """
    d, q, p = f.d, f.q, f.p
    P1 = partition.coarse() if partition is not None else CubePartition(a, M, d, 1)
    h = 2.0 * a / M ** 2
    corner = P1.left(i).reshape(1, d)
    positions = corner + snake_order(M, d) * h
    steps = subcube_offsets_deep(M, a, d)
    L = multi_indices(d, q)
    bound = math.ceil(math.e ** d) + 1
    est = {l: float(f.derivative(l, positions[:1])[0]) for l in L}
    history = [dict(est)]
    digits = {l: [] for l in L}
    for k, v in enumerate(steps):
        nxt = {}
        for l in L:
            pred = 0.0
            for s in multi_indices(d, q - sum(l)):
                pred += est[mi_add(l, s)] * float(mi_power(v, s)) / mi_factorial(s)
            scale = c46 * h ** (p - sum(l))
            true = float(f.derivative(l, positions[k + 1:k + 2])[0])
            b = int(round((true - pred) / scale)) if scale > 0 else 0
            if abs(b) > bound:
                raise ConstructionError(
                    f"no admissible correction digit at step k={k + 1}, l={l}: needs {b}, bound {bound}")
            digits[l].append(b)
            nxt[l] = pred + b * scale
        est = nxt
        history.append(dict(est))
    packed = {l: pack_digits(digits[l], d) for l in L}
    return BCoefficients(digits, packed, digit_base(d), digit_offset(d), history)


def separation_margin(M, d, j):
    """Guaranteed distance of base * (remaining packed value) from the integers at snake step j."""
    return Fraction(1, digit_base(d) ** (M ** d - j - 1))


def deep_recursion(f, a, M, x, c46, bcoeffs=None, partition=None, return_digits=False):
    """Successive Taylor updates along the snake, decoding one correction digit per step.

    Returns T_hat at each row of x.  ``bcoeffs`` maps coarse index to
    BCoefficients (computed on demand when omitted).
    """
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d, q, p = f.d, f.q, f.p
    P1 = partition.coarse() if partition is not None else CubePartition(a, M, d, 1)
    h = 2.0 * a / M ** 2
    L = multi_indices(d, q)
    steps = subcube_offsets_deep(M, a, d)
    ci = locate_cube(P1, X)
    bcoeffs = {} if bcoeffs is None else dict(bcoeffs)
    for i in np.unique(ci):
        if int(i) not in bcoeffs:
            bcoeffs[int(i)] = compute_b_coefficients(f, a, M, int(i), c46, partition)
    n = X.shape[0]
    phi2 = P1.left(ci)
    phi3 = {l: f.derivative(l, phi2) for l in L}
    # digits are decoded from the packed values in exact rational arithmetic
    uniq = [int(i) for i in np.unique(ci)]
    table = {i: {l: unpack_digits(bcoeffs[i].packed[l], M ** d - 1, d) for l in L} for i in uniq}
    phi5 = np.zeros_like(X)
    phi6 = {l: np.zeros(n) for l in L}
    decoded = {l: [] for l in L}
    for j in range(M ** d):
        inside = np.all((X >= phi2) & (X < phi2 + h), axis=1)
        phi5 += phi2 * inside[:, None]
        for l in L:
            phi6[l] += phi3[l] * inside
        if j == M ** d - 1:
            break
        v = steps[j]
        new3 = {}
        for l in L:
            b = np.array([table[int(i)][l][j] for i in ci], dtype=np.float64)
            decoded[l].append(b)
            pred = sum(phi3[mi_add(l, s)] * float(mi_power(v, s)) / mi_factorial(s)
                       for s in multi_indices(d, q - sum(l)))
            new3[l] = pred + b * c46 * h ** (p - sum(l))
        phi3 = new3
        phi2 = phi2 + v
    diff = X - phi5
    out = sum(phi6[l] * mi_power(diff, l) / mi_factorial(l) for l in L)
    if return_digits:
        return out, decoded
    return out
