"""Target functions with analytic derivatives and explicit smoothness constants.

Each factory returns a :class:`SmoothFunction` whose ``norm(a)`` and
``holder(a)`` are valid upper bounds on [-a, a]^d.
"""

import math

import numpy as np

from .errors import RejectedInputError
from .taylor import SmoothFunction, multi_indices


def _split_p(p):
    q = math.ceil(p) - 1
    return q, p - q


def constant(c=1.0, d=1, p=1.0):
    q, s = _split_p(p)

    def deriv(l, X):
        return np.full(X.shape[0], float(c) if sum(l) == 0 else 0.0)

    return SmoothFunction(d, q, s, lambda X: np.full(X.shape[0], float(c)), deriv,
                          norm=lambda a: abs(c), holder=lambda a: 1.0, name="constant")


def linear(w=None, b=0.0, d=1, p=1.0):
    w = np.ones(d) if w is None else np.asarray(w, dtype=np.float64)
    q, s = _split_p(p)

    def deriv(l, X):
        if sum(l) == 0:
            return X @ w + b
        if sum(l) == 1:
            return np.full(X.shape[0], w[l.index(1)])
        return np.zeros(X.shape[0])

    def holder(a):
        return float(np.linalg.norm(w)) if q == 0 else 1.0

    def norm(a):
        vals = [abs(b) + a * float(np.abs(w).sum())]
        if q >= 1:
            vals.append(float(np.abs(w).max()))
        return max(vals)

    return SmoothFunction(len(w), q, s, lambda X: X @ w + b, deriv, norm, holder, "linear")


def polynomial(terms, d, q=None):
    """sum_e c_e x^e for ``terms`` = {exponent tuple: coefficient}; smoothness p = q + 1 with q >= degree."""
    degree = max((sum(e) for e in terms), default=0)
    q = degree if q is None else q
    if q < degree:
        raise RejectedInputError("q must be at least the polynomial degree")

    def deriv(l, X):
        out = np.zeros(X.shape[0])
        for e, c in terms.items():
            if any(li > ei for li, ei in zip(l, e)):
                continue
            fac = math.prod(math.perm(ei, li) for ei, li in zip(e, l))
            out += c * fac * np.prod(X ** (np.array(e) - np.array(l)), axis=1)
        return out

    def norm(a):
        best = 0.0
        for l in multi_indices(d, q):
            tot = 0.0
            for e, c in terms.items():
                if all(li <= ei for li, ei in zip(l, e)):
                    fac = math.prod(math.perm(ei, li) for ei, li in zip(e, l))
                    tot += abs(c) * fac * max(a, 1.0) ** (sum(e) - sum(l))
            best = max(best, tot)
        return best

    return SmoothFunction(d, q, 1.0, lambda X: deriv((0,) * d, X), deriv, norm,
                          lambda a: 1.0, "polynomial")


def sinprod(d=1, omega=1.0, phase=0.5, p=2.0):
    """prod_i sin(omega x_i + phase)."""
    q, s = _split_p(p)

    def deriv(l, X):
        out = np.ones(X.shape[0])
        for i, k in enumerate(l):
            out = out * omega ** k * np.sin(omega * X[:, i] + phase + k * np.pi / 2)
        return out

    def norm(a):
        return max(1.0, abs(omega) ** q)

    def holder(a):
        # Lip^s (2 sup)^(1-s) bounds the Hoelder constant of a bounded Lipschitz function
        lip = math.sqrt(d) * abs(omega) ** (q + 1)
        return lip ** s * (2 * abs(omega) ** q) ** (1 - s)

    return SmoothFunction(d, q, s, lambda X: deriv((0,) * d, X), deriv, norm, holder, "sinprod")


def expsum(d=1, c=0.5, p=2.0):
    """sum_i exp(c x_i) / d."""
    q, s = _split_p(p)

    def deriv(l, X):
        if sum(l) == 0:
            return np.exp(c * X).sum(axis=1) / d
        nz = [i for i, k in enumerate(l) if k > 0]
        if len(nz) > 1:
            return np.zeros(X.shape[0])
        i = nz[0]
        return c ** l[i] * np.exp(c * X[:, i]) / d

    def norm(a):
        return math.exp(abs(c) * a) * max(1.0, abs(c) ** q)

    def holder(a):
        top = abs(c) ** q * math.exp(abs(c) * a) * (1 if q else d) / d
        lip = math.sqrt(d) * abs(c) ** (q + 1) * math.exp(abs(c) * a) / d
        return lip ** s * (2 * top) ** (1 - s)

    return SmoothFunction(d, q, s, lambda X: deriv((0,) * d, X), deriv, norm, holder, "expsum")


def holder_bump(d=1, p=1.0, K=1.0, center=None):
    """K sum_i |x_i - c_i|^p: exactly (p, C)-smooth with a kink of order p at the center."""
    q, s = _split_p(p)
    center = np.zeros(d) if center is None else np.asarray(center, dtype=np.float64)

    def coef(k):
        return math.prod(p - j for j in range(k))

    def deriv(l, X):
        if sum(l) == 0:
            return K * (np.abs(X - center) ** p).sum(axis=1)
        nz = [i for i, k in enumerate(l) if k > 0]
        if len(nz) > 1:
            return np.zeros(X.shape[0])
        i, k = nz[0], l[nz[0]]
        t = X[:, i] - center[i]
        return K * coef(k) * np.abs(t) ** (p - k) * np.sign(t) ** k

    def norm(a):
        r = a + float(np.abs(center).max())
        return max(abs(K) * coef(k) * r ** (p - k) * (d if k == 0 else 1) for k in range(q + 1))

    def holder(a):
        return abs(K) * coef(q) * 2 ** (1 - s)

    return SmoothFunction(d, q, s, lambda X: deriv((0,) * d, X), deriv, norm, holder, "holder-bump")


TARGETS = {
    "constant": constant,
    "linear": linear,
    "polynomial": lambda d=1, p=3.0: polynomial(
        {tuple(2 if j == i else 0 for j in range(d)): 1.0 for i in range(d)} | {(0,) * d: 0.5}, d,
        q=max(2, math.ceil(p) - 1)),
    "sinprod": sinprod,
    "expsum": expsum,
    "holder-bump": holder_bump,
}


def make_target(name, d=1, p=None):
    """Catalog lookup used by the command line; ``fig2`` is provided by the hierarchy module."""
    if name == "fig2":
        from .hierarchy import fig2_model
        return fig2_model().as_smooth_function()
    if name not in TARGETS:
        raise RejectedInputError(f"unknown target {name!r}; choose from {sorted(TARGETS) + ['fig2']}")
    kwargs = {"d": d}
    if p is not None:
        kwargs["p"] = p
    return TARGETS[name](**kwargs)
