"""Elementary ReLU networks: identity, square, products, polynomials, indicators, floor.

Every public ``build_*`` function returns a network padded to its nominal
class F(L, r).  The underscore variants return the same function with natural
(smaller) widths and are what the larger constructions embed.
"""

import itertools
import math

import numpy as np
from scipy import sparse

from .errors import RejectedInputError
from .network import Network, affine, compose, conform, parallelize, select

# ---------------------------------------------------------------- identity


def _identity(t, dim):
    if t == 0:
        return affine(np.eye(dim))
    eye = sparse.identity(dim, format="csr")
    split = sparse.vstack([eye, -eye]).tocsr()
    merge = sparse.hstack([eye, -eye]).tocsr()
    layers = [(split, np.zeros(2 * dim))]
    layers += [(split @ merge, np.zeros(2 * dim)) for _ in range(t - 1)]
    return Network(dim, layers, merge, np.zeros(dim))


def build_identity(t, dim=1):
    """f_id^t: t layers of relu(z) - relu(-z) applied to a dim-vector; class F(t, 2 dim)."""
    if t < 0 or dim < 1:
        raise RejectedInputError("need t >= 0 and dim >= 1")
    return _identity(t, dim)


# ---------------------------------------------------------------- square


def tooth(x):
    """Tooth function g(x) = 2 relu(x) - 4 relu(x - 1/2) + 2 relu(x - 1)."""
    x = np.asarray(x, dtype=np.float64)
    return 2 * np.maximum(x, 0) - 4 * np.maximum(x - 0.5, 0) + 2 * np.maximum(x - 1, 0)


def tooth_iterate(x, s):
    """g_s = g o ... o g (s times)."""
    y = np.asarray(x, dtype=np.float64)
    for _ in range(s):
        y = tooth(y)
    return y


def sawtooth_interpolant(x, R):
    """S_R(x) = x - sum_{s=1}^R g_s(x) / 4^s, the piecewise linear interpolant of x^2 on [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    out, g = x.copy(), x
    for s in range(1, R + 1):
        g = tooth(g)
        out = out - g / 4.0 ** s
    return out


def _square(R, a):
    if R < 1 or a < 1:
        raise RejectedInputError(f"square needs R >= 1 and a >= 1 (got R={R}, a={a})")
    # neuron order: rail xt (+,-), tooth (0, 1/2, 1), accumulator (+,-), rail x (+,-)
    w1 = np.zeros((9, 1))
    b1 = np.zeros(9)
    w1[[0, 2, 3, 4], 0] = 1 / (2 * a)
    w1[1, 0] = -1 / (2 * a)
    b1[[0, 2, 3, 4]] = 0.5
    b1[1] = -0.5
    b1[3] -= 0.5
    b1[4] -= 1.0
    w1[7, 0], w1[8, 0] = 1.0, -1.0
    layers = [(w1, b1)]
    for i in range(2, R + 1):
        # z-values: xt = n0 - n1, g_{i-1} = 2 n2 - 4 n3 + 2 n4, acc_i = (n5 - n6) - g_{i-1}/4^{i-1}
        xt = np.array([1, -1, 0, 0, 0, 0, 0, 0, 0.0])
        g = np.array([0, 0, 2, -4, 2, 0, 0, 0, 0.0])
        acc = np.array([0, 0, 0, 0, 0, 1, -1, 0, 0.0]) - g / 4.0 ** (i - 1)
        x = np.array([0, 0, 0, 0, 0, 0, 0, 1, -1.0])
        w = np.vstack([xt, -xt, g, g, g, acc, -acc, x, -x])
        b = np.array([0, 0, 0, -0.5, -1, 0, 0, 0, 0.0])
        layers.append((w, b))
    xt = np.array([1, -1, 0, 0, 0, 0, 0, 0, 0.0])
    g = np.array([0, 0, 2, -4, 2, 0, 0, 0, 0.0])
    acc = np.array([0, 0, 0, 0, 0, 1, -1, 0, 0.0])
    x = np.array([0, 0, 0, 0, 0, 0, 0, 1, -1.0])
    s_r = xt + acc - g / 4.0 ** R
    out = 4 * a * a * s_r - 2 * a * x
    return Network(1, layers, out[None, :], [-a * a])


def build_square(R, a):
    """f_sq in F(R, 9) with |f_sq(x) - x^2| <= a^2 4^-R on [-a, a].

    Outside [-a, a] the network saturates at the constant a^2, so its range is [0, a^2].
    """
    return _square(R, a)


def square_bound(R, a):
    return a * a * 4.0 ** (-R)


# ---------------------------------------------------------------- products


def _mult(R, a):
    sq = _square(R, 2 * a)
    plus = compose(sq, affine([[1.0, 1.0]]))
    minus = compose(sq, affine([[1.0, -1.0]]))
    return compose(affine([[0.25, -0.25]]), parallelize([plus, minus]))


def build_mult(R, a):
    """f_mult(x, y) = (f_sq(x + y) - f_sq(x - y)) / 4 with f_sq on radius 2a; class F(R, 18).

    |f_mult - x y| <= 2 a^2 4^-R on [-a, a]^2 and |f_mult| <= a^2 everywhere.
    """
    return _mult(R, a)


def mult_bound(R, a):
    return 2 * a * a * 4.0 ** (-R)


def mult_d_min_R(a, d):
    """Smallest integer R with R >= log_4(2 4^{2d} a^{2d})."""
    return math.ceil(math.log(2 * 4.0 ** (2 * d) * a ** (2 * d), 4) - 1e-12)


def _mult_d(R, a, d, check=True):
    if d < 1:
        raise RejectedInputError("d must be >= 1")
    if check and R < mult_d_min_R(a, d):
        raise RejectedInputError(
            f"mult_d needs R >= log_4(2*4^(2d)*a^(2d)); minimal admissible R is {mult_d_min_R(a, d)}, got {R}")
    q = math.ceil(math.log2(d)) if d > 1 else 0
    slots = 2 ** q
    # pad the d inputs with constant ones up to 2^q slots
    A = np.zeros((slots, d))
    A[np.arange(d), np.arange(d)] = 1.0
    c = np.zeros(slots)
    c[d:] = 1.0
    net = affine(A, c)
    rho = 4.0 ** d * a ** d
    block = _mult(R, rho)
    n = slots
    while n > 1:
        pairs = [compose(block, select(n, [2 * k, 2 * k + 1])) for k in range(n // 2)]
        net = compose(parallelize(pairs), net)
        n //= 2
    return net


def build_mult_d(R, a, d):
    """Binary tree of f_mult blocks computing x_1 ... x_d; class F(R ceil(log2 d), 18 d).

    Inputs are padded with constant ones to 2^ceil(log2 d) slots.  Raises
    RejectedInputError naming the minimal R when R < log_4(2 4^{2d} a^{2d}).
    """
    net = _mult_d(R, a, d)
    q = math.ceil(math.log2(d)) if d > 1 else 0
    return conform(net, R * q, 18 * d) if q else net


def mult_d_bound(R, a, d):
    return 4.0 ** (4 * d + 1) * a ** (4 * d) * d * 4.0 ** (-R)


# ---------------------------------------------------------------- polynomials


def monomials(d, N):
    """Exponent tuples of all monomials of total degree <= N in d variables (graded, then lexicographic)."""
    out = []
    for deg in range(N + 1):
        for combo in itertools.combinations_with_replacement(range(d), deg):
            e = [0] * d
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def poly_min_R(a, N):
    return mult_d_min_R(a, N + 1)


def _poly(R, a, N, d, coeffs, check=True):
    mons = monomials(d, N)
    coeffs = np.asarray(coeffs, dtype=np.float64).ravel()
    if coeffs.size != len(mons):
        raise RejectedInputError(f"expected {len(mons)} coefficients for d={d}, N={N}, got {coeffs.size}")
    n_y = len(mons)
    lifted = max(N, 1)
    if lifted != N:
        mons = monomials(d, lifted)
        coeffs = np.concatenate([coeffs, np.zeros(len(mons) - coeffs.size)])
    if check and R < poly_min_R(a, lifted):
        raise RejectedInputError(
            f"polynomial network needs R >= {poly_min_R(a, lifted)} for a={a}, N={lifted}; got {R}")
    chain = _mult_d(R, a, lifted + 1, check=False)
    terms = []
    for i, e in enumerate(mons):
        idx = [v for v in range(d) for _ in range(e[v])]
        A = np.zeros((lifted + 1, d + n_y))
        c = np.zeros(lifted + 1)
        if i < n_y:
            A[0, d + i] = 1.0
        for k, v in enumerate(idx):
            A[1 + k, v] = 1.0
        c[1 + len(idx):] = 1.0
        terms.append(compose(chain, affine(A, c)))
    return compose(affine(coeffs[None, :]), parallelize(terms))


def poly_arch(N, d):
    lifted = max(N, 1)
    L = math.ceil(math.log2(lifted + 1))
    return L, 18 * (lifted + 1) * math.comb(d + lifted, d)


def build_poly(R, a, N, d, coeffs):
    """f_p(x, y) ~ sum_i r_i y_i m_i(x) over the binom(d+N, d) monomials m_i of degree <= N.

    Inputs are (x_1..x_d, y_1..y_m).  Degree 0 is lifted to degree 1 with zero
    coefficients.  Class F(R ceil(log2(N+1)), 18 (N+1) binom(d+N, d)).
    """
    net = _poly(R, a, N, d, coeffs)
    depth, width = poly_arch(N, d)
    return conform(net, R * depth, width)


def poly_bound(R, a, N, coeffs):
    """Error bound sum_i |r_i| 4^{4(N+1)+1} a^{4(N+1)} (N+1) 4^-R from the product-tree lemma."""
    lifted = max(N, 1)
    return float(np.sum(np.abs(coeffs))) * mult_d_bound(R, a, lifted + 1)


def poly_saturation(a, N, coeffs):
    """Bound on |f_p| valid for every input: sum_i |r_i| rho^2 with rho = 4^{N+1} a^{N+1}."""
    lifted = max(N, 1)
    rho = 4.0 ** (lifted + 1) * a ** (lifted + 1)
    return float(np.sum(np.abs(coeffs))) * rho * rho


def eval_poly(x, y, N, coeffs):
    """Reference value sum_i r_i y_i m_i(x) for batches x (n, d) and y (n, m)."""
    x = np.atleast_2d(x)
    y = np.atleast_2d(y)
    mons = monomials(x.shape[1], N)
    out = np.zeros(x.shape[0])
    for i, e in enumerate(mons):
        out += coeffs[i] * y[:, i] * np.prod(x ** np.array(e), axis=1)
    return out


# ---------------------------------------------------------------- indicators


def _indicator(R, a_vec, b_vec):
    a_vec = np.atleast_1d(np.asarray(a_vec, dtype=np.float64))
    b_vec = np.atleast_1d(np.asarray(b_vec, dtype=np.float64))
    if a_vec.shape != b_vec.shape:
        raise RejectedInputError("a and b must have the same length")
    if np.any(b_vec - a_vec < 2.0 / R):
        raise RejectedInputError(f"every side b-a must be at least 2/R = {2.0 / R}")
    d = a_vec.size
    eye = np.eye(d)
    w1 = np.vstack([-eye, eye])
    b1 = np.concatenate([a_vec + 1.0 / R, -b_vec + 1.0 / R])
    w2 = -R * np.ones((1, 2 * d))
    return Network(d, [(w1, b1), (w2, [1.0])], [[1.0]], [0.0])


def build_indicator(R, a_vec, b_vec):
    """f_ind = relu(1 - R sum_i (relu(a_i + 1/R - x_i) + relu(x_i - b_i + 1/R))); class F(2, 2d)."""
    net = _indicator(R, a_vec, b_vec)
    return conform(net, 2, 2 * net.input_dim)


def _test(R, d):
    # inputs (x, a, b, s); layer 1: 2d hinges, relu(s), relu(-s)
    n_in = 3 * d + 1
    w1 = np.zeros((2 * d + 2, n_in))
    b1 = np.zeros(2 * d + 2)
    for i in range(d):
        w1[i, d + i], w1[i, i] = 1.0, -1.0
        b1[i] = 1.0 / R
        w1[d + i, i], w1[d + i, 2 * d + i] = 1.0, -1.0
        b1[d + i] = 1.0 / R
    w1[2 * d, 3 * d], w1[2 * d + 1, 3 * d] = 1.0, -1.0
    hinge = -float(R) ** 2 * np.ones(2 * d)
    row_p = np.concatenate([hinge, [1.0, -1.0]])
    row_m = np.concatenate([hinge, [-1.0, 1.0]])
    w2 = np.vstack([row_p, row_m])
    return Network(n_in, [(w1, b1), (w2, np.zeros(2))], [[1.0, -1.0]], [0.0])


def build_test(R, d):
    """f_test(x, a, b, s) = s 1_[a,b)(x) off the 1/R margins (needs |s| <= R); class F(2, 2(2d+2))."""
    return conform(_test(R, d), 2, 2 * (2 * d + 2))


# ---------------------------------------------------------------- floor


def _trunc(R, B, shift=0.0):
    # neurons alternate (z - j, z - j - 1/R) so partial output sums stay small
    j = np.repeat(np.arange(1, B + 1, dtype=np.float64), 2)
    w1 = np.ones((2 * B, 1))
    b1 = shift - j - np.tile([0.0, 1.0 / R], B)
    out = np.tile([float(R), -float(R)], B)
    return Network(1, [(w1, b1)], out[None, :], [0.0])


def build_trunc(R, B):
    """f_trunc(z) = sum_{j=1}^B R relu(z - j) - R relu(z - j - 1/R); class F(1, 2B).

    Equals floor(z) on [0, B+1) away from the windows [j, j + 1/R).
    """
    if R <= 0 or B < 1:
        raise RejectedInputError("need R > 0 and B >= 1")
    return _trunc(R, B)


def _test_multi(R, d, k):
    """k gated values s_m 1_[a,b)(x) sharing one hinge layer; inputs (x, a, b, s_1..s_k).

    Each output equals f_test(x, a, b, s_m); width 2d + 2k, then 2k.
    """
    n_in = 3 * d + k
    w1 = np.zeros((2 * d + 2 * k, n_in))
    b1 = np.zeros(2 * d + 2 * k)
    for i in range(d):
        w1[i, d + i], w1[i, i] = 1.0, -1.0
        b1[i] = 1.0 / R
        w1[d + i, i], w1[d + i, 2 * d + i] = 1.0, -1.0
        b1[d + i] = 1.0 / R
    for m in range(k):
        w1[2 * d + 2 * m, 3 * d + m] = 1.0
        w1[2 * d + 2 * m + 1, 3 * d + m] = -1.0
    w2 = np.zeros((2 * k, 2 * d + 2 * k))
    w2[:, :2 * d] = -float(R) ** 2
    out = np.zeros((k, 2 * k))
    for m in range(k):
        w2[2 * m, 2 * d + 2 * m], w2[2 * m, 2 * d + 2 * m + 1] = 1.0, -1.0
        w2[2 * m + 1, 2 * d + 2 * m], w2[2 * m + 1, 2 * d + 2 * m + 1] = -1.0, 1.0
        out[m, 2 * m], out[m, 2 * m + 1] = 1.0, -1.0
    return Network(n_in, [(w1, b1), (w2, np.zeros(2 * k))], out, np.zeros(k))
