"""Wide two-scale approximation networks for (p, C)-smooth functions.

Layout of one branch (one shifted partition, internal radius a):

* ``fnet``: two layers locate the coarse cube and fan out the derivative
  table of its M^d sub-cubes, two layers select the sub-cube containing x,
  then the polynomial network assembles the local Taylor polynomial.
* ``weight``: same localisation, then a tensor hat on the fine cube.
* ``check``: detects the margin of width 1/M^(2p+2) around cube faces.
* ``masked``: gates ``fnet`` to zero on margins and multiplies by the hat.

The approximator sums the 2^d branches built on shifted partitions of the
doubled domain [-2a, 2a)^d, whose hats form a partition of unity on
[-a, a]^d.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .blocks import AffineRows, chain, stage
from .errors import ConstructionError, RejectedInputError
from .network import Network, affine, compose, conform, pad_depth, parallelize, prefix_probes
from .partitions import CubePartition, subcube_offsets_wide
from .primitives import (_identity, _indicator, _mult, _mult_d, _poly, _test_multi,
                         mult_bound, mult_d_bound, mult_d_min_R, poly_bound, poly_min_R)
from .taylor import SmoothFunction, mi_factorial, multi_indices

log = logging.getLogger(__name__)


def log4_ceil(x):
    return max(0, math.ceil(math.log(x, 4) - 1e-12))


def shifted_function(f, shift):
    """g(x) = f(x + shift) with norm and Hoelder bounds widened by |shift|."""
    shift = np.asarray(shift, dtype=np.float64)
    if not np.any(shift):
        return f
    extra = float(np.abs(shift).max())
    return SmoothFunction(
        f.d, f.q, f.s, lambda X: f.value(X + shift), lambda l, X: f.derivative(l, X + shift),
        norm=lambda a: f.norm_bound(a + extra), holder=lambda a: f.C(a + extra),
        name=f"{f.name}[shifted]", meta=dict(f.meta))


@dataclass
class WideConfig:
    """Parameters of one wide branch on [-a, a)^d.

    ``precision`` is the depth parameter R shared by every embedded product
    network; ``None`` selects the smallest R >= ceil(log_4 M^(2p)) for which all
    product error bounds are at most M^(-2p) and all product preconditions hold.
    """

    f: SmoothFunction
    a: float
    M: int
    B_M: int = None
    precision: int = None
    shift_index: int = 0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.M < 2 or self.a < 1:
            raise RejectedInputError("need M >= 2 and a >= 1")
        p = self.f.p
        if self.B_M is None:
            # large enough for the margin condition and for every gated value
            self.B_M = math.ceil(max(self.M ** (2 * p + 2) - 1e-9, self.a, self.norm))
        if self.B_M < self.M ** (2 * p + 2) - 1e-9:
            raise ConstructionError(f"B_M={self.B_M} violates B_M >= M^(2p+2)")

    @property
    def d(self):
        return self.f.d

    @property
    def h(self):
        return 2.0 * self.a / self.M ** 2

    @property
    def base_precision(self):
        return log4_ceil(self.M ** (2 * self.f.p))

    @property
    def norm(self):
        return self.f.norm_bound(self.a)

    @property
    def poly_radius(self):
        return max(2.0 * self.a, self.norm)

    @property
    def poly_coeffs(self):
        return np.array([1.0 / mi_factorial(l) for l in multi_indices(self.d, self.f.q)])

    @property
    def value_bound(self):
        """Bound on |fnet| everywhere: sup|f^(l)| sum (2a)^|l|/l! plus one for the product error."""
        tail = sum((2 * self.a) ** sum(l) / mi_factorial(l) for l in multi_indices(self.d, self.f.q))
        return max(self.norm, 1.0) * tail + 1.0

    def resolve_precision(self):
        """Smallest shared R meeting every product bound (or validate the user's R)."""
        target = float(self.M) ** (-2 * self.f.p)
        q = max(self.f.q, 1)
        A, Bt = self.poly_radius, max(self.value_bound, 2.0)

        def ok(R):
            return (R >= poly_min_R(A, q) and R >= mult_d_min_R(1.0, self.d)
                    and poly_bound(R, A, q, self.poly_coeffs) <= target
                    and mult_d_bound(R, 1.0, self.d) <= target
                    and mult_bound(R, Bt) <= target)

        if self.precision is not None:
            if not ok(self.precision):
                raise ConstructionError(f"precision R={self.precision} violates a product bound or precondition")
            return self.precision
        R = self.base_precision
        while not ok(R):
            R += 1
        self.info["precision_offset"] = R - self.base_precision
        self.precision = R
        return R


def _check_s(cfg, values, what):
    m = float(np.max(np.abs(values))) if len(values) else 0.0
    if m > cfg.B_M:
        log.warning("gated value %s reaches %.3g > R=%d; exactness off the margins is not guaranteed",
                    what, m, cfg.B_M)
        cfg.info.setdefault("s_violations", []).append((what, m))


def _localize(cfg, extra_tables=()):
    """Stages 1 and 2: coarse cube fan-out, then sub-cube selection.

    Returns (stage1, stage2, layout) where stage 2 outputs x (d), the fine corner
    (d) and one selected value per extra table.  ``extra_tables`` is a list of
    arrays of shape (M^d coarse cubes, M^d sub-cubes) holding values at
    corner + v_j.
    """
    d, M, a, h = cfg.d, cfg.M, cfg.a, cfg.h
    P1 = CubePartition(a, M, d, 1)
    lefts = P1.left(np.arange(P1.n_cubes))
    V = subcube_offsets_wide(M, a, d)
    nc, ns = P1.n_cubes, len(V)
    bank = parallelize([_indicator(cfg.B_M, lefts[i], lefts[i] + P1.side) for i in range(nc)])
    pre = AffineRows(d)
    for i in range(d):
        pre.add({i: 1.0})
    g_id, g_bank = _identity(2, d), bank
    # stage-1 outputs: x, coarse corner, then tables (t, j)
    post = AffineRows(d + nc)
    for i in range(d):
        post.add({i: 1.0})
    for i in range(d):
        post.add({d + k: lefts[k, i] for k in range(nc)})
    for t, table in enumerate(extra_tables):
        for j in range(ns):
            post.add({d + k: table[k, j] for k in range(nc)})
    s1 = stage([(g_id, pre), (g_bank, pre)], post)
    n1 = 2 * d + len(extra_tables) * ns
    # stage 2: x passes through, tests select sub-cube j
    gadgets = []
    pre_x = AffineRows(n1)
    for i in range(d):
        pre_x.add({i: 1.0})
    gadgets.append((_identity(2, d), pre_x))
    k = d + len(extra_tables)
    test = _test_multi(cfg.B_M, d, k)
    for j in range(ns):
        pre = AffineRows(n1)
        for i in range(d):
            pre.add({i: 1.0})
        for i in range(d):
            pre.add({d + i: 1.0}, V[j, i])
        for i in range(d):
            pre.add({d + i: 1.0}, V[j, i] + h)
        for i in range(d):
            pre.add({d + i: 1.0}, V[j, i])
        for t in range(len(extra_tables)):
            pre.add({2 * d + t * ns + j: 1.0})
        gadgets.append((test, pre))
    post = AffineRows(d + ns * k)
    for i in range(d):
        post.add({i: 1.0})
    for i in range(k):
        post.add({d + j * k + i: 1.0 for j in range(ns)})
    s2 = stage(gadgets, post)
    _check_s(cfg, (lefts[:, None, :] + V[None, :, :]).ravel(), "fine corner")
    for t, table in enumerate(extra_tables):
        _check_s(cfg, table.ravel(), f"table {t}")
    return s1, s2


def derivative_tables(cfg):
    """Values d^l f(corner_i + v_j) for every multi-index l: list of (M^d, M^d) arrays."""
    d, M, a = cfg.d, cfg.M, cfg.a
    P1 = CubePartition(a, M, d, 1)
    lefts = P1.left(np.arange(P1.n_cubes))
    V = subcube_offsets_wide(M, a, d)
    pts = (lefts[:, None, :] + V[None, :, :]).reshape(-1, d)
    return [cfg.f.derivative(l, pts).reshape(P1.n_cubes, len(V)) for l in multi_indices(d, cfg.f.q)]


def fnet_arch(d, q, M, R):
    m = math.comb(d + q, d)
    lifted = max(q, 1)
    L = 4 + R * math.ceil(math.log2(max(q + 1, 2)))
    r = max((m + d) * M ** d * 2 * (2 + 2 * d) + 2 * d, 18 * (q + 1) * m,
            18 * (lifted + 1) * math.comb(d + lifted, d))
    return L, r


def _fnet(cfg):
    R = cfg.resolve_precision()
    d, q = cfg.d, cfg.f.q
    s1, s2 = _localize(cfg, derivative_tables(cfg))
    m = math.comb(d + q, d)
    # polynomial input: z = x - corner (d values), y = selected derivatives (m values)
    pre = AffineRows(2 * d + m)
    for i in range(d):
        pre.add({i: 1.0, d + i: -1.0})
    for t in range(m):
        pre.add({2 * d + t: 1.0})
    poly = _poly(R, cfg.poly_radius, q, d, cfg.poly_coeffs)
    return chain(s1, s2, compose(poly, pre.network()))


def build_fnet_P2(cfg):
    """Local Taylor polynomial network; exact class F(4 + R ceil(log2 max(q+1, 2)), r_fnet)."""
    net = _fnet(cfg)
    L, r = fnet_arch(cfg.d, cfg.f.q, cfg.M, cfg.precision)
    return conform(net, L, r)


def weight_arch(d, M, R):
    L = 5 + R * math.ceil(math.log2(d)) if d > 1 else 5
    return L, max(18 * d, 2 * d + d * M ** d * 2 * (2 + 2 * d))


def _weight(cfg):
    R = cfg.resolve_precision()
    d, M, a = cfg.d, cfg.M, cfg.a
    if mult_d_bound(R, 1.0, d) > 1.0:
        raise ConstructionError(f"precision R={R} too small: 4^(4d+1) d 4^-R must not exceed 1")
    s1, s2 = _localize(cfg)
    # hat factors relu(t) - 2 relu(t-1) + relu(t-2) with t = (M^2/a)(x - corner)
    scale = M ** 2 / a
    w = np.zeros((3 * d, 2 * d))
    b = np.zeros(3 * d)
    for i in range(d):
        for k, off in enumerate((0.0, -1.0, -2.0)):
            w[3 * i + k, i], w[3 * i + k, d + i] = scale, -scale
            b[3 * i + k] = off
    out = np.zeros((d, 3 * d))
    for i in range(d):
        out[i, 3 * i:3 * i + 3] = (1.0, -2.0, 1.0)
    hat = Network(2 * d, [(w, b)], out, np.zeros(d))
    prod = _mult_d(R, 1.0, d, check=True)
    return chain(s1, s2, hat, prod)


def build_weight_net(cfg):
    """Tensor hat of the fine cube containing x; class F(5 + R ceil(log2 d), max{18d, 2d + d M^d 2(2+2d)})."""
    net = _weight(cfg)
    return conform(net, *weight_arch(cfg.d, cfg.M, cfg.precision))


def check_arch(d, M):
    return 5, 2 * d + (4 * d * d + 4 * d) * M ** d


def _check(cfg):
    d, M, a, h = cfg.d, cfg.M, cfg.a, cfg.h
    delta = 1.0 / M ** (2 * cfg.f.p + 2)
    P1 = CubePartition(a, M, d, 1)
    lefts = P1.left(np.arange(P1.n_cubes))
    nc = P1.n_cubes
    V = subcube_offsets_wide(M, a, d)
    ns = len(V)
    R = cfg.B_M
    pre = AffineRows(d)
    for i in range(d):
        pre.add({i: 1.0})
    bank = parallelize([_indicator(R, lefts[i], lefts[i] + P1.side) for i in range(nc)])
    inner = parallelize([_indicator(R, lefts[i] + delta, lefts[i] + P1.side - delta) for i in range(nc)])
    # stage-1 outputs: x, coarse corner, f1 = 1 - sum inner indicators
    post = AffineRows(d + 2 * nc)
    for i in range(d):
        post.add({i: 1.0})
    for i in range(d):
        post.add({d + k: lefts[k, i] for k in range(nc)})
    post.add({d + nc + k: -1.0 for k in range(nc)}, 1.0)
    s1 = stage([(_identity(2, d), pre), (bank, pre), (inner, pre)], post)
    n1 = 2 * d + 1
    test = _test_multi(R, d, 1)
    gadgets = []
    pre_f1 = AffineRows(n1)
    pre_f1.add({2 * d: 1.0})
    gadgets.append((_identity(2, 1), pre_f1))
    for j in range(ns):
        pre = AffineRows(n1)
        for i in range(d):
            pre.add({i: 1.0})
        for i in range(d):
            pre.add({d + i: 1.0}, V[j, i] + delta)
        for i in range(d):
            pre.add({d + i: 1.0}, V[j, i] + h - delta)
        pre.add({}, 1.0)
        gadgets.append((test, pre))
    # stage-2 outputs: f1, f2 = 1 - sum tests
    post = AffineRows(1 + ns)
    post.add({0: 1.0})
    post.add({1 + j: -1.0 for j in range(ns)}, 1.0)
    s2 = stage(gadgets, post)
    final = Network(2, [(np.array([[-1.0, -1.0]]), [1.0])], [[-1.0]], [1.0])
    return chain(s1, s2, final)


def build_check_net(cfg):
    """Margin detector 1 - relu(1 - f1 - f2); class F(5, 2d + (4d^2 + 4d) M^d)."""
    return conform(_check(cfg), *check_arch(cfg.d, cfg.M))


def masked_depth(d, q, R):
    return 5 + R * (math.ceil(math.log2(max(q, d) + 1)) + 1)


def masked_width(d, q, M):
    return 64 * math.comb(d + q, d) * d * d * (q + 1) * M ** d


def _masked(cfg):
    R = cfg.resolve_precision()
    d, q = cfg.d, cfg.f.q
    fnet, check, weight = _fnet(cfg), _check(cfg), _weight(cfg)
    Bt = max(cfg.value_bound, 2.0)
    cfg.info["B_true"] = Bt
    inner_depth = max(fnet.depth, check.depth) + 1
    gate_in = parallelize([pad_depth(fnet, inner_depth - 1), pad_depth(check, inner_depth - 1)])
    gate = Network(2, [(np.array([[1.0, -Bt], [-1.0, -Bt]]), np.zeros(2))], [[1.0, -1.0]], [0.0])
    gated = compose(gate, gate_in)
    depth = max(gated.depth, weight.depth)
    both = parallelize([pad_depth(weight, depth), pad_depth(gated, depth)])
    net = compose(_mult(R, Bt), both)
    return pad_depth(net, masked_depth(d, q, R))


def build_masked_net(cfg):
    """f_mult(weight, relu(fnet - B f_check) - relu(-fnet - B f_check)).

    Depth exactly 5 + R (ceil(log2(max{q, d} + 1)) + 1); width at most
    64 binom(d+q, d) d^2 (q+1) M^d.
    """
    net = _masked(cfg)
    return net


def theorem_arch(d, q, p, M):
    """Depth and width lower bounds of the wide approximation theorem."""
    L = 5 + log4_ceil(M ** (2 * p)) * (math.ceil(math.log2(max(q, d) + 1)) + 1)
    r = 2 ** d * 64 * math.comb(d + q, d) * d * d * (q + 1) * M ** d
    return L, r


def build_wide_approximator(f, a, M, precision=None, B_M=None):
    """Sum of 2^d masked branches on the doubled domain; approximates f on [-a, a]^d.

    Returns (network, info).  ``info`` records the internal radius, the shared
    precision R, the value bound used for gating and the class bounds.
    """
    if a < 1:
        raise RejectedInputError("a must be >= 1")
    a_int = 2.0 * a
    d = f.d
    M2 = M ** 2
    # one shared precision: resolve on the widest shifted bounds
    probe = WideConfig(shifted_function(f, np.full(d, a_int / M2)), a_int, M, B_M, precision)
    R = probe.resolve_precision()
    members, infos = [], []
    for v in range(2 ** d):
        P = CubePartition(a_int, M, d, 2, v)
        g = shifted_function(f, P.shift)
        cfg = WideConfig(g, a_int, M, B_M, R, v)
        net = _masked(cfg)
        members.append(prefix_probes(compose(net, affine(np.eye(d), -P.shift)), f"branch{v}/"))
        infos.append(cfg.info)
    total = compose(affine(np.ones((1, len(members)))), parallelize(members))
    L_thm, r_thm = theorem_arch(d, f.q, f.p, M)
    info = {
        "a_internal": a_int, "precision": R, "precision_offset": R - probe.base_precision,
        "B_true": max(i.get("B_true", 0.0) for i in infos), "theorem_L": L_thm, "theorem_r": r_thm,
        "depth": total.depth, "width": total.width,
        "s_violations": [s for i in infos for s in i.get("s_violations", [])],
    }
    return total, info
