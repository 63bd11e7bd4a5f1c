"""Deep, narrow approximation networks: a sequential walk over the fine cubes.

One branch (internal radius a, unshifted partition) is built from 2-layer
stages acting on a state vector:

* coarse stage (M^d stages): x rides on identity rails while the coarse
  corner, the derivatives at that corner and the packed correction digits
  are accumulated, each multiplied by the indicator of one coarse cube;
* snake stage (M^d stages): a gated test collects the current fine corner and
  derivative estimates when x lies in the current fine cube, then the corner
  moves one step along the snake, one digit is split off the packed value by
  a floor network and the estimates are updated by a Taylor shift plus the
  decoded correction;
* the polynomial network evaluates the collected Taylor polynomial.

Width does not grow with M; depth grows like M^d.  The weight and check
networks reuse the two-stage walk.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .blocks import AffineRows, chain, stage
from .errors import ConstructionError, PrecisionOverflowError, RejectedInputError
from .network import (Network, affine, compose, conform, pad_depth, parallelize,
                      prefix_probes, with_probe)
from .partitions import CubePartition, subcube_offsets_deep
from .primitives import (_identity, _indicator, _mult, _mult_d, _poly, _test_multi, _trunc,
                         mult_bound, mult_d_bound, mult_d_min_R, poly_bound, poly_min_R,
                         poly_saturation)
from .taylor import (SmoothFunction, c46_value, compute_b_coefficients, digit_base,
                     digit_offset, dyadic_base, pack_digits, mi_add, mi_factorial, mi_power, multi_indices)
from .wide import log4_ceil, shifted_function

log = logging.getLogger(__name__)

MAX_CELLS = 40


def deep_precision_base(d, q, p, M):
    """ceil(log_4(M^(2p + 4d(q+1)) e^(4(q+1)(M^d - 1))))."""
    val = (2 * p + 4 * d * (q + 1)) * math.log(M) + 4 * (q + 1) * (M ** d - 1)
    return max(0, math.ceil(val / math.log(4) - 1e-12))


def digit_margins(M, d):
    """Shift and floor precision for each decoding step k = 0..M^d - 2.

    Digits are packed in the power-of-two base B = dyadic_base(d).  At step k
    the floor network sees B * (remaining packed value), whose fractional part
    lies in [lo, hi] with lo = 1/B and hi = 1 - B^-rem (rem = digits left
    after this one; both are 0 at the last step).  Adding
    delta = (1 - lo - hi) / 2 centres it with gap g to both integers, and R is
    the smallest power of two with 1/R <= g/2.  All values are dyadic, so the
    floor inputs are computed exactly in binary floating point.
    Returns a list of dicts with keys R, delta, gap, lo, hi.
    """
    base = dyadic_base(d)
    n = M ** d
    out = []
    for k in range(n - 1):
        rem = n - 2 - k
        lo = 1.0 / base if rem > 0 else 0.0
        hi = 1.0 - float(base) ** -rem if rem > 0 else 0.0
        gap = (1.0 - (hi - lo)) / 2
        R = 2.0 ** math.ceil(math.log2(2.0 / gap))
        out.append({"R": R, "delta": (1.0 - lo - hi) / 2, "gap": gap, "lo": lo, "hi": hi})
    return out


def digit_bits(M, d):
    """Mantissa bits needed to carry every packed digit exactly."""
    return int(math.log2(dyadic_base(d))) * M ** d + 2


def check_digit_precision(M, d):
    """Raise PrecisionOverflowError beyond M^d = 40 or when the packed digits exceed 53 bits."""
    if M ** d > MAX_CELLS:
        raise PrecisionOverflowError(f"M^d = {M ** d} exceeds the cap {MAX_CELLS} of the deep construction")
    if digit_bits(M, d) > 53:
        M_max = M
        while M_max > 2 and digit_bits(M_max, d) > 53:
            M_max -= 1
        hint = f"use M <= {M_max}" if digit_bits(M_max, d) <= 53 else "no M >= 2 fits"
        raise PrecisionOverflowError(
            f"packed digits need {digit_bits(M, d)} mantissa bits, float64 has 53; for d={d} {hint}")


@dataclass
class DeepConfig:
    """Parameters of one deep branch on [-a, a)^d.

    ``precision`` is the product depth of the polynomial network,
    ``precision_w`` the product depth of the weight network and the final
    masking product.  ``None`` selects the smallest admissible value at or
    above the class formulas.
    """

    f: SmoothFunction
    a: float
    M: int
    B_M: int = None
    precision: int = None
    precision_w: int = None
    shift_index: int = 0
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.M < 2 or self.a < 1:
            raise RejectedInputError("need M >= 2 and a >= 1")
        p = self.f.p
        if self.B_M is None:
            # large enough for the margin condition and for every gated value
            s_max = max(self.a + self.h, self.norm + self.c46 * max(1.0, self.h) ** p)
            self.B_M = math.ceil(max(self.M ** (2 * p + 2) - 1e-9, s_max))
        if self.B_M < self.M ** (2 * p + 2) - 1e-9:
            raise ConstructionError(f"B_M={self.B_M} violates B_M >= M^(2p+2)")

    @property
    def d(self):
        return self.f.d

    @property
    def m(self):
        return math.comb(self.d + self.f.q, self.d)

    @property
    def n(self):
        return self.M ** self.d

    @property
    def h(self):
        return 2.0 * self.a / self.M ** 2

    @property
    def c46(self):
        return c46_value(self.f, self.a)

    @property
    def norm(self):
        return self.f.norm_bound(self.a)

    @property
    def poly_radius(self):
        """Covers |x - corner| <= 2a and every derivative estimate on inner points."""
        return max(2.0 * self.a, max(1.0, self.norm) + self.c46 * max(1.0, self.h) ** self.f.p)

    @property
    def poly_coeffs(self):
        return np.array([1.0 / mi_factorial(l) for l in multi_indices(self.d, self.f.q)])

    @property
    def value_bound(self):
        """|fnet| is bounded by the saturation level of the polynomial network for every input."""
        return poly_saturation(self.poly_radius, self.f.q, self.poly_coeffs)

    @property
    def gated_bound(self):
        """Bound on the gated value: where the check is below one every gadget of fnet is exact,
        so fnet is the collected Taylor polynomial on [0, h)^d plus at most 1 of product error."""
        h = self.h
        est = max(1.0, self.norm) + self.c46 * max(1.0, h) ** self.f.p
        return est * sum(h ** sum(l) / mi_factorial(l) for l in multi_indices(self.d, self.f.q)) + 1.0

    def resolve_precision(self):
        target = float(self.M) ** (-2 * self.f.p)
        q, d = self.f.q, self.d
        A = self.poly_radius
        lifted = max(q, 1)

        def ok_p(R):
            return R >= poly_min_R(A, lifted) and poly_bound(R, A, q, self.poly_coeffs) <= target

        def ok_w(R):
            return (R >= mult_d_min_R(1.0, d) and mult_d_bound(R, 1.0, d) <= target
                    and mult_bound(R, self.gated_bound) <= target)

        base_p = deep_precision_base(d, q, self.f.p, self.M)
        base_w = log4_ceil(self.M ** (2 * self.f.p))
        if self.precision_w is None:
            R = base_w
            while not ok_w(R):
                R += 1
            self.precision_w = R
        elif not ok_w(self.precision_w):
            raise ConstructionError(f"precision_w={self.precision_w} violates a product bound or precondition")
        if self.precision is None:
            R = max(base_p, self.precision_w)
            while not ok_p(R):
                R += 1
            self.precision = R
        elif not ok_p(self.precision):
            raise ConstructionError(f"precision={self.precision} violates the polynomial bound or precondition")
        self.info.update(precision=self.precision, precision_w=self.precision_w,
                         precision_offset=self.precision - base_p,
                         precision_w_offset=self.precision_w - base_w)
        return self.precision, self.precision_w


def _check_s(cfg, values, what):
    m = float(np.max(np.abs(values))) if len(values) else 0.0
    if m > cfg.B_M:
        log.warning("gated value %s reaches %.3g > R=%d; exactness off the margins is not guaranteed",
                    what, m, cfg.B_M)
        cfg.info.setdefault("s_violations", []).append((what, m))


def _rows(n_in, spec):
    """AffineRows from a list of (terms, const)."""
    rows = AffineRows(n_in)
    for terms, const in spec:
        rows.add(terms, const)
    return rows


def _coarse_walk(cfg, tables):
    """x -> (x, corner, table values...) via M^d sequential indicator stages.

    ``tables`` is a list of arrays of shape (n_coarse, k_t); the state carries
    x (d), the accumulated corner (d) and the accumulated table rows.
    """
    d = cfg.d
    P1 = CubePartition(cfg.a, cfg.M, d, 1)
    lefts = P1.left(np.arange(P1.n_cubes))
    extra = sum(t.shape[1] for t in tables)
    n_s = 2 * d + extra
    start = affine(np.vstack([np.eye(d), np.zeros((n_s - d, d))]))
    stages = [start]
    for j in range(P1.n_cubes):
        pre_all = _rows(n_s, [({i: 1.0}, 0.0) for i in range(n_s)])
        pre_x = _rows(n_s, [({i: 1.0}, 0.0) for i in range(d)])
        gadgets = [(_identity(2, n_s), pre_all),
                   (_indicator(cfg.B_M, lefts[j], lefts[j] + P1.side), pre_x)]
        vals = np.concatenate([lefts[j]] + [t[j] for t in tables])
        post = _rows(n_s + 1, [({i: 1.0}, 0.0) for i in range(d)]
                     + [({d + i: 1.0, n_s: vals[i]}, 0.0) for i in range(n_s - d)])
        stages.append(stage(gadgets, post))
    return chain(*stages)


def _fnet_tables(cfg):
    """Derivatives at each coarse corner and packed digits per coarse cube."""
    d, q = cfg.d, cfg.f.q
    P1 = CubePartition(cfg.a, cfg.M, d, 1)
    lefts = P1.left(np.arange(P1.n_cubes))
    L = multi_indices(d, q)
    D = np.stack([cfg.f.derivative(l, lefts) for l in L], axis=1)
    c46 = cfg.c46
    bco = [compute_b_coefficients(cfg.f, cfg.a, cfg.M, i, c46) for i in range(P1.n_cubes)]
    base = dyadic_base(d)
    packed = np.array([[float(pack_digits(b.digits[l], d, base)) for l in L] for b in bco])
    cfg.info["b_coefficients"] = bco
    return D, packed, bco


def _fnet(cfg):
    R_p, _ = cfg.resolve_precision()
    d, q, p, M, h = cfg.d, cfg.f.q, cfg.f.p, cfg.M, cfg.h
    m, n = cfg.m, cfg.n
    check_digit_precision(M, d)
    L = multi_indices(d, q)
    idx = {l: t for t, l in enumerate(L)}
    base, off, c46 = dyadic_base(d), digit_offset(d), cfg.c46
    D, packed, _ = _fnet_tables(cfg)
    coarse = _coarse_walk(cfg, [D, packed])
    steps = subcube_offsets_deep(M, cfg.a, d)
    margins = digit_margins(M, d)
    cfg.info["digit_margins"] = margins
    _check_s(cfg, np.array([cfg.a]), "fine corner")
    _check_s(cfg, [v for b in cfg.info["b_coefficients"] for e in b.estimates for v in e.values()],
             "derivative estimate")

    # state: x (d), corner (d), estimates (m), packed (m), collected corner (d), collected estimates (m)
    o1, o2, o3, o4, o5, o6 = 0, d, 2 * d, 2 * d + m, 2 * d + 2 * m, 3 * d + 2 * m
    n_s = 3 * d + 3 * m
    # widen the coarse state with zero slots for the collected values
    widen = affine(np.vstack([np.eye(2 * d + 2 * m), np.zeros((d + m, 2 * d + 2 * m))]))
    stages = [coarse, widen]
    test = _test_multi(cfg.B_M, d, d + m)
    for k in range(n):
        last = k == n - 1
        gadgets = [(_identity(2, n_s), _rows(n_s, [({i: 1.0}, 0.0) for i in range(n_s)]))]
        tspec = ([({o1 + i: 1.0}, 0.0) for i in range(d)] + [({o2 + i: 1.0}, 0.0) for i in range(d)]
                 + [({o2 + i: 1.0}, h) for i in range(d)] + [({o2 + i: 1.0}, 0.0) for i in range(d)]
                 + [({o3 + t: 1.0}, 0.0) for t in range(m)])
        gadgets.append((test, _rows(n_s, tspec)))
        if not last:
            mk = margins[k]
            tr = _trunc(mk["R"], digit_base(d), mk["delta"])
            for t in range(m):
                gadgets.append((tr, _rows(n_s, [({o4 + t: float(base)}, 0.0)])))
        # concatenated gadget outputs: state (n_s), tests (d + m), floors (m)
        ot, oT = n_s, n_s + d + m
        n_in = n_s + d + m + (0 if last else m)
        spec = [({o1 + i: 1.0}, 0.0) for i in range(d)]
        if not last:
            v = steps[k]
            spec += [({o2 + i: 1.0}, v[i]) for i in range(d)]
            for l in L:
                terms = {}
                for s in multi_indices(d, q - sum(l)):
                    c = float(mi_power(v, s)) / mi_factorial(s)
                    if c != 0:
                        terms[o3 + idx[mi_add(l, s)]] = c
                scale = c46 * h ** (p - sum(l))
                terms[oT + idx[l]] = scale
                spec.append((terms, -off * scale))
            spec += [({o4 + t: float(base), oT + t: -1.0}, 0.0) for t in range(m)]
        spec += [({o5 + i: 1.0, ot + i: 1.0}, 0.0) for i in range(d)]
        spec += [({o6 + t: 1.0, ot + d + t: 1.0}, 0.0) for t in range(m)]
        st = stage(gadgets, _rows(n_in, spec))
        if not last:
            P = np.zeros((m, n_s))
            P[np.arange(m), o4 + np.arange(m)] = base
            st = with_probe(st, f"floor_input_{k}", 0, P, np.full(m, margins[k]["delta"]))
        stages.append(st)
    # final state: x, collected corner, collected estimates
    pre = AffineRows(2 * d + m)
    for i in range(d):
        pre.add({i: 1.0, d + i: -1.0})
    for t in range(m):
        pre.add({2 * d + t: 1.0})
    poly = _poly(R_p, cfg.poly_radius, q, d, cfg.poly_coeffs)
    stages.append(compose(poly, pre.network()))
    return chain(*stages)


def fnet_deep_arch(d, q, M, R):
    m = math.comb(d + q, d)
    lifted = max(q, 1)
    L = 4 * M ** d + R * math.ceil(math.log2(max(q + 1, 2)))
    base = digit_base(d)
    r = max(10 * d + 4 * d * d + 2 * m * (2 * base + 5 + 2 * d), 18 * (q + 1) * m,
            18 * (lifted + 1) * math.comb(d + lifted, d))
    return L, r


def build_fnet_deep_P2(cfg):
    """Sequential Taylor network; class F(4M^d + R ceil(log2 max(q+1, 2)), r_deep)."""
    net = _fnet(cfg)
    return conform(net, *fnet_deep_arch(cfg.d, cfg.f.q, cfg.M, cfg.precision))


def _snake_corner(cfg, state_dim, x_off, c_off, extra_pre=None):
    """Snake stages on (x, corner) returning (x, fine corner containing x)."""
    d, h, n = cfg.d, cfg.h, cfg.n
    steps = subcube_offsets_deep(cfg.M, cfg.a, d)
    test = _test_multi(cfg.B_M, d, d)
    n_s = 3 * d
    stages = [_rows(state_dim, [({x_off + i: 1.0}, 0.0) for i in range(d)]
                    + [({c_off + i: 1.0}, 0.0) for i in range(d)]
                    + [({}, 0.0) for _ in range(d)]).network()]
    for k in range(n):
        last = k == n - 1
        gadgets = [(_identity(2, n_s), _rows(n_s, [({i: 1.0}, 0.0) for i in range(n_s)]))]
        tspec = ([({i: 1.0}, 0.0) for i in range(d)] + [({d + i: 1.0}, 0.0) for i in range(d)]
                 + [({d + i: 1.0}, h) for i in range(d)] + [({d + i: 1.0}, 0.0) for i in range(d)])
        gadgets.append((test, _rows(n_s, tspec)))
        spec = [({i: 1.0}, 0.0) for i in range(d)]
        if not last:
            spec += [({d + i: 1.0}, steps[k][i]) for i in range(d)]
        spec += [({2 * d + i: 1.0, n_s + i: 1.0}, 0.0) for i in range(d)]
        stages.append(stage(gadgets, _rows(n_s + d, spec)))
    return chain(*stages)


def _weight(cfg):
    _, R_w = cfg.resolve_precision()
    d, M, a = cfg.d, cfg.M, cfg.a
    if mult_d_bound(R_w, 1.0, d) > 1.0:
        raise ConstructionError(f"precision R={R_w} too small: 4^(4d+1) d 4^-R must not exceed 1")
    coarse = _coarse_walk(cfg, [])
    walk = _snake_corner(cfg, 2 * d, 0, d)
    scale = M ** 2 / a
    w = np.zeros((3 * d, 2 * d))
    b = np.zeros(3 * d)
    for i in range(d):
        for k, o in enumerate((0.0, -1.0, -2.0)):
            w[3 * i + k, i], w[3 * i + k, d + i] = scale, -scale
            b[3 * i + k] = o
    out = np.zeros((d, 3 * d))
    for i in range(d):
        out[i, 3 * i:3 * i + 3] = (1.0, -2.0, 1.0)
    hat = Network(2 * d, [(w, b)], out, np.zeros(d))
    return chain(coarse, walk, hat, _mult_d(R_w, 1.0, d, check=True))


def weight_deep_arch(d, M, R):
    return 4 * M ** d + 1 + R * (math.ceil(math.log2(d)) if d > 1 else 0), max(18 * d, 4 * d * d + 10 * d)


def build_weight_net_deep(cfg):
    """Tensor hat of the fine cube containing x, located by the walk; class F(4M^d + 1 + R ceil(log2 d), max{18d, 4d^2 + 10d})."""
    net = _weight(cfg)
    return conform(net, *weight_deep_arch(cfg.d, cfg.M, cfg.precision_w))


def _check(cfg):
    d, M, a, h, n = cfg.d, cfg.M, cfg.a, cfg.h, cfg.n
    delta = 1.0 / M ** (2 * cfg.f.p + 2)
    R = cfg.B_M
    P1 = CubePartition(a, M, d, 1)
    lefts = P1.left(np.arange(P1.n_cubes))
    # coarse stage: state (x, corner, u); u counts inner coarse cubes containing x
    n_c = 2 * d + 1
    stages = [affine(np.vstack([np.eye(d), np.zeros((d + 1, d))]))]
    for j in range(n):
        pre_x = _rows(n_c, [({i: 1.0}, 0.0) for i in range(d)])
        gadgets = [(_identity(2, n_c), _rows(n_c, [({i: 1.0}, 0.0) for i in range(n_c)])),
                   (_indicator(R, lefts[j], lefts[j] + P1.side), pre_x),
                   (_indicator(R, lefts[j] + delta, lefts[j] + P1.side - delta), pre_x)]
        spec = ([({i: 1.0}, 0.0) for i in range(d)]
                + [({d + i: 1.0, n_c: lefts[j][i]}, 0.0) for i in range(d)]
                + [({2 * d: 1.0, n_c + 1: 1.0}, 0.0)])
        stages.append(stage(gadgets, _rows(n_c + 2, spec)))
    # snake stage: state (x, corner, t) with t = u - 1 + sum of inner fine-cube indicators
    steps = subcube_offsets_deep(M, a, d)
    stages.append(_rows(n_c, [({i: 1.0}, 0.0) for i in range(2 * d)] + [({2 * d: 1.0}, -1.0)]).network())
    # variable-bound indicator relu(1 - R sum(relu(c + delta + 1/R - x) + relu(x - c - h + delta + 1/R)))
    w1 = np.zeros((2 * d, 2 * d))
    for i in range(d):
        w1[i, d + i], w1[i, i] = 1.0, -1.0
        w1[d + i, i], w1[d + i, d + i] = 1.0, -1.0
    b1 = np.concatenate([np.full(d, delta + 1.0 / R), np.full(d, -h + delta + 1.0 / R)])
    ind = Network(2 * d, [(w1, b1), (np.full((1, 2 * d), -float(R)), np.ones(1))], [[1.0]], [0.0])
    for k in range(n):
        last = k == n - 1
        gadgets = [(_identity(2, n_c), _rows(n_c, [({i: 1.0}, 0.0) for i in range(n_c)])),
                   (ind, _rows(n_c, [({i: 1.0}, 0.0) for i in range(2 * d)]))]
        spec = [({i: 1.0}, 0.0) for i in range(d)]
        spec += [({d + i: 1.0}, 0.0 if last else steps[k][i]) for i in range(d)]
        spec += [({2 * d: 1.0, n_c: 1.0}, 0.0)]
        stages.append(stage(gadgets, _rows(n_c + 1, spec)))
    pick_t = np.zeros((1, n_c))
    pick_t[0, 2 * d] = 1.0
    final = Network(n_c, [(pick_t, np.zeros(1))], [[-1.0]], [1.0])
    return chain(*stages, final)


def check_deep_arch(d, M):
    return 5 * M ** d, 2 * d * d + 6 * d + 2


def build_check_net_deep(cfg):
    """Margin detector 1 - relu(t), t = u - 1 + sum of inner fine-cube indicators; class F(5M^d, 2d^2 + 6d + 2)."""
    return conform(_check(cfg), *check_deep_arch(cfg.d, cfg.M))


def masked_deep_depth(d, q, M, R_p, R_w):
    return 5 * M ** d + R_p * math.ceil(math.log2(max(q, d) + 1)) + R_w


def _masked(cfg):
    R_p, R_w = cfg.resolve_precision()
    d, q = cfg.d, cfg.f.q
    fnet, check, weight = _fnet(cfg), _check(cfg), _weight(cfg)
    Bt, Bg = max(cfg.value_bound, 2.0), max(cfg.gated_bound, 2.0)
    cfg.info["B_true"], cfg.info["B_gated"] = Bt, Bg
    inner_depth = max(fnet.depth, check.depth) + 1
    gate_in = parallelize([pad_depth(fnet, inner_depth - 1), pad_depth(check, inner_depth - 1)])
    gate = Network(2, [(np.array([[1.0, -Bt], [-1.0, -Bt]]), np.zeros(2))], [[1.0, -1.0]], [0.0])
    gated = compose(gate, gate_in)
    depth = max(gated.depth, weight.depth)
    both = parallelize([pad_depth(weight, depth), pad_depth(gated, depth)])
    net = compose(_mult(R_w, Bg), both)
    return pad_depth(net, masked_deep_depth(d, q, cfg.M, R_p, R_w))


def build_masked_net_deep(cfg):
    """f_mult(weight, relu(fnet - B check) - relu(-fnet - B check)) with depth 5M^d + R_p ceil(log2(max{q,d}+1)) + R_w."""
    return _masked(cfg)


def theorem_deep_arch(d, q, p, M):
    """Depth and width lower bounds of the deep approximation theorem."""
    L = (5 * M ** d + deep_precision_base(d, q, p, M) * math.ceil(math.log2(max(q, d) + 1))
         + log4_ceil(M ** (2 * p)))
    r = 132 * 2 ** d * math.ceil(math.e ** d) * math.comb(d + q, d) * max(q + 1, d * d)
    return L, r


def build_deep_approximator(f, a, M, precision=None, precision_w=None, B_M=None):
    """Sum of 2^d masked deep branches on the doubled domain; approximates f on [-a, a]^d.

    Returns (network, info).  The width does not depend on M.
    """
    if a < 1:
        raise RejectedInputError("a must be >= 1")
    a_int = 2.0 * a
    d = f.d
    check_digit_precision(M, d)
    probe = DeepConfig(shifted_function(f, np.full(d, a_int / M ** 2)), a_int, M, B_M, precision, precision_w)
    R_p, R_w = probe.resolve_precision()
    members, infos = [], []
    for v in range(2 ** d):
        P = CubePartition(a_int, M, d, 2, v)
        g = shifted_function(f, P.shift)
        cfg = DeepConfig(g, a_int, M, B_M, R_p, R_w, v)
        net = _masked(cfg)
        members.append(prefix_probes(compose(net, affine(np.eye(d), -P.shift)), f"branch{v}/"))
        infos.append(cfg.info)
    total = compose(affine(np.ones((1, len(members)))), parallelize(members))
    L_thm, r_thm = theorem_deep_arch(d, f.q, f.p, M)
    info = {
        "a_internal": a_int, "precision": R_p, "precision_w": R_w,
        "precision_offset": R_p - deep_precision_base(d, f.q, f.p, M),
        "B_true": max(i.get("B_true", 0.0) for i in infos),
        "B_gated": max(i.get("B_gated", 0.0) for i in infos), "theorem_L": L_thm, "theorem_r": r_thm,
        "depth": total.depth, "width": total.width,
        "s_violations": [s for i in infos for s in i.get("s_violations", [])],
    }
    return total, info
