"""Hierarchical composition models and their network approximations.

A model of level l evaluates h_j^(i) = g_j^(i)(h^(i-1) of its children) with
level-1 nodes reading input coordinates through the selector pi.  ``levels``
lists the component functions level by level (level 1 first); the arities of
level i+1 must add up to the node count of level i.

* t1 runs wide approximators of one level side by side, level after level.
* t2 runs deep approximators one node at a time while identity rails carry x
  and every value already computed.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import catalog
from .deep import build_deep_approximator, deep_precision_base
from .errors import RejectedInputError, ValidationError
from .network import (affine, compose, evaluate, pad_depth, parallelize, prefix_probes,
                      select, with_probe)
from .primitives import _identity
from .taylor import SmoothFunction
from .wide import build_wide_approximator, log4_ceil


@dataclass
class HierarchicalModel:
    """levels[i][j] is g_j^(i+1); pi maps level-1 argument slots to input coordinates."""

    d: int
    levels: list
    pi: list
    a: float = 1.0
    name: str = "model"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.levels or len(self.levels[-1]) != 1:
            raise ValidationError("the top level must hold exactly one node")
        for i in range(len(self.levels) - 1):
            need = sum(g.d for g in self.levels[i + 1])
            if need != len(self.levels[i]):
                raise ValidationError(
                    f"level {i + 2} arities sum to {need} but level {i + 1} has {len(self.levels[i])} nodes")
        slots = sum(g.d for g in self.levels[0])
        if len(self.pi) != slots:
            raise ValidationError(f"selector has {len(self.pi)} entries, level 1 needs {slots}")
        if any(not 0 <= k < self.d for k in self.pi):
            raise ValidationError("selector entries must index input coordinates")

    @property
    def l(self):
        return len(self.levels)

    @property
    def K_max(self):
        return max(g.d for lev in self.levels for g in lev)

    @property
    def p_max(self):
        return max(g.p for lev in self.levels for g in lev)

    def g_max(self):
        """max{sup |g_j^(i)| bounds, 1}, each on the radius its inputs can reach."""
        best, radius = 1.0, self.a
        for lev in self.levels:
            vals = [g.norm_bound(radius) for g in lev]
            best = max(best, *vals)
            radius = max(radius, max(vals))
        return best

    def radius(self):
        """Domain radius 2 max{g_max, a} of every node approximator."""
        return 2.0 * max(self.g_max(), self.a)

    def lipschitz(self):
        """C_Lip >= 1 bounding every component's Lipschitz constant (Euclidean norm) on the node radius."""
        A = self.radius()
        return max([1.0] + [lipschitz_bound(g, A) for lev in self.levels for g in lev])

    def as_smooth_function(self):
        """The composite as a Lipschitz function (q = 0, s = 1) with a chain-rule constant."""
        A = self.radius()
        lips = []
        for i, lev in enumerate(self.levels):
            row, start = [], 0
            for g in lev:
                if i == 0:
                    child = [1.0] * g.d
                else:
                    child = lips[i - 1][start:start + g.d]
                row.append(lipschitz_bound(g, A) * math.sqrt(sum(c * c for c in child)))
                start += g.d
            lips.append(row)
        top = lips[-1][0]

        def deriv(l, X):
            if sum(l):
                raise RejectedInputError("the composite is used with q = 0")
            return evaluate_model(self, X)

        return SmoothFunction(self.d, 0, 1.0, lambda X: evaluate_model(self, X), deriv,
                              norm=lambda a: self.g_max(), holder=lambda a: top, name=self.name)


def lipschitz_bound(g, a):
    """Lipschitz constant of g on [-a, a]^K: the Hoelder constant when p = 1, else sqrt(K) times the C^q norm."""
    if g.q == 0:
        if g.s < 1:
            raise ValidationError(f"{g.name} with p = {g.p} < 1 is not Lipschitz")
        return g.C(a)
    return math.sqrt(g.d) * g.norm_bound(a)


def enumerate_nodes(model):
    """Node counts per level and the flat order (level, j, N) with N = sum_{t<i} N_t + j (1-based)."""
    counts = [len(lev) for lev in model.levels]
    flat, N = [], 0
    for i, c in enumerate(counts):
        for j in range(c):
            N += 1
            flat.append((i + 1, j + 1, N))
    return {"N_tilde": counts, "flat": flat, "total": N}


def _children(model, i):
    """Argument index ranges of level-(i+1) nodes into the level-i outputs (or selector slots)."""
    out, start = [], 0
    for g in model.levels[i]:
        out.append(list(range(start, start + g.d)))
        start += g.d
    return out


def evaluate_model(model, X):
    """Bottom-up evaluation of h_1^(l) on a batch X of shape (n, d) (or a single point)."""
    x = np.asarray(X, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    vals = X[:, model.pi]
    for i, lev in enumerate(model.levels):
        vals = np.stack([g(vals[:, idx]) for g, idx in zip(lev, _children(model, i))], axis=1)
    out = vals[:, 0]
    return float(out[0]) if single else out


# ---------------------------------------------------------------- catalog models


def fig2_model(a=1.0):
    """Level-2 model on R^7: a ternary top over nodes of arity 2, 3 and 2."""
    levels = [
        [catalog.sinprod(2, 1.0, 0.5, 1.0), catalog.expsum(3, 0.5, 1.0), catalog.sinprod(2, 1.0, 0.3, 1.0)],
        [catalog.sinprod(3, 1.0, 0.7, 1.0)],
    ]
    return HierarchicalModel(7, levels, list(range(7)), a, "fig2")


def toy_model(a=1.0):
    """Level-2 model on R^2: a bivariate top over two univariate nodes."""
    levels = [[catalog.sinprod(1, 2.0, 0.5, 1.0), catalog.expsum(1, 1.0, 1.0)],
              [catalog.sinprod(2, 1.0, 0.5, 1.0)]]
    return HierarchicalModel(2, levels, [0, 1], a, "toy")


# ---------------------------------------------------------------- networks


def _grid(model, M):
    """Normalize M to one integer per node (int, or nested lists shaped like ``levels``)."""
    if isinstance(M, int):
        return [[M] * len(lev) for lev in model.levels]
    if [len(r) for r in M] != [len(lev) for lev in model.levels]:
        raise RejectedInputError("M grid must match the node layout")
    return [[int(v) for v in r] for r in M]


def t1_arch(model, M):
    M = _grid(model, M)
    K, p = model.K_max, model.p_max
    top = max(Mv ** (2 * g.p) for lev, row in zip(model.levels, M) for g, Mv in zip(lev, row))
    L0 = 5 + log4_ceil(top) * (math.ceil(math.log2(max(K, p) + 1)) + 1)
    r = max(sum(2 ** g.d * 64 * math.comb(g.d + g.q, g.d) * g.d ** 2 * (g.q + 1) * Mv ** g.d
                for g, Mv in zip(lev, row)) for lev, row in zip(model.levels, M))
    return model.l * L0, r


def build_t1(model, M, a=None):
    """Level-parallel composition of wide approximators; depth l * L0 with L0 the deepest member.

    Returns (network, info); ``info["members"]`` maps (level, j) to the member network.
    """
    Mg = _grid(model, M)
    A = model.radius() if a is None else a
    members, infos = {}, {}
    for i, lev in enumerate(model.levels):
        for j, g in enumerate(lev):
            members[i + 1, j + 1], infos[i + 1, j + 1] = build_wide_approximator(g, A, Mg[i][j])
    L0 = max(n.depth for n in members.values())
    stages = [select(model.d, model.pi)]
    for i, lev in enumerate(model.levels):
        n_in = len(model.pi) if i == 0 else len(model.levels[i - 1])
        parts = [compose(pad_depth(members[i + 1, j + 1], L0), select(n_in, idx))
                 for j, idx in enumerate(_children(model, i))]
        stages.append(parallelize(parts))
    net = stages[0]
    for s in stages[1:]:
        net = compose(s, net)
    L_thm, r_thm = t1_arch(model, Mg)
    info = {"members": members, "member_info": infos, "L0": L0, "radius": A,
            "theorem_L": L_thm, "theorem_r": r_thm, "depth": net.depth, "width": net.width}
    return net, info


def t2_arch(model, M):
    Mg = _grid(model, M)
    L = 0
    for lev, row in zip(model.levels, Mg):
        for g, Mv in zip(lev, row):
            L += (5 * Mv ** g.d + deep_precision_base(g.d, g.q, g.p, Mv)
                  * math.ceil(math.log2(max(g.d, g.q) + 1)) + log4_ceil(Mv ** (2 * g.p)))
    K, pc = model.K_max, math.ceil(model.p_max)
    r = (2 * sum(len(lev) for lev in model.levels[:-1]) + 2 * model.d
         + 132 * 2 ** K * math.ceil(math.e ** K) * math.comb(K + pc, K) * max(pc + 1, K * K))
    return L, r


def build_t2(model, M, a=None):
    """Node-by-node composition of deep approximators with identity rails.

    The state after node N holds x (d values) followed by h_1..h_N.  Each stage
    carries the state on f_id rails while the member network reads its
    arguments from the state.  Probes ``rail_x_N`` read x back after stage N.
    """
    Mg = _grid(model, M)
    A = model.radius() if a is None else a
    members, infos = {}, {}
    d = model.d
    # offsets of level outputs within the state
    level_start, pos = [], d
    for lev in model.levels:
        level_start.append(pos)
        pos += len(lev)
    net = affine(np.eye(d))
    n_state = d
    for i, lev in enumerate(model.levels):
        for j, (g, idx) in enumerate(zip(lev, _children(model, i))):
            member, infos[i + 1, j + 1] = build_deep_approximator(g, A, Mg[i][j])
            members[i + 1, j + 1] = member
            args = [model.pi[k] for k in idx] if i == 0 else [level_start[i - 1] + k for k in idx]
            N = level_start[i] + j - d + 1
            rails = _identity(member.depth, n_state)
            st = parallelize([rails, prefix_probes(compose(member, select(n_state, args)), f"node{N}/")])
            P = np.zeros((d, st.output_dim))
            P[np.arange(d), np.arange(d)] = 1.0
            st = with_probe(st, f"rail_x_{N}", st.depth, P @ st.out_weights, P @ st.out_bias)
            net = compose(st, net)
            n_state += 1
    net = compose(select(n_state, [n_state - 1]), net)
    L_thm, r_thm = t2_arch(model, Mg)
    info = {"members": members, "member_info": infos, "radius": A,
            "theorem_L": L_thm, "theorem_r": r_thm, "depth": net.depth, "width": net.width}
    return net, info


def induction_envelope(model, members, X):
    """Per-level error envelopes E_i = max_j (member error + K_j C_Lip E_{i-1}), E_0 = 0.

    Member errors are sup |g_hat(u) - g(u)| over the arguments u the composed
    approximation actually feeds each member on the points X.  Returns a dict
    with the envelopes, member errors and the approximate top-level values.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    C = model.lipschitz()
    vals = X[:, model.pi]
    E_prev, envelopes, member_err = 0.0, [], {}
    for i, lev in enumerate(model.levels):
        outs, E = [], 0.0
        for j, (g, idx) in enumerate(zip(lev, _children(model, i))):
            U = vals[:, idx]
            approx = evaluate(members[i + 1, j + 1], U)
            err = float(np.max(np.abs(approx - g(U))))
            member_err[i + 1, j + 1] = err
            E = max(E, err + g.d * C * E_prev)
            outs.append(approx)
        vals = np.stack(outs, axis=1)
        envelopes.append(E)
        E_prev = E
    return {"envelopes": envelopes, "member_errors": member_err, "C_Lip": C, "values": vals[:, 0]}
