"""Least-squares neural regression at desk scale.

Data come from a regression model Y = m(X) + noise with X uniform on
[-a, a]^d.  Networks in F(L, r) are fitted by full-batch (or mini-batch)
gradient descent with momentum on the empirical L2 risk, then truncated at
level beta = c3 * log n.  Errors are Monte Carlo estimates of the L2 distance
to m under the design distribution.
"""

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInputError, TrainingError
from .hierarchy import HierarchicalModel, evaluate_model, fig2_model, toy_model
from .network import Network, count_parameters, evaluate
from .primitives import build_square

DEFAULT_CONSTANTS = {"c4": 1.0, "c5": 1.0, "c7": 1.0, "c8": 10.0}
CSV_COLUMNS = ["n", "rule", "L", "r", "W", "seed", "train_risk", "test_risk", "l2_mc", "se"]


# ---------------------------------------------------------------- data


@dataclass
class Dataset:
    X: np.ndarray
    Y: np.ndarray
    spec: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.X.shape[0]

    def split(self, n_first):
        return (Dataset(self.X[:n_first], self.Y[:n_first], dict(self.spec, part="first")),
                Dataset(self.X[n_first:], self.Y[n_first:], dict(self.spec, part="second")))


class NetworkTarget:
    """A regression function given by a network on [-a, a]^d."""

    def __init__(self, net, a=1.0, name="network"):
        self.net, self.a, self.name = net, float(a), name

    @property
    def d(self):
        return self.net.input_dim

    def __call__(self, X):
        return np.atleast_1d(evaluate(self.net, X))


def teacher_target():
    """The squaring net f_sq with R = 2 on [-1, 1], a member of F(2, 9)."""
    return NetworkTarget(build_square(2, 1.0), 1.0, "teacher")


def _target(model):
    """(d, a, m) for a hierarchical model, a network target or a catalog function."""
    if isinstance(model, HierarchicalModel):
        return model.d, model.a, lambda X: evaluate_model(model, X)
    a = getattr(model, "a", 1.0)
    return model.d, a, lambda X: np.asarray(model(X), dtype=np.float64)


def sample_x(model, n, rng):
    d, a, _ = _target(model)
    return rng.uniform(-a, a, size=(n, d))


def generate_data(model, n, sigma=0.1, seed=0, noise="gaussian"):
    """n i.i.d. pairs with X uniform on the model's cube and Gaussian or uniform noise of scale sigma."""
    if n < 1:
        raise RejectedInputError("n must be positive")
    rng = np.random.default_rng(seed)
    _, _, m = _target(model)
    X = sample_x(model, n, rng)
    if noise == "gaussian":
        eps = rng.normal(0.0, sigma, size=n)
    elif noise == "uniform":
        eps = rng.uniform(-sigma * math.sqrt(3), sigma * math.sqrt(3), size=n)
    else:
        raise RejectedInputError(f"unknown noise {noise!r}")
    return Dataset(X, m(X) + eps, {"n": n, "sigma": sigma, "seed": seed, "noise": noise})


# ---------------------------------------------------------------- architecture


def choose_architecture(n, P, rule="a", constants=None):
    """(L_n, r_n) from the smoothness/dimension pairs P = [(p, K)] under rule a or b."""
    P = list(P)
    if not P:
        raise RejectedInputError("P must contain at least one (p, K) pair")
    if n < 2:
        raise RejectedInputError("n must be at least 2")
    c = dict(DEFAULT_CONSTANTS, **(constants or {}))
    if any(not (math.isfinite(p) and p > 0 and K >= 1) for p, K in P):
        raise RejectedInputError("each pair needs p > 0 and K >= 1")
    rate = max(n ** (K / (2 * (2 * p + K))) for p, K in P)
    log_n = math.log(n)
    if rule == "a":
        return max(1, math.ceil(c["c4"] * log_n)), max(1, math.ceil(c["c5"] * rate))
    if rule == "b":
        return max(1, math.ceil(c["c7"] * rate * log_n)), max(1, math.ceil(c["c8"]))
    raise RejectedInputError(f"unknown rule {rule!r}")


def model_pairs(model):
    """Smoothness/dimension pairs (p, K) of every component of a hierarchical model."""
    return sorted({(g.p, g.d) for lev in model.levels for g in lev})


# ---------------------------------------------------------------- training


@dataclass
class TrainingConfig:
    L: int
    r: int
    steps: int = 1500
    lr: float = 0.02
    momentum: float = 0.9
    batch_size: int = 0
    init_scale: float = 1.0
    clip: float = 1.0
    seed: int = 0
    c3: float = 1.0

    def __post_init__(self):
        if self.L < 1 or self.r < 1 or self.steps < 0:
            raise RejectedInputError("need L >= 1, r >= 1, steps >= 0")
        if not (self.lr > 0 and 0 <= self.momentum < 1 and self.init_scale > 0 and self.clip > 0):
            raise RejectedInputError("hyperparameters must be positive (momentum in [0, 1))")


def _orthogonal(rows, cols, rng):
    q, r = np.linalg.qr(rng.normal(size=(max(rows, cols), min(rows, cols))))
    q = q * np.sign(np.diag(r))
    return q if rows >= cols else q.T


def init_params(d, L, r, rng, scale=1.0):
    """Looks-linear initialization: paired units (u, -u) make the initial network linear.

    With k = r // 2 pairs, each hidden layer holds relu(z) and relu(-z) of a
    k-vector z, and the next layer reads z back as their difference.  An odd
    unit left over starts with zero outgoing weights.
    """
    k = r // 2
    Ws, bs = [], []
    if k == 0:
        Ws.append(rng.normal(0, scale / math.sqrt(d), size=(r, d)))
        bs.append(np.zeros(r))
        for _ in range(L - 1):
            Ws.append(rng.normal(0, scale, size=(r, r)))
            bs.append(np.zeros(r))
        return Ws, bs, rng.normal(0, scale, size=(1, r)), np.zeros(1)
    U = scale * _orthogonal(k, d, rng) * math.sqrt(max(k, d) / d)
    W = np.zeros((r, d))
    W[:k], W[k:2 * k] = U, -U
    if r % 2:
        W[-1] = rng.normal(0, scale / math.sqrt(d), size=d)
    Ws.append(W)
    bs.append(np.zeros(r))
    for _ in range(L - 1):
        V = scale * _orthogonal(k, k, rng)
        W = np.zeros((r, r))
        W[:k, :k], W[:k, k:2 * k] = V, -V
        W[k:2 * k, :k], W[k:2 * k, k:2 * k] = -V, V
        if r % 2:
            W[-1, -1] = 1.0
        Ws.append(W)
        bs.append(np.zeros(r))
    A = np.zeros((1, r))
    v = rng.normal(0, 1.0 / math.sqrt(k), size=k)
    A[0, :k], A[0, k:2 * k] = v, -v
    return Ws, bs, A, np.zeros(1)


def _forward(params, X):
    """Activations are kept as (width, n) arrays, the faster layout for narrow layers."""
    Ws, bs, A, c = params
    h = np.ascontiguousarray(X.T)
    hs = [h]
    for W, b in zip(Ws, bs):
        h = W @ h
        h += b[:, None]
        np.maximum(h, 0.0, out=h)
        hs.append(h)
    return (A @ h)[0] + c[0], hs


def _risk(params, X, Y):
    pred, _ = _forward(params, X)
    return float(np.mean((pred - Y) ** 2))


def _gradients(params, X, Y):
    """Backpropagation of the mean squared error; returns (risk, grads shaped like params)."""
    Ws, bs, A, c = params
    pred, hs = _forward(params, X)
    res = pred - Y
    n = X.shape[0]
    g_out = (2.0 / n) * res
    gA = (hs[-1] @ g_out)[None, :]
    gc = np.array([g_out.sum()])
    delta = A.T * g_out[None, :]
    ones = np.ones(n)
    gWs, gbs = [None] * len(Ws), [None] * len(Ws)
    for s in range(len(Ws) - 1, -1, -1):
        delta *= hs[s + 1] > 0
        gWs[s] = delta @ hs[s].T
        gbs[s] = delta @ ones
        if s:
            delta = Ws[s].T @ delta
    return float(np.mean(res ** 2)), (gWs, gbs, gA, gc)


def _flat(parts):
    Ws, bs, A, c = parts
    return list(Ws) + list(bs) + [A, c]


def _unflat(arrs, L):
    return arrs[:L], arrs[L:2 * L], arrs[2 * L], arrs[2 * L + 1]


def params_to_network(params, d):
    Ws, bs, A, c = params
    return Network(d, list(zip(Ws, bs)), A, c)


def network_to_params(net):
    Ws = [w.toarray() for w, _ in net.layers]
    bs = [b.copy() for _, b in net.layers]
    return Ws, bs, net.out_weights.toarray(), net.out_bias.copy()


def fit(data, config, init=None):
    """Gradient descent with momentum on the empirical L2 risk over F(L, r).

    Returns (network, report).  The iterate with the smallest full-sample risk
    is returned, so the final risk never exceeds the initial one.  Raises
    TrainingError when the risk becomes non-finite.
    """
    X, Y = np.asarray(data.X, dtype=np.float64), np.asarray(data.Y, dtype=np.float64)
    if X.shape[0] < 1:
        raise RejectedInputError("empty data set")
    rng = np.random.default_rng(config.seed)
    d = X.shape[1]
    params = network_to_params(init) if init is not None else init_params(
        d, config.L, config.r, rng, config.init_scale)
    theta = [p.copy() for p in _flat(params)]
    vel = [np.zeros_like(p) for p in theta]
    L = config.L
    initial = _risk(_unflat(theta, L), X, Y)
    best, best_theta = initial, [p.copy() for p in theta]
    n = X.shape[0]
    bsz = config.batch_size if 0 < config.batch_size < n else n
    history = [initial]
    with np.errstate(over="ignore", invalid="ignore"):
        best, best_theta = _descend(config, X, Y, theta, vel, rng, bsz, history, best, best_theta)
    net = params_to_network(_unflat(best_theta, L), d)
    report = {"initial_risk": initial, "train_risk": best, "steps": config.steps, "lr": config.lr,
              "momentum": config.momentum, "batch_size": bsz}
    return net, report


def _descend(config, X, Y, theta, vel, rng, bsz, history, best, best_theta):
    """Momentum steps with gradient-norm clipping; overflow surfaces as TrainingError."""
    L, n = config.L, X.shape[0]
    for step in range(config.steps):
        if bsz < n:
            idx = rng.choice(n, size=bsz, replace=False)
            Xb, Yb = X[idx], Y[idx]
        else:
            Xb, Yb = X, Y
        risk, grads = _gradients(_unflat(theta, L), Xb, Yb)
        if bsz == n:
            if not math.isfinite(risk):
                raise TrainingError(f"risk became non-finite at step {step} "
                                    f"(L={L}, r={config.r}, lr={config.lr}, last finite {history[-1]:.4g})")
            history.append(risk)
            if risk < best:
                best, best_theta = risk, [p.copy() for p in theta]
        g = _flat(grads)
        norm = math.sqrt(sum(float(np.sum(x * x)) for x in g))
        if not math.isfinite(norm):
            raise TrainingError(f"gradient became non-finite at step {step} (L={L}, r={config.r})")
        scale = min(1.0, config.clip / norm) if norm > 0 else 1.0
        for p, v, gr in zip(theta, vel, g):
            v *= config.momentum
            v -= config.lr * scale * gr
            p += v
    final = _risk(_unflat(theta, L), X, Y)
    if not math.isfinite(final):
        raise TrainingError(f"risk became non-finite after {config.steps} steps (L={L}, r={config.r})")
    if final < best:
        best, best_theta = final, theta
    return best, best_theta


# ---------------------------------------------------------------- truncation and selection


class TruncatedPredictor:
    """x -> clamp(net(x), -beta, beta)."""

    def __init__(self, net, beta):
        if not beta > 0:
            raise RejectedInputError("beta must be positive")
        self.net, self.beta = net, float(beta)

    def __call__(self, X):
        return np.clip(np.atleast_1d(self.net(X)), -self.beta, self.beta)


def truncate_estimator(net, beta):
    return TruncatedPredictor(net, beta)


def truncation_level(n, c3=1.0):
    return c3 * math.log(n)


def empirical_risk(predictor, data):
    return float(np.mean((np.atleast_1d(predictor(data.X)) - data.Y) ** 2))


def split_sample_select(data, candidates):
    """Fit every candidate config on the first half, pick the best held-out risk.

    Ties go to the smaller parameter count, then the earlier candidate.
    Returns (index, network, report) with the per-candidate risks in the report.
    """
    if not candidates:
        raise RejectedInputError("need at least one candidate")
    if len(candidates) == 1:
        net, rep = fit(data, candidates[0])
        return 0, net, {"held_out": [None], "fit": rep}
    if data.n < 4:
        raise RejectedInputError("sample splitting needs n >= 4")
    n_l = data.n // 2
    train, test = data.split(n_l)
    d = data.X.shape[1]
    scored = []
    for k, cfg in enumerate(candidates):
        net, rep = fit(train, cfg)
        scored.append((empirical_risk(net, test), count_parameters(d, cfg.L, cfg.r), k, net, rep))
    best = min(scored, key=lambda t: (t[0], t[1], t[2]))
    return best[2], best[3], {"held_out": [s[0] for s in scored], "fit": best[4]}


def measure_l2(predictor, model, n_mc=20000, seed=0):
    """Monte Carlo estimate of the L2 error against m under the design law; returns (mean, SE)."""
    if n_mc < 1:
        raise RejectedInputError("n_mc must be positive")
    _, _, m = _target(model)
    X = sample_x(model, n_mc, np.random.default_rng(seed))
    sq = (np.atleast_1d(predictor(X)) - m(X)) ** 2
    se = float(np.std(sq, ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else float("inf")
    return float(np.mean(sq)), se


# ---------------------------------------------------------------- experiments


@dataclass
class RegressionExperiment:
    n_list: list = field(default_factory=lambda: [200, 800, 3200])
    rules: list = field(default_factory=lambda: ["a", "b"])
    replications: int = 10
    seed: int = 0
    sigma: float = 0.1
    n_mc: int = 20000
    model: str = "toy"
    constants: dict = field(default_factory=dict)
    training: dict = field(default_factory=dict)
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1 or not self.n_list or not self.rules:
            raise RejectedInputError("experiment grid is empty")

    @classmethod
    def from_dict(cls, doc):
        known = set(cls.__dataclass_fields__)
        extra = set(doc) - known
        if extra:
            raise RejectedInputError(f"unknown experiment fields: {sorted(extra)}")
        return cls(**doc)


def experiment_model(name):
    if name == "toy":
        return toy_model()
    if name == "fig2":
        return fig2_model()
    if name == "teacher":
        return teacher_target()
    raise RejectedInputError(f"unknown experiment model {name!r}")


def run_replication(exp, n, rule, k):
    """One fit of the experiment grid; seeds derive from (seed, n, rule, k)."""
    model = experiment_model(exp.model)
    rule_id = exp.rules.index(rule)
    base = [exp.seed, n, rule_id, k]
    L, r = choose_architecture(n, model_pairs(model), rule, exp.constants)
    cfg = TrainingConfig(L, r, seed=int(np.random.SeedSequence(base + [1]).generate_state(1)[0]),
                         **exp.training)
    data = generate_data(model, n, exp.sigma, seed=base + [0])
    try:
        net, rep = fit(data, cfg)
    except TrainingError as err:
        raise TrainingError(f"n={n} rule={rule} replication={k}: {err}") from err
    pred = truncate_estimator(net, truncation_level(n, cfg.c3))
    test = generate_data(model, n, exp.sigma, seed=base + [2])
    l2, se = measure_l2(pred, model, exp.n_mc, seed=base + [3])
    return {"n": n, "rule": rule, "L": L, "r": r, "W": count_parameters(model.d, L, r), "seed": k,
            "train_risk": empirical_risk(pred, data), "test_risk": empirical_risk(pred, test),
            "l2_mc": l2, "se": se}


def _run_job(args):
    return run_replication(*args)


def run_experiment(exp):
    """All replications of the grid, ordered by (n, rule, replication)."""
    jobs = [(exp, n, rule, k) for n in exp.n_list for rule in exp.rules for k in range(exp.replications)]
    if exp.workers > 1:
        with ProcessPoolExecutor(exp.workers) as pool:
            return list(pool.map(_run_job, jobs))
    return [_run_job(j) for j in jobs]


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def median_l2(rows):
    """{(rule, n): median l2_mc} over replications."""
    groups = {}
    for row in rows:
        groups.setdefault((row["rule"], row["n"]), []).append(row["l2_mc"])
    return {k: float(np.median(v)) for k, v in groups.items()}
