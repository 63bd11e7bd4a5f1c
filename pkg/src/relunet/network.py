"""Fully connected ReLU networks with an affine output map.

A network with hidden widths k_1..k_L maps x in R^d through

    h_0 = x,  h_s = relu(W_s h_{s-1} + b_s)  (s = 1..L),  y = A h_L + c.

Depth L = 0 is allowed and denotes the affine map y = A x + c.  Outputs may be
vectors; the scalar case is the usual single-output network.  Hidden weights
are stored as scipy CSR matrices because the constructed networks are very
sparse, but every operation keeps the dense fully connected semantics.
"""

import json
import math

import numpy as np
from scipy import sparse

from .errors import ParseError, RejectedInputError

_CHUNK = 8192


def _csr(m):
    if sparse.issparse(m):
        m = sparse.csr_matrix(m, dtype=np.float64, copy=True)
    else:
        m = sparse.csr_matrix(np.atleast_2d(np.asarray(m, dtype=np.float64)))
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return m


class Network:
    """ReLU network: hidden layers ``[(W_s, b_s)]`` and output map ``(A, c)``.

    ``probes`` optionally names affine read-outs of internal activations:
    ``{name: (s, P, c)}`` reads ``P h_s + c`` where h_0 is the input.  Probes are
    carried through composition and padding and never change the weights.
    """

    def __init__(self, input_dim, layers, out_weights, out_bias, probes=None):
        self.input_dim = int(input_dim)
        self.probes = dict(probes or {})
        self.layers = [(_csr(w), np.asarray(b, dtype=np.float64).ravel()) for w, b in layers]
        self.out_weights = _csr(out_weights)
        self.out_bias = np.asarray(out_bias, dtype=np.float64).ravel()
        prev = self.input_dim
        for s, (w, b) in enumerate(self.layers):
            if w.shape[1] != prev or w.shape[0] != b.size:
                raise RejectedInputError(f"layer {s + 1} has shape {w.shape}, expected (*, {prev})")
            prev = w.shape[0]
        if self.out_weights.shape[1] != prev or self.out_weights.shape[0] != self.out_bias.size:
            raise RejectedInputError("output map does not match last hidden layer")

    @property
    def depth(self):
        return len(self.layers)

    @property
    def widths(self):
        return [w.shape[0] for w, _ in self.layers]

    @property
    def width(self):
        return max(self.widths, default=0)

    @property
    def output_dim(self):
        return self.out_weights.shape[0]

    def is_constant_width(self, r=None):
        ws = self.widths
        r = ws[0] if (r is None and ws) else r
        return all(k == r for k in ws)

    def __call__(self, x):
        return evaluate(self, x)

    def __repr__(self):
        return f"Network(d={self.input_dim}, L={self.depth}, r={self.width}, out={self.output_dim})"


def affine(A, c=None):
    """Depth-0 network computing ``A x + c``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64)) if not sparse.issparse(A) else A
    m, d = A.shape
    c = np.zeros(m) if c is None else np.asarray(c, dtype=np.float64).ravel()
    return Network(d, [], A, c)


def select(d, indices, offset=None):
    """Affine network returning ``x[indices] + offset``."""
    indices = list(indices)
    A = sparse.csr_matrix(
        (np.ones(len(indices)), (np.arange(len(indices)), indices)), shape=(len(indices), d)
    )
    return Network(d, [], A, np.zeros(len(indices)) if offset is None else offset)


def evaluate(net, x):
    """Evaluate ``net`` at a point (shape (d,)) or a batch (shape (n, d))."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim <= 1
    X = x.reshape(1, -1) if single else x
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise RejectedInputError(f"input has dimension {X.shape[-1]}, network expects {net.input_dim}")
    out = np.empty((X.shape[0], net.output_dim))
    for lo in range(0, X.shape[0], _CHUNK):
        H = X[lo:lo + _CHUNK].T
        for w, b in net.layers:
            H = w @ H
            H += b[:, None]
            np.maximum(H, 0.0, out=H)
        Y = net.out_weights @ H
        Y += net.out_bias[:, None]
        out[lo:lo + _CHUNK] = Y.T
    if net.output_dim == 1:
        out = out[:, 0]
        return float(out[0]) if single else out
    return out[0] if single else out


def evaluate_with_probes(net, x):
    """Evaluate a batch and return ``(outputs, {probe name: values of shape (n, k)})``."""
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if X.shape[1] != net.input_dim:
        raise RejectedInputError(f"input has dimension {X.shape[1]}, network expects {net.input_dim}")
    by_layer = {}
    for name, (s, P, pc) in net.probes.items():
        by_layer.setdefault(s, []).append((name, P, pc))
    values = {}
    H = X.T
    for s in range(net.depth + 1):
        if s > 0:
            w, b = net.layers[s - 1]
            H = np.maximum(w @ H + b[:, None], 0.0)
        for name, P, pc in by_layer.get(s, []):
            values[name] = (P @ H + pc[:, None]).T
    Y = (net.out_weights @ H + net.out_bias[:, None]).T
    return (Y[:, 0] if net.output_dim == 1 else Y), values


def with_probe(net, name, s, P, c=None):
    """Copy of ``net`` with an added probe reading ``P h_s + c``."""
    P = _csr(P)
    c = np.zeros(P.shape[0]) if c is None else np.asarray(c, dtype=np.float64).ravel()
    probes = dict(net.probes)
    probes[name] = (s, P, c)
    return Network(net.input_dim, net.layers, net.out_weights, net.out_bias, probes)


def prefix_probes(net, prefix):
    """Copy of ``net`` with every probe name prefixed (keeps names unique in larger assemblies)."""
    probes = {prefix + name: v for name, v in net.probes.items()}
    return Network(net.input_dim, net.layers, net.out_weights, net.out_bias, probes)


def compose(f, g):
    """Network computing ``f(g(x))``.

    The output map of ``g`` is multiplied into the first layer of ``f`` so no
    layer is added: depth(f o g) = depth(f) + depth(g).
    """
    if g.output_dim != f.input_dim:
        raise RejectedInputError(f"g has {g.output_dim} outputs, f expects {f.input_dim} inputs")
    A, c = g.out_weights, g.out_bias
    probes = dict(g.probes)
    for name, (s, P, pc) in f.probes.items():
        if s == 0:
            probes[name] = (g.depth, P @ A, P @ c + pc)
        else:
            probes[name] = (s + g.depth, P, pc)
    if f.layers:
        w1, b1 = f.layers[0]
        first = [(w1 @ A, w1 @ c + b1)]
        return Network(g.input_dim, g.layers + first + f.layers[1:], f.out_weights, f.out_bias, probes)
    return Network(g.input_dim, g.layers, f.out_weights @ A, f.out_weights @ c + f.out_bias, probes)


def parallelize(nets):
    """Run networks of equal depth side by side on the same input.

    The result stacks first layers, uses block-diagonal hidden weights and
    concatenates the outputs.
    """
    nets = list(nets)
    if not nets:
        raise RejectedInputError("need at least one network")
    L, d = nets[0].depth, nets[0].input_dim
    for n in nets:
        if n.depth != L:
            raise RejectedInputError(f"depth mismatch: {n.depth} != {L}")
        if n.input_dim != d:
            raise RejectedInputError(f"input dimension mismatch: {n.input_dim} != {d}")
    probes = {}
    for m, n in enumerate(nets):
        for name, (s, P, pc) in n.probes.items():
            if s == 0:
                probes[name] = (0, P, pc)
                continue
            before = sum(o.layers[s - 1][0].shape[0] for o in nets[:m])
            total = sum(o.layers[s - 1][0].shape[0] for o in nets)
            P = sparse.hstack([sparse.csr_matrix((P.shape[0], before)), P,
                               sparse.csr_matrix((P.shape[0], total - before - P.shape[1]))])
            probes[name] = (s, P.tocsr(), pc)
    if L == 0:
        A = sparse.vstack([n.out_weights for n in nets])
        return Network(d, [], A, np.concatenate([n.out_bias for n in nets]), probes)
    layers = [(sparse.vstack([n.layers[0][0] for n in nets]), np.concatenate([n.layers[0][1] for n in nets]))]
    for s in range(1, L):
        layers.append((sparse.block_diag([n.layers[s][0] for n in nets]),
                       np.concatenate([n.layers[s][1] for n in nets])))
    A = sparse.block_diag([n.out_weights for n in nets])
    return Network(d, layers, A, np.concatenate([n.out_bias for n in nets]), probes)


def concat_inputs(nets):
    """Run networks of equal depth side by side on disjoint slices of the input."""
    nets = list(nets)
    total = sum(n.input_dim for n in nets)
    lifted, start = [], 0
    for n in nets:
        lifted.append(compose(n, select(total, range(start, start + n.input_dim))))
        start += n.input_dim
    return parallelize(lifted)


def _identity_layer(m, A=None, c=None):
    """Hidden layer [A; -A] h + [c; -c] realizing relu(z), relu(-z) for z = A h + c."""
    A = sparse.identity(m, format="csr") if A is None else _csr(A)
    c = np.zeros(A.shape[0]) if c is None else c
    return sparse.vstack([A, -A]).tocsr(), np.concatenate([c, -c])


def pad_depth(net, target_L):
    """Append identity blocks relu(z) - relu(-z) on the outputs until depth = target_L."""
    if target_L < net.depth:
        raise RejectedInputError(f"target depth {target_L} below current depth {net.depth}")
    if target_L == net.depth:
        return net
    m = net.output_dim
    layers = list(net.layers)
    layers.append(_identity_layer(m, net.out_weights, net.out_bias))
    for _ in range(target_L - net.depth - 1):
        w = sparse.hstack([sparse.identity(m), -sparse.identity(m)])
        layers.append(_identity_layer(m, w))
    out = sparse.hstack([sparse.identity(m), -sparse.identity(m)]).tocsr()
    return Network(net.input_dim, layers, out, np.zeros(m), net.probes)


def pad_width(net, r):
    """Add inactive neurons (zero weights and bias) so that every hidden layer has width r."""
    if any(k > r for k in net.widths):
        raise RejectedInputError(f"network width {net.width} exceeds target {r}")
    layers, prev_extra = [], 0
    for w, b in net.layers:
        k = w.shape[0]
        w = sparse.csr_matrix((w.data, w.indices, w.indptr), shape=(k, w.shape[1] + prev_extra))
        w = sparse.vstack([w, sparse.csr_matrix((r - k, w.shape[1]))]).tocsr()
        layers.append((w, np.concatenate([b, np.zeros(r - k)])))
        prev_extra = r - k
    A = net.out_weights
    A = sparse.csr_matrix((A.data, A.indices, A.indptr), shape=(A.shape[0], A.shape[1] + prev_extra))
    probes = {}
    for name, (s, P, pc) in net.probes.items():
        if s > 0:
            P = sparse.csr_matrix((P.data, P.indices, P.indptr), shape=(P.shape[0], r))
        probes[name] = (s, P, pc)
    return Network(net.input_dim, layers, A, net.out_bias, probes)


def conform(net, L, r):
    """Pad ``net`` to the class F(L, r): depth exactly L, every width exactly r."""
    if net.depth > L:
        raise RejectedInputError(f"network depth {net.depth} exceeds L={L}")
    if net.width > r or (net.depth < L and 2 * net.output_dim > r):
        raise RejectedInputError(f"network width {max(net.width, 2 * net.output_dim)} exceeds r={r}")
    return pad_width(pad_depth(net, L), r)


def count_parameters(d, L, r):
    """Number of weights and biases of a single-output network in F(L, r)."""
    return (d + 1) * r + (L - 1) * (r + 1) * r + (r + 1)


def stored_entries(net):
    """Literal number of weight and bias entries of the dense network."""
    n, prev = 0, net.input_dim
    for k in net.widths:
        n += k * (prev + 1)
        prev = k
    return n + net.output_dim * (prev + 1)


def _fmt(v, path):
    if not math.isfinite(v):
        raise RejectedInputError(f"{path}: non-finite value {v}")
    s = f"{v:.17g}"
    return s if any(ch in s for ch in ".en") else s + ".0"


def _matrix_text(m, path):
    dense = m.toarray() if sparse.issparse(m) else np.atleast_2d(m)
    rows = ("[" + ",".join(_fmt(float(v), path) for v in row) + "]" for row in dense)
    return "[" + ",".join(rows) + "]"


def _vector_text(v, path):
    return "[" + ",".join(_fmt(float(x), path) for x in v) + "]"


def serialize(net):
    """JSON text of ``net``; every number carries 17 significant digits."""
    parts = [f'"version":1', f'"input_dim":{net.input_dim}',
             '"widths":[' + ",".join(str(k) for k in net.widths) + "]"]
    layer_txt = []
    for s, (w, b) in enumerate(net.layers):
        p = f"layers[{s}]"
        layer_txt.append('{"weights":' + _matrix_text(w, p) + ',"bias":' + _vector_text(b, p) + "}")
    parts.append('"layers":[' + ",".join(layer_txt) + "]")
    parts.append('"output":{"weights":' + _matrix_text(net.out_weights, "output")
                 + ',"bias":' + _vector_text(net.out_bias, "output") + "}")
    return "{" + ",".join(parts) + "}"


def _parse_matrix(obj, rows, cols, path):
    if not isinstance(obj, list) or len(obj) != rows:
        raise ParseError(path, f"expected a list of {rows} rows")
    out = np.empty((rows, cols))
    for i, row in enumerate(obj):
        if not isinstance(row, list) or len(row) != cols:
            raise ParseError(f"{path}[{i}]", f"expected a row of {cols} numbers")
        for j, v in enumerate(row):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError(f"{path}[{i}][{j}]", "expected a number")
            out[i, j] = v
    return out


def _parse_vector(obj, n, path):
    if not isinstance(obj, list) or len(obj) != n:
        raise ParseError(path, f"expected a list of {n} numbers")
    for j, v in enumerate(obj):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError(f"{path}[{j}]", "expected a number")
    return np.array(obj, dtype=np.float64)


def deserialize(doc):
    """Inverse of :func:`serialize`; accepts JSON text or an already parsed dict."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ParseError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("$", "expected an object")
    for key in ("version", "input_dim", "widths", "layers", "output"):
        if key not in doc:
            raise ParseError(key, "missing field")
    if doc["version"] != 1:
        raise ParseError("version", f"unsupported version {doc['version']!r}")
    d = doc["input_dim"]
    if not isinstance(d, int) or isinstance(d, bool) or d < 1:
        raise ParseError("input_dim", "expected a positive integer")
    widths = doc["widths"]
    if not isinstance(widths, list) or not all(isinstance(k, int) and k >= 1 for k in widths):
        raise ParseError("widths", "expected a list of positive integers")
    if not isinstance(doc["layers"], list) or len(doc["layers"]) != len(widths):
        raise ParseError("layers", f"expected {len(widths)} layers to match widths")
    layers, prev = [], d
    for s, (k, lay) in enumerate(zip(widths, doc["layers"])):
        p = f"layers[{s}]"
        if not isinstance(lay, dict) or "weights" not in lay or "bias" not in lay:
            raise ParseError(p, "expected an object with weights and bias")
        layers.append((_parse_matrix(lay["weights"], k, prev, p + ".weights"),
                       _parse_vector(lay["bias"], k, p + ".bias")))
        prev = k
    out = doc["output"]
    if not isinstance(out, dict) or "weights" not in out or "bias" not in out:
        raise ParseError("output", "expected an object with weights and bias")
    m = len(out["weights"]) if isinstance(out["weights"], list) else -1
    if m < 1:
        raise ParseError("output.weights", "expected a non-empty list of rows")
    A = _parse_matrix(out["weights"], m, prev, "output.weights")
    c = _parse_vector(out["bias"], m, "output.bias")
    return Network(d, layers, A, c)


def save(net, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize(net))


def load(path):
    with open(path, encoding="utf-8") as fh:
        return deserialize(fh.read())
