"""Helpers for assembling layered constructions from gadgets.

A stage runs several gadgets side by side, each reading an affine image of
the stage input, and combines their outputs with an affine post map.
"""

import numpy as np
from scipy import sparse

from .network import affine, compose, pad_depth, parallelize


class AffineRows:
    """Builder for a sparse affine map, one output row at a time."""

    def __init__(self, n_in):
        self.n_in = n_in
        self.rows, self.cols, self.vals, self.const = [], [], [], []

    def add(self, terms=None, const=0.0):
        """Append an output equal to sum_{col: coef} coef * in[col] + const; returns its index."""
        r = len(self.const)
        for col, coef in (terms or {}).items():
            if coef != 0:
                self.rows.append(r)
                self.cols.append(col)
                self.vals.append(float(coef))
        self.const.append(float(const))
        return r

    def matrix(self):
        A = sparse.csr_matrix((self.vals, (self.rows, self.cols)), shape=(len(self.const), self.n_in))
        return A, np.array(self.const)

    def network(self):
        return affine(*self.matrix())


def stage(gadgets, post=None):
    """Run ``[(net, pre)]`` in parallel, pre being an AffineRows over the stage input.

    Shorter gadgets are extended with identity layers.  ``post`` (AffineRows over
    the concatenated gadget outputs) is melted into the output map.
    """
    depth = max(net.depth for net, _ in gadgets)
    lifted = [pad_depth(compose(net, pre.network()), depth) for net, pre in gadgets]
    out = parallelize(lifted)
    return compose(post.network(), out) if post is not None else out


def chain(*stages):
    """Compose stages left to right: chain(s1, s2, s3) computes s3(s2(s1(x)))."""
    net = stages[0]
    for s in stages[1:]:
        net = compose(s, net)
    return net
