"""Uniform cube partitions of [-a, a)^d and their shifted copies.

The coarse partition P1 has M cubes per axis (side 2a/M); the fine partition
P2 has M^2 cubes per axis (side h = 2a/M^2).  Cubes are half-open [left,
left + side).  Flat cube indices are lexicographic with the first coordinate
most significant.  A shifted partition moves every cube by a/M^2 along the
coordinates selected by the bits of its shift index (bit i shifts coordinate
i); shift index 0 is the unshifted partition.
"""

from dataclasses import dataclass

import numpy as np

from .errors import OutOfDomainError, RejectedInputError


@dataclass(frozen=True)
class CubePartition:
    a: float
    M: int
    d: int
    level: int = 2
    shift_index: int = 0

    def __post_init__(self):
        if self.M < 2 or self.level not in (1, 2) or self.d < 1:
            raise RejectedInputError("need M >= 2, level in {1, 2}, d >= 1")
        if not 0 <= self.shift_index < 2 ** self.d:
            raise RejectedInputError("shift index must lie in [0, 2^d)")

    @property
    def per_axis(self):
        return self.M if self.level == 1 else self.M ** 2

    @property
    def side(self):
        return 2.0 * self.a / self.per_axis

    @property
    def n_cubes(self):
        return self.per_axis ** self.d

    @property
    def shift(self):
        bits = [(self.shift_index >> i) & 1 for i in range(self.d)]
        return np.array(bits, dtype=np.float64) * self.a / self.M ** 2

    @property
    def lower(self):
        return -self.a + self.shift

    @property
    def upper(self):
        return self.a + self.shift

    def multi_index(self, k):
        return np.array(np.unravel_index(k, (self.per_axis,) * self.d)).T

    def left(self, k):
        """Left corner(s) of cube(s) with flat index k."""
        return self.lower + self.multi_index(np.asarray(k)) * self.side

    def coarse(self):
        return CubePartition(self.a, self.M, self.d, 1, self.shift_index)

    def fine(self):
        return CubePartition(self.a, self.M, self.d, 2, self.shift_index)


def locate_cube(partition, x):
    """Flat index of the half-open cube containing x; x may be (d,) or (n, d)."""
    x = np.asarray(x, dtype=np.float64)
    X = np.atleast_2d(x)
    if X.shape[1] != partition.d:
        raise RejectedInputError(f"expected points of dimension {partition.d}")
    if np.any(X < partition.lower) or np.any(X >= partition.upper):
        raise OutOfDomainError("point outside the region covered by the partition")
    idx = np.floor((X - partition.lower) / partition.side).astype(np.int64)
    # guard against rounding at the upper faces of cubes
    left = partition.lower + idx * partition.side
    idx = np.where(X < left, idx - 1, idx)
    idx = np.where(X >= left + partition.side, idx + 1, idx)
    idx = np.clip(idx, 0, partition.per_axis - 1)
    k = np.ravel_multi_index(tuple(idx.T), (partition.per_axis,) * partition.d)
    return int(k[0]) if x.ndim == 1 else k


def subcube_offsets_wide(M, a, d):
    """Offsets v_k (k = 0..M^d - 1, lexicographic) of the fine cubes inside a coarse cube."""
    h = 2.0 * a / M ** 2
    grid = np.array(np.unravel_index(np.arange(M ** d), (M,) * d)).T
    return grid * h


def snake_order(M, d):
    """Boustrophedon (reflected base-M Gray code) ordering of {0..M-1}^d.

    Consecutive entries differ by +-1 in exactly one coordinate.
    """
    if d == 1:
        return np.arange(M, dtype=np.int64)[:, None]
    sub = snake_order(M, d - 1)
    blocks = []
    for c in range(M):
        part = sub if c % 2 == 0 else sub[::-1]
        blocks.append(np.hstack([np.full((len(part), 1), c, dtype=np.int64), part]))
    return np.vstack(blocks)


def subcube_offsets_deep(M, a, d):
    """Steps between consecutive fine cubes along the snake; M^d - 1 vectors with one entry +-h."""
    h = 2.0 * a / M ** 2
    return np.diff(snake_order(M, d), axis=0) * h


def snake_positions(M, a, d):
    """Offsets of the fine cubes in snake order (prefix sums of the steps, starting at 0)."""
    return snake_order(M, d) * (2.0 * a / M ** 2)


def inner_cube_contains(left, side, delta, x):
    """True where every coordinate satisfies left + delta <= x < left + side - delta."""
    if delta < 0 or 2 * delta >= side:
        raise RejectedInputError(f"margin {delta} invalid for cube side {side}")
    x = np.asarray(x, dtype=np.float64)
    lo = np.asarray(left) + delta
    hi = np.asarray(left) + side - delta
    return np.all((x >= lo) & (x < hi), axis=-1)


def bspline_weight(partition, x):
    """Tensor hat weight prod_j (1 - (M^2/a) |left_j + a/M^2 - x_j|)_+ on the fine cube containing x."""
    if partition.level != 2:
        raise RejectedInputError("weights are defined on the fine partition")
    x = np.asarray(x, dtype=np.float64)
    X = np.atleast_2d(x)
    left = partition.left(locate_cube(partition, X))
    M2 = partition.M ** 2
    w = np.prod(np.maximum(1 - M2 / partition.a * np.abs(left + partition.a / M2 - X), 0.0), axis=1)
    return float(w[0]) if x.ndim == 1 else w


def shifted_partitions(a, M, d, level=2):
    """The 2^d partitions; index 0 is unshifted, index v shifts the coordinates in the bits of v."""
    return [CubePartition(a, M, d, level, v) for v in range(2 ** d)]
