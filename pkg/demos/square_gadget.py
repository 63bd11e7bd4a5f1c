"""Sup error of the squaring network against its bound a^2 4^-R."""

import numpy as np

from relunet import evaluate
from relunet.primitives import build_square

a = 2.0
X = np.linspace(-a, a, 100001)[:, None]
print("R  depth width  sup_error      bound")
for R in range(1, 9):
    net = build_square(R, a)
    err = np.max(np.abs(evaluate(net, X) - X[:, 0] ** 2))
    print(f"{R:<2} {net.depth:<5} {net.width:<6} {err:.6e}  {a * a * 4.0 ** -R:.6e}")
