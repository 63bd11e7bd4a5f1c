"""Sup error against M for the wide and deep approximators of a Hoelder bump (d = 1)."""

import numpy as np

from relunet import catalog, evaluate
from relunet.deep import build_deep_approximator
from relunet.wide import build_wide_approximator

X = np.linspace(-1, 1, 20001)[:, None]
for name, builder, Ms in (("wide", build_wide_approximator, [2, 3, 4, 6]),
                          ("deep", build_deep_approximator, [2, 3, 4, 5])):
    f = catalog.holder_bump(1, 1.0)
    errs = []
    for M in Ms:
        net, info = builder(f, 1.0, M)
        errs.append(np.max(np.abs(evaluate(net, X) - f(X))))
        print(f"{name} M={M} L={net.depth} r={net.width} sup_error={errs[-1]:.4f}")
    print(f"{name} log-log slope {np.polyfit(np.log(Ms), np.log(errs), 1)[0]:.3f} (reference -2)\n")
