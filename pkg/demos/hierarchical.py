"""Both hierarchical constructions on the two-level toy model, with their error envelopes."""

import numpy as np

from relunet import evaluate
from relunet.hierarchy import build_t1, build_t2, evaluate_model, induction_envelope, toy_model

model = toy_model()
X = np.random.default_rng(0).uniform(-1, 1, (2000, 2))
truth = evaluate_model(model, X)
for name, builder in (("t1", build_t1), ("t2", build_t2)):
    net, info = builder(model, 2)
    env = induction_envelope(model, info["members"], X)
    err = np.max(np.abs(evaluate(net, X) - truth))
    print(f"{name}: L={net.depth} r={net.width} sup_error={err:.4f} envelope={env['envelopes'][-1]:.2f}")
