"""A reduced regression experiment: median L2 error against n for both architecture rules."""

from relunet.estimator import RegressionExperiment, median_l2, run_experiment

exp = RegressionExperiment(n_list=[200, 800], replications=3, n_mc=5000)
for (rule, n), med in sorted(median_l2(run_experiment(exp)).items()):
    print(f"rule {rule} n={n:<5} median L2 error {med:.5f}")
