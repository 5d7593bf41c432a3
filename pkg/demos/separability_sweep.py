import math

import numpy as np

from graphmeta.generator import assign_classes, sparse_regime_params, sample_dc_csbm, sample_theta_powerlaw
from graphmeta.separability import (
    SweepConfig,
    alpha_subgroup,
    concentration_report,
    convolve,
    exact_separability,
    midpoint_hyperplane,
    separability_fraction,
    dimension_sweep,
)

# One two-class sample with p + q = log(n)^3 / n and (p - q)/(p + q) = 0.5
d = 32
n = round(d * math.log(d) ** 2)
labels = assign_classes(n, seed=4)
theta = sample_theta_powerlaw(n, labels, 2.5, seed=4)
params = sparse_regime_params(n, d, gamma=0.5, theta=theta, seed=4)
# Heavy-tailed theta at this size can push a few hub pairs past the sparse
# regime; the sampler warns but still returns the sample
g, x, y = sample_dc_csbm(params, labels=labels)
print(f"n = {n}, d = {d}, m = {g.m}")

# Raw features overlap heavily; one convolution averages the noise away
v, b = midpoint_hyperplane(params.mu, params.nu)
alpha = 2 / math.log(n)
sub = alpha_subgroup(y, theta, alpha)
print("raw fraction      ", separability_fraction(x, sub, v, b))
cf = convolve(g, x)
print("convolved fraction", separability_fraction(cf, sub, v, b))

# Exact check: is there any separating hyperplane at all?
res = exact_separability(cf, sub)
print("exactly separable:", res.separable)

# How well degrees and neighbourhoods concentrate on the subgroup
rep = concentration_report(g, y, theta, params.p_intra, params.q_inter, alpha)
print(f"degree violations {rep.degree_violation:.3f}, neighbourhood violations {rep.fraction_violation:.3f}")

# A small dimension sweep, then the no-signal control (p = q, mu = nu)
sweep = dimension_sweep(SweepConfig(seeds=5), d_grid=(16, 32, 64))
print("median fractions", sweep.medians, "non-decreasing:", sweep.non_decreasing)
control = dimension_sweep(SweepConfig(seeds=5, control=True), d_grid=(16, 32, 64))
print("control", control.medians)
