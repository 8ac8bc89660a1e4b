# %% [markdown]
# # Calibrating g from drop times
#
# Fourteen timed drops, a flat prior on [8, 11], and a DRAM chain.  The
# posterior is then pushed through the projectile range.

# %%
import math

import numpy as np

from uqforge import DramOptions, TargetDensity, propagate, run_dram
from uqforge.problems import GRAVITY_DATA, gravity_loglike, gravity_prior, gravity_qoi
from uqforge.sequence import FilterSpec, autocorrelation, filter_sequence, mean_and_covariance

# %%
target = TargetDensity.from_prior(gravity_prior(), gravity_loglike)
opts = DramOptions(20000, [9.5], [[0.01]], n_stages=2, stage_scales=[1.0, 5.0], adapt_interval=100)
res = run_dram(target, opts, np.random.default_rng(1))
print("acceptance", round(res.acceptance_rate, 3))

# %% [markdown]
# Burn-in and thinning.  The lag-20 autocorrelation tells whether the
# thinning in the shipped input file is sensible.

# %%
acf = autocorrelation(res.chain, 0, 40)
print("acf at lag 1, 20:", acf[1].round(3), acf[20].round(3))
thin = filter_sequence(res.chain, FilterSpec(0.1, 20))
m, c = mean_and_covariance(thin)
print("g =", m[0].round(4), "+/-", math.sqrt(c[0, 0]))

# %%
# Brute-force check on a grid
h, t, s = GRAVITY_DATA.T
g = np.linspace(8, 11, 10000)
ll = np.array([-0.5 * np.sum(((np.sqrt(2 * h / gi) - t) / s) ** 2) for gi in g])
w = np.exp(ll - ll.max())
w /= w.sum()
print("grid mean", w @ g, "grid var", w @ (g - w @ g) ** 2)

# %% [markdown]
# ## Range of a 5 m/s throw at 45 degrees

# %%
params, ranges = propagate(res.chain, gravity_qoi())
r = ranges.samples[:, 0]
print("range mean", r.mean(), "sd", r.std(ddof=1))
print("corr(g, range)", np.corrcoef(params.samples[:, 0], r)[0, 1])
