# Recovering three spikes from noisy Gaussian-blurred samples.

import numpy as np

from offgrid.estimator import Observation, error_decomposition, fit
from offgrid.experiments import centred_support
from offgrid.kernel import gaussian_scenario
from offgrid.noise import IIDNoise

rng = np.random.default_rng(11)
T = 2048
ctx = gaussian_scenario(T)
theta = centred_support(ctx, 3, 3.0)
beta = np.array([1.0, -0.8, 1.2])

noise = IIDNoise(0.2)
sigma, delta = noise.declared(ctx.measure)
y = ctx.measure.vector(beta @ ctx.features(theta)[:, 0] + noise.sample(ctx.measure, rng).values)

est = fit(ctx, Observation(y, sigma, delta, tau=T), n_true=3)
print("true positions     ", np.round(theta, 4))
print("estimated positions", np.round(est.theta, 4))
print("estimated amplitudes", np.round(est.beta, 4), "kappa", round(est.kappa, 4))
print("optimality:", {k: round(v, 8) for k, v in est.kkt.items()})

dec = error_decomposition(ctx, est.theta, est.beta, theta, beta, r=0.485)
print(dec)
