"""
Channels and the limiting SDE
=============================

At energy ``lam`` the mean-field channels of the strip split into decaying
(hyperbolic) and rotating (elliptic) ones. Only the elliptic channels feel
the noise in the scaling limit, where the transfer products solve a matrix
SDE. Its zeros at the endpoint are the eigenvalues of a GOE-like matrix.
"""
import numpy as np

from antitree.disorder import DisorderSpec, harmonic_average
from antitree.experiments import refinement_errors
from antitree.sde import closed_form_limit, endpoint_matrices, sde_params_from_channels, zero_process
from antitree.transfer import chaotic_check, channel_decomposition

spec = DisorderSpec("two_point_symmetric", sigma=1.0)
lam = 3.0
stats = harmonic_average(spec, lam)
print(f"lam = {lam}: h = {stats.h:.6f}, sigma^2 = {stats.sigma2:.6f}")

# w = h + 1.7 puts the effective energy at -1.7: one hyperbolic, two elliptic channels
ch = channel_decomposition(spec, lam, stats.h + 1.7, r=3)
print(f"E = {ch.E:.3f}, r_h = {ch.r_h}, r_e = {ch.r_e}, phases {np.round(ch.z, 4)}")
print(f"chaotic phases: {chaotic_check(ch.z)[0]}; conjugation error {ch.conjugation_error():.1e}")

# finite-m paths approach the m -> infinity limit, sharing one Brownian path
errs = refinement_errors(ch, stats, [1e2, 1e3, 1e4], [-1.0, 0.0, 1.0], 10_000, seed=0)
for m, row in zip([1e2, 1e3, 1e4], errs):
    print(f"m = {m:>7.0f}: errors for eps = -1, 0, 1: {np.array2string(row, precision=4)}")

# in the limit the path is affine in eps; its zeros are spec Re(B_1 - A_1)
ch5 = channel_decomposition(spec, lam, stats.h, r=5)
params = sde_params_from_channels(ch5, stats, np.inf, t_steps=200)
zeros = zero_process(closed_form_limit(params, seed=0), "identity")
a1, b1 = endpoint_matrices(params, seed=0)
print("zeros      ", np.round(zeros, 6))
print("eig Re(B-A)", np.round(np.linalg.eigvalsh(np.real(b1 - a1)), 6))
