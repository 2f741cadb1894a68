# # Choosing the flux bias
#
# An asymmetric SQUID transmon has all its level spacings shift together when
# the flux moves. The magnetic moment mu = hbar A d(omega_01)/dPhi vanishes at
# the sweet spot and peaks somewhere between 0 and Phi_0/2.

import numpy as np

from qutrit_metrology import analysis, constants, transmon

device = transmon.TransmonParams.from_frequencies(250e6, 25e9, 0.3, 1e-10)
phi0 = constants.FLUX_QUANTUM

for x in (0.0, 0.1, 0.2, 0.3, 0.4):
    w01 = transmon.transition_frequency(device, x * phi0, 0) / (2 * np.pi)
    w12 = transmon.transition_frequency(device, x * phi0, 1) / (2 * np.pi)
    mu = transmon.magnetic_moment(device, x * phi0) / constants.MU_B
    print(f"Phi/Phi0={x:.1f}  f01={w01 / 1e9:.4f} GHz  f12={w12 / 1e9:.4f} GHz  mu={mu:+.3e} mu_B")

# ## Optimum
#
# The numerical maximum of |mu| sits where tan^2(pi Phi/Phi_0) solves a
# quadratic in a^2; the simpler tan^2 = 1/a condition maximizes the slope of
# E_J instead and gives a slightly smaller moment.

opt = transmon.optimal_bias(device)
print(f"optimum Phi/Phi0 = {opt.flux / phi0:.5f}, mu = {opt.moment / constants.MU_B:.4e} mu_B")
print(f"tan^2 = 1/a point: Phi/Phi0 = {opt.tan2_candidate_flux / phi0:.5f}, "
      f"mu = {opt.tan2_candidate_moment / constants.MU_B:.4e} mu_B")

# ## Phase accumulation
#
# Near the bias the phase is linear in the field; the exact phase bends away
# as the flux change grows.

for dphi in (1e-5, 1e-4, 1e-3):
    exact = transmon.accumulated_phase(device, opt.flux, opt.flux + dphi * phi0, 1e-6)
    lin = transmon.linearized_phase(opt.moment, dphi * phi0 / device.loop_area, 1e-6)
    print(f"dPhi={dphi:g} Phi0  exact {exact:+.5f} rad  linear {lin:+.5f} rad")

# ## Sensitivity
#
# The longest useful delay is T2, which caps the resolution of one run.

print(f"{analysis.t2_limited_precision(1e5 * constants.MU_B, 3, 1e-6) * 1e9:.3f} nT at T2 = 1 us")
print("K_max with tau0 = 10 ns:", analysis.max_steps(3, 1e-6, 1e-8))
