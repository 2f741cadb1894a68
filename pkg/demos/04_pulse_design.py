# # One pulse for the qutrit Fourier transform
#
# A rectangular two-tone pulse couples 0-1 and 1-2 with equal strength D and
# a common detuning. Demanding equal-modulus output fixes (eps, D); the
# resulting unitary is F_3^{-1} dressed by diagonal phases.

import numpy as np

from qutrit_metrology import pulse, qudit, transmon
from qutrit_metrology.constants import FLUX_QUANTUM

sol = pulse.solve_transcendental()
print(f"eps0={sol.epsilon:.7f}  xi0={sol.xi:.7f}  D0={sol.delta:.7f}")
print("residuals", sol.residuals())

u_r, u_p = pulse.protocol_unitaries(sol)
print(np.round(np.abs(u_r.matrix) ** 2, 12))
print("classified as", pulse.equal_modulus_classification(u_r))

left, right = pulse.readout_diagonals(sol.epsilon)
rebuilt = np.diag(left) @ qudit.inverse_fourier_matrix(3).matrix @ np.diag(right)
print("factorization error", np.abs(rebuilt - u_r.matrix).max())

# ## Closed form against the matrix exponential

rng = np.random.default_rng(0)
worst = max(np.abs(pulse.pulse_unitary(*p).matrix - pulse.pulse_unitary(*p, method="exponential").matrix).max()
            for p in rng.uniform(-3, 3, (200, 3)))
print("closed form vs eigh", worst)

# ## Driving the device
#
# In the rotating frame the same unitary comes out of a time-domain
# integration. Then the IQ mixer settings and the sampled waveform.

device = transmon.TransmonParams.from_frequencies(250e6, 25e9, 0.3, 1e-10)
flux_ref = 0.38 * FLUX_QUANTUM
tau = 50e-9
eps, d1, d2 = sol.readout_parameters
dw = eps / tau
w01 = transmon.transition_frequency(device, flux_ref, 0)
w12 = transmon.transition_frequency(device, flux_ref, 1)
h = pulse.rotating_frame_hamiltonian(device, flux_ref, w01 - 2 * dw, w12 + 2 * dw,
                                     pulse.rectangular, d1 / tau, d2 / tau)
print("RK4 vs closed form", np.abs(pulse.integrate_propagator(h, tau) - u_r.matrix).max())

settings = pulse.iq_pulse_settings("readout", device, flux_ref, dw, 0.01, 0.01 / np.sqrt(2),
                                   sample_rate=40e9)
for w, amp, ph in settings.tones():
    print(f"tone {w / 2 / np.pi / 1e9:.6f} GHz  amplitude {amp:.5f} V  phase {ph:.3f}")
wave = pulse.synthesize_waveform(settings, tau)
print(len(wave.times), "samples, peak", np.abs(wave.volts).max(), "V")
