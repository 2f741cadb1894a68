# # Posterior after one run
#
# With a flat prior the posterior of the phase given a K-digit string is a
# Fejer kernel of order N = d^K centred on the string's phase. Its main lobe
# has half-width 2 pi / N; the side lobes carry the digit-error probability.

import numpy as np

from qutrit_metrology import analysis, constants
from qutrit_metrology.qudit import DigitString

for d, K in [(3, 1), (3, 3), (3, 6), (2, 8)]:
    p = analysis.central_peak_probability(d, K)
    print(f"d={d} K={K}  N={d**K:4d}  central-lobe mass {p:.6f}")
print(f"large-N limit {analysis.large_k_peak_probability():.7f}")

# ## Product of single-step likelihoods
#
# The same density arises as a product over steps of single-cycle
# likelihoods. The two forms agree to rounding.

digits = DigitString(3, (1, 2, 0, 2))
spec = analysis.PosteriorSpec.from_digits(digits)
phi = np.linspace(0, 2 * np.pi, 9)
print(np.max(np.abs(analysis.posterior_product(phi, digits) - analysis.posterior_density(phi, spec))))

# ## Qutrits versus qubits
#
# At equal total phase-accumulation time the qutrit resolves twice as finely,
# and it needs ln2/ln3 as many steps for the same relative precision.

mu = 1e5 * constants.MU_B
for d in (2, 3):
    print(d, f"{analysis.heisenberg_precision(d, 1e-6, mu):.3e} T")
print("step ratio", analysis.step_ratio(2, 3, 1e-6),
      "integer counts", analysis.steps_required(3, 1e-6), analysis.steps_required(2, 1e-6))

# ## A plottable profile
#
# density_profile returns (delta_phi, density) rows; the `density`
# subcommand writes the same table to CSV.

table = analysis.density_profile(analysis.PosteriorSpec(3, 3), np.linspace(-0.5, 0.5, 11))
print(np.round(table, 4))
