"""Base-d semi-classical Fourier phase estimation for magnetometry, with a
transmon-qutrit backend and rf-pulse design."""
from .qudit import (
    DigitString,
    QuditState,
    UnitaryMatrix,
    apply,
    balanced_state,
    born_probabilities,
    compensation_unitary,
    inverse_fourier_matrix,
    phase_evolution,
    sample_outcome,
)
from .protocol import (
    LinearOracle,
    MeasurementRecord,
    PhaseOracle,
    ProtocolConfig,
    decode_field,
    digit_probabilities,
    run_fourier_estimation,
    run_many,
    transmon_backend,
)
from .analysis import (
    PosteriorSpec,
    ResourceBudget,
    central_peak_probability,
    coherence_time,
    density_profile,
    heisenberg_precision,
    long_time_precision,
    posterior_density,
    posterior_product,
    step_ratio,
    steps_required,
    t2_limited_precision,
)
from .transmon import (
    TransmonParams,
    accumulated_phase,
    energy_level,
    josephson_energy,
    linearized_phase,
    magnetic_moment,
    optimal_bias,
    transition_frequency,
)
from .pulse import (
    IQSettings,
    PulseSolution,
    Waveform,
    equal_modulus_classification,
    generator_matrix,
    iq_pulse_settings,
    protocol_unitaries,
    pulse_unitary,
    rotating_frame_hamiltonian,
    solve_transcendental,
    synthesize_waveform,
)

__version__ = "0.1.0"
