"""coltherm: collisional quantum thermostats.

A unit (mass m, internal levels) crosses a finite interaction window of
length L in one dimension and scatters off a fixed finite quantum system.
The package solves the exact multichannel scattering problem, implements two
reflectionless effective thermostat models plus a deliberately broken
control, builds the per-collision map on the internal state, and drives
repeated-collision Monte-Carlo / master-equation simulations of
thermalization, detailed balance and entropy production.
"""

__version__ = "0.1.0"

from .collision_map import (
    KrausSet,
    ScatteringMapTensor,
    apply_kraus,
    apply_map,
    build_map,
    choi_matrix,
    kraus_set,
    narrow_packet_check,
    transition_probabilities,
)
from .linalg import HermitianEigen, eig_hermitian, func_of_hermitian, principal_sqrt, solve
from .model import (
    InternalModel,
    SpectralData,
    TwoQubitParams,
    build_two_qubit,
    shift_energy_zero,
    spectral_data,
)
from .reservoir import (
    EntropyProduction,
    RateMatrix,
    ReservoirSpec,
    SteadyState,
    TrajectoryStats,
    entropy_production,
    integrated_rates,
    run_trajectories,
    sample_effusion,
    sample_internal,
    steady_state,
)
from .scattering import (
    ChannelSet,
    ScatteringSolution,
    boundary_matrix,
    channels,
    current_residual,
    scattering_solution,
    transfer_matrix,
)
from .thermostats import (
    AmplitudeProvider,
    AmplitudeTable,
    ExactProvider,
    RITPacketProvider,
    RITProvider,
    WVOProvider,
    make_provider,
    rit_amplitudes,
    rit_packet_amplitudes,
    wvo_amplitudes,
)

__all__ = [name for name in dir() if not name.startswith("_")]
