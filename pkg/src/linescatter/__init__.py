"""Two-particle quantum-walk scattering on a line with a finite interaction region."""

from .errors import (
    BandCenterError,
    BoundaryLeakError,
    ConvergenceError,
    DegenerateFitError,
    DegenerateModulusError,
    DomainError,
    LinescatterError,
    NonFiniteError,
    NonPositiveInfidelityError,
    OutOfBandError,
    QuadratureConvergenceError,
    SeparationError,
    ShellDegeneracyError,
    SingularSystemError,
    StatisticsMismatchError,
    TruncationError,
    WavepacketSupportError,
)
from .evolution import (
    EvolutionPlan,
    LatticeWavefunction,
    OracleResult,
    evolve,
    extract_scattering_overlap,
    free_evolve,
    prepare_state,
    time_oracle_overlap,
)
from .gate import (
    BestPhase,
    GateFidelityReport,
    PowerLawFit,
    QuadratureSpec,
    TwoQubitInput,
    WavepacketSpec,
    best_phase,
    fidelity_scan,
    gate_fidelity,
    gate_overlap,
    gate_overlap_detailed,
    infidelity_fit,
)
from .green import (
    EllipticModulus,
    EllipticMoments,
    GreenTable,
    cn_sequence,
    elliptic_cosine_moments,
    elliptic_ke,
    green_coefficient,
    green_quadrature,
    green_quadrature_limit,
    green_table,
)
from .params import (
    DEFAULT_K1,
    DEFAULT_K2,
    DEFAULT_U,
    InteractionConfig,
    MomentumPair,
    Statistics,
)
from .scattering import (
    DeltaPart,
    ExchangeDecayReport,
    SMatrixElement,
    asymptotic_boson_phase,
    asymptotic_reflection_transmission,
    finite_kernel,
    momentum_conservation_check,
    phase_estimate,
    s_matrix_element,
    shell_partner,
)
from .toeplitz import (
    InteractionKernel,
    PlaneWaveVector,
    build_kernel,
    cached_kernel,
    circulant_eigenvalues,
    circulant_quadratic_form,
    clear_kernel_cache,
    plane_wave,
)

__version__ = "0.1.0"
