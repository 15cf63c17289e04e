"""Krylov-subspace lower bounds on the quantum Fisher information.

Exact evaluation from a density matrix, estimation from randomized Pauli
measurements (classical shadows), and seeded experiment drivers.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    KrylovQFIError,
    NumericalError,
    OrderExceedsNStar,
    SingularEstimate,
    ZeroQFI,
)
from .qcore import (  # noqa: E402
    DensityMatrix,
    Observable,
    Spectrum,
    TransitionTable,
    build_transition_table,
    collective_z,
    eigh,
    pauli,
)
from .exact import NStarReport, n_star, qfi_exact, sld  # noqa: E402
from .bounds import (  # noqa: E402
    convergence_envelope,
    kappa,
    krylov_bound,
    krylov_bounds,
    krylov_chain,
    moments_operator,
    moments_spectral,
    relative_gap,
    taylor_bound,
    taylor_bounds,
)
from .ensembles import EnsembleSpec, draw  # noqa: E402
from .shadows import (  # noqa: E402
    ShadowCounts,
    estimate_krylov,
    estimate_taylor,
    sample_shadows,
)

__all__ = [
    "__version__",
    "ConfigError",
    "KrylovQFIError",
    "NumericalError",
    "OrderExceedsNStar",
    "SingularEstimate",
    "ZeroQFI",
    "DensityMatrix",
    "Observable",
    "Spectrum",
    "TransitionTable",
    "build_transition_table",
    "collective_z",
    "eigh",
    "pauli",
    "NStarReport",
    "n_star",
    "qfi_exact",
    "sld",
    "kappa",
    "krylov_bound",
    "krylov_bounds",
    "krylov_chain",
    "moments_operator",
    "moments_spectral",
    "relative_gap",
    "taylor_bound",
    "taylor_bounds",
    "convergence_envelope",
    "EnsembleSpec",
    "draw",
    "ShadowCounts",
    "estimate_krylov",
    "estimate_taylor",
    "sample_shadows",
]
