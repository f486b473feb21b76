"""Light propagation in the non-Hermitian zigzag Glauber-Fock waveguide lattice.

Two independent solvers are provided: adaptive RKF45 integration of the
truncated coupled-mode equations (:mod:`zigzag.integrator`) and the
closed-form su(1,1) propagator (:mod:`zigzag.exact`), together with dense
matrix-exponential oracles (:mod:`zigzag.su11`).
"""

__version__ = "0.1.0"

from .lattice import (  # noqa: E402
    DimensionlessParams,
    HyperbolicRegimeError,
    LatticeState,
    PhysicalParams,
    bloch_period,
    build_hamiltonian,
    coupling_first,
    coupling_second,
    nondimensionalize,
)
from .integrator import IntegrationError, IntegratorConfig, edge_monitor, integrate, rhs  # noqa: E402
from .exact import (  # noqa: E402
    DegenerateParametersError,
    SolverContext,
    TruncationPolicy,
    amplitude,
    intensity_map,
    make_context,
    propagate,
    xi_curves,
    z_factors,
)
from .su11 import TripleCoefficients, dense_oracle, disentangle  # noqa: E402
from .grid import PropagationGrid, compare_grids, read_grid, write_grid  # noqa: E402

AMPLIFIED = DimensionlessParams(lam=1.0, alpha_plus=1.8, alpha_minus=2.0, beta=0.15)
ATTENUATED = DimensionlessParams(lam=1.0, alpha_plus=2.0, alpha_minus=1.8, beta=0.15)
