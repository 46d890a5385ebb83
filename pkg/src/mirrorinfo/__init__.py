"""Mirror-descent and primal-dual solvers for channel capacities, rate-distortion
functions and relative entropy of entanglement."""

from .errors import (
    DimensionError,
    DomainError,
    InfeasibleError,
    InstanceBudgetError,
    NotHermitianError,
    NumericalFailureError,
)
from .factories import (
    InstanceSpec,
    make_classical_capacity,
    make_classical_rd,
    make_cq_capacity,
    make_ea_capacity,
    make_qre_problem,
    make_quantum_rd,
    make_ree_ppt,
    random_instance,
)
from .kernels import Domain, KernelKind
from .problems import ClassicalChannel, CqEnsemble, SaddleProblem, StinespringChannel
from .solvers import SolverConfig, mirror_descent, pdhg, pdhg_backtracking, solve

__version__ = "0.1.0"
