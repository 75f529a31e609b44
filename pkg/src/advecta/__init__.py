"""Fixed-point solver and stability certificates for linear advanced
differential systems  x'(t) + sum_j A_j(t) x(t + h_j(t)) = 0."""

from .analysis import (
    Certificate, StabilityReport, admissible_initial_bound, check_phi_vanishes,
    compute_alpha, compute_K, decay_rate, exponential_certificate,
    fit_exponential_bound, stability_report, uniform_matrix_bound,
)
from .errors import (
    AdvectaError, DegenerateWindow, EvalError, ExprSyntaxError, InvalidCertificate,
    NegativeAdvance, NotConverged, NotDecaying, OffGrid, OutOfDomain, Overflow,
    SchemaError, SingularMatrix,
)
from .expr import evaluate, parse, to_string
from .fixedpoint import (
    IterationResult, Trajectory, apply_H, eval_E, ode_defect, picard_solve,
)
from .matrix_core import mat_exp, mat_inf_norm, mat_inverse, vec_inf_norm
from .system import (
    AdvancedSystem, Horizon, Term, eval_advance, eval_coefficient, eval_drift,
    max_advance,
)
from .transition import (
    TransitionGrid, build_fundamental, check_chapman_kolmogorov, transition,
)

__version__ = "0.1.0"
