"""Row cones of privacy mechanisms.

Mechanisms are column-stochastic matrices over an enumerated set of
datasets.  The package builds them, computes the constraints that describe
what any post-processing of them can output, checks guarantees against
brute-force Bayesian attackers and relaxes constraint systems.
"""

from .errors import (
    AllZero,
    DimensionMismatch,
    DomainTooLarge,
    IncompleteDerivation,
    NearSingularTransform,
    NotStochastic,
    OrderMismatch,
    ParseError,
    PrivconeError,
    SingularAtHalf,
    SingularMatrix,
    UnknownTupleValue,
    WindowTooSmall,
    ZeroEvidence,
)
from .mechanisms import (
    PramSpec,
    RRSpec,
    SamplingSpec,
    check_gamma_amplification,
    drop_matrix,
    pram_matrix,
    rr_inverse,
    rr_matrix,
    sampling_matrix,
    sort_matrix,
)
from .numerics import (
    DatasetOrder,
    LabeledMatrix,
    MechanismMatrix,
    Rational,
    column_l1_norms,
    invert,
    kronecker,
    kronecker_power,
)
from .relax import derive_dp_from_rr, fourier_motzkin_eliminate
from .rowcone import (
    ConstraintSystem,
    LinearConstraint,
    Relation,
    SemanticStatement,
    Status,
    cnf_membership,
    frapp_approx_constraints,
    interpret_constraint,
    membership,
    rr_constraints,
    sampling_constraints,
)
from .semantics import (
    BitPrior,
    GuaranteeReport,
    ParityQuery,
    TuplePairPrior,
    bit_prior_to_dataset_prior,
    dp_check,
    parity_split,
    posterior,
    restrict_mechanism,
    verify_parity_protection,
    verify_sampling_parity,
)

__version__ = "0.1.0"
