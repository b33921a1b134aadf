"""Exception hierarchy shared by every privcone module.

Each error carries the process exit code the CLI should use and a one-line
remediation hint.
"""


class PrivconeError(Exception):
    exit_code = 2
    hint = ""


class ParseError(PrivconeError):
    hint = "check the file against the privcone/1 schema"


class DimensionMismatch(PrivconeError):
    hint = "both operands must be indexed by the same datasets"


class SingularMatrix(PrivconeError):
    hint = "the mechanism matrix is not invertible; its row cone cannot be read off an inverse"


class SingularAtHalf(SingularMatrix):
    hint = ("at p = 1/2 every output is independent of the input: attackers learn "
            "nothing, and the cone is the line of equal coordinates")


class DomainTooLarge(PrivconeError):
    exit_code = 3
    hint = "reduce k / W / N, or raise PRIVCONE_MAX_DIM"


class OrderMismatch(PrivconeError):
    hint = "bit priors need a mechanism over reverse-lex bit strings"


class ZeroEvidence(PrivconeError):
    hint = "the output has probability zero under this prior"


class AllZero(PrivconeError):
    hint = "a constraint with no nonzero coefficient carries no statement"


class UnknownTupleValue(PrivconeError):
    hint = "tuple values must appear in the mechanism's column labels"


class WindowTooSmall(PrivconeError):
    exit_code = 3
    hint = "increase --window so the tail mass falls below the tolerance"


class NearSingularTransform(PrivconeError):
    hint = "the characteristic function comes too close to 0; the inverse may not be summable"


class IncompleteDerivation(PrivconeError):
    exit_code = 1
    hint = "the eliminated system does not imply every pairwise constraint"


class NotStochastic(PrivconeError):
    hint = "entries must be nonnegative and every column must sum to exactly 1"
