"""Exception types.

Every error carries a short ``category`` string so the command line can
report a machine-readable failure class alongside the message.
"""


class UncertNetError(Exception):
    category = "error"


class ValidationError(UncertNetError, ValueError):
    category = "validation"

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SelfEdge(ValidationError):
    category = "self_edge"

    def __init__(self, i, line=None):
        self.i = i
        super().__init__(f"self-pair ({i}, {i}) is not allowed", line)


class DuplicatePair(ValidationError):
    category = "duplicate_pair"

    def __init__(self, i, j, line=None):
        self.i, self.j = i, j
        super().__init__(f"pair ({i}, {j}) appears more than once", line)


class ProbabilityOutOfRange(ValidationError):
    category = "probability_out_of_range"

    def __init__(self, i, j, q, line=None):
        self.i, self.j, self.q = i, j, q
        super().__init__(f"pair ({i}, {j}) has probability {q!r} outside (0, 1]", line)


class NodeIdOutOfRange(ValidationError):
    category = "node_id_out_of_range"

    def __init__(self, node, n, line=None):
        self.node, self.n = node, n
        super().__init__(f"node id {node} outside [0, {n})", line)


class ParseError(ValidationError):
    category = "parse"


class TooFewNodes(UncertNetError, ValueError):
    category = "too_few_nodes"


class DegenerateRho(UncertNetError, ValueError):
    category = "degenerate_rho"


class InvalidSimplex(UncertNetError, ValueError):
    category = "invalid_simplex"


class InvalidShape(UncertNetError, ValueError):
    category = "invalid_shape"


class InfeasibleNoise(UncertNetError, ValueError):
    category = "infeasible_noise"

    def __init__(self, c_implied, message=None):
        self.c_implied = c_implied
        super().__init__(
            message or f"implied non-edge mass c={c_implied!r} is outside (0, 1]"
        )


class NumericalUnderflow(UncertNetError, FloatingPointError):
    category = "numerical_underflow"


class NotConverged(UncertNetError, RuntimeWarning):
    """BP hit its sweep cap.  ``result`` holds the last messages and marginals."""

    category = "not_converged"

    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)


class AllRestartsDegenerate(UncertNetError, RuntimeError):
    category = "all_restarts_degenerate"


class InstanceTooLarge(UncertNetError, ValueError):
    category = "instance_too_large"


class MismatchedFit(UncertNetError, ValueError):
    category = "mismatched_fit"


class EmptyTruth(UncertNetError, ValueError):
    category = "empty_truth"


class FullTruth(UncertNetError, ValueError):
    category = "full_truth"


class SizeMismatch(UncertNetError, ValueError):
    category = "size_mismatch"


class TooManyGroups(UncertNetError, ValueError):
    category = "too_many_groups"
