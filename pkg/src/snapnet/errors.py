"""Typed errors. Each carries the short machine-readable code used in
CLI diagnostics and test assertions."""


class SnapnetError(Exception):
    code = "ERROR"

    def __init__(self, message: str):
        super().__init__(f"{self.code}: {message}")
        self.message = message


class InfeasibleSpecError(SnapnetError):
    code = "INFEASIBLE_SPEC"


class OutOfRangeError(SnapnetError):
    code = "OUT_OF_RANGE"


class NoRootOnBranchError(SnapnetError):
    """Requested pressure lies beyond the fold of the selected branch;
    the caller must switch branch (a snap event)."""

    code = "NO_ROOT_ON_BRANCH"


class DisconnectedGraphError(SnapnetError):
    code = "DISCONNECTED_GRAPH"


class DanglingReferenceError(SnapnetError):
    code = "DANGLING_REFERENCE"


class NonpositiveResistanceError(SnapnetError):
    code = "NONPOSITIVE_RESISTANCE"


class NetworkInvariantError(SnapnetError):
    code = "INVALID_NETWORK"


class StepFailureError(SnapnetError):
    code = "STEP_FAILURE"


class NonfiniteStateError(SnapnetError):
    code = "NONFINITE_STATE"


class UnknownElementError(SnapnetError):
    code = "UNKNOWN_ELEMENT"


class OpenPathError(SnapnetError):
    code = "OPEN_PATH"


class GridMismatchError(SnapnetError):
    code = "GRID_MISMATCH"


class TooShortError(SnapnetError):
    code = "TOO_SHORT"


class UnpairedEventError(SnapnetError):
    code = "UNPAIRED_EVENT"


class NonmonotoneSegmentError(SnapnetError):
    code = "NONMONOTONE_SEGMENT"


class NoEventsError(SnapnetError):
    code = "NO_EVENTS"


class MissingGroupEventError(SnapnetError):
    code = "MISSING_GROUP_EVENT"


class EvaluatorFailure(SnapnetError):
    """Objective evaluation raised; carries the offending parameter vector."""

    code = "EVALUATOR_FAILURE"

    def __init__(self, message: str, params):
        super().__init__(f"{message} at parameters {list(params)}")
        self.params = params


class ScenarioParseError(SnapnetError):
    code = "PARSE_ERROR"
