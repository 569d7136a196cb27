"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: configuration problems, data problems,
and predictor problems are distinguishable by base class.
"""


class GroupShapError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(GroupShapError):
    """A run configuration is missing, inconsistent, or references bad paths."""


# --- coalition game -------------------------------------------------------

class PlayerCountExceedsExactCap(GroupShapError):
    """Exact enumeration was requested above the configured player cap."""


class InvalidBudget(GroupShapError):
    """A sampling budget is too small to give every stratum a sample."""


class StratumExhausted(GroupShapError):
    """More coalitions were requested from a stratum than it contains."""


# --- grouping -------------------------------------------------------------

class InvalidDimensions(GroupShapError):
    """Window size or feature count outside the valid range."""


class IncompleteFeatureMap(GroupShapError):
    """A feature map does not cover every encoded feature index exactly once."""


# --- predictors and coalition values --------------------------------------

class PredictorError(GroupShapError):
    """Base class for predictor construction and invocation failures."""


class PredictorFailure(PredictorError):
    """The predictor raised, or returned non-finite or mis-shaped output."""


class ShapeMismatch(GroupShapError):
    """Explicand, background, and grouping dimensions disagree."""


class UnknownPredictor(PredictorError):
    """No built-in predictor is registered under the requested name."""


class BadParams(PredictorError):
    """Built-in predictor parameters are missing or of the wrong shape."""


class SpawnFailure(PredictorError):
    """An external predictor process could not be started or handshaken."""


class ProtocolViolation(PredictorError):
    """An external predictor sent a line that violates the wire protocol."""


class PredictorTimeout(PredictorError):
    """An external predictor did not answer within the configured timeout."""


# --- preprocessing pipeline -----------------------------------------------

class DataError(GroupShapError):
    """Raw input data could not be parsed or fails a structural requirement."""


class SegmentTooShort(DataError):
    """A split segment cannot fit three non-empty subsets plus padding."""


class DegenerateScale(DataError):
    """A continuous column has zero spread after pruning; it should not exist."""


class InsufficientWindows(DataError):
    """Fewer windows are available than the requested background size."""


# --- engine ----------------------------------------------------------------

class ExactMethodInfeasible(GroupShapError):
    """Exact attribution was requested for more groups than the exact cap."""


# --- analysis and rendering -------------------------------------------------

class EmptyEventWindow(DataError):
    """Ranking was requested over an event containing no frames."""


class UnknownTruthName(DataError):
    """A localization truth label names a group absent from the ranking."""


class EmptyFrames(DataError):
    """A heatmap was requested for an empty frame sequence."""


class AllZeroAttributionsWarning(UserWarning):
    """Shares were requested for a frame whose attributions are all zero."""
