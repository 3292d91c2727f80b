"""Exception types shared across the package."""

from __future__ import annotations


class CrcureError(Exception):
    """Base class for all errors raised by this package."""


class NegativeTimeError(CrcureError):
    """A follow-up time is negative or non-finite."""

    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(f"record {index}: follow-up time {value!r} is not a finite nonnegative number")


class CauseOutOfRangeError(CrcureError):
    """A cause label is outside 0..K or inconsistent with the event indicator."""

    def __init__(self, index, message):
        self.index = index
        super().__init__(f"record {index}: {message}")


class InconsistentCovariateLengthError(CrcureError):
    def __init__(self, index, expected, got):
        self.index = index
        self.expected = expected
        self.got = got
        super().__init__(f"record {index}: covariate vector has length {got}, expected {expected}")


class EmptyCauseError(CrcureError):
    """No observed event for one of the declared causes."""

    def __init__(self, cause):
        self.cause = cause
        super().__init__(f"no observed event with cause {cause}; that cause is unfittable")


class ConstantCovariateError(CrcureError):
    """A covariate column is constant, so its estimating function is identically zero."""

    def __init__(self, column):
        self.column = column
        super().__init__(f"covariate column {column} is constant; the coefficient is not identifiable")


class UnknownLinkError(CrcureError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"unknown link {name!r}; expected 'ph' or 'po'")


class EmptyRiskSetError(CrcureError):
    def __init__(self, time=None):
        self.time = time
        at = "" if time is None else f" at time {time}"
        super().__init__(f"empty risk set{at}")


class NoBracketError(CrcureError):
    """The monotone step equation has no root within the admissible argument range."""

    def __init__(self, time=None, detail=""):
        self.time = time
        at = "" if time is None else f" at time {time}"
        super().__init__(f"cannot bracket baseline root{at}; numerically degenerate inputs. {detail}".rstrip())


class CurveMismatchError(CrcureError):
    def __init__(self, message="baseline curve times do not match the dataset's event times for this cause"):
        super().__init__(message)


class NonConvergenceError(CrcureError):
    def __init__(self, iterations, score_norm, detail=""):
        self.iterations = iterations
        self.score_norm = score_norm
        super().__init__(
            f"estimation did not converge after {iterations} iterations (score norm {score_norm:.3e}). {detail}".rstrip()
        )


class SingularJacobianError(CrcureError):
    def __init__(self, cond):
        self.cond = cond
        super().__init__(f"score Jacobian is singular or near-singular (condition estimate {cond:.3e})")


class SingularInformationError(CrcureError):
    def __init__(self, cond):
        self.cond = cond
        super().__init__(f"slope matrix is singular or near-singular (condition estimate {cond:.3e})")


class ZeroDenominatorError(CrcureError):
    def __init__(self, time):
        self.time = time
        super().__init__(f"effective risk set has zero hazard mass at time {time}")


class TooManyFailedReplicatesError(CrcureError):
    def __init__(self, failed, total):
        self.failed = failed
        self.total = total
        super().__init__(f"{failed} of {total} bootstrap replicates failed to converge (limit is 10%)")


class TooManyFailedFitsError(CrcureError):
    def __init__(self, failed, total):
        self.failed = failed
        self.total = total
        super().__init__(f"{failed} of {total} Monte Carlo replications failed to fit (limit is 2%)")


class CalibrationFailedError(CrcureError):
    def __init__(self, target, detail=""):
        self.target = target
        super().__init__(f"cannot calibrate censoring to target {target}. {detail}".rstrip())


class DimensionMismatchError(CrcureError):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"covariate vector has length {got}, expected {expected}")


class UnsortedGridError(CrcureError):
    def __init__(self):
        super().__init__("time grid must be sorted in ascending order")


class PatternDimensionMismatchError(CrcureError):
    def __init__(self, expected, got):
        self.expected = expected
        self.got = got
        super().__init__(f"covariate pattern has length {got}, expected {expected}")


class MissingColumnError(CrcureError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"input file has no column named {column!r}")


class UnparsableValueError(CrcureError):
    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"row {row}, column {column!r}: cannot parse value {value!r}")


class EmptyAfterFilteringError(CrcureError):
    def __init__(self):
        super().__init__("no usable rows remain after dropping rows with missing covariates")


class AggregateFitError(CrcureError):
    """One or more causes failed to fit; successful sibling fits are attached."""

    def __init__(self, errors, fits):
        self.errors = errors  # cause -> exception
        self.fits = fits      # cause -> CauseFit for the causes that did fit
        parts = "; ".join(f"cause {k}: {e}" for k, e in errors.items())
        super().__init__(f"fitting failed for {len(errors)} cause(s): {parts}")
