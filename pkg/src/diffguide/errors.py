"""Exception hierarchy shared by every module.

Each error carries a stable ``code`` used in the CLI's machine-readable
error output.
"""

from __future__ import annotations


class DiffGuideError(Exception):
    code = "error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class UnknownExtractor(DiffGuideError):
    code = "unknown_extractor"


class UnparseablePayload(DiffGuideError):
    code = "unparseable_payload"


class NonFiniteFeature(DiffGuideError):
    code = "non_finite_feature"


class IncompatibleVectors(DiffGuideError):
    code = "incompatible_vectors"


class MixedLocation(DiffGuideError):
    code = "mixed_location"


class NotOrdered(DiffGuideError):
    code = "not_ordered"


class InsufficientHistory(DiffGuideError):
    code = "insufficient_history"


class NegativeWeight(DiffGuideError):
    code = "negative_weight"


class TooFewSubObjects(DiffGuideError):
    code = "too_few_sub_objects"


class StorageFailure(DiffGuideError):
    code = "storage_failure"


class DuplicateStateId(DiffGuideError):
    code = "duplicate_state_id"


class EmptyHistory(DiffGuideError):
    code = "empty_history"


class UnknownState(DiffGuideError):
    code = "unknown_state"


class NegativeThreshold(DiffGuideError):
    code = "negative_threshold"


class InsufficientNormalHistory(DiffGuideError):
    code = "insufficient_normal_history"


class TimestampMismatch(DiffGuideError):
    code = "timestamp_mismatch"


class NameCollision(DiffGuideError):
    code = "name_collision"


class UnknownTemplate(DiffGuideError):
    code = "unknown_template"


class MissingContext(DiffGuideError):
    code = "missing_context"


class BackendUnreachable(DiffGuideError):
    code = "backend_unreachable"

    def __init__(self, message: str, retries: int = 0):
        super().__init__(message)
        self.retries = retries

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["retries"] = self.retries
        return d


class ScriptMiss(DiffGuideError):
    code = "script_miss"


class AuthMissing(DiffGuideError):
    code = "auth_missing"


class UnparseableSummary(DiffGuideError):
    code = "unparseable_summary"


class DimensionMismatch(DiffGuideError):
    code = "dimension_mismatch"


class ZeroVector(DiffGuideError):
    code = "zero_vector"


class SampleTooSmall(DiffGuideError):
    code = "sample_too_small"


class DegenerateVariance(DiffGuideError):
    code = "degenerate_variance"


class MissingMethod(DiffGuideError):
    code = "missing_method"


class ProviderError(DiffGuideError):
    code = "provider_error"


class TrialError(DiffGuideError):
    """Wraps a backend/provider failure with the trial it happened in."""

    code = "trial_error"

    def __init__(self, method: str, trial_index: int, cause: Exception):
        super().__init__(f"{method} trial {trial_index}: {cause}")
        self.method = method
        self.trial_index = trial_index
        self.cause = cause

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update(method=self.method, trial_index=self.trial_index,
                 cause=getattr(self.cause, "code", type(self.cause).__name__))
        return d


class ConfigError(DiffGuideError):
    code = "config_error"
