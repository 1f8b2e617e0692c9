"""Exception hierarchy shared across the package."""

from __future__ import annotations


class CoigError(Exception):
    """Base class for all package errors."""


class PreconditionViolated(CoigError):
    """An operation was called with arguments that violate its contract."""


# --- backend transport ---

class TransportError(CoigError):
    """Network failure or 5xx that persisted through retries."""


class AuthError(CoigError):
    """401/403 from a live backend."""


class RateLimited(CoigError):
    """429 that persisted through retries."""


# --- mock backend / grammars ---

class GrammarError(CoigError):
    """Prompt does not match the mock action grammar."""


class UnknownEntity(CoigError):
    """An action targets an entity id that is not in the scene."""


class LockedEntityMutation(CoigError):
    """An action would alter a locked entity it does not explicitly target."""


class QuestionParseError(CoigError):
    """Question does not follow the QA template grammar."""


class CensusParseError(CoigError):
    """Live evaluator reply does not conform to the census schema."""


# --- planner ---

class PlannerOutputError(CoigError):
    """No valid plan block could be extracted from the LLM reply."""


class PlanInvalid(CoigError):
    """A run was requested for a plan that fails validation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(f"plan has {len(self.violations)} rule violation(s)")


# --- executor ---

class NoMoreSteps(CoigError):
    """advance() called past the final plan step."""


class PriorStepFailed(CoigError):
    """advance() called while an earlier step is failed."""


class RunNotPaused(CoigError):
    """Intervention attempted on a run that is not paused."""


class IndexOutOfRange(CoigError):
    """Intervention index outside the current plan bounds."""


# --- store ---

class StoreError(CoigError):
    """I/O failure in the run store."""


class IntegrityError(StoreError):
    """Manifest references a blob that is not in the store."""


class NotFound(StoreError):
    """Requested run or blob does not exist."""


class CorruptManifest(StoreError):
    """A stored blob does not hash to its recorded id."""


# --- evaluation ---

class MissingArtifact(CoigError):
    """A probed step has no stored artifact."""


class FieldAbsent(CoigError):
    """Perturbation targets a field the step action does not carry."""


class GrayForbidden(CoigError):
    """Perturbation to gray is excluded (gray renders placeholders)."""


class SpecMismatch(CoigError):
    """The two runs under comparison do not differ at the perturbed step."""


# --- bench ---

class VocabTooSmall(CoigError):
    """Vocabulary cannot supply the required number of distinct items."""


class SchemaError(CoigError):
    """Benchmark prompt record does not match its documented schema."""


# --- service / cli ---

class ConfigError(CoigError):
    """Invalid or ambiguous configuration."""
