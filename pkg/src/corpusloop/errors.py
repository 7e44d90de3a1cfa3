"""Exception types shared across the pipeline."""


class CorpusLoopError(Exception):
    """Base class for all engine errors."""


# --- backend ---

class BackendError(CorpusLoopError):
    """Base class for generation-backend failures."""


class Timeout(BackendError):
    pass


class RateLimitExhausted(BackendError):
    pass


class UpstreamError(BackendError):
    def __init__(self, status: int, message: str = ""):
        self.status = status
        super().__init__(f"upstream returned {status}: {message}" if message else f"upstream returned {status}")


class FixtureMiss(BackendError):
    def __init__(self, fingerprint: str, tag: str = ""):
        self.fingerprint = fingerprint
        self.tag = tag
        super().__init__(f"no fixture entry for fingerprint {fingerprint} (tag={tag!r})")


class NoPayloadFound(CorpusLoopError):
    pass


class UnbalancedPayload(CorpusLoopError):
    pass


# --- curation ---

class MonotonicityViolation(CorpusLoopError):
    pass


# --- knowledge store ---

class UnknownConcept(CorpusLoopError):
    pass


class DanglingReference(CorpusLoopError):
    pass


# --- extraction ---

class SchemaInvalid(CorpusLoopError):
    """A model response parsed but does not satisfy the expected schema."""


class TooFewSteps(CorpusLoopError):
    pass


class AdjacencyViolation(CorpusLoopError):
    pass


class DanglingParent(CorpusLoopError):
    pass


class ValidationFailed(CorpusLoopError):
    def __init__(self, report):
        self.report = report
        super().__init__(f"knowledge structure invalid: {len(report)} violation(s)")


# --- benchmark ---

class EmptyNeighborhood(CorpusLoopError):
    pass


class IndexOutOfRange(CorpusLoopError):
    pass


class OptionCountWrong(SchemaInvalid):
    pass


class AnswerNotInOptions(SchemaInvalid):
    pass


# --- synthesis ---

class EmptyGeneration(CorpusLoopError):
    pass


# --- evaluation ---

class UnknownItemId(CorpusLoopError):
    pass


class LengthMismatch(CorpusLoopError):
    pass


class DegenerateInput(CorpusLoopError):
    pass


# --- repair ---

class AllZeroErrors(CorpusLoopError):
    pass


class ShortBatch(CorpusLoopError):
    pass


class InsufficientDisjointPool(CorpusLoopError):
    pass


class QuotaMismatch(CorpusLoopError):
    pass


# --- orchestration ---

class PredecessorIncomplete(CorpusLoopError):
    pass


class StageFailed(CorpusLoopError):
    def __init__(self, stage: str, inner: BaseException):
        self.stage = stage
        self.inner = inner
        super().__init__(f"stage {stage!r} failed: {inner}")


class ConfigError(CorpusLoopError):
    pass
