"""Exception hierarchy. Every error raised on purpose derives from FacadeAuditError."""


class FacadeAuditError(Exception):
    """Base class for all facade-audit errors."""


class ConfigError(FacadeAuditError):
    """Invalid configuration or CLI usage."""


# --- Prompts ---


class PromptError(FacadeAuditError):
    pass


class MissingContext(PromptError):
    """A context-consuming prompt was rendered without stage output."""


class UnexpectedContext(PromptError):
    """A stage prompt was rendered with stage output it does not take."""


class IncompleteStages(PromptError):
    """A stage summary was requested before every stage produced text."""


class MissingImages(PromptError):
    """An image prompt was rendered with no images."""


# --- LLM ---


class LlmError(FacadeAuditError):
    """Base class for completion failures."""


class AuthError(LlmError):
    """Missing or rejected credentials. Never retried."""


class RateLimited(LlmError):
    """The endpoint kept answering 429 after every retry."""


class TransportError(LlmError):
    """Network failure, timeout or server error that outlived the retries."""


class MalformedResponse(LlmError):
    """The reply carried no assistant text."""


class RequestRejected(LlmError):
    """The endpoint refused the request (4xx other than auth and rate limit)."""


class FixtureMissing(LlmError):
    """No recorded response exists for this property and prompt."""


class ImageUnavailable(LlmError):
    """A local image could not be read for inline encoding."""


# --- Dataset ---


class SchemaError(FacadeAuditError):
    """Input file does not match the expected schema."""


class UnknownHeatingLabel(SchemaError):
    """Ground-truth heating labels missing from the synonym table."""

    def __init__(self, labels: list[str]):
        self.labels = labels
        super().__init__(f"Unknown heating label(s): {', '.join(repr(x) for x in labels)}")


class IoError(FacadeAuditError):
    """Reading or writing a dataset file failed."""


# --- Pipeline / evaluation ---


class ContextUnavailable(FacadeAuditError):
    """A prerequisite stage failed, so the summary prompts cannot run."""


class EmptyInput(FacadeAuditError):
    """A metric was asked to score zero pairs."""


class JoinError(FacadeAuditError):
    """Predictions and ground truth share no property ids."""

    def __init__(self, message: str, only_predictions: list[str], only_truth: list[str]):
        self.only_predictions = only_predictions
        self.only_truth = only_truth
        super().__init__(message)
