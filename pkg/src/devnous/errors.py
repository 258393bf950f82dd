"""Exception hierarchy shared across the package."""


class DevnousError(Exception):
    """Base class for every error raised by this package."""


class MalformedMessage(DevnousError):
    """Wire message payload must be rejected (empty content, bad timestamp)."""


class WorkflowAlreadyActive(DevnousError):
    """A workflow is already active; a second one cannot start."""


class NoActiveWorkflow(DevnousError):
    """Update or end requested while no workflow is active."""


class SchemaViolation(DevnousError):
    """A structured payload failed validation.

    Carries the offending field name so callers can report (and retry
    prompts can quote) the exact problem.
    """

    def __init__(self, field: str, reason: str):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason


class ClassifierFailure(DevnousError):
    """The classification backend failed even after a retry."""


class PermissionDenied(DevnousError):
    """Tool invocation outside the calling agent's grant."""


class UnknownTool(DevnousError):
    """Tool name not present in the registry."""


class ToolError(DevnousError):
    """A registered tool's backend failed; wraps the original cause."""


class ChatDeliveryError(DevnousError):
    """Outbound chat delivery failed; safe to retry."""


class RosterParseError(DevnousError):
    """Team roster file could not be parsed."""


class PMBackendFailure(DevnousError):
    """The project-management backend rejected or dropped an operation."""


class LengthMismatch(DevnousError):
    """Aligned turn sequences have different lengths."""


class FormatError(DevnousError):
    """Benchmark file violates the dataset format; message carries the path."""


class ImpersonationError(DevnousError):
    """The dialogue generator tried to speak as the agent twice in a row."""
