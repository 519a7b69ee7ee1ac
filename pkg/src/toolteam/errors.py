"""Exception hierarchy for the runtime."""


class ToolteamError(Exception):
    """Base class for all runtime errors."""


class ConfigurationError(ToolteamError):
    """Bad roster, pricing, credentials, or request parameters. Not retryable."""


class TransportFailure(ToolteamError):
    """Network-level failure after the configured retries were exhausted."""


class ProtocolError(ToolteamError):
    """The remote endpoint answered with a shape we cannot interpret."""


class EmptyTeamError(ToolteamError):
    """Every candidate tool agent was skipped; the caller must decide what to do."""


class LedgerIntegrityError(ToolteamError):
    """The token ledger's total stopped matching the sum of its parts."""


class NoPredictionsError(ToolteamError):
    """All invoked agents failed; aggregation has nothing to work with."""


class TaskFileError(ToolteamError):
    """Task file failed validation; message carries the offending line number."""


class SplitOverlapError(ToolteamError):
    """Calibration and test splits share task ids."""


class AssessmentParseError(ToolteamError):
    """Assessment response stayed unparseable after the re-prompt."""


class StageError(ToolteamError):
    """Wraps a failure with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
