"""Exception types shared across the package."""


class RadCotrainError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(RadCotrainError, ValueError):
    """Invalid configuration, detected before any work starts."""


class ContractError(RadCotrainError, ValueError):
    """A caller broke an operation's precondition (shapes, id sets, label spaces)."""


class CorpusError(RadCotrainError, ValueError):
    """A dataset file or record is malformed.

    ``line`` is the 1-based line number in the source file when known.
    """

    def __init__(self, message: str, *, line: int | None = None, record_id: str | None = None):
        self.line = line
        self.record_id = record_id
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class ReportParseError(RadCotrainError, ValueError):
    """A raw report could not be segmented into the required sections."""

    def __init__(self, message: str, *, report_id: str | None = None):
        self.report_id = report_id
        super().__init__(f"{report_id}: {message}" if report_id else message)


class TrainingError(RadCotrainError, RuntimeError):
    """Optimisation failed (empty data, non-finite loss)."""


class ExperimentError(RadCotrainError, RuntimeError):
    """A cell of the experiment grid failed; ``fold`` and ``seed`` say which."""

    def __init__(self, message: str, *, fold: int | None = None, seed: int | None = None):
        self.fold = fold
        self.seed = seed
        super().__init__(f"fold {fold}, seed {seed}: {message}")
