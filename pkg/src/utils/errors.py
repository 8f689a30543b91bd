"""Exception hierarchy shared by every reconstruction module."""

from typing import Optional


class ReconstructionError(Exception):
    """Base class for all errors raised by this package."""

    pass


class RejectedInputError(ReconstructionError, ValueError):
    """Raised when an operation's precondition is violated."""

    pass


class BehindCameraError(RejectedInputError):
    """Raised when a point projects with non-positive depth."""

    pass


class NoCrossingError(RejectedInputError):
    """Raised when an SDF profile has no sign change in the analysed range."""

    pass


class ConfigError(ReconstructionError):
    """Raised for invalid or unknown configuration keys."""

    pass


class TrainingAbortError(ReconstructionError):
    """Raised when a loss part or a gradient becomes non-finite.

    Attributes:
        iteration: Training iteration at which the abort happened.
        part: Loss part name or parameter name that went non-finite.
    """

    def __init__(self, iteration: int, part: str, detail: str = "non-finite value") -> None:
        self.iteration = iteration
        self.part = part
        super().__init__(f"Training aborted at iteration {iteration}: {detail} in '{part}'")


class DatasetParseError(ReconstructionError):
    """Raised when a dataset file cannot be parsed.

    Attributes:
        path: Offending file.
        offset: Byte offset of the problem (binary files).
        line: Line number of the problem (text files).
    """

    def __init__(
        self,
        path: str,
        message: str,
        offset: Optional[int] = None,
        line: Optional[int] = None,
    ) -> None:
        self.path = path
        self.offset = offset
        self.line = line
        where = ""
        if line is not None:
            where = f" at line {line}"
        if offset is not None:
            where += f" (byte {offset})" if line is not None else f" at byte {offset}"
        super().__init__(f"{path}{where}: {message}")


class MeshParseError(ReconstructionError):
    """Raised when an OBJ file is malformed.

    Attributes:
        line: 1-based line number of the offending record.
    """

    def __init__(self, path: str, line: int, message: str) -> None:
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class CheckpointError(ReconstructionError):
    """Raised when a checkpoint file is malformed or does not match the model.

    Attributes:
        offset: Byte offset of the problem, when known.
    """

    def __init__(self, path: str, message: str, offset: Optional[int] = None) -> None:
        self.path = path
        self.offset = offset
        where = f" at byte {offset}" if offset is not None else ""
        super().__init__(f"{path}{where}: {message}")
