"""Exception hierarchy for contract violations.

Every exception carries the process exit code the CLI reports for it.
Per-window failures are not raised past the feature extraction layer, they
come back as `models.Error` values instead.
"""


class GaitError(Exception):
    exit_code: int = 2


class UsageError(GaitError):
    exit_code = 1


class DataError(GaitError):
    exit_code = 2


class PreconditionError(GaitError):
    exit_code = 2


class DegenerateTrajectory(GaitError):
    exit_code = 2


class OutOfRegime(GaitError):
    exit_code = 2


class ModelFormatError(GaitError):
    exit_code = 3


class ModelVersionError(GaitError):
    exit_code = 3
