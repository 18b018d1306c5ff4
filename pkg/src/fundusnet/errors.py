"""Exception hierarchy shared by every fundusnet module.

Each family carries the CLI exit code it maps to, so the command line layer can
translate any library failure without inspecting messages.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class FundusNetError(Exception):
    exit_code: int = EXIT_USAGE


# -------------------------------------------------------------------
#  usage / configuration
# -------------------------------------------------------------------
class UsageError(FundusNetError):
    exit_code = EXIT_USAGE


class ConfigError(UsageError, ValueError):
    pass


class EmptyConfigError(ConfigError):
    pass


# -------------------------------------------------------------------
#  contract violations raised by the numeric kernels
# -------------------------------------------------------------------
class ShapeError(FundusNetError, ValueError):
    """Raised when tensor extents disagree; the message names the dimensions."""


class GeometryError(FundusNetError, ValueError):
    pass


class DegenerateExtentError(ShapeError):
    pass


class ExtentUnderflowError(ShapeError):
    def __init__(self, layer_index: int, message: str):
        self.layer_index = layer_index
        super().__init__(f"layer {layer_index}: {message}")


class InputTooSmallError(ShapeError):
    pass


class StaleTapeError(FundusNetError, ValueError):
    pass


class EmptyHistogramError(FundusNetError, ValueError):
    pass


class UndefinedMetricError(FundusNetError, ValueError):
    pass


# -------------------------------------------------------------------
#  data: manifests, images, checkpoints, run stores
# -------------------------------------------------------------------
class DataError(FundusNetError):
    exit_code = EXIT_DATA


class ManifestError(DataError, ValueError):
    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(f"{where}{message}")


class InconsistentImagesError(DataError, ValueError):
    """Images of one manifest disagree in size, or with the network input."""


class ImageDecodeError(DataError):
    pass


class UnsupportedFormatError(ImageDecodeError):
    pass


class CorruptImageError(ImageDecodeError):
    pass


class CheckpointError(DataError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    pass


class ShapeInconsistentError(CheckpointError):
    pass


class ReportError(DataError, ValueError):
    pass


class RunStoreError(DataError):
    pass


# -------------------------------------------------------------------
#  numeric failures
# -------------------------------------------------------------------
class NumericError(FundusNetError, ArithmeticError):
    exit_code = EXIT_NUMERIC


class NonFiniteError(NumericError):
    def __init__(self, message: str, epoch: int | None = None, batch: int | None = None):
        self.epoch = epoch
        self.batch = batch
        where = ""
        if epoch is not None:
            where = f" (epoch {epoch}"
            if batch is not None:
                where += f", batch {batch}"
            where += ")"
        super().__init__(f"{message}{where}")


class GradCheckError(NumericError):
    pass
