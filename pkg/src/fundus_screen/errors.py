"""Exception hierarchy shared by every module."""


class FundusScreenError(Exception):
    """Base class for all errors raised by this package."""


class DecodeError(FundusScreenError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DimensionError(FundusScreenError):
    pass


class ParameterError(FundusScreenError, ValueError):
    pass


class ConfigError(FundusScreenError, ValueError):
    pass


class ShapeError(FundusScreenError):
    def __init__(self, layer, message):
        super().__init__(f"{layer}: {message}")
        self.layer = layer


class TrainingError(FundusScreenError):
    pass


class ModelFormatError(FundusScreenError):
    pass


class UndefinedMetricError(FundusScreenError):
    def __init__(self, metric, message):
        super().__init__(f"{metric} is undefined: {message}")
        self.metric = metric


class ManifestError(FundusScreenError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
