"""
Exception hierarchy for the adversarial strings toolkit
"""


class AdvStringsError(Exception):
    """Base class for all errors raised by this package"""


class ShapeError(AdvStringsError, ValueError):
    """Operand shapes do not conform for a tensor operation"""

    def __init__(self, op: str, *shapes, detail: str = ""):
        self.op = op
        self.shapes = shapes
        shown = " and ".join(str(tuple(s)) for s in shapes)
        message = f"{op}: incompatible shapes {shown}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class CodecInputError(AdvStringsError, ValueError):
    """A string or latent vector violates the codec preconditions"""


class DatasetError(AdvStringsError, ValueError):
    """Malformed dataset records, degenerate corpus specs or unusable splits"""


class ConfigError(AdvStringsError, ValueError):
    """Invalid run configuration"""


class CheckpointError(AdvStringsError):
    """Missing, corrupt or incompatible checkpoint"""


class TraceError(AdvStringsError):
    """Attack trace records could not be written or are incomplete"""
