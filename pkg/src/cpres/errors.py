"""Exception types shared across the package."""


class CpresError(Exception):
    """Base class for all package errors."""


# simcore
class PastTime(CpresError):
    pass


class OutOfRange(CpresError, IndexError):
    pass


class EpisodeFinished(CpresError):
    pass


# netsim
class Disconnected(CpresError):
    pass


class BadInterfaceList(CpresError):
    pass


class NotControllable(CpresError):
    pass


class UnknownRouter(CpresError, KeyError):
    pass


# feedersim
class SchemaError(CpresError, ValueError):
    pass


class NonRadialBase(CpresError):
    pass


class NonRadialIsland(CpresError):
    pass


# cpenv
class UnknownSwitch(CpresError, KeyError):
    pass


class UnknownZone(CpresError, KeyError):
    pass


class UnknownCommand(CpresError, KeyError):
    pass


# experts
class NoAlternatePath(CpresError):
    pass


class Unrestorable(CpresError):
    pass


# learn
class ShapeMismatch(CpresError, ValueError):
    pass


class EmptyDataset(CpresError, ValueError):
    pass


class NonFiniteLoss(CpresError, FloatingPointError):
    pass


class RequiresLogProb(CpresError, TypeError):
    pass


# harness
class ConfigError(CpresError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class MixedEnvironments(CpresError, ValueError):
    pass


class VersionMismatch(CpresError):
    pass


class CorruptFile(CpresError):
    pass


class StageError(CpresError):
    """Wraps a failure raised inside one stage of a harness run."""

    def __init__(self, stage, cause):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause
