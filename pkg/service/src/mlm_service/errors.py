"""Service-side error taxonomy."""


class ServiceError(Exception):
    """Base class for every error this package raises on purpose."""


class CorpusEmptyError(ServiceError):
    """The training corpus holds no records."""


class DeviceUnavailableError(ServiceError):
    """The configured compute device cannot be used on this machine."""


class CheckpointError(ServiceError):
    """A checkpoint directory is missing or not loadable."""


class MaskCountError(ServiceError):
    """A prediction request does not contain exactly one mask token."""
