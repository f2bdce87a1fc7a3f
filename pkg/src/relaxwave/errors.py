"""Exception hierarchy shared by all relaxwave modules."""


class RelaxwaveError(Exception):
    """Base class for all library errors."""


class InvalidParams(RelaxwaveError, ValueError):
    """Parameter tuple violates an admissibility constraint."""


class DegenerateCubic(RelaxwaveError, ValueError):
    pass


class ClassificationError(RelaxwaveError):
    """Characteristic roots do not have the expected sign pattern."""


class NonRealResult(RelaxwaveError):
    pass


class NoTravelingWave(RelaxwaveError):
    """No exponentially localized wave exists for the given parameters."""


class ProfileError(RelaxwaveError):
    """Profile construction failed (singular basis or ansatz violation)."""


class CoalescentRoots(RelaxwaveError):
    pass


class ZeroOnContour(RelaxwaveError):
    pass


class DomainTooSmall(RelaxwaveError, ValueError):
    pass


class WaveLost(RelaxwaveError):
    pass


class ConfigError(RelaxwaveError, ValueError):
    pass
