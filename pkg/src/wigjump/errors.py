"""Exception types shared across the simulator."""


class WigjumpError(Exception):
    """Base class for all simulator errors."""


class ConfigError(WigjumpError):
    """Invalid or incomplete run configuration."""


class NonFiniteState(WigjumpError):
    """A trajectory component overflowed or became NaN (usually a bad dt)."""


class ShellUnreachable(WigjumpError):
    """No classical turning points exist at the requested energy."""


class TolExceeded(WigjumpError):
    """Integrator energy drift broke the sampling tolerance."""


class GridTooSmall(WigjumpError):
    """Eigenstates do not decay below threshold at the grid edges."""


class SpectrumTruncated(WigjumpError):
    """Requested energy window extends beyond the retained spectrum."""


class InsufficientDamping(WigjumpError):
    """The damped Fourier transform is not converged on the given time grid."""


class NoTurningPoints(WigjumpError):
    """Energy outside the bound range of the action integral."""


class UnsupportedProfile(WigjumpError):
    """Medium profile kind has no closed-form scattering kernel."""
