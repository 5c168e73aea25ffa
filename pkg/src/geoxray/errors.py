"""Exception types shared across the package.

Each carries a ``exit_code`` used by the command line front-end.
"""


class GeoXrayError(Exception):
    exit_code = 1


class ConfigError(GeoXrayError, ValueError):
    exit_code = 3


class BackendMismatch(GeoXrayError):
    """Requested inversion backend is not valid on the given metric."""

    exit_code = 3


class ExitedDomain(GeoXrayError):
    """A geodesic left the disc before the requested flow time.

    Attributes
    ----------
    t_exit : float
        Riemannian time at which the boundary was crossed.
    interval : tuple of float
        ``(t_exit, t)`` bracketing the part of the request that is undefined.
    """

    exit_code = 4

    def __init__(self, t_exit, t):
        self.t_exit = float(t_exit)
        self.interval = (float(t_exit), float(t))
        super().__init__(f"geodesic exits the disc at t={t_exit:.6g} before t={t:.6g}")


class TrapBudgetExceeded(GeoXrayError):
    exit_code = 4


class OutsideDomain(GeoXrayError):
    exit_code = 4


class SolverDiverged(GeoXrayError):
    exit_code = 4


class NeumannDiverged(SolverDiverged):
    pass
