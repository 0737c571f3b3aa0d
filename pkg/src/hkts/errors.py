"""Exception hierarchy shared by all modules."""


class HKError(Exception):
    """Base class for every error raised by hkts."""


class SpaceMismatch(HKError, ValueError):
    pass


class NotInTimeScale(HKError, ValueError):
    def __init__(self, t, message=None):
        self.t = t
        super().__init__(message or f"{t!r} is not a point of the time scale")


class InvalidInterval(HKError, ValueError):
    pass


class InvalidGauge(HKError, ValueError):
    pass


class IntegrityError(HKError):
    """The integrand returned different values for the same point."""


class NotOracleEligible(HKError):
    pass


class WitnessNotFound(HKError):
    def __init__(self, t, phi, n_max):
        self.t = t
        self.phi = phi
        self.n_max = n_max
        super().__init__(f"no p <= {n_max} bounds |f_n(t) - f(t)| at t={t!r} for phi={phi}")


class UniformIntegrabilityError(HKError):
    def __init__(self, message, report):
        self.report = report
        super().__init__(message)


class MonotonicityError(HKError):
    def __init__(self, t, n):
        self.t = t
        self.n = n
        super().__init__(f"f_{n}(t) > f_{n + 1}(t) at t={t!r}")


class ConfigError(HKError, ValueError):
    pass
