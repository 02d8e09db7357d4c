"""Exception and warning types raised across the package."""


class FastSCError(Exception):
    """Base class for all package errors."""


class DisconnectedGraph(FastSCError):
    def __init__(self, n_components, hint=""):
        self.n_components = n_components
        msg = f"graph has {n_components} connected components, expected 1"
        if hint:
            msg += f" ({hint})"
        super().__init__(msg)


class InvalidGraph(FastSCError):
    pass


class OrderExhausted(FastSCError):
    def __init__(self, ratio, delta, m_max, best_error):
        self.ratio = ratio
        self.delta = delta
        self.m_max = m_max
        self.best_error = best_error
        super().__init__(
            f"no order m <= {m_max} reaches error {delta} at ratio {ratio:.3g} "
            f"(best {best_error:.3g}); widen theta or raise delta"
        )


class DomainMismatch(FastSCError):
    pass


class InvalidEpsilon(FastSCError):
    pass


class EigensolverFailure(FastSCError):
    pass


class InvalidCovariance(FastSCError):
    pass


class NoConvergenceWarning(UserWarning):
    """Power iteration stopped at max_iter; the returned bound is inflated."""


class BisectionExhaustedWarning(UserWarning):
    """Eigenvalue bisection ended without landing on the requested count."""


class EmptyClusterWarning(UserWarning):
    pass


class DegenerateComparisonWarning(UserWarning):
    pass
