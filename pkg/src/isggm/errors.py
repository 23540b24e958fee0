"""Exception hierarchy shared by the estimation and testing pipeline."""


class IsggmError(Exception):
    """Base class for all package errors."""

    exit_code = 4


class DataError(IsggmError, ValueError):
    """Malformed or unusable input data (parse errors, zero variance, ...)."""

    exit_code = 3


class ConstructionError(IsggmError, ValueError):
    """A synthetic precision path cannot be built with the requested sizes."""

    exit_code = 2


class NoSupport(IsggmError):
    """No observation receives positive kernel weight at a query time."""

    def __init__(self, z, h, detail=""):
        self.z = float(z)
        self.h = float(h)
        msg = f"no kernel support at z={self.z:.6g} with bandwidth h={self.h:.6g}"
        if detail:
            msg = f"{msg} ({detail})"
        super().__init__(msg)


class Infeasible(IsggmError):
    def __init__(self, j, lam, detail=""):
        self.j = j
        self.lam = lam
        super().__init__(f"CLIME column {j} infeasible at lambda={lam:.6g} {detail}".rstrip())


class SolverStall(IsggmError):
    def __init__(self, iterations, residual, detail=""):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"simplex stalled after {iterations} iterations (residual {residual:.3g}) {detail}".rstrip()
        )


class ColumnErrors(IsggmError):
    """Aggregated per-column failures from a full CLIME solve."""

    def __init__(self, failures):
        self.failures = dict(failures)
        cols = ", ".join(f"{j}: {err}" for j, err in sorted(self.failures.items()))
        super().__init__(f"CLIME failed on {len(self.failures)} column(s): {cols}")


class DegenerateDenominator(IsggmError):
    def __init__(self, z, j, value):
        self.z = z
        self.j = j
        self.value = value
        super().__init__(
            f"de-biasing denominator {value:.3g} below guard at z={z}, column {j}"
        )


class EmptySelector(IsggmError):
    pass


class OracleScale(IsggmError, ValueError):
    pass


class StallError(IsggmError):
    pass
