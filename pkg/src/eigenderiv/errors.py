"""Exception types raised by eigenderiv."""


class EigenderivError(Exception):
    """Base class for all errors raised by this package."""


class IndexOutOfRange(EigenderivError, IndexError):
    def __init__(self, index, dimension):
        self.index = index
        self.dimension = dimension
        super().__init__(f"index {index} outside 1..{dimension}")


class DegenerateGap(EigenderivError, ValueError):
    """Two eigenvalues are closer than the model's ``gap_min`` threshold."""

    def __init__(self, i, j, gap):
        self.i = i
        self.j = j
        self.gap = gap
        super().__init__(f"eigenvalues {i} and {j} are degenerate (|gap| = {gap:.3g})")


class InvalidExponent(EigenderivError, ValueError):
    pass


class DimensionMismatch(EigenderivError, ValueError):
    pass


class OracleFailure(EigenderivError, RuntimeError):
    """Base class for failures of the dense eigenpair oracle."""


class NewtonDivergence(OracleFailure):
    def __init__(self, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"Newton iteration did not converge after {iterations} iterations "
            f"(residual {residual:.3g})"
        )


class SingularBorderedSystem(OracleFailure):
    pass
