"""Exception hierarchy shared by all modules."""


class MemdynError(Exception):
    """Base class for library errors."""


class InvalidInputError(MemdynError, ValueError):
    """Input violates a documented precondition."""


class NotCompletelyPositiveError(MemdynError):
    """A Kraus decomposition was requested for a map that is not CP."""

    def __init__(self, min_choi_eig: float):
        self.min_choi_eig = float(min_choi_eig)
        super().__init__(f"map is not completely positive (min Choi eigenvalue {self.min_choi_eig:.3e})")


class NonInvertibleError(MemdynError):
    """A dynamical map is singular or too ill-conditioned to invert."""

    def __init__(self, cond: float, index: int | None = None):
        self.cond = float(cond)
        self.index = index
        where = "" if index is None else f" at grid index {index}"
        super().__init__(f"map not invertible{where} (condition number {self.cond:.3e})")


class ContourError(MemdynError):
    """A singularity lies on or outside the inverse-Laplace contour."""

    def __init__(self, pole: complex, t: float):
        self.pole = complex(pole)
        self.t = float(t)
        super().__init__(
            f"pole near {self.pole.real:.6g}{self.pole.imag:+.6g}j is not enclosed by the "
            f"Talbot contour at t={self.t:.6g}; increase the node count or shorten t"
        )


class UnsupportedEmbeddingError(MemdynError):
    """The classical model has no single-waiting-time quantum counterpart."""
