"""Exception types shared across the package."""


class AlgPhaseError(Exception):
    """Base class for all package errors."""


class MissingReflectionError(AlgPhaseError, KeyError):
    """An intensity needed by a computation is not in the available set."""

    def __init__(self, reflection, context=""):
        self.reflection = tuple(int(x) for x in reflection)
        msg = f"intensity for reflection {self.reflection} is not available"
        if context:
            msg += f" ({context})"
        super().__init__(msg)

    def __str__(self):
        return self.args[0]


class WindowExhaustedError(AlgPhaseError):
    """The basic-set scan needed a reflection outside S1 or the observed window.

    Raised when the observed set is not large enough to contain a basic set.
    """

    def __init__(self, reflection, accepted=(), zeros=()):
        self.reflection = tuple(reflection)
        self.accepted = tuple(accepted)
        self.zeros = tuple(zeros)
        super().__init__(
            f"scan needs reflection {self.reflection} which lies outside the "
            f"usable set after accepting {len(self.accepted)} reflections: "
            "S1 is not large enough to contain a basic set"
        )


class SingularBasisError(AlgPhaseError):
    """A Karle-Hauptman matrix expected to be nonsingular is numerically singular."""


class ReconstructionStall(AlgPhaseError):
    """Pattern extension could not fill every reflection of the window.

    ``partial`` holds everything computed so far and ``gaps`` the reflections
    that could not be reached.
    """

    def __init__(self, partial, gaps):
        self.partial = partial
        self.gaps = tuple(gaps)
        preview = ", ".join(str(g) for g in self.gaps[:8])
        more = "" if len(self.gaps) <= 8 else f", ... ({len(self.gaps)} total)"
        super().__init__(f"recursion stalled; unreachable reflections: {preview}{more}")


class InconsistentDataError(AlgPhaseError):
    """The data cannot be explained by a point-scatterer model at tolerance."""
