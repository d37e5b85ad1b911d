"""Exception hierarchy shared by all hexsphere modules."""


class HexSphereError(Exception):
    """Base class for every error raised by this package."""


class DegeneratePolygon(HexSphereError):
    pass


class InvalidParams(HexSphereError):
    pass


class ConstructionInconsistent(HexSphereError):
    """A constructed object failed its own self-check (an internal bug)."""


class NotSpecial(HexSphereError):
    pass


class NoValidGluing(HexSphereError):
    pass


class AmbiguousGluing(HexSphereError):
    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


class NotOnSurface(HexSphereError):
    pass


class BudgetExhausted(HexSphereError):
    def __init__(self, message, lower_bound=0.0):
        super().__init__(message)
        self.lower_bound = lower_bound


class OutOfY(HexSphereError):
    pass


class NoAnnulusFound(HexSphereError):
    pass


class WrongStratum(HexSphereError):
    pass


class DegenerateEmbedding(HexSphereError):
    def __init__(self, message, tetrahedron=None):
        super().__init__(message)
        self.tetrahedron = tetrahedron


class SolverDiverged(HexSphereError):
    pass


class VerificationFailed(HexSphereError):
    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved
