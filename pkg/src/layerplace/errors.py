"""Exception hierarchy shared by every module of the package."""


class PlacementError(Exception):
    """Base class for all errors raised by layerplace."""


class ProfileError(PlacementError, ValueError):
    """A reach-probability profile is not a valid gate profile."""


class ValidationError(PlacementError, ValueError):
    """A problem (or placement) failed validation.

    ``errors`` holds every violation found, not just the first one.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors) if self.errors else "invalid input")


class UnknownFixture(PlacementError, KeyError):
    def __str__(self):
        return f"unknown fixture: {self.args[0]!r}"


class UnknownProfile(PlacementError, KeyError):
    def __str__(self):
        return f"unknown transmission profile: {self.args[0]!r}"


class DisconnectedTopology(PlacementError):
    def __init__(self, pairs):
        self.pairs = list(pairs)
        shown = ", ".join(f"{a}-{b}" for a, b in self.pairs[:10])
        more = "" if len(self.pairs) <= 10 else f" (+{len(self.pairs) - 10} more)"
        super().__init__(f"topology is disconnected; unreachable pairs: {shown}{more}")


class UnreachableHop(PlacementError):
    pass


class MissingDeviceClass(PlacementError, KeyError):
    def __str__(self):
        return f"unit {self.args[0]!r} has no device class"


class Infeasible(PlacementError):
    """No assignment satisfies the placement constraints."""


class NoPlacementFound(Infeasible):
    """A heuristic could not build a placement; this is not a proof of infeasibility."""


class BudgetExceeded(PlacementError):
    pass


class IncompleteAssignment(PlacementError, KeyError):
    pass


class GenerationExhausted(PlacementError):
    pass


class UnsupportedFormat(PlacementError, ValueError):
    pass
