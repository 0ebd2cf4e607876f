"""Exception types shared across the package."""


class IdsenseError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(IdsenseError):
    pass


class RowNotNormalized(IdsenseError):
    def __init__(self, x: int, s: int, total: float):
        self.x, self.s, self.total = x, s, total
        super().__init__(f"kernel row [x={x}][s={s}] sums to {total!r}, expected 1")


class NegativeProbability(IdsenseError):
    pass


class IndexOutOfRange(IdsenseError):
    pass


class LengthMismatch(IdsenseError):
    pass


class ZeroProbabilityObservation(IdsenseError):
    def __init__(self, x: int, y: int):
        self.x, self.y = x, y
        super().__init__(f"observation (x={x}, y={y}) has probability 0")


class NotADistribution(IdsenseError):
    pass


class ZeroCapacityChannel(IdsenseError):
    pass


class NoConvergence(IdsenseError):
    def __init__(self, max_iters: int, gap: float | None = None):
        self.max_iters, self.gap = max_iters, gap
        msg = f"no convergence after {max_iters} iterations"
        if gap is not None:
            msg += f" (remaining gap {gap:.3e})"
        super().__init__(msg)


class InfeasibleDistortion(IdsenseError):
    def __init__(self, budget: float, min_feasible: float | None = None):
        self.budget, self.min_feasible = budget, min_feasible
        msg = f"no feasible input at distortion budget {budget!r}"
        if min_feasible is not None:
            msg += f"; smallest feasible budget is {min_feasible!r}"
        super().__init__(msg)


class MissingRow(IdsenseError):
    pass


class TooLargeToEnumerate(IdsenseError):
    pass


class TooManyMessages(IdsenseError):
    pass


class DegenerateCode(IdsenseError):
    pass


class OutOfTime(IdsenseError):
    pass


class AlphabetTooLarge(IdsenseError):
    pass
