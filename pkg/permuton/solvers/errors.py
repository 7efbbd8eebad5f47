"""
Permuton Errors - typed failures raised by the solver modules
"""
from typing import Optional


class PermutonError(Exception):
    """Base class for every solver failure"""


class InvalidRegion(PermutonError, ValueError):
    """Region data fails the basic ordering or shape checks"""


class Degenerate(PermutonError, ValueError):
    """No mass array is strictly positive on the whole support"""


class NotConverged(PermutonError, RuntimeError):
    """Iteration budget exhausted before the residual target was met"""

    def __init__(self, max_iter: int, residual: float):
        self.max_iter = max_iter
        self.residual = residual
        super().__init__(
            f"IPF did not converge in {max_iter} iterations (residual {residual:.3e}); "
            f"the region is likely degenerate"
        )


class NonPositiveDenominator(PermutonError, ValueError):
    """A row of I meets only zero-mass columns"""


class NotSimple(PermutonError, ValueError):
    """Array cannot be reduced to 1x1 by the simple-array rules"""


class RZero(PermutonError, ValueError):
    """Exact solvers need r != 0; the r = 0 case belongs to ipf"""


class StepBlowup(PermutonError, RuntimeError):
    """Continuation hit a pole or Newton diverged"""

    def __init__(self, last_r: float, message: str):
        self.last_r = last_r
        super().__init__(f"{message} (last good r = {last_r:.6g})")


class ContinuationCancelled(PermutonError, RuntimeError):
    """Caller asked a running continuation to stop"""

    def __init__(self, last_r: float):
        self.last_r = last_r
        super().__init__(f"continuation cancelled at r = {last_r:.6g}")


class AmbiguousBranch(PermutonError, RuntimeError):
    """Both or neither quadratic root gives positive masses"""


class PoleOnRectangle(PermutonError, RuntimeError):
    """Density denominator vanishes on a closed rectangle"""

    def __init__(self, u: int, v: int, detail: Optional[str] = None):
        self.u = u
        self.v = v
        text = f"density has a pole on rectangle ({u}, {v})"
        if detail:
            text += f": {detail}"
        super().__init__(text)


class NegativeDensity(PoleOnRectangle):
    """Closed form is negative on a support rectangle (wrong branch)"""


class OutOfRectangle(PermutonError, ValueError):
    """Requested sub-rectangle leaves its cell"""


class Infeasible(PermutonError, ValueError):
    """Discrete region admits no restricted permutation"""
