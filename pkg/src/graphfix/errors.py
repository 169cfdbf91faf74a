"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or out-of-range input: unknown labels, bad files, invalid parameters."""


class DomainError(ValueError):
    """Operation applied outside its mathematical domain (empty sets, alpha >= 1, ...)."""


class HypothesisViolation(RuntimeError):
    """A contraction/graph hypothesis failed at runtime.

    ``condition`` names the failed hypothesis: ``"i"`` (contraction
    inequality), ``"ii"`` (edge propagation), ``"edge"`` (graph membership
    along the orbit), or ``"range"`` (a selected point has no preimage).
    """

    def __init__(self, condition: str, step: int = -1, detail: str = ""):
        self.condition = condition
        self.step = step
        self.detail = detail
        msg = f"hypothesis ({condition}) violated at step {step}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
