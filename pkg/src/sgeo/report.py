"""Result containers shared by all diagnostic routines."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

__all__ = ["CheckReport", "AsymptoticEstimate"]


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, int, float, str)) or x is None:
        return x
    return repr(x)


@dataclass
class CheckReport:
    """Outcome of one named diagnostic.

    verdict is one of 'pass', 'fail', 'inconclusive'; residuals and the
    tolerances they were compared against are kept side by side so a
    report is auditable without rerunning.
    """

    name: str
    verdict: str
    residuals: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.verdict == "pass"

    @classmethod
    def from_residuals(cls, name, residuals, tolerances, *, diagnostics=None,
                       reason=""):
        verdict = "pass"
        for key, tol in tolerances.items():
            if key in residuals and not (residuals[key] <= tol):
                verdict = "fail"
        return cls(name, verdict, dict(residuals), dict(tolerances),
                   diagnostics or {}, reason)

    def as_dict(self) -> dict:
        return _jsonable(asdict(self))


@dataclass
class AsymptoticEstimate:
    """A limiting value read off a finite window, with trend diagnostics.

    ``value`` is the estimate; ``window_values`` the samples it was fitted
    from; ``trend_slope`` how fast the estimate is still drifting (per
    doubling or per log-unit, stated by the producer); ``converged`` the
    producer's judgement that the drift is inside its tolerance.
    """

    value: float
    window_values: list = field(default_factory=list)
    trend_slope: float = 0.0
    converged: bool = True
    stderr: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return _jsonable(asdict(self))
