from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from msplace.evaluator import Violation, system_average_time
from msplace.model import DeploymentScheme, scheme_to_dict


@dataclass(frozen=True)
class SolverResult:
    """A deployment scheme with its objective value and the solver's running time.

    For the Random baseline `t_system` is the mean over feasible trials while
    `scheme` is the best trial; `details` holds the spread.
    """

    scheme: DeploymentScheme
    t_system: float
    wall_time_ms: float
    algorithm: str
    feasible: bool
    violations: tuple[Violation, ...] = ()
    details: dict[str, Any] = field(default_factory=dict)

    @property
    def instances(self) -> int:
        return sum(sum(row) for row in self.scheme.x)

    def to_dict(self) -> dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "feasible": self.feasible,
            "t_system_ms": self.t_system,
            "wall_time_ms": self.wall_time_ms,
            "instances": self.instances,
            "scheme": scheme_to_dict(self.scheme),
            "violations": [v.to_dict() for v in self.violations],
            "details": self.details,
        }


def finish(ctx, X: np.ndarray, algorithm: str, wall_ms: float, details: dict[str, Any] | None = None) -> SolverResult:
    """Evaluate a finished working matrix and wrap it as a SolverResult."""
    scenario = ctx.scenario
    scheme = DeploymentScheme.from_array(X, scenario.server_ids, scenario.service_ids)
    report = system_average_time(X, scenario, ctx.chains, summary=ctx.summary)
    return SolverResult(scheme, report.t_system, wall_ms, algorithm, report.constraints_ok,
                        report.violations, dict(details or {}))
