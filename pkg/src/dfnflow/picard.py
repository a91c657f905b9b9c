"""Fixed-point iteration on the frozen law coefficient.

Each cycle assembles the mixed system with the coefficient evaluated at the
previous iterate's element-midpoint speed and solves it. One iteration means
one assemble-and-solve; the update norm is the relative Euclidean distance
between the stacked solution vectors of consecutive cycles. A configuration
whose active law branches are all speed-independent is linear, so a single
solve is exact and the loop short-circuits with a recorded zero update.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from .fem import RegimeField, Solution, assemble, solve_saddle
from .laws import AdaptiveLaw, ConstantLaw, Regime
from .meshing import Mesh
from .network import BoundarySpec, SourceSpec


@dataclass(frozen=True)
class PicardSettings:
    tolerance: float = 1e-4
    max_iterations: int = 50
    initial_speed: Union[float, Mapping[str, np.ndarray]] = 0.0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("need at least one iteration")


@dataclass
class PicardResult:
    solution: Solution
    iterations: int
    update_history: list[float] = field(default_factory=list)
    converged: bool = False


def _is_linear(regimes: RegimeField, law: AdaptiveLaw) -> bool:
    present = set()
    for labels in regimes.labels.values():
        present.update(int(v) for v in np.unique(labels))
    return all(
        isinstance(law.branch_for(Regime(r)), ConstantLaw) for r in present
    )


def picard_solve(
    mesh: Mesh,
    regimes: RegimeField,
    law: AdaptiveLaw,
    sources: SourceSpec,
    bcs: BoundarySpec,
    settings: PicardSettings | None = None,
) -> PicardResult:
    """Solve the fixed-configuration problem, iterating on the frozen speed.

    Returns after the relative update of the stacked flux/pressure vector
    drops to the tolerance or the iteration cap is hit; non-convergence is
    reported through ``converged``, not raised. Singular systems propagate.
    """
    settings = settings or PicardSettings()

    if _is_linear(regimes, law):
        system = assemble(mesh, regimes, law, settings.initial_speed, sources, bcs)
        solution = solve_saddle(system)
        return PicardResult(
            solution=solution, iterations=1, update_history=[0.0], converged=True
        )

    speeds = settings.initial_speed
    previous: np.ndarray | None = None
    history: list[float] = []
    solution: Solution | None = None
    iterations = 0
    converged = False
    for _ in range(settings.max_iterations):
        system = assemble(mesh, regimes, law, speeds, sources, bcs)
        solution = solve_saddle(system)
        iterations += 1
        current = solution.stacked()
        if previous is not None:
            scale = max(float(np.linalg.norm(current)), 1e-300)
            update = float(np.linalg.norm(current - previous)) / scale
            history.append(update)
            if update <= settings.tolerance:
                converged = True
                break
        previous = current
        speeds = solution.midpoint_speeds()
    return PicardResult(
        solution=solution,
        iterations=iterations,
        update_history=history,
        converged=converged,
    )
