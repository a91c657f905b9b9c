"""Fracture-network geometry and problem data.

A network is a collection of straight 1D branches embedded in the plane.
Branches meet only endpoint-to-endpoint at named intersections; a crossing in
the middle of a fracture must be represented by splitting the fracture into
two branches beforehand. Every branch end that is not part of an intersection
is a boundary end and must carry exactly one boundary condition.

All PDE data live in arc-length coordinates along each branch; the ambient
coordinates are used for geometry validation, presets and export only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

import numpy as np

COINCIDENCE_TOL = 1e-12

START = "start"
END = "end"

#: A branch end is addressed by (branch id, "start" | "end").
BranchEnd = tuple[str, str]


@dataclass(frozen=True)
class Branch:
    """Straight fracture branch between two distinct points in the plane."""

    id: str
    start: tuple[float, float]
    end: tuple[float, float]

    @property
    def length(self) -> float:
        return math.hypot(self.end[0] - self.start[0], self.end[1] - self.start[1])

    @property
    def tangent(self) -> tuple[float, float]:
        """Unit vector from start to end; the direction of increasing arc."""
        length = self.length
        if length <= COINCIDENCE_TOL:
            raise ValueError(f"branch {self.id!r} has zero length")
        return (
            (self.end[0] - self.start[0]) / length,
            (self.end[1] - self.start[1]) / length,
        )

    def endpoint(self, which: str) -> tuple[float, float]:
        if which == START:
            return self.start
        if which == END:
            return self.end
        raise ValueError(f"unknown branch end {which!r}")

    def point_at(self, arc: float) -> tuple[float, float]:
        tx, ty = self.tangent
        return (self.start[0] + arc * tx, self.start[1] + arc * ty)


@dataclass(frozen=True)
class Intersection:
    """Junction where two or more branch ends meet at a single point."""

    id: str
    point: tuple[float, float]
    incident: tuple[BranchEnd, ...]


@dataclass(frozen=True)
class VelocityBC:
    """Prescribed signed outward flux u·n at a boundary end."""

    outflux: float


@dataclass(frozen=True)
class PressureBC:
    """Prescribed pressure at a boundary end."""

    pressure: float


BoundaryCondition = Union[VelocityBC, PressureBC]


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary conditions per free branch end plus the optional pressure mean.

    When no pressure condition is present anywhere the pressure field is
    determined only up to a constant and ``mean_pressure`` fixes its average
    over the network.
    """

    conditions: Mapping[BranchEnd, BoundaryCondition] = field(default_factory=dict)
    mean_pressure: float | None = None

    def condition_at(self, branch_id: str, which: str) -> BoundaryCondition | None:
        return self.conditions.get((branch_id, which))

    @property
    def has_pressure_bc(self) -> bool:
        return any(isinstance(c, PressureBC) for c in self.conditions.values())


#: A source piece is either a constant rate or a callable of arc coordinate.
ScalarPiece = Union[float, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class PiecewiseSource:
    """Piecewise scalar source along one branch.

    ``breakpoints`` are strictly increasing arc coordinates in the open
    interval (0, L); ``pieces`` has one entry more than ``breakpoints`` and
    gives the rate on each subinterval, as a constant or a callable evaluated
    pointwise on arc coordinates.
    """

    breakpoints: tuple[float, ...] = ()
    pieces: tuple[ScalarPiece, ...] = (0.0,)

    def __post_init__(self):
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise ValueError("need exactly one more piece than breakpoints")
        if any(b >= a for a, b in zip(self.breakpoints[1:], self.breakpoints)):
            raise ValueError("breakpoints must be strictly increasing")

    def piece_at(self, arc: float) -> ScalarPiece:
        """Piece owning the given arc; breakpoints belong to the left piece.

        Point values exactly at a breakpoint never enter element integrals,
        since breakpoints are forced to be mesh nodes.
        """
        idx = int(np.searchsorted(np.asarray(self.breakpoints), arc, side="left"))
        return self.pieces[idx]

    def __call__(self, arc: np.ndarray) -> np.ndarray:
        arc = np.asarray(arc, dtype=float)
        out = np.empty_like(arc)
        which = np.searchsorted(np.asarray(self.breakpoints), arc, side="left")
        for k, piece in enumerate(self.pieces):
            mask = which == k
            if not mask.any():
                continue
            if callable(piece):
                out[mask] = piece(arc[mask])
            else:
                out[mask] = piece
        return out


ZERO_SOURCE = PiecewiseSource()


@dataclass(frozen=True)
class SourceSpec:
    """Scalar mass source per branch and a constant ambient body force.

    The force vector is projected onto each branch tangent when a mesh is
    built; only the tangential component acts on a 1D branch.
    """

    scalar: Mapping[str, PiecewiseSource] = field(default_factory=dict)
    force: tuple[float, float] = (0.0, 0.0)

    def scalar_for(self, branch_id: str) -> PiecewiseSource:
        return self.scalar.get(branch_id, ZERO_SOURCE)


@dataclass(frozen=True)
class FractureNetwork:
    """A 1D fracture network with boundary conditions and sources."""

    branches: tuple[Branch, ...]
    intersections: tuple[Intersection, ...] = ()
    boundary: BoundarySpec = field(default_factory=BoundarySpec)
    sources: SourceSpec = field(default_factory=SourceSpec)

    def branch(self, branch_id: str) -> Branch:
        for b in self.branches:
            if b.id == branch_id:
                return b
        raise KeyError(branch_id)

    @property
    def branch_ids(self) -> tuple[str, ...]:
        return tuple(b.id for b in self.branches)

    @property
    def junction_ends(self) -> frozenset[BranchEnd]:
        return frozenset(e for isec in self.intersections for e in isec.incident)

    @property
    def total_length(self) -> float:
        return sum(b.length for b in self.branches)

    def free_ends(self) -> list[BranchEnd]:
        """Branch ends not attached to any intersection."""
        junctions = self.junction_ends
        return [
            (b.id, which)
            for b in self.branches
            for which in (START, END)
            if (b.id, which) not in junctions
        ]


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, code: str, message: str) -> None:
        self.violations.append(Violation(code, message))

    def __str__(self) -> str:
        if self.ok:
            return "network is well-formed"
        return "\n".join(f"[{v.code}] {v.message}" for v in self.violations)


def validate_network(network: FractureNetwork) -> ValidationReport:
    """Collect every structural violation of the network invariants.

    The report is empty exactly when the network is well-formed: positive
    branch lengths, coincident intersection points, each free end carrying one
    boundary condition, and a determined pressure level.
    """
    report = ValidationReport()

    ids = [b.id for b in network.branches]
    for dup in {i for i in ids if ids.count(i) > 1}:
        report.add("duplicate-branch", f"branch id {dup!r} appears more than once")

    for b in network.branches:
        if b.length <= COINCIDENCE_TOL:
            report.add("zero-length", f"branch {b.id!r} has zero length")

    known = set(ids)
    end_use: dict[BranchEnd, int] = {}
    for isec in network.intersections:
        if len(isec.incident) < 2:
            report.add(
                "lonely-intersection",
                f"intersection {isec.id!r} has fewer than 2 incident branch ends",
            )
        for bid, which in isec.incident:
            end_use[(bid, which)] = end_use.get((bid, which), 0) + 1
            if bid not in known:
                report.add(
                    "unknown-branch",
                    f"intersection {isec.id!r} references unknown branch {bid!r}",
                )
                continue
            point = network.branch(bid).endpoint(which)
            dist = math.hypot(point[0] - isec.point[0], point[1] - isec.point[1])
            if dist > COINCIDENCE_TOL:
                report.add(
                    "non-coincident",
                    f"end ({bid!r}, {which}) lies {dist:.3e} away from "
                    f"intersection {isec.id!r}",
                )
    for end, count in end_use.items():
        if count > 1:
            report.add(
                "multiple-intersections",
                f"branch end {end} belongs to {count} intersections",
            )

    junctions = network.junction_ends
    for b in network.branches:
        for which in (START, END):
            end = (b.id, which)
            bc = network.boundary.condition_at(*end)
            if end in junctions:
                if bc is not None:
                    report.add(
                        "bc-at-junction",
                        f"branch end {end} is at an intersection but carries a "
                        "boundary condition",
                    )
            elif bc is None:
                report.add(
                    "unclosed-boundary",
                    f"branch end {end} has neither an intersection nor a "
                    "boundary condition",
                )
    for end in network.boundary.conditions:
        bid, which = end
        if bid not in known or which not in (START, END):
            report.add("unknown-end", f"boundary condition on unknown end {end}")

    if not network.boundary.has_pressure_bc and network.boundary.mean_pressure is None:
        report.add(
            "pressure-level",
            "no pressure boundary condition anywhere and mean pressure unset: "
            "pressure level undetermined",
        )

    for bid, src in network.sources.scalar.items():
        if bid not in known:
            report.add("unknown-branch", f"source attached to unknown branch {bid!r}")
            continue
        length = network.branch(bid).length
        for bp in src.breakpoints:
            if not (0.0 < bp < length):
                report.add(
                    "breakpoint-range",
                    f"source breakpoint {bp} on branch {bid!r} outside (0, {length})",
                )

    return report
