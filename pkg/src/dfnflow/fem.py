"""Lowest-order mixed finite elements on a meshed fracture network.

The flux is node-continuous and piecewise linear per branch (the 1D trace of
the lowest-order Raviart-Thomas space), the pressure is constant per element.
Junction coupling shares a single pressure unknown per intersection whose row
is the junction mass balance; when no pressure condition exists anywhere, one
Lagrange multiplier row pins the mean pressure. The assembled system is
symmetric indefinite and solved by a direct sparse factorization.

The law coefficient is frozen per element at a caller-supplied speed, which is
what the fixed-point linearization of the nonlinear problem requires.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .laws import AdaptiveLaw, Regime, eval_lambda_coefficient
from .meshing import Mesh
from .network import (
    END,
    START,
    BoundarySpec,
    Branch,
    PressureBC,
    SourceSpec,
    VelocityBC,
)

_GAUSS5 = np.polynomial.legendre.leggauss(5)

RESIDUAL_TOL = 1e-10


class SingularSystemError(RuntimeError):
    """Raised when the saddle system is singular or numerically unsolvable."""


@dataclass(frozen=True)
class RegimeField:
    """Low/high regime label for every element of a mesh."""

    labels: Mapping[str, np.ndarray]

    @staticmethod
    def uniform(mesh: Mesh, regime: Regime) -> "RegimeField":
        return RegimeField(
            {
                b: np.full(mesh.element_count(b), int(regime), dtype=np.int8)
                for b in mesh.branch_ids
            }
        )

    def check_against(self, mesh: Mesh) -> None:
        for b in mesh.branch_ids:
            if b not in self.labels or len(self.labels[b]) != mesh.element_count(b):
                raise ValueError(f"regime labels do not match the mesh on branch {b!r}")


def source_integrals(mesh: Mesh, sources: SourceSpec, branch_id: str) -> np.ndarray:
    """Integral of the scalar source over each element of a branch.

    Constant pieces integrate exactly; callable pieces use a 5-point Gauss
    rule per element. Breakpoints are mesh nodes by construction, so every
    element lies inside a single piece.
    """
    x = mesh.nodes[branch_id]
    src = sources.scalar_for(branch_id)
    out = np.empty(len(x) - 1)
    for e in range(len(x) - 1):
        a, b = x[e], x[e + 1]
        piece = src.piece_at(0.5 * (a + b))
        if callable(piece):
            pts, wts = _GAUSS5
            xs = 0.5 * (b - a) * pts + 0.5 * (a + b)
            out[e] = 0.5 * (b - a) * float(np.dot(wts, piece(xs)))
        else:
            out[e] = piece * (b - a)
    return out


def lift_pressure_data(bcs: BoundarySpec, branch: Branch) -> float:
    """Tangential gradient of the linear extension of pressure boundary data.

    With pressure data at both ends the extension interpolates linearly and
    the gradient is the end-to-end difference over the length; with data at
    one end the constant extension has zero gradient (the constant itself is
    absorbed into the pressure level). The energy oracle subtracts this
    gradient from the body force so that its stationary points coincide with
    the mixed solves, which impose the same data as natural boundary terms.
    """
    p_start = bcs.condition_at(branch.id, START)
    p_end = bcs.condition_at(branch.id, END)
    if isinstance(p_start, PressureBC) and isinstance(p_end, PressureBC):
        return (p_end.pressure - p_start.pressure) / branch.length
    return 0.0


@dataclass
class SaddleSystem:
    """Assembled saddle-point system with its unknown layout."""

    matrix: sps.csr_matrix
    rhs: np.ndarray
    mesh: Mesh
    flux_index: dict[tuple[str, int], int]
    pressure_index: dict[tuple[str, int], int]
    junction_index: dict[str, int]
    mean_index: int | None
    fixed_flux: dict[tuple[str, int], float]
    mean_pressure: float | None

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass
class Solution:
    """Discrete flux/pressure pair on a mesh.

    ``flux[b][i]`` is the signed flux along the tangent of branch ``b`` at its
    node ``i``; ``pressure[b][e]`` the constant pressure of element ``e``.
    Junction pressures carry one value per intersection.
    """

    mesh: Mesh
    flux: dict[str, np.ndarray]
    pressure: dict[str, np.ndarray]
    junction_pressure: dict[str, float]
    residual: float
    multiplier: float | None = None
    raw_vector: np.ndarray | None = field(default=None, repr=False, compare=False)
    junction_implied: dict[str, list[float]] = field(default_factory=dict, repr=False)

    def junction_continuity_defect(self) -> float:
        """Largest spread among the per-branch implied junction pressures."""
        spreads = [max(v) - min(v) for v in self.junction_implied.values() if v]
        return max(spreads, default=0.0)

    def midpoint_speeds(self) -> dict[str, np.ndarray]:
        return {
            b: np.abs(0.5 * (u[:-1] + u[1:])) for b, u in self.flux.items()
        }

    def stacked(self) -> np.ndarray:
        parts = [self.flux[b] for b in self.mesh.branch_ids]
        parts += [self.pressure[b] for b in self.mesh.branch_ids]
        parts += [
            np.array([self.junction_pressure[i.id]])
            for i in self.mesh.network.intersections
        ]
        return np.concatenate(parts) if parts else np.zeros(0)


def _fixed_flux_values(mesh: Mesh, bcs: BoundarySpec) -> dict[tuple[str, int], float]:
    fixed = {}
    for bid in mesh.branch_ids:
        last = len(mesh.nodes[bid]) - 1
        for which, idx, n_out in ((START, 0, -1.0), (END, last, 1.0)):
            bc = bcs.condition_at(bid, which)
            if isinstance(bc, VelocityBC):
                fixed[(bid, idx)] = bc.outflux * n_out
    return fixed


FrozenSpeed = Union[float, Mapping[str, np.ndarray]]


def _speeds_for(mesh: Mesh, frozen_speed: FrozenSpeed, branch_id: str) -> np.ndarray:
    n = mesh.element_count(branch_id)
    if isinstance(frozen_speed, Mapping):
        s = np.asarray(frozen_speed[branch_id], dtype=float)
        if len(s) != n:
            raise ValueError(f"frozen speeds do not match elements on {branch_id!r}")
        return s
    return np.full(n, float(frozen_speed))


def assemble(
    mesh: Mesh,
    regimes: RegimeField,
    law: AdaptiveLaw,
    frozen_speed: FrozenSpeed,
    sources: SourceSpec,
    bcs: BoundarySpec,
) -> SaddleSystem:
    """Assemble the mixed system for a fixed configuration and frozen speeds.

    Velocity conditions are eliminated strongly from the flux unknowns;
    pressure conditions enter the flux equations as natural boundary terms.
    The flux-mass block integrates coefficient times the linear basis pair
    exactly, with the coefficient constant per element at the frozen speed.
    """
    regimes.check_against(mesh)
    net = mesh.network

    if not bcs.has_pressure_bc and bcs.mean_pressure is None:
        raise SingularSystemError(
            "no pressure anchor: the problem has no pressure boundary condition "
            "and no mean-pressure constraint"
        )

    fixed = _fixed_flux_values(mesh, bcs)
    flux_index: dict[tuple[str, int], int] = {}
    pressure_index: dict[tuple[str, int], int] = {}
    n = 0
    for bid in mesh.branch_ids:
        for i in range(len(mesh.nodes[bid])):
            if (bid, i) not in fixed:
                flux_index[(bid, i)] = n
                n += 1
    for bid in mesh.branch_ids:
        for e in range(mesh.element_count(bid)):
            pressure_index[(bid, e)] = n
            n += 1
    junction_index = {isec.id: n + k for k, isec in enumerate(net.intersections)}
    n += len(net.intersections)
    mean_index = None
    if not bcs.has_pressure_bc:
        mean_index = n
        n += 1

    rows: list[int] = []
    cols: list[int] = []
    data: list[float] = []
    rhs = np.zeros(n)

    def add(r: int, c: int, v: float) -> None:
        rows.append(r)
        cols.append(c)
        data.append(v)

    for bid in mesh.branch_ids:
        x = mesh.nodes[bid]
        h = np.diff(x)
        labels = regimes.labels[bid]
        speeds = _speeds_for(mesh, frozen_speed, bid)
        qint = source_integrals(mesh, sources, bid)
        f_t = mesh.tangential_force[bid]

        for e in range(len(h)):
            coeff = eval_lambda_coefficient(law, float(speeds[e]), Regime(labels[e]))
            if coeff <= 0.0:
                raise SingularSystemError(
                    f"degenerate law coefficient {coeff} on element {e} of "
                    f"branch {bid!r}"
                )
            m = coeff * h[e] / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
            pair = (e, e + 1)
            for a_loc, i in enumerate(pair):
                ri = flux_index.get((bid, i))
                if ri is not None:
                    rhs[ri] += f_t * h[e] / 2.0
                for b_loc, j in enumerate(pair):
                    if ri is None:
                        continue
                    rj = flux_index.get((bid, j))
                    if rj is None:
                        rhs[ri] -= m[a_loc, b_loc] * fixed[(bid, j)]
                    else:
                        add(ri, rj, m[a_loc, b_loc])

            pe = pressure_index[(bid, e)]
            for i, sgn in ((e, 1.0), (e + 1, -1.0)):
                ri = flux_index.get((bid, i))
                if ri is None:
                    rhs[pe] -= sgn * fixed[(bid, i)]
                else:
                    add(ri, pe, sgn)
                    add(pe, ri, sgn)
            rhs[pe] += -qint[e]
            if mean_index is not None:
                add(pe, mean_index, h[e])
                add(mean_index, pe, h[e])

        last = len(x) - 1
        for which, i, n_out in ((START, 0, -1.0), (END, last, 1.0)):
            bc = bcs.condition_at(bid, which)
            if isinstance(bc, PressureBC):
                rhs[flux_index[(bid, i)]] -= bc.pressure * n_out

    for isec in net.intersections:
        jr = junction_index[isec.id]
        for bid, which in isec.incident:
            i = 0 if which == START else len(mesh.nodes[bid]) - 1
            n_out = -1.0 if which == START else 1.0
            ri = flux_index.get((bid, i))
            if ri is None:
                raise SingularSystemError(
                    f"branch end ({bid!r}, {which}) is both at an intersection "
                    "and velocity-constrained"
                )
            add(ri, jr, n_out)
            add(jr, ri, n_out)

    matrix = sps.csr_matrix(sps.coo_matrix((data, (rows, cols)), shape=(n, n)))
    return SaddleSystem(
        matrix=matrix,
        rhs=rhs,
        mesh=mesh,
        flux_index=flux_index,
        pressure_index=pressure_index,
        junction_index=junction_index,
        mean_index=mean_index,
        fixed_flux=fixed,
        mean_pressure=bcs.mean_pressure,
    )


def solve_saddle(system: SaddleSystem) -> Solution:
    """Direct solve of the assembled system with a residual check.

    Raises ``SingularSystemError`` when the factorization fails or the
    relative residual exceeds 1e-10; in that case a condition estimate is
    attached to the message to point at the constraint deficiency. When the
    mean-pressure constraint is active, the reported pressures are shifted so
    their length-weighted mean equals the prescribed value.
    """
    A, b = system.matrix, system.rhs
    if A.shape[0] == 0:
        raise SingularSystemError("empty system")
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            x = spla.spsolve(A.tocsc(), b)
        except (spla.MatrixRankWarning, RuntimeError) as exc:
            raise SingularSystemError(_diagnose(system, str(exc))) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError(_diagnose(system, "non-finite solution"))
    scale = max(float(np.abs(b).max()), 1e-30)
    residual = float(np.abs(A @ x - b).max()) / scale
    if residual > RESIDUAL_TOL:
        raise SingularSystemError(
            _diagnose(system, f"relative residual {residual:.3e} exceeds {RESIDUAL_TOL}")
        )

    mesh = system.mesh
    flux = {bid: np.empty(len(mesh.nodes[bid])) for bid in mesh.branch_ids}
    for (bid, i), k in system.flux_index.items():
        flux[bid][i] = x[k]
    for (bid, i), v in system.fixed_flux.items():
        flux[bid][i] = v
    pressure = {bid: np.empty(mesh.element_count(bid)) for bid in mesh.branch_ids}
    for (bid, e), k in system.pressure_index.items():
        pressure[bid][e] = x[k]
    junction_pressure = {iid: float(x[k]) for iid, k in system.junction_index.items()}

    multiplier = None
    if system.mean_index is not None:
        multiplier = float(x[system.mean_index])
        total = mesh.network.total_length
        weighted = sum(
            float(np.dot(pressure[bid], mesh.element_lengths(bid)))
            for bid in mesh.branch_ids
        )
        shift = system.mean_pressure - weighted / total
        for bid in mesh.branch_ids:
            pressure[bid] += shift
        for iid in junction_pressure:
            junction_pressure[iid] += shift

    solution = Solution(
        mesh=mesh,
        flux=flux,
        pressure=pressure,
        junction_pressure=junction_pressure,
        residual=residual,
        multiplier=multiplier,
        raw_vector=x,
    )
    if system.junction_index:
        solution.junction_implied = implied_junction_pressures(system, solution)
    return solution


def _diagnose(system: SaddleSystem, reason: str) -> str:
    hints = []
    if system.size <= 2000:
        cond = float(np.linalg.cond(system.matrix.toarray()))
        hints.append(f"condition estimate {cond:.3e}")
        if cond > 1e14:
            hints.append(
                "matrix numerically singular; check that the pressure level is "
                "anchored by a pressure condition or the mean constraint"
            )
    msg = f"saddle solve failed: {reason}"
    if hints:
        msg += " (" + "; ".join(hints) + ")"
    return msg


def implied_junction_pressures(
    system: SaddleSystem, solution: Solution
) -> dict[str, list[float]]:
    """Junction pressure implied by each incident branch's flux equation.

    For every intersection, the flux equation of the incident branch at its
    junction node can be solved for the pressure that branch "sees" there.
    All implied values agree with the shared junction unknown when the
    coupling is assembled consistently; their spread is a direct residual of
    discrete pressure continuity. Values are reported in the same (possibly
    mean-shifted) units as ``solution.junction_pressure``.
    """
    mesh = system.mesh
    x = solution.raw_vector
    if x is None:
        raise ValueError("solution does not carry its raw solve vector")
    A, b = system.matrix, system.rhs
    out: dict[str, list[float]] = {}
    for isec in mesh.network.intersections:
        jc = system.junction_index[isec.id]
        shift = solution.junction_pressure[isec.id] - x[jc]
        implied = []
        for bid, which in isec.incident:
            i = 0 if which == START else len(mesh.nodes[bid]) - 1
            ri = system.flux_index[(bid, i)]
            n_out = -1.0 if which == START else 1.0
            row = A.getrow(ri)
            partial = float((row @ x)[0]) - float(row[0, jc]) * x[jc]
            implied.append((b[ri] - partial) / n_out + shift)
        out[isec.id] = implied
    return out
