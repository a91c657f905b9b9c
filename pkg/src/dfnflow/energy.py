"""Energy functional of the flow problem and a brute-force scalar minimizer.

On a single branch with pressure data at both ends, the divergence-free
velocity fields are exactly the constants, so the energy restricted to them
is a scalar function E(alpha) of the constant alpha added to a lifted field
carrying the source and boundary-flux data. Its minimizer is an independent
oracle for the mixed finite element solution: the solver's velocity minus the
lifted field must be the constant that minimizes E. With any velocity
condition present the divergence-free space collapses to zero and the lifted
field itself is the unique candidate.

The dissipation integrand is the piecewise potential composed with the
squared speed; it is smooth except where the speed crosses the regime
threshold, so elements are pre-split at those crossings (and at sign changes
of the flux) before applying a 3-point Gauss rule, which is then exact for
the supported law kinds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .fem import Solution, lift_pressure_data, source_integrals
from .laws import PsiPotential
from .meshing import Mesh
from .network import END, START, VelocityBC

_GAUSS3 = np.polynomial.legendre.leggauss(3)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _single_branch(mesh: Mesh) -> str:
    ids = mesh.branch_ids
    if len(ids) != 1:
        raise ValueError(
            "energy reduction is implemented for single-branch problems only; "
            f"this network has {len(ids)} branches"
        )
    return ids[0]


@dataclass(frozen=True)
class LiftedField:
    """Piecewise-linear flux carrying the source and boundary-flux data.

    Node values satisfy value[i+1] - value[i] = integral of the source over
    element i. With pressure data at both ends the representative is anchored
    at zero inflow, value(0) = 0, so value(x) is the cumulative source
    integral; a velocity condition anchors the field to its prescribed end
    flux instead. The remaining constant ambiguity is carried by the scalar
    reduction, not by this field.
    """

    branch_id: str
    nodes: np.ndarray
    values: np.ndarray

    def at(self, arc) -> np.ndarray:
        return np.interp(np.asarray(arc, dtype=float), self.nodes, self.values)


def lift_field(mesh: Mesh) -> LiftedField:
    """Lifted flux field of a single-branch problem."""
    bid = _single_branch(mesh)
    network = mesh.network
    qint = source_integrals(mesh, network.sources, bid)
    cumulative = np.concatenate([[0.0], np.cumsum(qint)])

    anchor = 0.0
    bc_start = network.boundary.condition_at(bid, START)
    bc_end = network.boundary.condition_at(bid, END)
    if isinstance(bc_start, VelocityBC):
        anchor = -bc_start.outflux
    elif isinstance(bc_end, VelocityBC):
        anchor = bc_end.outflux - cumulative[-1]
    return LiftedField(
        branch_id=bid, nodes=np.array(mesh.nodes[bid]), values=anchor + cumulative
    )


def tangential_forcing(mesh: Mesh) -> float:
    """Constant forcing of the reduced problem on a single branch.

    The tangential body force minus the gradient of the linear extension of
    the pressure boundary data; pressure data therefore enters the energy the
    same way the mixed solver sees it through its natural boundary terms.
    """
    bid = _single_branch(mesh)
    branch = mesh.network.branch(bid)
    return mesh.tangential_force[bid] - lift_pressure_data(
        mesh.network.boundary, branch
    )


FieldLike = Union[np.ndarray, Sequence[float], LiftedField, Solution]


def _nodal_values(field: FieldLike, mesh: Mesh, bid: str) -> np.ndarray:
    if isinstance(field, Solution):
        values = field.flux[bid]
    elif isinstance(field, LiftedField):
        values = field.values
    else:
        values = np.asarray(field, dtype=float)
    if len(values) != len(mesh.nodes[bid]):
        raise ValueError("field values do not match the mesh nodes")
    return np.asarray(values, dtype=float)


@dataclass(frozen=True)
class EnergyReport:
    """Dissipation and energy of a flux field, E = D - <f0, field>."""

    dissipation: float
    load: float
    energy: float
    forcing: float
    quadrature: str = "gauss3-kink-split"


def _element_dissipation(
    x1: float, x2: float, w1: float, w2: float, psi: PsiPotential
) -> float:
    """Integral of the physical potential of the squared field over [x1, x2]."""
    ubar = psi.threshold
    cuts = [x1, x2]
    if w2 != w1:
        for level in (ubar, -ubar, 0.0):
            t = (level - w1) / (w2 - w1)
            if 0.0 < t < 1.0:
                cuts.append(x1 + t * (x2 - x1))
    cuts.sort()
    pts, wts = _GAUSS3
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        if b - a <= 0.0:
            continue
        xs = 0.5 * (b - a) * pts + 0.5 * (a + b)
        ws = w1 + (w2 - w1) * (xs - x1) / (x2 - x1)
        total += 0.5 * (b - a) * float(np.dot(wts, psi.value_physical(ws**2)))
    return total


def energy_of(field: FieldLike, mesh: Mesh, psi: PsiPotential) -> EnergyReport:
    """Dissipation and energy of a nodal flux field on a single branch.

    The field is the total flux (lifted part included). The load term uses
    the constant reduced forcing, integrated exactly against the piecewise
    linear field.
    """
    bid = _single_branch(mesh)
    values = _nodal_values(field, mesh, bid)
    x = mesh.nodes[bid]
    forcing = tangential_forcing(mesh)

    dissipation = 0.0
    load = 0.0
    for e in range(len(x) - 1):
        dissipation += _element_dissipation(
            float(x[e]), float(x[e + 1]), float(values[e]), float(values[e + 1]), psi
        )
        load += forcing * 0.5 * (values[e] + values[e + 1]) * (x[e + 1] - x[e])
    return EnergyReport(
        dissipation=dissipation,
        load=load,
        energy=dissipation - load,
        forcing=forcing,
    )


@dataclass(frozen=True)
class GridSpec:
    """Scan grid for the scalar energy minimization."""

    alpha_max: float = 10.0
    count: int = 100_001
    refine_tol: float = 1e-10
    near_optimal_window: float = 1e-8


@dataclass
class MinimizationResult:
    """Outcome of the brute-force scan plus golden-section refinement.

    ``candidates`` lists every refined local minimizer whose energy lies
    within the near-optimal window of the global value; in the convex case it
    has a single entry.
    """

    alpha_star: float
    energy: float
    candidates: list[tuple[float, float]]
    alphas: np.ndarray = field(repr=False, default=None)
    energies: np.ndarray = field(repr=False, default=None)


def _energies_on_grid(
    alphas: np.ndarray, lifted: LiftedField, mesh: Mesh, psi: PsiPotential
) -> np.ndarray:
    bid = lifted.branch_id
    x = mesh.nodes[bid]
    h = np.diff(x)
    ua, ub = lifted.values[:-1], lifted.values[1:]
    forcing = tangential_forcing(mesh)
    length = x[-1] - x[0]
    lifted_integral = float(np.dot(h, 0.5 * (ua + ub)))

    if psi.has_closed_form:
        wa = alphas[None, :] + ua[:, None]
        wb = alphas[None, :] + ub[:, None]
        delta = (ub - ua)[:, None]
        flat = np.abs(ub - ua) < 1e-14
        ga = psi.flux_antiderivative(wa)
        gb = psi.flux_antiderivative(wb)
        with np.errstate(divide="ignore", invalid="ignore"):
            per_element = h[:, None] * (gb - ga) / delta
        if flat.any():
            const = h[:, None] * psi.value_physical(wa**2)
            per_element[flat, :] = const[flat, :]
        dissipation = per_element.sum(axis=0)
    else:
        dissipation = np.array(
            [
                sum(
                    _element_dissipation(
                        float(x[e]),
                        float(x[e + 1]),
                        float(a + ua[e]),
                        float(a + ub[e]),
                        psi,
                    )
                    for e in range(len(h))
                )
                for a in alphas
            ]
        )
    return dissipation - forcing * (alphas * length + lifted_integral)


def _golden_section(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    x1 = hi - GOLDEN * (hi - lo)
    x2 = lo + GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while hi - lo > tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + GOLDEN * (hi - lo)
            f2 = f(x2)
    mid = 0.5 * (lo + hi)
    return mid, f(mid)


def reduce_and_minimize(
    mesh: Mesh, psi: PsiPotential, grid: GridSpec | None = None
) -> MinimizationResult:
    """Minimize the reduced scalar energy of a single-branch problem.

    With a velocity condition anywhere on the boundary the divergence-free
    space is trivial and alpha = 0 is returned immediately. Otherwise the
    energy is scanned on a uniform grid, every near-optimal grid minimum is
    refined by golden section, and the best refined point wins.
    """
    grid = grid or GridSpec()
    bid = _single_branch(mesh)
    lifted = lift_field(mesh)

    has_velocity_bc = any(
        isinstance(mesh.network.boundary.condition_at(bid, which), VelocityBC)
        for which in (START, END)
    )
    if has_velocity_bc:
        report = energy_of(lifted, mesh, psi)
        return MinimizationResult(
            alpha_star=0.0,
            energy=report.energy,
            candidates=[(0.0, report.energy)],
            alphas=np.array([0.0]),
            energies=np.array([report.energy]),
        )

    alphas = np.linspace(-grid.alpha_max, grid.alpha_max, grid.count)
    energies = _energies_on_grid(alphas, lifted, mesh, psi)

    def scalar_energy(a: float) -> float:
        return float(_energies_on_grid(np.array([a]), lifted, mesh, psi)[0])

    interior = np.arange(1, len(alphas) - 1)
    is_local_min = (energies[interior] <= energies[interior - 1]) & (
        energies[interior] <= energies[interior + 1]
    )
    minima_idx = list(interior[is_local_min])
    global_idx = int(np.argmin(energies))
    if global_idx not in minima_idx:
        minima_idx.append(global_idx)

    best_grid = energies[global_idx]
    candidates: list[tuple[float, float]] = []
    for idx in sorted(minima_idx):
        if energies[idx] > best_grid + grid.near_optimal_window:
            continue
        lo = alphas[max(idx - 1, 0)]
        hi = alphas[min(idx + 1, len(alphas) - 1)]
        a_ref, e_ref = _golden_section(scalar_energy, lo, hi, grid.refine_tol)
        candidates.append((a_ref, e_ref))

    alpha_star, energy = min(candidates, key=lambda pair: pair[1])
    return MinimizationResult(
        alpha_star=alpha_star,
        energy=energy,
        candidates=candidates,
        alphas=alphas,
        energies=energies,
    )


def build_energy_block(solution: Solution, mesh: Mesh, law) -> dict:
    """Energy summary of a single-branch solution, JSON-ready.

    Evaluates the dissipation and energy of the solver's flux on its own
    working mesh and runs the scalar reduction next to it; the offset
    statistics quantify how far the flux deviates from lifted-plus-constant
    form, which is the discrete reduction the oracle relies on.
    """
    from .laws import build_psi

    psi = build_psi(law)
    work = solution.mesh
    bid = work.branch_ids[0]
    report = energy_of(solution.flux[bid], work, psi)
    lifted = lift_field(work)
    offsets = solution.flux[bid] - lifted.values
    reduction = reduce_and_minimize(work, psi)
    return {
        "dissipation": report.dissipation,
        "load": report.load,
        "energy": report.energy,
        "forcing": report.forcing,
        "alpha_star": reduction.alpha_star,
        "alpha_energy": reduction.energy,
        "candidates": [[a, e] for a, e in reduction.candidates],
        "fem_offset_mean": float(np.mean(offsets)),
        "fem_offset_spread": float(np.max(offsets) - np.min(offsets)),
    }


@dataclass(frozen=True)
class ProbeReport:
    decrease_fraction: float
    tested_directions: int
    worst_drop: float


def local_minimality_probe(
    field: FieldLike,
    mesh: Mesh,
    psi: PsiPotential,
    directions: int = 100,
    scale: float = 1e-3,
    seed: int = 0,
) -> ProbeReport:
    """Check a flux field for descent directions in the divergence-free space.

    Random admissible perturbations (constants on a single branch; none at
    all when a velocity condition pins the flux) are added at the given scale
    and two halvings of it. The report counts the fraction of directions
    along which the energy drops by more than 1e-10.
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    bid = _single_branch(mesh)
    values = _nodal_values(field, mesh, bid)

    has_velocity_bc = any(
        isinstance(mesh.network.boundary.condition_at(bid, which), VelocityBC)
        for which in (START, END)
    )
    if has_velocity_bc:
        return ProbeReport(decrease_fraction=0.0, tested_directions=0, worst_drop=0.0)

    base = energy_of(values, mesh, psi).energy
    rng = np.random.default_rng(seed)
    decreasing = 0
    worst = 0.0
    for _ in range(directions):
        direction = 1.0 if rng.standard_normal() >= 0.0 else -1.0
        drops = []
        for delta in (scale, scale / 2.0, scale / 4.0):
            perturbed = energy_of(values + delta * direction, mesh, psi).energy
            drops.append(perturbed - base)
        worst = min(worst, min(drops))
        if min(drops) < -1e-10:
            decreasing += 1
    return ProbeReport(
        decrease_fraction=decreasing / directions,
        tested_directions=directions,
        worst_drop=worst,
    )
