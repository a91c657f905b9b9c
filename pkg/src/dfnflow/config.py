"""Strict parsing of problem configuration documents.

A configuration is a JSON-compatible mapping with a network block (or a
reference to a separate network file), a law block, solver settings and
output settings. Unknown keys anywhere are errors; error messages carry the
offending key path. See docs/config-schema.md for the full format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .laws import AdaptiveLaw, AffineSpeedLaw, ConstantLaw, LawBranch
from .meshing import Mesh, build_mesh
from .network import (
    END,
    START,
    BoundarySpec,
    Branch,
    FractureNetwork,
    Intersection,
    PiecewiseSource,
    PressureBC,
    SourceSpec,
    VelocityBC,
    validate_network,
)


class ConfigError(ValueError):
    """Configuration document is malformed or inconsistent."""


DEFAULT_H = 0.05
DEFAULT_EPS_NL = 1e-4
DEFAULT_EPS_GAMMA = 1e-10
DEFAULT_MAX_OUTER = 50
DEFAULT_MAX_INNER = 50


@dataclass(frozen=True)
class SolverSettings:
    h: float = DEFAULT_H
    eps_nl: float = DEFAULT_EPS_NL
    eps_gamma: float = DEFAULT_EPS_GAMMA
    eps_omega: float | None = None
    max_outer: int = DEFAULT_MAX_OUTER
    max_inner: int = DEFAULT_MAX_INNER
    init: str = "low"
    init_labels: Mapping[str, tuple[int, ...]] | None = None


@dataclass(frozen=True)
class OutputSettings:
    trace: bool = False
    format: str = "json"


@dataclass(frozen=True)
class ProblemSpec:
    network: FractureNetwork
    law: AdaptiveLaw
    solver: SolverSettings = field(default_factory=SolverSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    approximate: bool = False

    def build_mesh(self) -> Mesh:
        return build_mesh(self.network, self.solver.h)


def _require_keys(section: Mapping, allowed: set[str], path: str) -> None:
    for key in section:
        if key not in allowed:
            raise ConfigError(f"unknown key {path}{key!r}")


def _get(section: Mapping, key: str, path: str, required: bool = True, default=None):
    if key not in section:
        if required:
            raise ConfigError(f"missing key {path}{key!r}")
        return default
    return section[key]


def _as_point(value, path: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigError(f"{path} must be a pair of coordinates")
    return (float(value[0]), float(value[1]))


def _positive(value, path: str) -> float:
    v = float(value)
    if v <= 0:
        raise ConfigError(f"{path} must be positive, got {v}")
    return v


def law_branch_from_dict(doc: Mapping, path: str) -> LawBranch:
    _require_keys(doc, {"type", "value", "intercept", "slope"}, path)
    kind = _get(doc, "type", path)
    if kind == "constant":
        return ConstantLaw(float(_get(doc, "value", path)))
    if kind == "affine":
        return AffineSpeedLaw(
            float(_get(doc, "intercept", path)), float(_get(doc, "slope", path))
        )
    raise ConfigError(f"{path}type must be 'constant' or 'affine', got {kind!r}")


def law_from_dict(doc: Mapping, path: str = "law.") -> AdaptiveLaw:
    _require_keys(doc, {"low", "high", "threshold"}, path)
    try:
        return AdaptiveLaw(
            low=law_branch_from_dict(_get(doc, "low", path), path + "low."),
            high=law_branch_from_dict(_get(doc, "high", path), path + "high."),
            threshold=_positive(_get(doc, "threshold", path), path + "threshold"),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def network_from_dict(doc: Mapping, path: str = "network.") -> FractureNetwork:
    _require_keys(doc, {"branches", "intersections", "boundary", "sources"}, path)

    branches = []
    for k, item in enumerate(_get(doc, "branches", path)):
        p = f"{path}branches[{k}]."
        _require_keys(item, {"id", "start", "end"}, p)
        branches.append(
            Branch(
                id=str(_get(item, "id", p)),
                start=_as_point(_get(item, "start", p), p + "start"),
                end=_as_point(_get(item, "end", p), p + "end"),
            )
        )

    intersections = []
    for k, item in enumerate(doc.get("intersections", [])):
        p = f"{path}intersections[{k}]."
        _require_keys(item, {"id", "point", "incident"}, p)
        incident = []
        for pair in _get(item, "incident", p):
            if len(pair) != 2 or pair[1] not in (START, END):
                raise ConfigError(
                    f"{p}incident entries must be [branch, 'start'|'end']"
                )
            incident.append((str(pair[0]), str(pair[1])))
        intersections.append(
            Intersection(
                id=str(_get(item, "id", p)),
                point=_as_point(_get(item, "point", p), p + "point"),
                incident=tuple(incident),
            )
        )

    boundary_doc = doc.get("boundary", {})
    _require_keys(boundary_doc, {"conditions", "mean_pressure"}, path + "boundary.")
    conditions = {}
    for k, item in enumerate(boundary_doc.get("conditions", [])):
        p = f"{path}boundary.conditions[{k}]."
        _require_keys(item, {"branch", "end", "type", "value"}, p)
        end = _get(item, "end", p)
        if end not in (START, END):
            raise ConfigError(f"{p}end must be 'start' or 'end'")
        kind = _get(item, "type", p)
        value = float(_get(item, "value", p))
        key = (str(_get(item, "branch", p)), end)
        if key in conditions:
            raise ConfigError(f"{p}: duplicate condition on end {key}")
        if kind == "pressure":
            conditions[key] = PressureBC(value)
        elif kind == "velocity":
            conditions[key] = VelocityBC(value)
        else:
            raise ConfigError(f"{p}type must be 'pressure' or 'velocity'")
    mean_pressure = boundary_doc.get("mean_pressure")
    boundary = BoundarySpec(
        conditions=conditions,
        mean_pressure=None if mean_pressure is None else float(mean_pressure),
    )

    sources_doc = doc.get("sources", {})
    _require_keys(sources_doc, {"scalar", "force"}, path + "sources.")
    scalar = {}
    for k, item in enumerate(sources_doc.get("scalar", [])):
        p = f"{path}sources.scalar[{k}]."
        _require_keys(item, {"branch", "breakpoints", "values"}, p)
        try:
            source = PiecewiseSource(
                breakpoints=tuple(float(x) for x in item.get("breakpoints", [])),
                pieces=tuple(float(x) for x in _get(item, "values", p)),
            )
        except ValueError as exc:
            raise ConfigError(f"{p}: {exc}") from exc
        scalar[str(_get(item, "branch", p))] = source
    force_doc = sources_doc.get("force", [0.0, 0.0])
    sources = SourceSpec(scalar=scalar, force=_as_point(force_doc, path + "sources.force"))

    return FractureNetwork(
        branches=tuple(branches),
        intersections=tuple(intersections),
        boundary=boundary,
        sources=sources,
    )


def parse_config(document: Mapping, base_dir: Path | None = None) -> ProblemSpec:
    """Validate a configuration mapping and build a problem specification.

    Applies the solver defaults, enforces strict keys, and validates the
    network; an undetermined pressure level (no pressure condition and no
    mean value) is rejected here.
    """
    _require_keys(
        document,
        {"network", "network_file", "law", "solver", "output", "approximate"},
        "",
    )

    if ("network" in document) == ("network_file" in document):
        raise ConfigError("provide exactly one of 'network' or 'network_file'")
    if "network" in document:
        network_doc = document["network"]
    else:
        ref = Path(document["network_file"])
        if base_dir is not None and not ref.is_absolute():
            ref = base_dir / ref
        try:
            payload = json.loads(ref.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read network file {ref}: {exc}") from exc
        _require_keys(payload, {"network", "approximate"}, f"{ref.name}:")
        network_doc = _get(payload, "network", f"{ref.name}:")
    network = network_from_dict(network_doc)

    report = validate_network(network)
    if not report.ok:
        raise ConfigError(f"invalid network:\n{report}")

    law = law_from_dict(_get(document, "law", ""))

    solver_doc = document.get("solver", {})
    _require_keys(
        solver_doc,
        {
            "h",
            "eps_nl",
            "eps_gamma",
            "eps_omega",
            "max_outer",
            "max_inner",
            "init",
            "init_labels",
        },
        "solver.",
    )
    init = solver_doc.get("init", "low")
    if init not in ("low", "high"):
        raise ConfigError("solver.init must be 'low' or 'high'")
    init_labels = solver_doc.get("init_labels")
    if init_labels is not None:
        init_labels = {
            str(b): tuple(int(v) for v in labels) for b, labels in init_labels.items()
        }
    eps_omega = solver_doc.get("eps_omega")
    solver = SolverSettings(
        h=_positive(solver_doc.get("h", DEFAULT_H), "solver.h"),
        eps_nl=_positive(solver_doc.get("eps_nl", DEFAULT_EPS_NL), "solver.eps_nl"),
        eps_gamma=_positive(
            solver_doc.get("eps_gamma", DEFAULT_EPS_GAMMA), "solver.eps_gamma"
        ),
        eps_omega=None if eps_omega is None else _positive(eps_omega, "solver.eps_omega"),
        max_outer=int(solver_doc.get("max_outer", DEFAULT_MAX_OUTER)),
        max_inner=int(solver_doc.get("max_inner", DEFAULT_MAX_INNER)),
        init=init,
        init_labels=init_labels,
    )
    if solver.max_outer < 1 or solver.max_inner < 1:
        raise ConfigError("solver iteration caps must be at least 1")

    output_doc = document.get("output", {})
    _require_keys(output_doc, {"trace", "format"}, "output.")
    fmt = output_doc.get("format", "json")
    if fmt not in ("json", "csv"):
        raise ConfigError("output.format must be 'json' or 'csv'")
    output = OutputSettings(trace=bool(output_doc.get("trace", False)), format=fmt)

    return ProblemSpec(
        network=network,
        law=law,
        solver=solver,
        output=output,
        approximate=bool(document.get("approximate", False)),
    )


def load_config(path: str | Path) -> ProblemSpec:
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(document, base_dir=path.parent)


def network_to_dict(network: FractureNetwork) -> dict:
    return {
        "branches": [
            {"id": b.id, "start": list(b.start), "end": list(b.end)}
            for b in network.branches
        ],
        "intersections": [
            {
                "id": i.id,
                "point": list(i.point),
                "incident": [[bid, which] for bid, which in i.incident],
            }
            for i in network.intersections
        ],
        "boundary": {
            "conditions": [
                {
                    "branch": bid,
                    "end": which,
                    "type": "pressure" if isinstance(bc, PressureBC) else "velocity",
                    "value": bc.pressure if isinstance(bc, PressureBC) else bc.outflux,
                }
                for (bid, which), bc in sorted(network.boundary.conditions.items())
            ],
            **(
                {"mean_pressure": network.boundary.mean_pressure}
                if network.boundary.mean_pressure is not None
                else {}
            ),
        },
        "sources": {
            "scalar": [
                {
                    "branch": bid,
                    "breakpoints": list(src.breakpoints),
                    "values": list(src.pieces),
                }
                for bid, src in sorted(network.sources.scalar.items())
            ],
            "force": list(network.sources.force),
        },
    }


def law_branch_to_dict(branch: LawBranch) -> dict:
    if isinstance(branch, ConstantLaw):
        return {"type": "constant", "value": branch.value}
    if isinstance(branch, AffineSpeedLaw):
        return {"type": "affine", "intercept": branch.intercept, "slope": branch.slope}
    raise ConfigError("custom law branches cannot be serialized")


def spec_to_dict(spec: ProblemSpec) -> dict:
    doc: dict[str, Any] = {
        "network": network_to_dict(spec.network),
        "law": {
            "low": law_branch_to_dict(spec.law.low),
            "high": law_branch_to_dict(spec.law.high),
            "threshold": spec.law.threshold,
        },
        "solver": {
            "h": spec.solver.h,
            "eps_nl": spec.solver.eps_nl,
            "eps_gamma": spec.solver.eps_gamma,
            "max_outer": spec.solver.max_outer,
            "max_inner": spec.solver.max_inner,
            "init": spec.solver.init,
        },
        "output": {"trace": spec.output.trace, "format": spec.output.format},
    }
    if spec.solver.eps_omega is not None:
        doc["solver"]["eps_omega"] = spec.solver.eps_omega
    if spec.solver.init_labels is not None:
        doc["solver"]["init_labels"] = {
            b: list(v) for b, v in spec.solver.init_labels.items()
        }
    if spec.approximate:
        doc["approximate"] = True
    return doc
