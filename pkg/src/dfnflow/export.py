"""Result bundles and flat-file export.

A bundle is a plain-data record of one run (or one sweep): tracker outcome,
final fields, optional per-iteration snapshots and preset-specific extras.
JSON export writes the bundle as a single document with full float precision,
so importing it back reproduces the bundle bit for bit; CSV export writes one
file per field per iteration with (branch, arc, value) rows sorted by branch
and arc.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .fem import Solution
from .tracker import TrackerReport, TrackerStatus

SCHEMA_VERSION = 1


def _field_block(nodes: np.ndarray, values: np.ndarray) -> dict:
    return {"arc": [float(x) for x in nodes], "value": [float(v) for v in values]}


def solution_fields(solution: Solution) -> dict:
    mesh = solution.mesh
    return {
        "flux": {
            b: _field_block(mesh.nodes[b], solution.flux[b]) for b in mesh.branch_ids
        },
        "pressure": {
            b: _field_block(mesh.element_midpoints(b), solution.pressure[b])
            for b in mesh.branch_ids
        },
        "junction_pressure": {
            k: float(v) for k, v in sorted(solution.junction_pressure.items())
        },
    }


@dataclass
class ResultBundle:
    """Plain-data result of one pipeline run, JSON-serializable as is."""

    name: str
    status: str
    period: int | None
    outer_iterations: int
    inner_iteration_counts: list[int]
    distances: list[float]
    final: dict
    snapshots: list[dict] | None = None
    energy: dict | None = None
    extras: dict | None = None
    config: dict | None = None
    schema_version: int = SCHEMA_VERSION
    timing_seconds: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(doc: dict) -> "ResultBundle":
        return ResultBundle(**doc)


def bundle_from_report(
    name: str,
    report: TrackerReport,
    config: dict | None = None,
    energy: dict | None = None,
    extras: dict | None = None,
    timing_seconds: float = 0.0,
) -> ResultBundle:
    final_config = report.final_configuration
    final_mesh_nodes = report.final_solution.mesh  # solution of the last solve
    final = {
        "interfaces": [[b, float(x)] for b, x in final_config.interfaces],
        "regimes": {
            b: [int(v) for v in labels]
            for b, labels in sorted(final_config.regimes.labels.items())
        },
        **solution_fields(report.final_solution),
    }
    snapshots = None
    if report.snapshots is not None:
        snapshots = []
        for entry, solution in zip(report.history, report.snapshots):
            snapshots.append(
                {
                    "iteration": entry.configuration.iteration_index,
                    "distance": float(entry.distance),
                    "inner_iterations": entry.inner_iterations,
                    "interfaces": [
                        [b, float(x)] for b, x in entry.configuration.interfaces
                    ],
                    "regimes": {
                        b: [int(v) for v in labels]
                        for b, labels in sorted(
                            entry.configuration.regimes.labels.items()
                        )
                    },
                    **solution_fields(solution),
                }
            )
    return ResultBundle(
        name=name,
        status=report.status.value,
        period=report.period,
        outer_iterations=report.outer_iterations,
        inner_iteration_counts=list(report.inner_iteration_counts),
        distances=[float(e.distance) for e in report.history],
        final=final,
        snapshots=snapshots,
        energy=energy,
        extras=extras,
        config=config,
        timing_seconds=timing_seconds,
    )


STATUS_EXIT_CODES = {
    TrackerStatus.CONVERGED.value: 0,
    TrackerStatus.OSCILLATING.value: 2,
    TrackerStatus.MAX_ITERATIONS.value: 3,
}


def _write_csv(path: Path, rows: list[tuple], header: tuple[str, ...]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _snapshot_rows(block: dict) -> dict[str, list[tuple]]:
    out: dict[str, list[tuple]] = {}
    flux_rows = []
    for b in sorted(block["flux"]):
        fb = block["flux"][b]
        flux_rows += sorted(zip([b] * len(fb["arc"]), fb["arc"], fb["value"]))
    out["flux"] = flux_rows
    pressure_rows = []
    for b in sorted(block["pressure"]):
        pb = block["pressure"][b]
        pressure_rows += sorted(zip([b] * len(pb["arc"]), pb["arc"], pb["value"]))
    out["pressure"] = pressure_rows
    regime_rows = []
    for b in sorted(block["regimes"]):
        labels = block["regimes"][b]
        # element index stands in for arc position of the label
        regime_rows += [(b, float(k), int(v)) for k, v in enumerate(labels)]
    out["regimes"] = regime_rows
    out["interfaces"] = sorted(
        (b, float(x), 1) for b, x in block.get("interfaces", [])
    )
    return out


def export_bundle(bundle: ResultBundle, out_dir: str | Path, format: str = "json") -> list[Path]:
    """Write a bundle to disk; returns the created paths.

    JSON: a single ``<name>.json`` document. CSV: one file per field per
    iteration (final state only when tracing was off) plus ``report.json``
    with the non-field payload.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []
    if format == "json":
        path = out / f"{bundle.name}.json"
        path.write_text(json.dumps(bundle.to_dict(), indent=2))
        created.append(path)
        return created
    if format != "csv":
        raise ValueError(f"unknown export format {format!r}")

    blocks: list[tuple[str, dict]] = []
    if bundle.snapshots:
        blocks = [(f"it{s['iteration']:03d}", s) for s in bundle.snapshots]
    blocks.append(("final", bundle.final))
    for tag, block in blocks:
        for fieldname, rows in _snapshot_rows(block).items():
            path = out / f"{fieldname}_{tag}.csv"
            _write_csv(path, rows, ("branch", "arc", "value"))
            created.append(path)

    if bundle.extras:
        for key, value in bundle.extras.items():
            if isinstance(value, list) and value and isinstance(value[0], dict):
                header = tuple(value[0].keys())
                rows = [tuple(row[k] for k in header) for row in value]
                path = out / f"{key}.csv"
                _write_csv(path, rows, header)
                created.append(path)

    report = {
        k: v
        for k, v in bundle.to_dict().items()
        if k not in ("final", "snapshots")
    }
    path = out / "report.json"
    path.write_text(json.dumps(report, indent=2))
    created.append(path)
    return created


def load_bundle(path: str | Path) -> ResultBundle:
    return ResultBundle.from_dict(json.loads(Path(path).read_text()))
