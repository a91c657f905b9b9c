import json

import pytest

from dfnflow.config import (
    ConfigError,
    load_config,
    parse_config,
    spec_to_dict,
)

MINIMAL = {
    "network": {
        "branches": [{"id": "f", "start": [0.0, 0.0], "end": [1.0, 0.0]}],
        "boundary": {
            "conditions": [
                {"branch": "f", "end": "start", "type": "pressure", "value": 0.0},
                {"branch": "f", "end": "end", "type": "pressure", "value": 0.0},
            ]
        },
    },
    "law": {
        "low": {"type": "constant", "value": 1.0},
        "high": {"type": "constant", "value": 0.1},
        "threshold": 0.15,
    },
}


def test_minimal_document_gets_defaults():
    spec = parse_config(MINIMAL)
    assert spec.solver.h == 0.05
    assert spec.solver.eps_gamma == 1e-10
    assert spec.solver.eps_nl == 1e-4
    assert spec.solver.eps_omega is None
    assert spec.solver.max_outer == 50
    assert spec.solver.init == "low"
    assert spec.output.format == "json"
    assert not spec.approximate


def test_unknown_key_is_an_error_with_its_path():
    doc = json.loads(json.dumps(MINIMAL))
    doc["law"]["thresholdd"] = 0.2
    with pytest.raises(ConfigError, match="thresholdd"):
        parse_config(doc)


def test_unknown_solver_key_reports_section():
    doc = json.loads(json.dumps(MINIMAL))
    doc["solver"] = {"eps_nll": 1.0}
    with pytest.raises(ConfigError, match="solver.*eps_nll"):
        parse_config(doc)


def test_undetermined_pressure_level_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["network"]["boundary"]["conditions"] = [
        {"branch": "f", "end": "start", "type": "velocity", "value": 0.0},
        {"branch": "f", "end": "end", "type": "velocity", "value": 0.0},
    ]
    with pytest.raises(ConfigError, match="pressure level undetermined"):
        parse_config(doc)


def test_mean_pressure_anchors_velocity_only_problem():
    doc = json.loads(json.dumps(MINIMAL))
    doc["network"]["boundary"]["conditions"] = [
        {"branch": "f", "end": "start", "type": "velocity", "value": 0.0},
        {"branch": "f", "end": "end", "type": "velocity", "value": 0.0},
    ]
    doc["network"]["boundary"]["mean_pressure"] = 0.7
    spec = parse_config(doc)
    assert spec.network.boundary.mean_pressure == 0.7


def test_affine_law_block():
    doc = json.loads(json.dumps(MINIMAL))
    doc["law"]["high"] = {"type": "affine", "intercept": 0.01, "slope": 3.0}
    spec = parse_config(doc)
    assert spec.law.growth_exponent == 3.0


def test_bad_law_type_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["law"]["low"] = {"type": "cubic", "value": 1.0}
    with pytest.raises(ConfigError, match="constant.*affine"):
        parse_config(doc)


def test_invalid_law_parameters_surface_as_config_errors():
    doc = json.loads(json.dumps(MINIMAL))
    doc["law"]["threshold"] = -1.0
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_duplicate_boundary_condition_rejected():
    doc = json.loads(json.dumps(MINIMAL))
    doc["network"]["boundary"]["conditions"].append(
        {"branch": "f", "end": "start", "type": "pressure", "value": 1.0}
    )
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(doc)


def test_round_trip_preserves_the_spec():
    doc = json.loads(json.dumps(MINIMAL))
    doc["solver"] = {"h": 0.1, "eps_nl": 1e-6, "init": "high"}
    doc["output"] = {"trace": True, "format": "csv"}
    doc["approximate"] = True
    spec = parse_config(doc)
    rebuilt = parse_config(spec_to_dict(spec))
    assert rebuilt == spec
    assert spec_to_dict(rebuilt) == spec_to_dict(spec)


def test_network_and_network_file_are_mutually_exclusive():
    doc = json.loads(json.dumps(MINIMAL))
    doc["network_file"] = "somewhere.json"
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config(doc)
    with pytest.raises(ConfigError, match="exactly one"):
        parse_config({"law": MINIMAL["law"]})


def test_network_file_reference(tmp_path):
    network_doc = {"network": MINIMAL["network"], "approximate": True}
    path = tmp_path / "net.json"
    path.write_text(json.dumps(network_doc))
    doc = {"network_file": "net.json", "law": MINIMAL["law"]}
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(doc))
    spec = load_config(config_path)
    assert spec.network.branch_ids == ("f",)


def test_sources_block_parsed():
    doc = json.loads(json.dumps(MINIMAL))
    doc["network"]["sources"] = {
        "scalar": [{"branch": "f", "breakpoints": [0.3, 0.7], "values": [1, -1, 1]}],
        "force": [0.05, 0.0],
    }
    spec = parse_config(doc)
    src = spec.network.sources.scalar_for("f")
    assert src.breakpoints == (0.3, 0.7)
    assert spec.network.sources.force == (0.05, 0.0)


def test_packaged_benchmark_network_parses_and_validates():
    from dfnflow.presets import benchmark_network
    from dfnflow.network import validate_network

    net, payload = benchmark_network()
    assert payload["approximate"] is True
    assert validate_network(net).ok
    assert len(net.branches) == 18
    assert len(net.intersections) == 9


def test_init_labels_round_trip():
    doc = json.loads(json.dumps(MINIMAL))
    doc["solver"] = {"init_labels": {"f": [0, 1, 1, 0]}}
    spec = parse_config(doc)
    assert spec.solver.init_labels == {"f": (0, 1, 1, 0)}
    assert parse_config(spec_to_dict(spec)) == spec
