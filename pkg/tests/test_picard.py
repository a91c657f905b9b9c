import numpy as np
import pytest

from dfnflow.fem import RegimeField
from dfnflow.laws import AdaptiveLaw, AffineSpeedLaw, ConstantLaw, Regime
from dfnflow.meshing import build_mesh
from dfnflow.picard import PicardSettings, picard_solve
from dfnflow.presets import darcy_forchheimer_pair, single_fracture_network
from dfnflow.tracker import track


def mixed_configuration(mesh):
    """Half low, half high on the single fracture, split at element level."""
    n = mesh.element_count("f")
    labels = np.zeros(n, dtype=np.int8)
    labels[n // 2 :] = 1
    return RegimeField({"f": labels})


def test_linear_law_converges_in_one_iteration():
    net = single_fracture_network()
    mesh = build_mesh(net, 0.05)
    law = AdaptiveLaw(ConstantLaw(1.0), ConstantLaw(0.1), 0.15)
    result = picard_solve(
        mesh, RegimeField.uniform(mesh, Regime.LOW), law, net.sources, net.boundary
    )
    assert result.converged
    assert result.iterations == 1
    assert result.update_history == [0.0]


def test_linear_shortcut_even_with_high_labels_present():
    net = single_fracture_network()
    mesh = build_mesh(net, 0.05)
    law = AdaptiveLaw(ConstantLaw(1.0), ConstantLaw(0.1), 0.15)
    result = picard_solve(mesh, mixed_configuration(mesh), law, net.sources, net.boundary)
    assert result.converged and result.iterations == 1


def test_nonlinear_mixed_configuration_iterates():
    net = single_fracture_network()
    mesh = build_mesh(net, 0.05)
    law = darcy_forchheimer_pair()
    result = picard_solve(
        mesh,
        mixed_configuration(mesh),
        law,
        net.sources,
        net.boundary,
        PicardSettings(tolerance=1e-4),
    )
    assert result.converged
    assert 2 <= result.iterations <= 12
    assert result.update_history[-1] <= 1e-4


def test_update_norms_eventually_monotone():
    net = single_fracture_network()
    mesh = build_mesh(net, 0.05)
    law = darcy_forchheimer_pair()
    result = picard_solve(
        mesh,
        mixed_configuration(mesh),
        law,
        net.sources,
        net.boundary,
        PicardSettings(tolerance=1e-12, max_iterations=60),
    )
    updates = result.update_history
    assert result.converged
    tail = updates[2:]
    assert all(b <= a * (1 + 1e-9) for a, b in zip(tail, tail[1:]))


def test_iteration_counts_monotone_in_tolerance():
    net = single_fracture_network()
    mesh = build_mesh(net, 0.05)
    law = darcy_forchheimer_pair()
    counts = []
    for tol in (1e-1, 1e-2, 1e-4, 1e-8, 1e-12):
        result = picard_solve(
            mesh,
            mixed_configuration(mesh),
            law,
            net.sources,
            net.boundary,
            PicardSettings(tolerance=tol, max_iterations=80),
        )
        assert result.converged
        counts.append(result.iterations)
    assert counts == sorted(counts)


def test_tight_tolerances_agree():
    net = single_fracture_network()
    mesh = build_mesh(net, 0.05)
    law = darcy_forchheimer_pair()

    def run(tol):
        return picard_solve(
            mesh,
            mixed_configuration(mesh),
            law,
            net.sources,
            net.boundary,
            PicardSettings(tolerance=tol, max_iterations=100),
        ).solution.stacked()

    a = run(1e-8)
    b = run(1e-12)
    assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 1e-7


def test_non_convergence_reported_not_raised():
    net = single_fracture_network()
    mesh = build_mesh(net, 0.05)
    law = darcy_forchheimer_pair()
    result = picard_solve(
        mesh,
        mixed_configuration(mesh),
        law,
        net.sources,
        net.boundary,
        PicardSettings(tolerance=1e-12, max_iterations=3),
    )
    assert not result.converged
    assert result.iterations == 3


def test_settings_validation():
    with pytest.raises(ValueError):
        PicardSettings(tolerance=0.0)
    with pytest.raises(ValueError):
        PicardSettings(max_iterations=0)


def test_first_outer_step_is_linear_on_low_start():
    # the all-low start solves a speed-independent problem: one inner cycle
    net = single_fracture_network()
    mesh = build_mesh(net, 0.05)
    report = track(mesh, darcy_forchheimer_pair())
    assert report.inner_iteration_counts[0] == 1
    assert len(report.inner_iteration_counts) == report.outer_iterations
