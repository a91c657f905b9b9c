import numpy as np
import pytest

from dfnflow.energy import (
    GridSpec,
    energy_of,
    lift_field,
    local_minimality_probe,
    reduce_and_minimize,
    tangential_forcing,
)
from dfnflow.laws import AdaptiveLaw, AffineSpeedLaw, ConstantLaw, build_psi
from dfnflow.meshing import build_mesh
from dfnflow.network import (
    BoundarySpec,
    Branch,
    FractureNetwork,
    PiecewiseSource,
    PressureBC,
    SourceSpec,
    VelocityBC,
)
from dfnflow.presets import (
    darcy_pair,
    single_fracture_network,
)
from dfnflow.tracker import TrackerSettings, track

from oracles import midpoint_dissipation


def plain_branch(
    q=None, force=(0.0, 0.0), bc_start=PressureBC(0.0), bc_end=PressureBC(0.0)
):
    scalar = {} if q is None else {"f": q}
    return FractureNetwork(
        branches=(Branch("f", (0.0, 0.0), (1.0, 0.0)),),
        boundary=BoundarySpec({("f", "start"): bc_start, ("f", "end"): bc_end}),
        sources=SourceSpec(scalar=scalar, force=force),
    )


UNIT_PSI = build_psi(AdaptiveLaw(ConstantLaw(1.0), ConstantLaw(1.0), 1.0))


class TestLiftedField:
    def test_zero_source_gives_zero_lift(self):
        mesh = build_mesh(plain_branch(), 0.25)
        lifted = lift_field(mesh)
        assert np.allclose(lifted.values, 0.0)

    def test_alternating_source_cumulative_integrals(self):
        mesh = build_mesh(single_fracture_network(), 0.05)
        lifted = lift_field(mesh)
        assert lifted.at(0.3) == pytest.approx(0.3, abs=1e-13)
        assert lifted.at(0.7) == pytest.approx(-0.1, abs=1e-13)
        assert lifted.at(1.0) == pytest.approx(0.2, abs=1e-13)

    def test_velocity_anchor_at_start(self):
        net = plain_branch(
            q=PiecewiseSource(pieces=(1.0,)), bc_start=VelocityBC(0.0)
        )
        mesh = build_mesh(net, 0.25)
        lifted = lift_field(mesh)
        assert np.allclose(lifted.values, mesh.nodes["f"], atol=1e-13)

    def test_nonzero_inflow_anchor(self):
        # outward flux -0.3 at the start means flux +0.3 along the branch
        net = plain_branch(
            q=PiecewiseSource(pieces=(1.0,)), bc_start=VelocityBC(-0.3)
        )
        mesh = build_mesh(net, 0.25)
        lifted = lift_field(mesh)
        assert np.allclose(lifted.values, 0.3 + mesh.nodes["f"], atol=1e-13)

    def test_velocity_anchor_at_end(self):
        net = plain_branch(
            q=PiecewiseSource(pieces=(1.0,)), bc_end=VelocityBC(0.7)
        )
        mesh = build_mesh(net, 0.25)
        lifted = lift_field(mesh)
        assert lifted.values[-1] == pytest.approx(0.7, abs=1e-13)

    def test_multi_branch_networks_rejected(self):
        from dfnflow.presets import crossing_network

        mesh = build_mesh(crossing_network(), 0.25)
        with pytest.raises(ValueError, match="single-branch"):
            lift_field(mesh)


class TestEnergyOf:
    def test_zero_field_constant_law(self):
        mesh = build_mesh(plain_branch(), 0.25)
        report = energy_of(np.zeros(5), mesh, UNIT_PSI)
        assert report.dissipation == pytest.approx(-0.5, abs=1e-14)
        assert report.energy == pytest.approx(-0.5, abs=1e-14)

    def test_uniform_high_field_closed_form(self):
        psi = build_psi(AdaptiveLaw(ConstantLaw(1.0), ConstantLaw(0.1), 1.0))
        mesh = build_mesh(plain_branch(), 0.25)
        report = energy_of(np.full(5, 2.0), mesh, psi)
        assert report.dissipation == pytest.approx(0.15, abs=1e-14)

    def test_constant_law_exactness_away_from_threshold(self):
        # closed form: lambda/2 * integral of (u^2 - ubar^2)
        psi = build_psi(AdaptiveLaw(ConstantLaw(2.0), ConstantLaw(0.5), 0.15))
        mesh = build_mesh(plain_branch(), 0.2)
        x = mesh.nodes["f"]
        values = 0.02 * x  # speeds stay below 0.15 everywhere
        exact = 2.0 / 2.0 * (0.02**2 / 3.0 - 0.15**2)
        report = energy_of(values, mesh, psi)
        assert report.dissipation == pytest.approx(exact, abs=1e-12)

    def test_kink_split_quadrature_matches_midpoint_oracle(self):
        psi = build_psi(AdaptiveLaw(ConstantLaw(1.0), AffineSpeedLaw(0.01, 3.0), 0.15))
        mesh = build_mesh(single_fracture_network(), 0.1)
        lifted = lift_field(mesh)
        values = lifted.values - 0.05  # crosses the threshold inside elements
        report = energy_of(values, mesh, psi)
        reference = midpoint_dissipation(values, mesh.nodes["f"], psi)
        assert report.dissipation == pytest.approx(reference, abs=1e-7)

    def test_lifted_dissipation_consistency_with_fine_quadrature(self):
        psi = build_psi(darcy_pair())
        mesh = build_mesh(single_fracture_network(), 0.05)
        lifted = lift_field(mesh)
        report = energy_of(lifted, mesh, psi)
        reference = midpoint_dissipation(lifted.values, mesh.nodes["f"], psi)
        assert report.dissipation == pytest.approx(reference, abs=1e-9)

    def test_energy_identity(self):
        psi = build_psi(darcy_pair())
        mesh = build_mesh(single_fracture_network(), 0.05)
        lifted = lift_field(mesh)
        report = energy_of(lifted, mesh, psi)
        assert report.energy == pytest.approx(
            report.dissipation - report.load, abs=1e-15
        )

    def test_pressure_data_enters_forcing_with_downhill_sign(self):
        # end pressure 0.2 must drive flow toward the low-pressure end
        net = plain_branch(bc_end=PressureBC(0.2))
        mesh = build_mesh(net, 0.25)
        assert tangential_forcing(mesh) == pytest.approx(-0.2)
        psi = build_psi(AdaptiveLaw(ConstantLaw(1.0), ConstantLaw(1.0), 10.0))
        result = reduce_and_minimize(mesh, psi, GridSpec(alpha_max=2.0, count=20001))
        # location accuracy is limited to sqrt(machine eps) by value rounding
        assert result.alpha_star == pytest.approx(-0.2, abs=1e-6)


class TestReduction:
    def test_no_forcing_minimizes_at_rest(self):
        mesh = build_mesh(plain_branch(), 0.25)
        result = reduce_and_minimize(mesh, UNIT_PSI)
        assert result.alpha_star == pytest.approx(0.0, abs=1e-7)

    def test_velocity_condition_collapses_the_space(self):
        net = plain_branch(bc_start=VelocityBC(0.25))
        mesh = build_mesh(net, 0.25)
        result = reduce_and_minimize(mesh, build_psi(darcy_pair()))
        assert result.alpha_star == 0.0
        assert result.candidates == [(0.0, result.energy)]

    def test_grid_profile_matches_pointwise_energy(self):
        psi = build_psi(darcy_pair())
        mesh = build_mesh(single_fracture_network(), 0.05)
        lifted = lift_field(mesh)
        result = reduce_and_minimize(mesh, psi, GridSpec(alpha_max=1.0, count=2001))
        idx = np.linspace(0, 2000, 9, dtype=int)
        for k in idx:
            direct = energy_of(lifted.values + result.alphas[k], mesh, psi).energy
            assert result.energies[k] == pytest.approx(direct, abs=1e-11)

    def test_convex_profile_has_nonnegative_second_differences(self):
        law = darcy_pair(k1=1.0, k2=0.5625)  # coefficient rises at the switch
        mesh = build_mesh(single_fracture_network(), 0.05)
        result = reduce_and_minimize(mesh, build_psi(law), GridSpec(alpha_max=2.0, count=4001))
        second = np.diff(result.energies, n=2)
        assert second.min() >= -1e-9
        assert len(result.candidates) == 1

    def test_nonconvex_profile_shows_a_concave_region(self):
        law = darcy_pair(k1=1.0, k2=10.0)  # coefficient drops at the switch
        mesh = build_mesh(single_fracture_network(), 0.05)
        # second differences scale with the squared grid step, so probe the
        # concave region with a step large enough to clear the threshold
        result = reduce_and_minimize(mesh, build_psi(law), GridSpec(alpha_max=2.0, count=1001))
        second = np.diff(result.energies, n=2)
        assert second.min() < -1e-6

    def test_refinement_improves_on_the_grid_minimum(self):
        psi = build_psi(darcy_pair())
        mesh = build_mesh(single_fracture_network(), 0.05)
        result = reduce_and_minimize(mesh, psi, GridSpec(alpha_max=1.0, count=5001))
        grid_best = float(result.energies.min())
        assert result.energy <= grid_best + 1e-15


class TestFemOracleAgreement:
    def induced_offsets(self, mesh, law, alpha):
        """Mixed solve on the configuration induced by the reduced minimizer."""
        from dfnflow.fem import RegimeField
        from dfnflow.meshing import split_mesh_at
        from dfnflow.picard import picard_solve

        lifted = lift_field(mesh)
        ubar = law.threshold
        x, v = lifted.nodes, lifted.values + alpha
        crossings = []
        for e in range(len(x) - 1):
            w1, w2 = v[e], v[e + 1]
            if w2 != w1:
                for level in (ubar, -ubar):
                    t = (level - w1) / (w2 - w1)
                    if 0.0 < t < 1.0:
                        crossings.append(("f", x[e] + t * (x[e + 1] - x[e])))
        work = split_mesh_at(mesh, crossings)
        fine = lift_field(work)
        speeds = np.abs(fine.at(work.element_midpoints("f")) + alpha)
        labels = RegimeField({"f": np.where(speeds < ubar, 0, 1).astype(np.int8)})
        result = picard_solve(
            work, labels, law, work.network.sources, work.network.boundary
        )
        return result.solution.flux["f"] - fine.values

    @pytest.mark.parametrize("k2", [10.0, 0.5625])
    def test_minimizer_matches_the_mixed_solve(self, k2):
        mesh = build_mesh(single_fracture_network(), 0.05)
        law = darcy_pair(k1=1.0, k2=k2)
        result = reduce_and_minimize(mesh, build_psi(law))
        offsets = self.induced_offsets(mesh, law, result.alpha_star)
        assert offsets.max() - offsets.min() <= 1e-8
        assert float(offsets.mean()) == pytest.approx(result.alpha_star, abs=1e-6)


class TestLocalMinimalityProbe:
    def test_sharply_converged_solution_has_no_descent(self):
        # the probe needs a stationary state, so converge the tracker well
        # below the probe scales before testing
        mesh = build_mesh(single_fracture_network(), 0.05)
        report = track(
            mesh,
            darcy_pair(),
            settings=TrackerSettings(eps_omega=1e-8, max_outer=100),
        )
        assert report.status.value == "converged"
        sol = report.final_solution
        psi = build_psi(darcy_pair())
        for scale in (1e-3, 1e-4):
            probe = local_minimality_probe(
                sol, sol.mesh, psi, directions=100, scale=scale, seed=5
            )
            assert probe.decrease_fraction == 0.0

    def test_perturbed_field_has_descent_directions(self):
        mesh = build_mesh(single_fracture_network(), 0.05)
        psi = build_psi(darcy_pair())
        lifted = lift_field(mesh)
        probe = local_minimality_probe(
            lifted.values + 0.1, mesh, psi, directions=50, scale=1e-3, seed=5
        )
        assert probe.decrease_fraction > 0.0
        assert probe.worst_drop < -1e-10

    def test_single_law_minimizer_passes(self):
        # equal coefficients: the classical quadratic energy, one minimizer
        net = single_fracture_network()
        mesh = build_mesh(net, 0.05)
        law = AdaptiveLaw(ConstantLaw(1.0), ConstantLaw(1.0), 0.15)
        report = track(mesh, law)
        psi = build_psi(law)
        probe = local_minimality_probe(
            report.final_solution,
            report.final_solution.mesh,
            psi,
            directions=64,
            scale=1e-3,
            seed=2,
        )
        assert probe.decrease_fraction == 0.0

    def test_velocity_condition_leaves_no_directions(self):
        net = plain_branch(bc_start=VelocityBC(0.1))
        mesh = build_mesh(net, 0.25)
        probe = local_minimality_probe(
            lift_field(mesh).values, mesh, build_psi(darcy_pair()), directions=10
        )
        assert probe.tested_directions == 0
        assert probe.decrease_fraction == 0.0
