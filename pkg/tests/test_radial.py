import numpy as np
import pytest

from cusplab import geometry, radial
from cusplab.errors import ConfigError, DecayPreconditionError, NumericalError
from cusplab.fields import Field
from cusplab.grid import RadialGrid


class TestCalabi:
    def test_standard_solution_b0(self):
        n = 2
        traj = radial.integrate_calabi(
            n, a=float(np.log((n + 1) ** n)), b=0.0, t0=-1.0, t_end=-50.0, tol=1e-13
        )
        exact = -(n + 1) * np.log(-traj.t_nodes)
        assert np.max(np.abs(traj.psi - exact)) < 1e-8
        assert traj.first_integral_drift() < 1e-10

    def test_conical_approach_rate(self):
        # psi'(t) - c = O(e^{c t}) with c = 1 at b = 1/(n+1)
        n = 2
        traj = radial.integrate_calabi(n, 0.0, 1.0 / (n + 1), t0=-1.0, t_end=-30.0, tol=1e-13)
        mask = (traj.t_nodes < -5) & (traj.t_nodes > -25)
        slope = np.polyfit(traj.t_nodes[mask], np.log(traj.psi_prime[mask] - 1.0), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.05)
        assert np.all(traj.psi_prime > 1.0)

    def test_ode_residual_finite_differences(self):
        n = 2
        traj = radial.integrate_calabi(
            n, 0.0, 0.5, t0=-1.0, t_end=-20.0, tol=1e-13, num_nodes=60000
        )
        assert traj.ode_residual() < 1e-6

    def test_negative_b_breakdown_reported(self):
        traj = radial.integrate_calabi(2, 0.0, -0.5, t0=-1.0, t_end=-50.0, tol=1e-12)
        assert traj.breakdown_t is not None
        assert -50.0 < traj.breakdown_t < -1.0
        assert traj.t_nodes[-1] >= traj.breakdown_t - 1e-6

    def test_initial_positivity_required(self):
        with pytest.raises(ConfigError):
            radial.integrate_calabi(2, 0.0, -2.0, t0=-1.0, t_end=-10.0, psi0=0.0)


class TestConeAngle:
    def test_unit_angle(self):
        n = 2
        angle, emp = radial.cone_angle(n, 1.0 / (n + 1))
        assert angle == pytest.approx(2 * np.pi, rel=1e-12)
        assert emp == pytest.approx(1.0, abs=1e-3)

    def test_closed_form_and_empirical(self):
        angle, emp = radial.cone_angle(2, 3.0)
        c = 9.0 ** (1.0 / 3.0)
        assert angle == pytest.approx(2 * np.pi * c, rel=1e-12)
        assert abs(emp - c) / c < 1e-3

    def test_monotone_in_b(self):
        angles = [radial.cone_angle(2, b)[0] for b in (0.5, 1.0, 2.0)]
        assert angles[0] < angles[1] < angles[2]

    def test_rejects_nonpositive(self):
        with pytest.raises(ConfigError):
            radial.cone_angle(2, 0.0)


class TestVolumeRatio:
    def test_flat_is_one(self):
        x = np.linspace(0.01, 0.3, 20)
        zero = np.zeros_like(x)
        assert np.allclose(radial.radial_volume_ratio(2, x, zero, zero, zero), 1.0)

    def test_tangent_cone_exponential(self):
        # psi = -(n+1) log(1+cx) gives exactly e^psi with analytic derivatives
        n, c = 2, 0.3
        x = np.linspace(0.005, 0.4, 50)
        psi = -(n + 1) * np.log1p(c * x)
        psi_x = -(n + 1) * c / (1 + c * x)
        psi_xx = (n + 1) * c**2 / (1 + c * x) ** 2
        ratio = radial.radial_volume_ratio(n, x, psi, psi_x, psi_xx)
        assert np.max(np.abs(ratio - np.exp(psi)) / np.exp(psi)) < 1e-13

    def test_agrees_with_determinant_route(self):
        # same finite-difference derivatives through two independent formulas
        n = 2
        m = __import__("cusplab.model", fromlist=["CuspModel"]).CuspModel(
            n, np.eye(2), np.array([[1.0]])
        )
        grid = RadialGrid.make(0.1, 8.0, 2000)
        psi = -3 * np.log1p(0.25 * grid.x)
        ratio = radial.volume_ratio_on_grid(n, grid, psi, order=2)
        f = Field.from_radial(grid, psi, 2, 4)
        mres = geometry.monge_ampere_residual(m, f).radial_mean()
        ratio_det = np.exp(mres + psi)
        it = grid.interior(2)
        assert np.max(np.abs(ratio[it] - ratio_det[it])) < 1e-8

    def test_degenerate_factor_raises(self):
        x = np.array([0.5])
        with pytest.raises(NumericalError):
            radial.radial_volume_ratio(2, x, np.array([0.0]), np.array([-10.0]), np.array([0.0]))


class TestExpansion:
    def test_reference_coefficients(self):
        series = radial.expand_formal(2, -3.0, 4)
        assert series.coeffs[2] == pytest.approx(1.5, rel=1e-14)
        assert series.coeffs[3] == pytest.approx(-1.0, rel=1e-14)
        assert series.coeffs[4] == pytest.approx(0.75, rel=1e-14)

    def test_zero_leading_coefficient(self):
        series = radial.expand_formal(2, 0.0, 10)
        assert np.all(series.coeffs == 0)

    def test_idempotent_under_extension(self):
        a = radial.expand_formal(3, -1.7, 10).coeffs
        b = radial.expand_formal(3, -1.7, 20).coeffs
        assert np.array_equal(a, b[:11])

    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("c", [0.1, 0.5, 2.0])
    def test_matches_closed_form(self, n, c):
        series = radial.expand_formal(n, -(n + 1) * c, 20)
        target = radial.tangent_cone_coefficients(n, c, 20)
        rel = np.abs(series.coeffs[1:] - target[1:]) / np.abs(target[1:])
        assert np.max(rel) < 1e-12

    def test_equation_residual_cancels(self):
        series = radial.expand_formal(2, -2.4, 20)
        k = np.arange(21.0)
        scale = np.max(np.abs((k - 1) * (k + 3) * series.coeffs))
        assert radial.series_equation_residual(series) / scale < 1e-8


class TestZeroModeKernel:
    def test_homogeneous_case(self):
        grid = RadialGrid.make(0.1, 20.0, 500)
        u, _ = radial.radial_rep_l0(2, grid, np.zeros(len(grid)), u_x0=0.7)
        assert np.allclose(u, 0.7 * grid.x / grid.x0, atol=1e-14)

    def test_quadratic_inhomogeneity_residual(self):
        n = 2
        grid = RadialGrid.make(0.1, 30.0, 12000)
        g = grid.x**2
        u, _ = radial.radial_rep_l0(n, grid, g, u_x0=0.0)
        ux, uxx = grid.deriv_x(u, order=4)
        res = grid.x**2 * uxx + 3 * grid.x * ux - 3 * u - g
        it = grid.interior(4)
        assert np.max(np.abs(res[it])) / np.max(np.abs(g)) < 1e-8

    def test_split_remainder_is_quadratic(self):
        # subtracting the linear part leaves exactly x^2/(n+3) for g = x^2
        n = 2
        grid = RadialGrid.make(0.1, 30.0, 6000)
        g = grid.x**2
        u, coeff = radial.radial_rep_l0(n, grid, g, u_x0=0.0)
        rem = u - coeff * grid.x
        target = grid.x**2 / (n + 3)
        assert np.max(np.abs(rem - target)) / np.max(target) < 1e-8

    def test_residual_refinement_order(self):
        n = 2
        sups = []
        for num in (3000, 6000):
            grid = RadialGrid.make(0.1, 30.0, num)
            g = grid.x**2
            u, _ = radial.radial_rep_l0(n, grid, g, u_x0=0.0)
            ux, uxx = grid.deriv_x(u, order=2)
            res = grid.x**2 * uxx + 3 * grid.x * ux - 3 * u - g
            it = grid.interior(2)
            sups.append(np.max(np.abs(res[it])))
        assert np.log2(sups[0] / sups[1]) >= 1.9

    def test_decay_precondition_enforced(self):
        grid = RadialGrid.make(0.1, 30.0, 1000)
        slow = grid.x**0.5  # decays too slowly for the t^{-2} integral
        with pytest.raises(DecayPreconditionError):
            radial.radial_rep_l0(2, grid, slow, u_x0=0.0)


def test_cumulative_integral_order():
    errs = []
    for num in (200, 400):
        s = np.linspace(1.0, 4.0, num)
        y = np.sin(3 * s)
        got = radial.cumulative_integral(s, y)
        exact = (np.cos(3.0) - np.cos(3 * s)) / 3.0
        errs.append(np.max(np.abs(got - exact)))
    assert np.log2(errs[0] / errs[1]) > 3.5
