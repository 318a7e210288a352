import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from cusplab import analysis, modes
from cusplab.bessel import h_pair
from cusplab.errors import ConfigError, NonContractionError
from cusplab.fields import Field
from cusplab.grid import RadialGrid
from cusplab.model import CuspModel


def square_model():
    return CuspModel(2, np.eye(2), np.array([[1.0]]))


class TestScans:
    def test_against_brute_force(self):
        rng = np.random.default_rng(0)
        sigma = np.sort(rng.uniform(0.0, 40.0, 257))
        sigma = np.linspace(sigma[0], sigma[-1], 257)
        q = rng.normal(size=257) + 1j * rng.normal(size=257)
        R = modes.exp_weighted_revcumsum(sigma, q)
        F = modes.exp_weighted_cumsum(sigma, q)
        Rb = np.array([np.sum(q[i:] * np.exp(sigma[i] - sigma[i:])) for i in range(257)])
        Fb = np.array([np.sum(q[: i + 1] * np.exp(sigma[: i + 1] - sigma[i])) for i in range(257)])
        assert np.max(np.abs(R - Rb)) / np.max(np.abs(Rb)) < 1e-13
        assert np.max(np.abs(F - Fb)) / np.max(np.abs(Fb)) < 1e-13

    def test_huge_exponent_spans_stay_finite(self):
        sigma = np.linspace(0.0, 5000.0, 4096)
        q = np.ones(4096)
        R = modes.exp_weighted_revcumsum(sigma, q)
        F = modes.exp_weighted_cumsum(sigma, q)
        assert np.all(np.isfinite(R)) and np.all(np.isfinite(F))
        # each reduces to a local geometric sum of the step decay
        step = sigma[1] - sigma[0]
        geo = 1.0 / (1.0 - np.exp(-step))
        assert F[-1] == pytest.approx(geo, rel=1e-12)

    def test_cumulative_rules_fourth_order(self):
        import mpmath as mp

        rate = 3.0
        errs_p, errs_q = [], []
        for nn in (200, 400):
            s = np.linspace(1.0, 5.0, nn)
            sigma = rate * s
            y = np.cos(s)
            P = modes._cumulative_down(sigma, y, s[1] - s[0], 0.0)
            Q = modes._cumulative_up(sigma, y, s[1] - s[0])
            i = nn // 3
            pe = float(mp.quad(lambda u: mp.cos(u) * mp.e ** (rate * (s[i] - u)), [s[i], s[-1]]))
            qe = float(mp.quad(lambda u: mp.cos(u) * mp.e ** (rate * (u - s[i])), [s[0], s[i]]))
            errs_p.append(abs(P[i] - pe))
            errs_q.append(abs(Q[i] - qe))
        assert np.log2(errs_p[0] / errs_p[1]) > 3.3
        assert np.log2(errs_q[0] / errs_q[1]) > 3.3


class TestModeSolve:
    def test_homogeneous_solution(self):
        n, lam = 2, np.pi**2
        grid = RadialGrid.make(0.1, 20.0, 2000)
        prob = modes.ModeProblem(n=n, lam=lam, f=np.zeros(len(grid)), v_x0=1.0, grid=grid)
        v = modes.mode_solve(prob).real
        pair = h_pair(n, lam, grid.x)
        ratio = pair.h2_mantissa / pair.h2_mantissa[0] * np.exp(pair.exponent[0] - pair.exponent)
        assert np.max(np.abs(v - ratio)) < 1e-12
        assert v[0] == pytest.approx(1.0, abs=1e-14)

    def test_boundary_value_exact(self):
        n, lam = 2, 2 * np.pi**2
        grid = RadialGrid.make(0.08, 18.0, 1500)
        f = np.sin(grid.s)
        prob = modes.ModeProblem(n=n, lam=lam, f=f, v_x0=0.37, grid=grid)
        v = modes.mode_solve(prob)
        assert v[0].real == pytest.approx(0.37, abs=1e-12)

    def test_decaying_inhomogeneity_residual(self):
        n, lam = 2, np.pi**2
        grid = RadialGrid.make(0.4, 20.0, 80000)
        f = grid.x**3 * np.exp(-np.sqrt(lam) / np.sqrt(grid.x))
        prob = modes.ModeProblem(n=n, lam=lam, f=f, v_x0=0.0, grid=grid)
        v = modes.mode_solve(prob).real
        res = modes.mode_ode_residual(prob, v)
        it = grid.interior(2)
        assert np.max(np.abs(res[it])) / np.max(np.abs(f)) < 1e-6

    @pytest.mark.parametrize("lam_mult", [1.0, 2.0, 10.0])
    def test_inverse_property_random_bounded(self, lam_mult):
        n = 2
        lam = lam_mult * np.pi**2
        grid = RadialGrid.make(0.1, 20.0, 120000)
        rng = np.random.default_rng(int(10 * lam_mult))
        span = grid.s[-1] - grid.s[0]
        f = sum(
            rng.normal() * np.cos(m * np.pi * (grid.s - grid.s[0]) / span) for m in range(1, 5)
        )
        f = f / np.max(np.abs(f))
        prob = modes.ModeProblem(n=n, lam=lam, f=f, v_x0=0.0, grid=grid)
        v = modes.mode_solve(prob).real
        res = modes.mode_ode_residual(prob, v)
        it = grid.interior(2)
        assert np.max(np.abs(res[it])) < 1e-6

    def test_rejects_zero_eigenvalue_and_bad_f(self):
        grid = RadialGrid.make(0.1, 10.0, 100)
        with pytest.raises(ConfigError):
            modes.ModeProblem(n=2, lam=0.0, f=np.zeros(100), v_x0=0.0, grid=grid)
        with pytest.raises(ConfigError):
            modes.ModeProblem(n=2, lam=1.0, f=np.full(100, np.nan), v_x0=0.0, grid=grid)


class TestAssemble:
    def test_pure_boundary_mode(self):
        model = square_model()
        grid = RadialGrid.make(0.1, 18.0, 1200)
        g = Field.zero(grid, 2, 8)
        delta = 1e-3
        out, diag = modes.assemble_representation(
            model, {(1, 0): delta, (-1, 0): delta}, g, lam_max=10 * np.pi**2
        )
        pair = h_pair(2, np.pi**2, grid.x)
        ratio = pair.h2_mantissa / pair.h2_mantissa[0] * np.exp(pair.exponent[0] - pair.exponent)
        assert np.max(np.abs(out.modes[(1, 0)] - delta * ratio)) < 1e-15
        assert diag["tail_indicator"] == 0.0

    def test_operator_inverse_consistency(self):
        # applying the linearized operator recovers the inhomogeneity
        from cusplab import geometry

        model = square_model()
        grid = RadialGrid.make(0.1, 16.0, 30000)
        prof = (grid.x**2 * np.exp(-2.0 / np.sqrt(grid.x))).astype(complex)
        g = Field(grid, {(0, 0): prof, (1, 0): 0.5 * prof, (-1, 0): 0.5 * prof}, 8)
        out, _ = modes.assemble_representation(model, {}, g, lam_max=10 * np.pi**2)
        lg = geometry.linearized_apply(model, out, order=2)
        it = grid.interior(2)
        scale = np.max(np.abs(prof))
        for k in ((0, 0), (1, 0)):
            got = (model.n + 1) * lg.modes[k]
            assert np.max(np.abs(got[it] - g.modes[k][it])) / scale < 1e-5

    def test_real_valuedness_preserved(self):
        model = square_model()
        grid = RadialGrid.make(0.1, 14.0, 800)
        prof = (grid.x**2 * np.exp(-1.0 / np.sqrt(grid.x))).astype(complex)
        g = Field(grid, {(0, 0): prof, (1, 0): (0.3 + 0.1j) * prof, (-1, 0): (0.3 - 0.1j) * prof}, 8)
        out, _ = modes.assemble_representation(model, {}, g, lam_max=5 * np.pi**2)
        assert out.conjugate_symmetry_defect() < 1e-14 * np.max(np.abs(prof))

    def test_truncate_mode_noise(self):
        grid = RadialGrid.make(0.1, 14.0, 100)
        prof = np.exp(-np.arange(100.0)).astype(complex)
        f = Field(grid, {(0, 0): prof}, 8)
        cleaned = modes.truncate_mode_noise(f, floor=1e-14)
        assert cleaned.modes[(0, 0)][-1] == 0.0
        assert cleaned.modes[(0, 0)][0] == prof[0]


class TestPicard:
    def test_zero_boundary_gives_zero(self):
        model = square_model()
        grid = RadialGrid.make(0.05, 12.0, 400)
        u, state = modes.picard_solve(model, {(0, 0): 0.0}, grid, torus_resolution=8, tol=1e-12)
        assert u.sup_norm() < 1e-13
        assert state.iteration == 1

    def test_constant_boundary_reaches_tangent_cone(self):
        model = square_model()
        grid = RadialGrid.make(0.05, 20.0, 2500)
        c = 0.2
        beta = -3 * np.log1p(c * grid.x0)
        u, state = modes.picard_solve(
            model, {(0, 0): beta}, grid, torus_resolution=8, tol=1e-12, max_iter=40
        )
        exact = -3 * np.log1p(c * grid.x)
        assert np.max(np.abs(u.radial_mean() - exact)) < 1e-7
        c_fit, rms = modes.extract_tangent_cone(u, 2)
        assert c_fit == pytest.approx(c, abs=1e-6)
        # contraction history nonincreasing after the first two sweeps
        hist = state.contraction_history
        assert all(hist[i + 1] <= hist[i] for i in range(1, len(hist) - 1))

    def test_contraction_scales_with_amplitude(self):
        # the contraction factor after the second sweep grows linearly with
        # the boundary amplitude
        model = square_model()
        grid = RadialGrid.make(0.05, 14.0, 800)
        rhos = []
        for amp in (1e-4, 1e-3, 1e-2):
            beta = -3 * np.log1p(amp * grid.x0)
            _, state = modes.picard_solve(
                model, {(0, 0): beta}, grid, torus_resolution=8, tol=1e-14, max_iter=25
            )
            hist = state.contraction_history
            rhos.append(hist[1] / hist[0])
        slope = np.polyfit(np.log([1e-4, 1e-3, 1e-2]), np.log(rhos), 1)[0]
        assert slope == pytest.approx(1.0, abs=0.15)

    def test_tail_tolerance_enforced(self):
        from cusplab.errors import ModeTailError

        model = square_model()
        grid = RadialGrid.make(0.1, 14.0, 600)
        prof = (grid.x**2 * np.exp(-1.0 / np.sqrt(grid.x))).astype(complex)
        g = Field(grid, {(0, 0): prof, (3, 3): prof, (-3, -3): prof}, 8)
        with pytest.raises(ModeTailError):
            modes.assemble_representation(model, {}, g, lam_max=5 * np.pi**2, tail_tol=1e-10)

    def test_boundary_symmetry_required(self):
        model = square_model()
        grid = RadialGrid.make(0.05, 12.0, 300)
        with pytest.raises(ConfigError):
            modes.picard_solve(model, {(1, 0): 1e-3}, grid, torus_resolution=8)

    def test_large_boundary_fails_loudly(self):
        model = square_model()
        grid = RadialGrid.make(0.05, 12.0, 600)
        with pytest.raises(Exception):
            modes.picard_solve(
                model, {(0, 0): 40.0}, grid, torus_resolution=8, tol=1e-12, max_iter=8
            )


class TestExtractTangentCone:
    def test_exact_member_of_family(self):
        grid = RadialGrid.make(0.1, 25.0, 2000)
        u = Field.from_radial(grid, -3 * np.log1p(0.37 * grid.x), 2, 8)
        c, rms = modes.extract_tangent_cone(u, 2)
        assert c == pytest.approx(0.37, abs=1e-9)
        assert rms < 1e-12

    def test_mode_content_ignored(self):
        grid = RadialGrid.make(0.1, 25.0, 2000)
        pair = h_pair(2, np.pi**2, grid.x)
        h2 = pair.h2_mantissa / pair.h2_mantissa[0] * np.exp(pair.exponent[0] - pair.exponent)
        u = Field(
            grid,
            {
                (0, 0): (-3 * np.log1p(0.37 * grid.x)).astype(complex),
                (1, 0): 0.5e-3 * h2.astype(complex),
                (-1, 0): 0.5e-3 * h2.astype(complex),
            },
            8,
        )
        c, _ = modes.extract_tangent_cone(u, 2)
        assert c == pytest.approx(0.37, abs=1e-8)


class TestStructure:
    def test_remainder_proportional_to_kernel(self):
        # the first-eigenvalue remainder tracks H2 pointwise within 1% over
        # the observation window
        model = square_model()
        grid = RadialGrid.make(0.05, 34.0, 2400)
        amp = 1e-3
        u, state = modes.picard_solve(
            model,
            {(1, 0): amp / 2, (-1, 0): amp / 2},
            grid,
            torus_resolution=16,
            cutoff=25.0,
            tol=1e-11,
        )
        lam1 = state.diagnostics["lambda1"]
        prof = np.abs(u.modes[(1, 0)])
        pair = h_pair(2, lam1, grid.x)
        h2_rel = pair.h2_mantissa / pair.h2_mantissa[0] * np.exp(pair.exponent[0] - pair.exponent)
        lo, hi = analysis.window_from_s(lam1, 40.0, 200.0)
        mask = (grid.x >= lo) & (grid.x <= hi)
        ratio = prof[mask] / h2_rel[mask]
        assert (np.max(ratio) - np.min(ratio)) / np.mean(ratio) < 0.01

    def test_rate_tracks_first_eigenvalue(self):
        # on the rectangular torus Z + 2iZ the first eigenvalue drops to
        # pi^2/4 and the fitted exponential coefficient follows it
        from cusplab import spectrum

        model = CuspModel(2, np.diag([1.0, 2.0]), np.array([[1.0]]))
        lam1 = spectrum.first_eigenvalue(model)
        assert lam1 == pytest.approx(np.pi**2 / 4)
        grid = RadialGrid.make(0.05, 70.0, 5000)
        amp = 1e-3
        u, state = modes.picard_solve(
            model,
            {(0, 1): amp / 2, (0, -1): amp / 2},
            grid,
            torus_resolution=16,
            cutoff=25.0,
            tol=1e-11,
        )
        assert state.diagnostics["residual_sup"] < 1e-7
        prof = np.abs(u.modes[(0, 1)])
        fit = analysis.decay_fit(
            grid.x, prof, analysis.window_from_s(lam1, 40.0, 200.0), mode="free_delta"
        )
        target = 2.0 * np.sqrt(lam1)
        assert abs(fit.delta - target) / target < 0.02
        assert abs(fit.p - (-0.75)) < 0.1

    def test_scale_equivariance(self):
        # shifting the bundle scale maps solutions to solutions after the
        # radial reparametrization x -> x/(1+cx)
        model = square_model()
        c = 0.2
        x0 = 0.05
        beta0 = -3 * np.log1p(0.15 * x0)
        grid1 = RadialGrid.make(x0, 22.0, 3000)
        u1, _ = modes.picard_solve(
            model, {(0, 0): beta0}, grid1, torus_resolution=8, tol=1e-12
        )
        x0s = x0 / (1 + c * x0)
        beta0s = beta0 + 3 * np.log1p(c * x0)
        grid2 = RadialGrid.make(x0s, np.sqrt(22.0**2 + c) + 0.5, 3000)
        u2, _ = modes.picard_solve(
            model, {(0, 0): beta0s}, grid2, torus_resolution=8, tol=1e-12
        )
        # compare u1(x) with u2(x*) - 3 log(1+cx) on the common deep range
        xs = grid1.x
        x_star = xs / (1 + c * xs)
        spline = CubicSpline(grid2.s[::1], u2.radial_mean())
        u2_at = spline(1.0 / np.sqrt(x_star))
        mapped = u2_at - 3 * np.log1p(c * xs)
        mask = (x_star > grid2.x[-1]) & (x_star < grid2.x[0])
        err = np.max(np.abs(mapped[mask] - u1.radial_mean()[mask]))
        assert err < 1e-6
