"""Tests for the radial mode engine.

Covers metric profiles, angular-mode coefficients, endpoint
classification, eigenfunction solves against closed forms, batched
eigenfunction tables, truncated Neumann spectra with weights, and the
1-D heat kernel built from a discrete spectral source.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import simpson
from scipy.special import gamma as scipy_gamma, jv

from conekit import specfun
from conekit.errors import ConfigError, NumericsError
from conekit.sl_engine import (
    DiscreteSpectrum,
    MetricProfile,
    SLProblem,
    build_cone_problem,
    classify_endpoint,
    eigenfunction_table,
    heat_kernel_1d,
    solve_eigenfunction,
    solve_initial_value,
    truncated_spectrum,
)

from oracles import (
    cosh_profile_spectrum,
    flat_half_line_heat_kernel,
    sqrt_profile_c_by_quadrature,
)


# ----------------------------------------------------------------------
# shared profiles / problems
# ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def sqrt_profile():
    return MetricProfile.power(0.5)


@pytest.fixture(scope="module")
def flat_profile():
    return MetricProfile.constant()


@pytest.fixture(scope="module")
def sqrt_k0(sqrt_profile):
    prob, _ = build_cone_problem(sqrt_profile, 0)
    return prob


@pytest.fixture(scope="module")
def sqrt_k1(sqrt_profile):
    prob, _ = build_cone_problem(sqrt_profile, 1)
    return prob


@pytest.fixture(scope="module")
def flat_k0(flat_profile):
    prob, _ = build_cone_problem(flat_profile, 0)
    return prob


@pytest.fixture(scope="module")
def flat_k1(flat_profile):
    prob, _ = build_cone_problem(flat_profile, 1)
    return prob


@pytest.fixture(scope="module")
def flat_k0_spectrum(flat_k0):
    """Neumann spectrum of the flat half-line on [0, 12]."""
    return truncated_spectrum(flat_k0, 12.0, 150)


# ----------------------------------------------------------------------
# metric profiles
# ----------------------------------------------------------------------

class TestMetricProfile:
    def test_power_closed_forms(self):
        prof = MetricProfile.power(0.5)
        x = np.array([0.25, 1.0, 2.0, 4.0])
        assert np.allclose(prof.A(x), np.sqrt(x), rtol=1e-13)
        assert np.allclose(prof.A_prime(x), 0.5 / np.sqrt(x), rtol=1e-13)
        assert np.allclose(prof.c(x), 2.0 * np.sqrt(x), rtol=1e-13)
        assert np.allclose(prof.phi(x), 0.5 / x, rtol=1e-13)

    def test_power_c_matches_quadrature(self):
        prof = MetricProfile.power(0.5)
        ref = sqrt_profile_c_by_quadrature(1.0)
        got = float(prof.c(np.array([1.0]))[0])
        assert abs(got - ref) <= 1e-12
        assert abs(got - 2.0) <= 1e-12

    def test_constant_closed_forms(self):
        prof = MetricProfile.constant()
        x = np.array([0.0, 0.5, 3.0])
        assert np.array_equal(prof.A(x), np.ones(3))
        assert np.array_equal(prof.A_prime(x), np.zeros(3))
        assert np.allclose(prof.c(x), x, rtol=0, atol=1e-15)
        assert np.array_equal(prof.phi(x), np.zeros(3))

    def test_affine_square_closed_forms(self):
        prof = MetricProfile.affine_square()
        x = np.array([0.5, 1.0, 2.0])
        assert np.allclose(prof.A(x), (1 + x) ** 2, rtol=1e-13)
        assert np.allclose(prof.A_prime(x), 2 * (1 + x), rtol=1e-13)
        assert np.allclose(prof.c(x), x / (1 + x), rtol=1e-13)
        assert np.allclose(prof.phi(x), 2 / (1 + x), rtol=1e-13)

    def test_sinh_cosh_closed_forms(self):
        alpha, beta = -0.25, -0.4
        prof = MetricProfile.sinh_cosh(alpha, beta)
        x = np.array([0.5, 1.5])
        ref = np.sinh(x) ** (2 * alpha + 1) * np.cosh(x) ** (2 * beta + 1)
        assert np.allclose(prof.A(x), ref, rtol=1e-12)
        # phi = A'/A = (2a+1) coth x + (2b+1) tanh x
        ref_phi = (2 * alpha + 1) / np.tanh(x) + (2 * beta + 1) * np.tanh(x)
        assert np.allclose(prof.phi(x), ref_phi, rtol=1e-10)

    def test_exp_bump_values(self):
        prof = MetricProfile.exp_bump(2.0, height=1.0)
        # int_0^1 (1 - (y/2)^2)^2 dy = 1 - 1/6 + 1/80
        assert float(prof.A(np.array([1.0]))[0]) == pytest.approx(
            math.exp(1 - 1 / 6 + 1 / 80), rel=1e-12
        )
        assert float(prof.phi(np.array([1.0]))[0]) == pytest.approx(0.5625, abs=1e-13)
        assert float(prof.phi(np.array([0.0]))[0]) == pytest.approx(1.0, abs=1e-13)

    def test_exp_bump_constant_beyond_support(self):
        prof = MetricProfile.exp_bump(2.0, height=1.0)
        plateau = math.exp(16.0 / 15.0)  # total bump mass 8 h S / 15
        for xq in (2.0, 2.5, 3.0, 7.0):
            assert float(prof.A(np.array([xq]))[0]) == pytest.approx(plateau, rel=1e-12)
        assert float(prof.A_prime(np.array([3.0]))[0]) == 0.0
        assert float(prof.phi(np.array([3.0]))[0]) == 0.0
        # c grows linearly with slope 1/plateau past the bump
        c_vals = prof.c(np.array([2.5, 3.0]))
        assert c_vals[1] - c_vals[0] == pytest.approx(0.5 / plateau, abs=1e-9)

    def test_tabulated_matches_analytic(self):
        xg = np.linspace(0.0, 6.0, 601)
        tab = MetricProfile.tabulated(xg, (1.0 + xg) ** 2)
        xs = np.linspace(0.2, 5.0, 40)
        assert np.max(np.abs(tab.A(xs) - (1 + xs) ** 2)) <= 1e-7
        assert np.max(np.abs(tab.c(xs) - xs / (1 + xs))) <= 2e-6
        assert np.max(np.abs(tab.phi(xs) - 2.0 / (1 + xs))) <= 1e-4

    def test_tabulated_eigenfunction_matches_analytic(self):
        xg = np.linspace(0.0, 6.0, 601)
        tab = MetricProfile.tabulated(xg, (1.0 + xg) ** 2)
        prob_t, _ = build_cone_problem(tab, 1)
        prob_a, _ = build_cone_problem(MetricProfile.affine_square(), 1)
        sol_t = solve_eigenfunction(prob_t, 6.0, 4.0)
        sol_a = solve_eigenfunction(prob_a, 6.0, 4.0)
        assert np.max(np.abs(sol_t.v_tilde - sol_a.v_tilde)) <= 1e-7

    @pytest.mark.parametrize(
        "factory",
        [
            lambda: MetricProfile.power(1.2),
            lambda: MetricProfile.power(-0.2),
            lambda: MetricProfile.sinh_cosh(0.2, -0.4),
            lambda: MetricProfile.sinh_cosh(-0.25, -0.7),
            lambda: MetricProfile.exp_bump(-1.0),
            # A'/A increasing is rejected
            lambda: MetricProfile.tabulated(
                np.linspace(0, 4, 401), np.exp(np.linspace(0, 4, 401) ** 2)
            ),
            # vanishing axis value is rejected for tables
            lambda: MetricProfile.tabulated(
                np.linspace(0, 4, 401), np.sqrt(np.linspace(0, 4, 401))
            ),
            # grid must start at the axis
            lambda: MetricProfile.tabulated(
                np.linspace(1, 4, 31), np.ones(31)
            ),
            lambda: MetricProfile.tabulated(np.array([0.0, 1.0]), np.array([1.0, 1.0])),
        ],
    )
    def test_invalid_profiles_rejected(self, factory):
        with pytest.raises(ConfigError):
            factory()


# ----------------------------------------------------------------------
# mode coefficients and weight function B_k
# ----------------------------------------------------------------------

class TestBuildConeProblem:
    def test_k0_weight_equals_metric(self, sqrt_k0):
        x = np.array([0.3, 1.0, 2.5])
        assert np.allclose(sqrt_k0.p(x), np.sqrt(x), rtol=1e-13)
        assert np.allclose(sqrt_k0.r(x), np.sqrt(x), rtol=1e-13)
        assert sqrt_k0.is_cone
        assert sqrt_k0.coeffs.kappa == 0.0

    def test_flat_k1_weight_closed_form(self, flat_k1):
        x = np.array([0.3, 0.7, 1.2])
        assert np.allclose(flat_k1.p(x), np.cosh(2 * np.pi * x) ** 2, rtol=1e-12)
        eta = flat_k1.coeffs.eta(x)
        assert np.allclose(eta, 4 * np.pi * np.tanh(2 * np.pi * x), rtol=1e-12)
        # psi = eta for a constant metric (phi = 0)
        assert np.allclose(flat_k1.psi(x), eta, rtol=1e-12)

    def test_sqrt_k1_weight_against_quadrature(self, sqrt_k1):
        c1 = sqrt_profile_c_by_quadrature(1.0)
        ref = math.sqrt(1.0) * math.cosh(2 * math.pi * c1) ** 2
        got = float(sqrt_k1.p(np.array([1.0]))[0])
        assert got == pytest.approx(ref, rel=1e-10)
        assert got == pytest.approx(20556578896.898727, rel=1e-10)

    def test_log_zeta_overflow_safe(self, flat_k1):
        # log cosh(y) = y - log 2 + O(e^{-2y})
        got = float(flat_k1.coeffs.log_zeta(np.array([30.0]))[0])
        assert got == pytest.approx(60 * math.pi - math.log(2.0), abs=1e-10)


# ----------------------------------------------------------------------
# endpoint classification
# ----------------------------------------------------------------------

class TestClassifyEndpoint:
    def test_sqrt_axis_regular(self, sqrt_k0):
        cl = classify_endpoint(sqrt_k0, "a", 1.0)
        assert cl.kind == "regular"
        assert cl.i_value == pytest.approx(1.0, rel=1e-9)
        assert cl.j_value == pytest.approx(1.0 / 3.0, rel=1e-9)

    def test_power075_axis_regular(self):
        prob, _ = build_cone_problem(MetricProfile.power(0.75), 0)
        cl = classify_endpoint(prob, "a", 1.0)
        assert cl.kind == "regular"
        assert cl.i_value == pytest.approx(2.0, rel=1e-9)
        assert cl.j_value == pytest.approx(2.0 / 7.0, rel=1e-9)

    def test_generic_x15_axis_entrance(self):
        # p = r = x^{3/2} at the origin is entrance: foot integral
        # diverges, nested one is 1/5
        prob = SLProblem(
            p=lambda x: np.asarray(x) ** 1.5,
            r=lambda x: np.asarray(x) ** 1.5,
            a=0.0,
            b=math.inf,
        )
        cl = classify_endpoint(prob, "a", 1.0)
        assert cl.kind == "entrance"
        assert math.isinf(cl.i_value)
        assert cl.j_value == pytest.approx(0.2, rel=1e-8)

    def test_infinite_ends_natural(self, flat_k1):
        cl = classify_endpoint(flat_k1, "b", 1.0)
        assert cl.kind == "natural"
        assert math.isinf(cl.i_value) and math.isinf(cl.j_value)

    def test_affine_square_infinity_natural(self):
        prob, _ = build_cone_problem(MetricProfile.affine_square(), 0)
        assert classify_endpoint(prob, "b", 1.0).kind == "natural"


# ----------------------------------------------------------------------
# eigenfunction solves against closed forms
# ----------------------------------------------------------------------

class TestSolveEigenfunction:
    def test_lambda_zero_exact(self, sqrt_k1):
        sol = solve_eigenfunction(sqrt_k1, 0.0, 5.0)
        assert np.array_equal(sol.v_tilde, np.ones_like(sol.grid))
        assert np.array_equal(sol.quasi_derivative, np.zeros_like(sol.grid))
        assert np.array_equal(sol.error_estimate, np.zeros_like(sol.grid))

    @pytest.mark.parametrize("beta", [0.3, 0.5, 0.7])
    def test_power_profile_is_normalized_bessel(self, beta):
        prob, _ = build_cone_problem(MetricProfile.power(beta), 0)
        lam = 2.25
        sol = solve_eigenfunction(prob, lam, 4.0)
        x = sol.grid[1:]
        alpha = (beta - 1.0) / 2.0
        z = x * math.sqrt(lam)
        ref = scipy_gamma(alpha + 1) * (2.0 / z) ** alpha * jv(alpha, z)
        assert np.max(np.abs(sol.v_tilde[1:] - ref)) <= 2e-8
        assert sol.v_tilde[0] == pytest.approx(1.0, abs=1e-12)

    def test_flat_k1_closed_form(self, flat_k1):
        lam = 4 * math.pi ** 2 + 4.0
        sol = solve_eigenfunction(flat_k1, lam, 3.0)
        x = sol.grid[1:]
        ref = np.cos(2.0 * x) / np.cosh(2 * np.pi * x)
        assert np.max(np.abs(sol.v_tilde[1:] - ref)) <= 1e-8

    def test_affine_square_closed_form(self):
        prob, _ = build_cone_problem(MetricProfile.affine_square(), 0)
        lam = 4.0
        sol = solve_eigenfunction(prob, lam, 5.0)
        x = sol.grid[1:]
        tau = math.sqrt(lam)
        ref = (np.cos(tau * x) + np.sin(tau * x) / tau) / (1.0 + x)
        assert np.max(np.abs(sol.v_tilde[1:] - ref)) <= 1e-8

    def test_sinh_cosh_profile_is_jacobi_function(self):
        alpha, beta = -0.25, -0.4
        prof = MetricProfile.sinh_cosh(alpha, beta)
        prob, _ = build_cone_problem(prof, 0)
        rho = alpha + beta + 1.0
        tau = 1.5
        sol = solve_eigenfunction(prob, tau * tau + rho * rho, 3.0)
        ref = np.array(
            [specfun.jacobi_function(alpha, beta, tau, xx).real for xx in sol.grid]
        )
        assert np.max(np.abs(sol.v_tilde - ref)) <= 1e-8

    def test_error_estimate_reported(self, sqrt_k0):
        sol = solve_eigenfunction(sqrt_k0, 3.0, 4.0)
        assert np.all(sol.error_estimate >= 0.0)
        assert np.max(sol.error_estimate) <= 1e-6

    def test_mode_growth_cap_guard(self, flat_profile):
        prob, _ = build_cone_problem(flat_profile, 2)
        with pytest.raises(NumericsError):
            solve_eigenfunction(prob, 200.0, 30.0)


class TestWhittakerCrossCheck:
    def test_sqrt_profile_value_at_one(self, sqrt_k1):
        """Mode-1 eigenfunction of the square-root metric at x = 1 against
        the normalized Whittaker-M closed form."""
        lam = 1.0
        sol = solve_eigenfunction(sqrt_k1, lam, 1.0, n_grid=11)
        got = sol.v_tilde[-1]
        kw = 2.0 * math.pi ** 2 * 1j / math.sqrt(lam)
        m_val = specfun.whittaker_m_normalized(kw, -0.25, 2j * math.sqrt(lam))
        zeta1 = math.cosh(2 * math.pi * 2.0)  # c(1) = 2
        ref = (m_val / zeta1).real
        assert ref == pytest.approx(0.9537438089083935, abs=1e-12)
        assert abs(got - ref) <= 1e-8


# ----------------------------------------------------------------------
# batched eigenfunction tables
# ----------------------------------------------------------------------

class TestEigenfunctionTable:
    def test_matches_adaptive_solver_real(self, sqrt_k1):
        lams = np.array([8.0, 20.0])
        x_pts = np.array([0.4, 1.2, 2.8, 3.6])
        V, U = eigenfunction_table(sqrt_k1, lams, x_pts)
        for i, lam in enumerate(lams):
            # compare at grid points shared with the adaptive run
            sol = solve_eigenfunction(sqrt_k1, lam, 4.0, tol=1e-12, n_grid=41)
            idx = [np.argmin(np.abs(sol.grid - xp)) for xp in x_pts]
            assert np.allclose(sol.grid[idx], x_pts, atol=1e-12)
            assert np.max(np.abs(V[i] - sol.v_tilde[idx])) <= 5e-8

    def test_matches_adaptive_solver_complex(self, sqrt_k1):
        lam = 2.0 + 1.5j
        x_pts = np.array([0.5, 1.5, 2.5])
        V, U = eigenfunction_table(sqrt_k1, np.array([lam]), x_pts)
        sol = solve_eigenfunction(sqrt_k1, lam, 2.5, tol=1e-12, n_grid=26)
        idx = [np.argmin(np.abs(sol.grid - xp)) for xp in x_pts]
        assert np.max(np.abs(V[0] - sol.v_tilde[idx])) <= 5e-8

    def test_lambda_zero_column_exact(self, sqrt_k0):
        V, U = eigenfunction_table(sqrt_k0, np.array([0.0, 4.0]), np.array([0.5, 2.0]))
        assert np.array_equal(V[0], np.ones(2))
        assert np.array_equal(U[0], np.zeros(2))

    def test_unsorted_grid_preserves_order(self, sqrt_k0):
        xs = np.array([2.0, 0.5, 3.5, 1.0])
        V_u, _ = eigenfunction_table(sqrt_k0, np.array([4.0]), xs)
        V_s, _ = eigenfunction_table(sqrt_k0, np.array([4.0]), np.sort(xs))
        inv = np.argsort(np.argsort(xs))
        assert np.allclose(V_u[0], V_s[0][inv], rtol=0, atol=1e-14)


# ----------------------------------------------------------------------
# truncated spectra
# ----------------------------------------------------------------------

class TestTruncatedSpectrum:
    def test_flat_k0_exact(self, flat_k0):
        L = 10.0
        spec = truncated_spectrum(flat_k0, L, 12)
        j = np.arange(13)
        ref = (j * np.pi / L) ** 2
        assert spec.eigenvalues[0] == 0.0
        assert np.max(np.abs(spec.eigenvalues[1:] - ref[1:]) / ref[1:]) <= 1e-9
        assert spec.weights[0] == pytest.approx(1.0 / L, abs=1e-12)
        assert np.max(np.abs(spec.weights[1:] - 2.0 / L)) <= 1e-6

    def test_flat_k1_against_transcendental_oracle(self, flat_k1):
        L = 10.0
        spec = truncated_spectrum(flat_k1, L, 6)
        lam_ref, w_ref = cosh_profile_spectrum(L, 6)
        assert len(spec.eigenvalues) == len(lam_ref) == 7
        # frozen oracle values for the first excited state
        assert lam_ref[1] == pytest.approx(39.503895992260446, rel=1e-12)
        assert w_ref[1] == pytest.approx(0.20323245889447955, rel=1e-12)
        assert spec.eigenvalues[0] == 0.0
        rel_eig = np.abs(spec.eigenvalues[1:] - lam_ref[1:]) / lam_ref[1:]
        assert np.max(rel_eig) <= 1e-6
        rel_w = np.abs(spec.weights - w_ref) / w_ref
        assert np.max(rel_w) <= 5e-5

    def test_sqrt_profile_weights_match_density(self, sqrt_k0):
        """Binned truncated weights against the continuum spectral density
        2^{-3/2} pi^{-2} lam^{-1/4} |Gamma(1/4 - 2 i k^2 pi^2 / sqrt(lam))|^2
        at k = 0, where |Gamma(1/4)|^2 makes it c0 * lam^{-1/4}."""
        L = 40.0
        spec = truncated_spectrum(sqrt_k0, L, 75)  # reaches lam ~ 35
        c0 = 2.0 ** -1.5 * math.pi ** -2 * scipy_gamma(0.25) ** 2
        lo, hi = 1.0, 30.0

        lams = spec.eigenvalues
        mid = np.sqrt(lams)
        # candidate bin edges at sqrt-midpoints between adjacent atoms
        snap = (0.5 * (mid[1:] + mid[:-1])) ** 2
        edges = np.linspace(lo, hi, 5)
        snapped = [edges[0]]
        for e in edges[1:]:
            snapped.append(snap[np.argmin(np.abs(snap - e))])
        for b0, b1 in zip(snapped[:-1], snapped[1:]):
            sel = (lams >= b0) & (lams < b1)
            got = float(np.sum(spec.weights[sel]))
            # integral of c0 lam^{-1/4}
            ref = c0 * (4.0 / 3.0) * (b1 ** 0.75 - b0 ** 0.75)
            assert abs(got - ref) / ref <= 0.02

    def test_spectrum_shape_invariants(self, flat_k0_spectrum):
        spec = flat_k0_spectrum
        assert isinstance(spec, DiscreteSpectrum)
        assert np.all(np.diff(spec.eigenvalues) > 0)
        assert np.all(spec.weights > 0)
        assert spec.eigenvalues[0] == 0.0

    def test_malformed_spectrum_rejected(self, flat_k0):
        with pytest.raises(NumericsError):
            DiscreteSpectrum(
                problem=flat_k0,
                L=5.0,
                eigenvalues=np.array([0.0, 2.0, 1.0]),
                weights=np.array([0.2, 0.2, 0.2]),
            )
        with pytest.raises(NumericsError):
            DiscreteSpectrum(
                problem=flat_k0,
                L=5.0,
                eigenvalues=np.array([0.0, 1.0]),
                weights=np.array([0.2, -0.1]),
            )


# ----------------------------------------------------------------------
# 1-D heat kernel
# ----------------------------------------------------------------------

class TestHeatKernel1D:
    def test_flat_on_diagonal_at_axis(self, flat_k0_spectrum):
        t = 0.25
        got = heat_kernel_1d(flat_k0_spectrum, t, 0.0, 0.0)
        assert abs(got - 1.0 / math.sqrt(math.pi * t)) <= 1e-9

    def test_flat_against_image_oracle(self, flat_k0_spectrum):
        t = 0.25
        got = heat_kernel_1d(flat_k0_spectrum, t, 0.7, 1.3)
        ref = flat_half_line_heat_kernel(t, 0.7, 1.3)
        assert abs(got - ref) <= 1e-9

    def test_large_time_limit_is_ground_mass(self, flat_k0_spectrum):
        got = heat_kernel_1d(flat_k0_spectrum, 300.0, 0.4, 2.0)
        assert abs(got - flat_k0_spectrum.weights[0]) <= 1e-8

    def test_sqrt_profile_value_and_route_independence(self, sqrt_k0):
        t = 1.0
        s30 = truncated_spectrum(sqrt_k0, 30.0, 200)
        v30 = heat_kernel_1d(s30, t, 1.0, 2.0)
        assert v30 == pytest.approx(0.22448812879265007, abs=1e-9)
        s40 = truncated_spectrum(sqrt_k0, 40.0, 260)
        v40 = heat_kernel_1d(s40, t, 1.0, 2.0)
        assert abs(v30 - v40) <= 1e-9

    def test_cutoff_budget_guard(self, flat_k0):
        small = truncated_spectrum(flat_k0, 10.0, 5)
        with pytest.raises(NumericsError):
            heat_kernel_1d(small, 1e-4, 0.5, 0.5)

    def test_nonpositive_time_rejected(self, flat_k0_spectrum):
        with pytest.raises(ConfigError):
            heat_kernel_1d(flat_k0_spectrum, 0.0, 0.5, 0.5)


# ----------------------------------------------------------------------
# structural invariants
# ----------------------------------------------------------------------

class TestInvariants:
    @settings(max_examples=12, deadline=None)
    @given(
        beta=st.sampled_from([0.3, 0.5, 0.7]),
        k=st.sampled_from([0, 1]),
        lam=st.floats(min_value=0.05, max_value=30.0),
    )
    def test_mode_functions_bounded_by_one(self, beta, k, lam):
        prob, _ = build_cone_problem(MetricProfile.power(beta), k)
        sol = solve_eigenfunction(prob, lam, 3.0, tol=1e-12)
        assert np.max(np.abs(sol.v_tilde)) <= 1.0 + 1e-10

    def test_decay_where_weight_grows(self, flat_k1):
        """Mode functions decay under the cosh^2 weight growth."""
        lam = 4 * math.pi ** 2 + 0.25
        sol = solve_eigenfunction(flat_k1, lam, 3.0, n_grid=31)
        v_abs = np.abs(sol.v_tilde)
        i1, i2, i3 = [np.argmin(np.abs(sol.grid - xq)) for xq in (1.0, 2.0, 3.0)]
        assert v_abs[i1] > v_abs[i2] > v_abs[i3]
        assert v_abs[i3] <= 5e-8

    def test_entire_in_lambda_circle_mean(self, sqrt_k1):
        center, radius = 5.0, 2.0
        th = np.arange(8) * (2 * np.pi / 8)
        lams = np.concatenate([[center + 0j], center + radius * np.exp(1j * th)])
        V, _ = eigenfunction_table(sqrt_k1, lams, np.array([2.0]))
        assert abs(np.mean(V[1:, 0]) - V[0, 0]) <= 1e-8

    def test_wronskian_constant(self, sqrt_k0):
        grid = np.linspace(0.5, 4.0, 15)
        v1, u1 = solve_initial_value(sqrt_k0, 3.0, 0.5, 4.0, 1.0, 0.0, grid=grid)
        v2, u2 = solve_initial_value(sqrt_k0, 3.0, 0.5, 4.0, 0.0, 1.0, grid=grid)
        wronskian = v1 * u2 - v2 * u1
        assert np.max(np.abs(wronskian - 1.0)) <= 2e-8

    def test_expansion_reconstructs_bump(self, flat_k0):
        """Parseval and reconstruction for a Gaussian bump on [0, 12]."""
        spec = truncated_spectrum(flat_k0, 12.0, 120)
        x = np.linspace(0.0, 12.0, 2401)
        f = np.exp(-2.0 * (x - 4.0) ** 2)
        V, _ = eigenfunction_table(flat_k0, spec.eigenvalues, x)
        weight_x = flat_k0.p(x)
        coeffs = simpson(f * V * weight_x, x=x, axis=1)
        recon = (spec.weights[:, None] * coeffs[:, None] * V).sum(axis=0)
        num = simpson((recon - f) ** 2 * weight_x, x=x)
        den = simpson(f ** 2 * weight_x, x=x)
        assert math.sqrt(num / den) <= 1e-8
        parseval = abs(np.sum(spec.weights * coeffs ** 2) / den - 1.0)
        assert parseval <= 1e-8
