"""Grid verification: integration, reconstruction, residuals, shooting.

Oracle notes
------------
* exponential self-convolution: (e^{-|.|} * e^{-|.|})(x) = (1 + |x|) e^{-|x|},
  by splitting the integral at the kink of either factor.
* reversible pulse a'' = 2 a - 2 a^3: explicit orbit a = sqrt(2) sech(sqrt(2) t),
  section value sqrt(2), conserved energy p^2/2 - a^2 + a^4/2.
* scaled pair reduction of u + K*u - mu K*u + (1/3) K*(u^3) = 0 over the
  double pair +-i: planar balance (lin, cub) = (2, -2), from the moment
  ratio -k01^2/k21 = 1 of the two-gaussian critical kernel.
* comoving pitchfork with the unit-mass gaussian (second moment 1/2): planar
  front equation (1/4) a'' + c a' + a (1 - a^2) = 0, so the monotonicity
  threshold is 2 sqrt(kappa alpha) = 1 and the saddle sits at 1; the
  saddle's unstable rate solves kappa s^2 + c s - 2 alpha = 0.
"""

import json
import math

import numpy as np
import pytest

from conftest import build_front_jet, build_pair_jet, critical_pair_kernel

from cmnl.jet import JetIndex, ScaledField, scale_field
from cmnl.kernel import DiracMixture, ExponentialMixture, GaussianMixture
from cmnl.nonlin import NonlinearitySpec
from cmnl.verify import (
    GridProfile,
    Trajectory,
    find_front,
    find_homoclinic,
    front_profile,
    front_report,
    grid_convolve,
    integrate_reduced,
    planar_front_system,
    planar_pulse_system,
    pulse_profile,
    pulse_scaling_report,
    reconstruct,
    residual,
    slope_loglog,
)

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="module")
def pair():
    return build_pair_jet(3)


@pytest.fixture(scope="module")
def front():
    return build_front_jet(3)


# ---------------------------------------------------------------------------
# integration


class TestIntegrateReduced:
    def test_equilibrium_stays_at_zero(self):
        fld = {
            JetIndex((2,)): np.array([2.0 + 0j]),
            JetIndex((3,)): np.array([-4.0 + 0j]),
        }
        traj = integrate_reduced(fld, [0.0], (0.0, 10.0), 0.01)
        assert np.all(traj.ys == 0.0)

    def test_linear_rotation_matches_exponential(self):
        traj = integrate_reduced(lambda y: 1j * y, [1.0], (0.0, 2.0), 0.01)
        assert abs(traj.ys[-1, 0] - np.exp(2.0j)) < 1e-9
        assert abs(abs(traj.ys[:, 0]) - 1.0).max() < 1e-9

    def test_step_halving_endpoint_stable(self):
        f = lambda y: np.array([y[1], -np.sin(y[0])])
        a = integrate_reduced(f, [1.0, 0.0], (0.0, 5.0), 0.01)
        b = integrate_reduced(f, [1.0, 0.0], (0.0, 5.0), 0.005)
        assert np.abs(a.ys[-1] - b.ys[-1]).max() < 1e-8

    def test_parameter_weights_enter_the_field(self):
        fld = {JetIndex((1,), (1,)): np.array([2.0 + 0j])}
        traj = integrate_reduced(fld, [1.0], (0.0, 1.0), 0.001, mu=(0.5,))
        assert abs(traj.ys[-1, 0] - math.e) < 1e-9

    def test_scaled_field_container_accepted(self):
        sf = ScaledField(
            field={JetIndex((1,)): np.array([1j])},
            dropped=(),
            coord_exponents=(1,),
            x_exponent=1.0,
            param_exponents=(),
            phases=(),
        )
        traj = integrate_reduced(sf, [1.0], (0.0, 1.0), 0.01)
        assert abs(traj.ys[-1, 0] - np.exp(1j)) < 1e-10

    def test_blowup_raises(self):
        with pytest.raises(RuntimeError, match="blow-up"):
            integrate_reduced(lambda y: y**2, [2.0], (0.0, 10.0), 0.001)

    def test_backward_span(self):
        traj = integrate_reduced(lambda y: y, [1.0], (0.0, -1.0), 0.01)
        assert abs(traj.ys[-1, 0] - math.exp(-1.0)) < 1e-10
        assert traj.xs[-1] == pytest.approx(-1.0)


# ---------------------------------------------------------------------------
# profiles


class TestGridProfile:
    def test_rejects_nonuniform_grid(self):
        with pytest.raises(ValueError, match="uniform"):
            GridProfile(np.array([0.0, 1.0, 3.0]), np.zeros(3))

    def test_rejects_count_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            GridProfile(np.arange(4.0), np.zeros((3, 1)))

    def test_vector_promotion_and_peak(self):
        xs = np.arange(-50, 51) * 0.1
        prof = GridProfile(xs, 2.0 * np.exp(-(xs**2)))
        assert prof.values.shape == (101, 1)
        assert prof.peak() == pytest.approx(2.0)
        assert prof.h == pytest.approx(0.1)
        assert prof.halfwidth == pytest.approx(5.0)

    def test_localization_flags(self):
        xs = np.arange(-400, 401) * 0.1
        prof = GridProfile(xs, 1.0 / np.cosh(xs / 2.0))
        assert prof.localized(1e-6)
        assert prof.boundary_fraction() < 1e-6
        assert not GridProfile(xs, np.cos(xs)).localized()

    def test_decay_length_estimate(self):
        xs = np.arange(-800, 801) * 0.05
        prof = GridProfile(xs, np.cos(5.0 * xs) / np.cosh(xs / 3.0))
        est = prof.decay_length()
        assert 1.5 <= est <= 6.0
        assert prof.halfwidth >= 5.0 * est

    def test_constant_profile_never_decays(self):
        xs = np.arange(-10, 11) * 0.5
        assert GridProfile(xs, np.ones(21)).decay_length() == np.inf


# ---------------------------------------------------------------------------
# grid convolution


class TestGridConvolve:
    def test_gaussian_on_constant_gives_mass(self):
        K = GaussianMixture.single(0.7, 2.0)
        xs = np.arange(-80, 81) * 0.25
        out = grid_convolve(K, xs, np.ones((len(xs), 1)))
        mass = 0.7 * math.sqrt(math.pi / 2.0)
        assert np.abs(out - mass).max() < 1e-10

    def test_exponential_pair_closed_form_second_order(self):
        K = ExponentialMixture([(1.0, 1.0, 0.0)])
        errs = []
        for h in (0.4, 0.2, 0.1):
            m = int(round(36.0 / h))
            xs = np.arange(-m, m + 1) * h
            u = np.exp(-np.abs(xs))[:, None]
            out = grid_convolve(K, xs, u)
            exact = (1.0 + np.abs(xs)) * np.exp(-np.abs(xs))
            mask = np.abs(xs) <= 8.0
            errs.append(np.abs(out[mask, 0] - exact[mask]).max())
        assert errs[0] / errs[1] >= 3.8
        assert errs[1] / errs[2] >= 3.8
        assert errs[2] < 5e-3

    def test_point_mass_shifts_the_profile(self):
        K = DiracMixture([(2.0, 1.5)])
        xs = np.arange(-50, 51) * 0.1
        out = grid_convolve(K, xs, xs.astype(complex)[:, None])
        mask = np.abs(xs) <= 3.0
        assert np.abs(out[mask, 0] - 2.0 * (xs[mask] - 1.5)).max() < 1e-12

    def test_matrix_kernel_matches_blockwise_scalars(self):
        C = np.array([[0.3, 0.5], [0.0, 0.2]])
        K = GaussianMixture.single(C, 1.0, n=2)
        xs = np.arange(-60, 61) * 0.2
        u = np.stack(
            [np.exp(-(xs**2) / 4.0), np.cos(xs) * np.exp(-(xs**2) / 9.0)],
            axis=1,
        ).astype(complex)
        out = grid_convolve(K, xs, u)
        g = GaussianMixture.single(1.0, 1.0)
        c0 = grid_convolve(g, xs, u[:, [0]])[:, 0]
        c1 = grid_convolve(g, xs, u[:, [1]])[:, 0]
        ref = np.stack([0.3 * c0 + 0.5 * c1, 0.2 * c1], axis=1)
        assert np.abs(out - ref).max() < 1e-12

    def test_dimension_mismatch_raises(self):
        K = GaussianMixture.single(1.0, 1.0)
        xs = np.arange(-5, 6) * 0.5
        with pytest.raises(ValueError, match="dimension"):
            grid_convolve(K, xs, np.zeros((11, 2)))


# ---------------------------------------------------------------------------
# residuals


NO_NONLINEARITY = NonlinearitySpec((), 2)


class TestResidual:
    def test_zero_profile_has_zero_residual(self):
        K = critical_pair_kernel()
        xs = np.arange(-200, 201) * 0.1
        rep = residual(K, NO_NONLINEARITY, GridProfile(xs, np.zeros(len(xs))))
        assert rep.max_norm == 0.0
        assert rep.l2_norm == 0.0
        assert rep.converged

    def test_exact_kernel_element_hits_quadrature_floor(self):
        K = critical_pair_kernel()
        xs = np.arange(-400, 401) * 0.1
        prof = GridProfile(xs, np.exp(1j * xs))
        rep = residual(K, NO_NONLINEARITY, prof)
        assert rep.max_norm < 1e-7
        assert rep.converged
        assert rep.margin > 0
        assert len(rep.values) == len(xs)

    def test_floor_drops_fourfold_per_halving(self):
        # -e^{-|x|} has the exact characteristic element e^{ix}; the
        # trapezoid floor for the kinked kernel is second order.
        K = ExponentialMixture([(-1.0, 1.0, 0.0)])
        assert abs(1.0 + K.transform(1j)[0, 0]) < 1e-14
        floors = []
        for h in (0.2, 0.1, 0.05):
            m = int(round(48.0 / h))
            xs = np.arange(-m, m + 1) * h
            rep = residual(K, NO_NONLINEARITY, GridProfile(xs, np.exp(1j * xs)))
            floors.append(rep.max_norm)
            assert not rep.converged  # measurement is pure quadrature floor
        assert floors[0] / floors[1] >= 3.8
        assert floors[1] / floors[2] >= 3.8
        assert floors[-1] > 1e-9

    def test_quadrature_domination_raises_on_request(self):
        K = ExponentialMixture([(-1.0, 1.0, 0.0)])
        xs = np.arange(-240, 241) * 0.2
        prof = GridProfile(xs, np.exp(1j * xs))
        with pytest.raises(RuntimeError, match="did not converge"):
            residual(K, NO_NONLINEARITY, prof, require_convergence=True)

    def test_missing_parameter_raises(self, pair):
        K, J = pair
        xs = np.arange(-300, 301) * 0.1
        prof = GridProfile(xs, 0.1 * np.exp(1j * xs) / np.cosh(0.1 * xs))
        with pytest.raises(ValueError, match="parameter"):
            residual(K, J.nonlinearity, prof)

    def test_report_serializes(self):
        K = critical_pair_kernel()
        xs = np.arange(-200, 201) * 0.1
        rep = residual(K, NO_NONLINEARITY, GridProfile(xs, np.zeros(len(xs))))
        data = json.loads(json.dumps(rep.to_data()))
        assert set(data) == {"max", "l2", "quadrature_error", "converged", "margin"}

    def test_narrow_grid_raises(self):
        K = critical_pair_kernel()
        xs = np.arange(-10, 11) * 0.1
        with pytest.raises(ValueError, match="too narrow"):
            residual(K, NO_NONLINEARITY, GridProfile(xs, np.zeros(len(xs))))


# ---------------------------------------------------------------------------
# reconstruction


class TestReconstruct:
    def test_zero_trajectory_reconstructs_to_zero(self, pair):
        _, J = pair
        xs = np.arange(-20, 21) * 0.5
        traj = Trajectory(xs, np.zeros((len(xs), 4)))
        prof = reconstruct(J, traj, mu=(0.1,))
        assert np.all(prof.values == 0.0)

    def test_matches_exact_graph_evaluation(self, pair):
        # dual route: vectorized reconstruction against the quasi-polynomial
        # manifold point evaluated at the origin
        from cmnl.jet import manifold_point

        _, J = pair
        rows = np.array(
            [
                [0.1 + 0.05j, 0.1 - 0.05j, -0.02 + 0.01j, -0.02 - 0.01j],
                [0.3j, -0.3j, 0.2, 0.2],
                [0.05, 0.07, 0.01j, 0.04],
            ]
        )
        traj = Trajectory(np.arange(3.0), rows)
        prof = reconstruct(J, traj, mu=(0.3,))
        for i, c in enumerate(rows):
            exact = manifold_point(J, c, (0.3,)).evaluate(0.0)
            assert np.abs(prof.values[i] - exact).max() < 1e-12

    def test_dimension_mismatch_raises(self, pair):
        _, J = pair
        traj = Trajectory(np.arange(3.0), np.zeros((3, 2)))
        with pytest.raises(ValueError, match="dimension"):
            reconstruct(J, traj)


# ---------------------------------------------------------------------------
# shooting


class TestHomoclinicShooting:
    def test_section_value_matches_closed_form(self):
        res = find_homoclinic(2.0, -2.0)
        assert res.success
        assert abs(res.section_value - SQRT2) < 1e-8

    def test_orbit_matches_sech_profile(self):
        res = find_homoclinic(2.0, -2.0)
        for s in (0.5, 1.0, 2.0):
            a_num = np.interp(
                res.crossing_time - s,
                res.trajectory.xs,
                res.trajectory.ys[:, 0].real,
            )
            a_exact = SQRT2 / math.cosh(SQRT2 * s)
            assert abs(a_num / a_exact - 1.0) < 1e-5

    def test_returns_to_rest_state(self):
        res = find_homoclinic(2.0, -2.0)
        assert res.return_distance < 1e-4

    def test_energy_is_conserved_along_the_orbit(self):
        res = find_homoclinic(2.0, -2.0)
        a = res.trajectory.ys[:, 0].real
        p = res.trajectory.ys[:, 1].real
        energy = 0.5 * p**2 - a**2 + 0.5 * a**4
        assert np.abs(energy).max() < 1e-10

    def test_deterministic(self):
        a = find_homoclinic(2.0, -2.0)
        b = find_homoclinic(2.0, -2.0)
        assert np.array_equal(a.trajectory.ys, b.trajectory.ys)
        assert a.return_distance == b.return_distance

    def test_rejects_wrong_signs(self):
        with pytest.raises(ValueError, match="unstable origin"):
            find_homoclinic(-1.0, -2.0)
        with pytest.raises(ValueError, match="focusing"):
            find_homoclinic(2.0, 1.0)


class TestFrontShooting:
    def test_supercritical_front_is_monotone(self):
        res = find_front(0.25, 1.0, 1.0, 1.1)
        assert res.success
        assert res.monotone
        assert res.reach_distance <= 1e-4
        assert res.details["saddle"] == pytest.approx(1.0)
        s = res.details["unstable_rate"]
        assert abs(0.25 * s**2 + 1.1 * s - 2.0) < 1e-12

    def test_threshold_speed_still_connects(self):
        res = find_front(0.25, 1.0, 1.0, 1.0)
        assert res.success
        assert res.reach_distance <= 1e-4

    def test_subcritical_speed_spirals(self):
        res = find_front(0.25, 1.0, 1.0, 0.5)
        assert res.success
        assert not res.monotone

    def test_deterministic(self):
        a = find_front(0.25, 1.0, 1.0, 1.1)
        b = find_front(0.25, 1.0, 1.0, 1.1)
        assert np.array_equal(a.trajectory.ys, b.trajectory.ys)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            find_front(-0.25, 1.0, 1.0, 1.1)
        with pytest.raises(ValueError):
            find_front(0.25, 1.0, 1.0, 0.0)


# ---------------------------------------------------------------------------
# planar extraction


class TestPlanarExtraction:
    def test_pulse_balance_from_pair_reduction(self, pair):
        _, J = pair
        sf = scale_field(
            J.field, (1, 1, 2, 2), 1.0, (2,), phases=(1.0, -1.0, 1.0, -1.0)
        )
        lin, cub = planar_pulse_system(sf)
        assert abs(lin - 2.0) < 1e-8
        assert abs(cub + 2.0) < 1e-8

    def test_front_coefficients_from_chain_reduction(self, front):
        _, J, G = front
        kappa, alpha, beta = planar_front_system(J)
        assert abs(kappa - 0.25) < 1e-8
        assert abs(alpha - 1.0) < 1e-8
        assert abs(beta - 1.0) < 1e-8
        # independent route: kappa is half the kernel's second moment
        kappa2 = G.moment(2, 0.0)[0, 0].real
        assert abs(kappa - 0.5 * kappa2) < 1e-8

    def test_front_extraction_rejects_pair_reduction(self, pair):
        _, J = pair
        with pytest.raises(ValueError, match="2 coordinates"):
            planar_front_system(J)

    def _valid_pulse_field(self):
        return {
            JetIndex((0, 0, 1, 0), (0,)): np.array([1.0, 0, 0, 0], complex),
            JetIndex((0, 0, 0, 1), (0,)): np.array([0, 1.0, 0, 0], complex),
            JetIndex((1, 0, 0, 0), (1,)): np.array([0, 0, 2.0, 0], complex),
            JetIndex((0, 1, 0, 0), (1,)): np.array([0, 0, 0, 2.0], complex),
            JetIndex((2, 1, 0, 0), (0,)): np.array([0, 0, -2.0, 0], complex),
            JetIndex((1, 2, 0, 0), (0,)): np.array([0, 0, 0, -2.0], complex),
        }

    def _wrap(self, fld):
        return ScaledField(
            field=fld,
            dropped=(),
            coord_exponents=(1, 1, 2, 2),
            x_exponent=1.0,
            param_exponents=(2,),
            phases=(1.0, -1.0, 1.0, -1.0),
        )

    def test_pulse_extraction_accepts_the_canonical_shape(self):
        lin, cub = planar_pulse_system(self._wrap(self._valid_pulse_field()))
        assert (lin, cub) == (2.0, -2.0)

    def test_pulse_extraction_rejects_extra_entries(self):
        fld = self._valid_pulse_field()
        fld[JetIndex((1, 1, 0, 0), (0,))] = np.array([0, 0, 1.0, 0], complex)
        with pytest.raises(ValueError, match="unexpected resonant"):
            planar_pulse_system(self._wrap(fld))

    def test_pulse_extraction_rejects_complex_coefficients(self):
        fld = self._valid_pulse_field()
        fld[JetIndex((1, 0, 0, 0), (1,))] = np.array([0, 0, 2 + 1j, 0])
        with pytest.raises(ValueError, match="conjugate|not real"):
            planar_pulse_system(self._wrap(fld))

    def test_pulse_extraction_rejects_defocusing_sign(self):
        fld = self._valid_pulse_field()
        fld[JetIndex((2, 1, 0, 0), (0,))] = np.array([0, 0, 2.0, 0], complex)
        fld[JetIndex((1, 2, 0, 0), (0,))] = np.array([0, 0, 0, 2.0], complex)
        with pytest.raises(ValueError, match="lin > 0 > cub"):
            planar_pulse_system(self._wrap(fld))


# ---------------------------------------------------------------------------
# end-to-end drivers


class TestPulseDrivers:
    def test_profile_is_localized_with_the_predicted_amplitude(self, pair):
        _, J = pair
        prof, hom = pulse_profile(J, 1e-2)
        assert hom.success
        assert prof.localized(1e-6)
        assert prof.halfwidth >= 5.0 * prof.decay_length()
        assert abs(prof.peak() / math.sqrt(1e-2) / (2.0 * SQRT2) - 1.0) < 0.01

    def test_profile_residual_is_small_and_converged(self, pair):
        K, J = pair
        prof, _ = pulse_profile(J, 1e-2)
        rep = residual(K, J.nonlinearity, prof, mu=(1e-2,))
        assert rep.converged
        assert rep.max_norm < 1e-3

    def test_scaling_report_slope_and_amplitude(self, pair):
        K, J = pair
        rep = pulse_scaling_report(K, J, [1e-2, 1e-3])
        assert rep.kind == "homoclinic"
        assert rep.slope >= 1.5
        assert abs(rep.details["amplitude_ratio"] / (2.0 * SQRT2) - 1.0) < 0.1
        data = json.loads(json.dumps(rep.to_data()))
        assert data["type"] == "homoclinic"
        assert len(data["details"]["sweep"]) == 2
        for row in data["details"]["sweep"]:
            assert row["quadrature_error"] < 0.5 * row["residual_max"]

    def test_rejects_nonpositive_parameter(self, pair):
        _, J = pair
        with pytest.raises(ValueError, match="lam > 0"):
            pulse_profile(J, 0.0)

    def test_rejects_front_reduction(self, front):
        _, J, _ = front
        with pytest.raises(ValueError, match="conjugate pair"):
            pulse_profile(J, 1e-2)


class TestFrontDrivers:
    def test_profile_is_the_slow_modulation(self, front):
        _, J, _ = front
        eps = 1e-2
        prof, fr = front_profile(J, eps, 1.1)
        assert fr.success and fr.monotone
        # the graph corrections vanish at the origin, so the profile is
        # exactly the modulated slow coordinate
        diff = np.abs(prof.values[:, 0] - eps * fr.trajectory.ys[:, 0])
        assert diff.max() < 1e-14

    def test_report_confirms_monotone_front(self, front):
        K, J, _ = front
        rep = front_report(K, J, 1e-2, 1.1)
        assert rep.kind == "front"
        assert rep.monotone
        assert rep.residual_max < 1e-8
        assert rep.details["kappa"] == pytest.approx(0.25, abs=1e-8)
        assert rep.details["alpha"] == pytest.approx(1.0, abs=1e-8)
        assert rep.details["beta"] == pytest.approx(1.0, abs=1e-8)
        assert rep.details["reach_distance"] <= 1e-4
        json.dumps(rep.to_data())

    def test_threshold_speed_front_exists(self, front):
        K, J, _ = front
        rep = front_report(K, J, 1e-2, 1.0)
        assert rep.details["reach_distance"] <= 1e-4

    def test_rejects_nonpositive_epsilon(self, front):
        _, J, _ = front
        with pytest.raises(ValueError, match="epsilon > 0"):
            front_profile(J, 0.0, 1.1)


class TestSlopeFit:
    def test_recovers_power_law(self):
        xs = np.array([1.0, 2.0, 4.0, 8.0])
        assert slope_loglog(xs, 3.0 * xs**2.5) == pytest.approx(2.5)
