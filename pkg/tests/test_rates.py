"""Envelope transform G, its inverse, and the pathwise rate estimator."""

import math
from types import SimpleNamespace

import numpy as np
import pytest

import switchdiff as sd


def synthetic_path(decay, T=5.0, n=501, x0=1.0):
    times = np.linspace(0.0, T, n)
    xs = (x0 * np.exp(-decay * times)).reshape(-1, 1)
    return SimpleNamespace(times=times, x_path=xs, exited=False, blew_up=False)


V_SQUARE = SimpleNamespace(V=lambda x: float(np.dot(x, x)))


class TestEnvelopeTransform:
    def test_identity_profile_closed_form(self):
        prof = sd.identity_profile(h=1.0)
        assert sd.G(prof, 0.5) == pytest.approx(math.log(0.5), abs=1e-14)
        assert sd.G(prof, 1.0) == 0.0
        assert sd.G_inverse(prof, 0.0) == 1.0
        # the envelope decays exponentially in t
        for lam, t in [(0.5, 1.0), (2.0, 3.0)]:
            assert sd.G_inverse(prof, -lam * t) == pytest.approx(math.exp(-lam * t))

    def test_power_profile_closed_form(self):
        prof = sd.power_profile(gamma=0.5, h=1.0)
        assert sd.G(prof, 0.25) == pytest.approx(-2.0, abs=1e-12)
        # envelope (h^-g + g lam t)^(-1/g) decays algebraically
        lam, t = 1.0, 8.0
        expected = (1.0 + 0.5 * lam * t) ** (-2.0)
        assert sd.G_inverse(prof, -lam * t) == pytest.approx(expected, rel=1e-12)

    def test_anchor_scales_the_identity_transform(self):
        prof = sd.identity_profile(h=0.25)
        assert sd.G(prof, 0.125) == pytest.approx(math.log(0.5), abs=1e-14)

    @pytest.mark.parametrize(
        "prof",
        [
            sd.identity_profile(h=1.0),
            sd.identity_profile(h=0.25),
            sd.power_profile(0.25, h=1.0),
            sd.power_profile(0.5, h=0.25),
            sd.power_profile(0.75, h=2.0),
            sd.custom_profile(lambda y: y / (1.0 + y), h=1.0),
        ],
    )
    def test_roundtrip_on_log_grid(self, prof):
        ys = np.geomspace(1e-6 * prof.h, prof.h, 64)
        back = np.array([sd.G_inverse(prof, sd.G(prof, y)) for y in ys])
        assert float(np.max(np.abs(back - ys) / ys)) < 1e-8

    def test_quadrature_matches_closed_forms(self):
        pairs = [
            (sd.custom_profile(lambda y: y, h=1.0), sd.identity_profile(h=1.0)),
            (
                sd.custom_profile(lambda y: y**1.5, h=1.0),
                sd.power_profile(0.5, h=1.0),
            ),
        ]
        for custom, closed in pairs:
            for y in np.geomspace(0.05, 1.0, 9):
                assert abs(sd.G(custom, y) - sd.G(closed, y)) < 1e-9

    def test_domain_errors(self):
        prof = sd.identity_profile(h=1.0)
        with pytest.raises(sd.DomainError):
            sd.G(prof, 0.0)
        with pytest.raises(sd.DomainError):
            sd.G(prof, 1.5)
        with pytest.raises(sd.DomainError):
            sd.G_inverse(prof, 0.5)

    def test_vectorized_evaluation_keeps_shape(self):
        prof = sd.power_profile(0.5, h=1.0)
        ys = np.array([[0.1, 0.2], [0.4, 1.0]])
        out = sd.G(prof, ys)
        assert out.shape == ys.shape
        assert sd.G_inverse(prof, sd.G(prof, ys)) == pytest.approx(ys)


class TestProfileValidation:
    def test_unknown_kind_rejected(self):
        with pytest.raises(sd.ConfigurationError):
            sd.RateProfile(kind="cubic", h=1.0)

    @pytest.mark.parametrize("h", [0.0, -1.0, float("inf")])
    def test_bad_anchor_rejected(self, h):
        with pytest.raises(sd.ConfigurationError):
            sd.identity_profile(h=h)

    @pytest.mark.parametrize("gamma", [0.0, 1.0, -0.5, None])
    def test_power_exponent_must_be_interior(self, gamma):
        with pytest.raises(sd.ConfigurationError):
            sd.RateProfile(kind="power_1_plus_gamma", h=1.0, gamma=gamma)

    def test_custom_profile_family_membership_checks(self):
        with pytest.raises(sd.ConfigurationError):
            sd.RateProfile(kind="custom", h=1.0)  # no callable
        with pytest.raises(sd.ConfigurationError):
            sd.custom_profile(lambda y: y + 0.1)  # g(0) != 0
        with pytest.raises(sd.ConfigurationError):
            sd.custom_profile(lambda y: -y)  # negative
        with pytest.raises(sd.ConfigurationError):
            sd.custom_profile(lambda y: y * (1.0 - y))  # not increasing on [0, 1]


class TestLambdaGrid:
    def test_default_grid_shape_and_span(self):
        grid = sd.default_lambda_grid()
        assert grid.size == 64
        assert grid[0] == pytest.approx(1e-4)
        assert grid[-1] == pytest.approx(1e2)
        assert np.all(np.diff(grid) > 0)
        assert np.any((grid >= 1.8) & (grid <= 2.0))


class TestPathwiseRateEstimate:
    def test_exact_exponential_decay_is_rated_at_the_grid_point_below_two(self):
        # V(X(t)) = exp(-2t) with the identity profile: every rate below 2
        # is certified, everything above fails, so the scan stops at the
        # largest grid value under 2.
        paths = [synthetic_path(1.0) for _ in range(4)]
        est = sd.estimate_pathwise_rate(paths, V_SQUARE, sd.identity_profile(1.0), T0=1.0)
        assert est.lambda_hat == pytest.approx(1.9306977288832496, rel=1e-12)
        assert est.n_excluded == 0
        assert est.n_paths == 4

    def test_quantile_curve_is_nondecreasing_in_lambda(self):
        paths = [synthetic_path(0.6), synthetic_path(0.8)]
        est = sd.estimate_pathwise_rate(paths, V_SQUARE, sd.identity_profile(1.0), T0=0.5)
        qs = np.array([q for _, q, _ in est.quantile_curve])
        assert np.all(np.diff(qs) >= -1e-12)
        assert all(n == 2 for _, _, n in est.quantile_curve)

    def test_exited_paths_are_excluded_not_counted(self):
        good = synthetic_path(1.0)
        bad = synthetic_path(1.0)
        bad.exited = True
        est = sd.estimate_pathwise_rate([good, bad], V_SQUARE, sd.identity_profile(1.0), T0=1.0)
        assert est.n_excluded == 1
        assert est.quantile_curve[0][2] == 1

    def test_all_paths_excluded_raises(self):
        bad = synthetic_path(1.0)
        bad.blew_up = True
        with pytest.raises(sd.RateEstimationError):
            sd.estimate_pathwise_rate([bad], V_SQUARE, sd.identity_profile(1.0), T0=1.0)

    def test_burn_in_beyond_the_horizon_raises(self):
        with pytest.raises(sd.ConfigurationError):
            sd.estimate_pathwise_rate(
                [synthetic_path(1.0, T=2.0)], V_SQUARE, sd.identity_profile(1.0), T0=3.0
            )

    @pytest.mark.parametrize("eps", [0.0, 1.0, -0.2])
    def test_epsilon_must_be_interior(self, eps):
        with pytest.raises(sd.ConfigurationError):
            sd.estimate_pathwise_rate(
                [synthetic_path(1.0)], V_SQUARE, sd.identity_profile(1.0), T0=1.0, epsilon=eps
            )

    def test_lambda_grid_must_increase(self):
        with pytest.raises(sd.ConfigurationError):
            sd.estimate_pathwise_rate(
                [synthetic_path(1.0)],
                V_SQUARE,
                sd.identity_profile(1.0),
                T0=1.0,
                lambdas=np.array([1.0, 0.5]),
            )

    def test_quantile_curve_csv_roundtrip(self, tmp_path):
        est = sd.estimate_pathwise_rate(
            [synthetic_path(1.0)], V_SQUARE, sd.identity_profile(1.0), T0=1.0
        )
        out = tmp_path / "curve.csv"
        sd.write_quantile_curve(str(out), est)
        rows = out.read_text().strip().splitlines()
        assert rows[0] == "lambda,quantile,n_surviving"
        assert len(rows) == 1 + len(est.quantile_curve)
        lam0, q0, n0 = rows[1].split(",")
        assert float(lam0) == est.quantile_curve[0][0]
        assert float(q0) == est.quantile_curve[0][1]
