"""Stage-two occupancy fitting and variance propagation."""

import warnings

import numpy as np
import pytest
import statsmodels.api as sm

from occufit import (
    BoundaryEstimate,
    ConvergenceWarning,
    Dataset,
    DetectionFit,
    DetectionModel,
    DimensionMismatch,
    RankDeficientDesign,
    Stage2Method,
    detection_cross_term,
    fit_detection,
    fit_occupancy,
    fit_two_stage,
    kernels,
    occupancy_information,
    psi_with_se,
    sandwich_variance,
)
from occufit.optim import fd_jacobian, solve_spd

from conftest import history_dataset, small_dataset

METHODS = ("iwls", "direct", "offset")


def certain_detection(n_sites, n_visits, q=1):
    """Stage-one output with detection certain at every site."""
    return DetectionFit(
        beta_hat=np.zeros(q),
        v_beta=np.zeros((q, q)),
        cond_loglik=0.0,
        aic=2.0 * q,
        p_hat=np.full((n_sites, n_visits), 1.0 - 1e-12),
        theta_hat=np.ones(n_sites),
        converged=True,
        iterations=1,
        model_tag=DetectionModel.TIME_INDEPENDENT,
    )


def flat_detection(n_sites, n_visits, theta):
    """Stage-one output with a common known theta at every site."""
    p_visit = 1.0 - (1.0 - theta) ** (1.0 / n_visits)
    return DetectionFit(
        beta_hat=np.array([np.log(p_visit / (1.0 - p_visit))]),
        v_beta=np.zeros((1, 1)),
        cond_loglik=0.0,
        aic=2.0,
        p_hat=np.full((n_sites, n_visits), p_visit),
        theta_hat=np.full(n_sites, theta),
        converged=True,
        iterations=1,
        model_tag=DetectionModel.TIME_INDEPENDENT,
    )


class TestKnownOptimum:
    """Intercept-only sites with theta fixed at 0.9 and 9 of 20 sites
    detected: the detection rate 0.45 equals psi * 0.9 exactly at
    psi = 1/2, so every maximiser must land on alpha = 0."""

    @pytest.mark.parametrize("method", METHODS)
    def test_half_occupancy_fixture(self, method):
        histories = [[1, 0]] * 9 + [[0, 0]] * 11
        data = history_dataset(histories)
        det = flat_detection(20, 2, 0.9)
        occ = fit_occupancy(data, det, method)
        assert occ.alpha_hat[0] == pytest.approx(0.0, abs=1e-8)
        assert occ.psi_hat[0] == pytest.approx(0.5, abs=1e-8)
        assert occ.converged
        assert occ.method is Stage2Method(method)

    @pytest.mark.parametrize("method", METHODS)
    def test_certain_detection_reduces_to_logistic(self, method):
        data = small_dataset(seed=11, n_sites=200)
        det = certain_detection(data.n_sites, data.n_visits, q=data.n_det_coefs)
        occ = fit_occupancy(data, det, method)
        ref = sm.Logit(data.w, data.occ_design).fit(disp=0)
        np.testing.assert_allclose(occ.alpha_hat, ref.params, atol=1e-6)
        # with no stage-one uncertainty the sandwich adds nothing
        np.testing.assert_allclose(occ.var_sandwich, occ.var_naive, rtol=1e-12)


class TestMaximiserAgreement:
    @pytest.fixture(scope="class")
    @classmethod
    def fitted(cls):
        data = small_dataset(seed=21, n_sites=300)
        det = fit_detection(data)
        return data, det

    def test_scoring_and_direct_same_optimum(self, fitted):
        data, det = fitted
        a = fit_occupancy(data, det, "iwls")
        b = fit_occupancy(data, det, "direct")
        np.testing.assert_allclose(a.alpha_hat, b.alpha_hat, atol=1e-6)
        assert not a.fallback_used

    def test_scoring_solution_is_a_fixed_point(self, fitted):
        data, det = fitted
        occ = fit_occupancy(data, det, "iwls", tol=1e-10)
        J, rhs = kernels.iwls_system(
            data.w, data.occ_design, det.theta_hat, occ.alpha_hat
        )
        alpha_next = solve_spd(J, rhs)
        assert np.max(np.abs(alpha_next - occ.alpha_hat)) <= 1e-10

    def test_scoring_fallback_to_direct(self, fitted):
        data, det = fitted
        occ = fit_occupancy(data, det, "iwls", max_iter=1, fallback=True)
        assert occ.fallback_used and occ.converged
        ref = fit_occupancy(data, det, "direct")
        np.testing.assert_allclose(occ.alpha_hat, ref.alpha_hat, atol=1e-6)

    def test_no_fallback_warns_instead(self, fitted):
        data, det = fitted
        with pytest.warns(ConvergenceWarning):
            occ = fit_occupancy(data, det, "iwls", max_iter=1, fallback=False)
        assert not occ.converged and not occ.fallback_used


class TestVariance:
    @pytest.fixture(scope="class")
    @classmethod
    def fitted(cls):
        data = small_dataset(seed=8, n_sites=250)
        det = fit_detection(data)
        occ = fit_occupancy(data, det, "iwls")
        return data, det, occ

    def test_expected_information_is_weighted_cross_product(self, fitted):
        data, det, occ = fitted
        info = occupancy_information(data, occ.alpha_hat, det, observed=False)
        X = data.occ_design
        psi = 1.0 / (1.0 + np.exp(-(X @ occ.alpha_hat)))
        theta = det.theta_hat
        eta = psi * theta
        u = theta * psi * (1.0 - psi)
        v = eta * (1.0 - eta)
        ref = (X * (u * u / v)[:, None]).T @ X
        np.testing.assert_allclose(info, ref, atol=1e-12 * np.max(np.abs(ref)))

    def test_observed_information_matches_score_derivative(self, fitted):
        data, det, occ = fitted

        def score(a):
            return kernels.partial_loglik_grad(
                data.w, data.occ_design, det.theta_hat, a
            )[1]

        for shift in (0.0, 0.3, -0.5):
            a = occ.alpha_hat + shift
            info = occupancy_information(data, a, det, observed=True)
            ref = -fd_jacobian(score, a)
            np.testing.assert_allclose(info, ref, rtol=1e-5, atol=1e-7)

    def test_cross_term_matches_score_derivative_in_detection(self, fitted):
        data, det, occ = fitted
        alpha = occ.alpha_hat + 0.2

        def score_of_beta(beta):
            p = kernels.detection_probs(data.det_design, beta)
            theta = kernels.theta_rows(p)
            return kernels.partial_loglik_grad(
                data.w, data.occ_design, theta, alpha
            )[1]

        B = detection_cross_term(data, alpha, det, use_expected_w=False)
        ref = fd_jacobian(score_of_beta, det.beta_hat)
        np.testing.assert_allclose(B, ref, rtol=1e-5, atol=1e-7)

    def test_certain_detection_kills_the_cross_term(self, fitted):
        data, _, occ = fitted
        det1 = certain_detection(data.n_sites, data.n_visits, q=data.n_det_coefs)
        B = detection_cross_term(data, occ.alpha_hat, det1)
        assert np.all(B == 0.0)

    def test_sandwich_dominates_naive(self, fitted):
        _, _, occ = fitted
        gap = occ.var_sandwich - occ.var_naive
        assert np.min(np.linalg.eigvalsh(0.5 * (gap + gap.T))) >= -1e-10

    def test_sandwich_helper_matches_fit(self, fitted):
        data, det, occ = fitted
        info = occupancy_information(data, occ.alpha_hat, det)
        cross = detection_cross_term(data, occ.alpha_hat, det)
        ref = sandwich_variance(info, cross, det.v_beta)
        np.testing.assert_allclose(occ.var_sandwich, ref, rtol=1e-10)

    def test_sandwich_helper_rejects_bad_shapes(self):
        with pytest.raises(DimensionMismatch):
            sandwich_variance(np.eye(2), np.ones((3, 2)), np.eye(2))

    def test_psi_standard_errors(self, fitted):
        data, _, occ = fitted
        psi, se = psi_with_se(data, occ.alpha_hat, occ.var_sandwich)
        np.testing.assert_allclose(psi, occ.psi_hat, rtol=1e-12)
        np.testing.assert_allclose(se, occ.psi_se, rtol=1e-12)
        X = data.occ_design
        for s in (0, 5, data.n_sites - 1):
            quad = float(X[s] @ occ.var_sandwich @ X[s])
            manual = psi[s] * (1.0 - psi[s]) * np.sqrt(quad)
            assert se[s] == pytest.approx(manual, rel=1e-12)
        assert np.all(se >= 0.0)

    def test_psi_se_rejects_wrong_variance_shape(self, fitted):
        data, _, occ = fitted
        with pytest.raises(DimensionMismatch):
            psi_with_se(data, occ.alpha_hat, np.eye(3))


class TestFailureModes:
    def test_rank_deficient_occupancy_design(self):
        data = small_dataset(seed=2, n_sites=40)
        bad = Dataset(
            detections=data.detections,
            occ_design=np.repeat(data.occ_design[:, :1], 2, axis=1),
            det_design=data.det_design,
        )
        det = fit_detection(bad)
        with pytest.raises(RankDeficientDesign):
            fit_occupancy(bad, det, "iwls")

    def test_site_count_mismatch(self):
        data = small_dataset(seed=2, n_sites=40)
        det = flat_detection(39, data.n_visits, 0.8)
        with pytest.raises(DimensionMismatch):
            fit_occupancy(data, det, "iwls")

    def test_every_site_detected_is_a_boundary(self):
        data = history_dataset([[1, 1]] * 12)
        det = certain_detection(12, 2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            with pytest.raises(BoundaryEstimate):
                fit_occupancy(data, det, "iwls")


def test_two_stage_bundle_matches_manual_stages():
    data = small_dataset(seed=4, n_sites=150)
    bundle = fit_two_stage(data, "iwls")
    det = fit_detection(data)
    occ = fit_occupancy(data, det, "iwls")
    np.testing.assert_allclose(bundle.detection.beta_hat, det.beta_hat, rtol=1e-12)
    np.testing.assert_allclose(bundle.occupancy.alpha_hat, occ.alpha_hat, rtol=1e-12)
