import json

import numpy as np
import pytest

from fyvi.errors import CovarianceError, FormatError
from fyvi.gmm import (
    EMPTY_MASS,
    GmmState,
    InitSpec,
    canonical_eta,
    e_step,
    e_step_sparsity,
    fit,
    fyvfe,
    init_state,
    load_checkpoint,
    log_densities,
    m_step,
    mixing_proportions,
    prior_scores,
    save_checkpoint,
)
from fyvi.simplex import SHANNON, SPARSEMAX, ZERO, Regularizer, prediction_map

from oracles import classical_em, classification_em, gaussian_logpdf

METHODS = [SHANNON, Regularizer(1.5), SPARSEMAX, ZERO]


def blobs(seed=0, n=60):
    rng = np.random.default_rng(seed)
    centers = np.array([[-2.0, 0.0], [2.0, 0.5], [0.0, 2.5]])
    x = np.vstack([c + 0.6 * rng.standard_normal((n, 2)) for c in centers])
    return x, np.repeat(np.arange(3), n)


def random_state(k, d, omega, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((k, d, d))
    covs = a @ a.transpose(0, 2, 1) + np.eye(d)
    return GmmState(rng.standard_normal(k), rng.standard_normal((k, d)), covs, omega)


class TestLogDensities:
    def test_against_direct_formula(self):
        state = random_state(3, 4, SHANNON)
        x = np.random.default_rng(1).standard_normal((20, 4))
        ref = np.column_stack([gaussian_logpdf(x, m, c) for m, c in zip(state.means, state.covariances)])
        np.testing.assert_allclose(log_densities(x, state.means, state.covariances), ref, rtol=1e-12)

    def test_singular_covariance_names_component(self):
        covs = np.array([np.eye(2), np.zeros((2, 2))])
        with pytest.raises(CovarianceError) as info:
            log_densities(np.zeros((3, 2)), np.zeros((2, 2)), covs)
        assert info.value.component == 1


class TestEStep:
    def test_single_component(self):
        x, _ = blobs()
        for omega in METHODS:
            state = GmmState(np.zeros(1), np.zeros((1, 2)), np.eye(2)[None], omega)
            np.testing.assert_array_equal(e_step(state, x), np.ones((len(x), 1)))

    def test_equidistant_point(self):
        means = np.array([[-1.0, 0.0], [1.0, 0.0]])
        covs = np.array([np.eye(2)] * 2)
        for omega in METHODS:
            eta = canonical_eta(np.array([0.5, 0.5]), omega)
            q = e_step(GmmState(eta, means, covs, omega), np.array([[0.0, 3.0]]))
            np.testing.assert_allclose(q, [[0.5, 0.5]], atol=1e-12)

    def test_sparsemax_drops_distant_component(self):
        # unit covariances: B's log-density is 10 nats below A's at the origin
        means = np.array([[0.0, 0.0], [np.sqrt(20.0), 0.0]])
        state = GmmState(np.array([0.5, 0.5]), means, np.array([np.eye(2)] * 2), SPARSEMAX)
        np.testing.assert_array_equal(e_step(state, np.zeros((1, 2))), [[1.0, 0.0]])

    def test_rows_are_distributions(self):
        x, _ = blobs()
        for omega in METHODS + [Regularizer(0.5)]:
            q = e_step(random_state(4, 2, omega, seed=3), x)
            assert np.all(q >= 0)
            np.testing.assert_allclose(q.sum(axis=1), 1, atol=1e-9)


class TestMStep:
    def test_one_hot_gives_cluster_means(self):
        x, labels = blobs()
        resp = np.eye(3)[labels]
        state = m_step(x, resp, SHANNON)
        for k in range(3):
            np.testing.assert_allclose(state.means[k], x[labels == k].mean(axis=0), atol=1e-12)
            diff = x[labels == k] - x[labels == k].mean(axis=0)
            np.testing.assert_allclose(state.covariances[k], diff.T @ diff / len(diff) + 1e-6 * np.eye(2),
                                       atol=1e-12)

    def test_uniform_rows_give_global_mean(self):
        x, _ = blobs()
        state = m_step(x, np.full((len(x), 4), 0.25), SPARSEMAX)
        np.testing.assert_allclose(state.means, np.tile(x.mean(axis=0), (4, 1)), atol=1e-12)

    def test_shannon_eta_roundtrip(self):
        x = np.zeros((4, 1))
        resp = np.array([[1, 0], [0, 1], [0, 1], [0, 1]], dtype=float)
        state = m_step(x, resp, SHANNON)
        np.testing.assert_allclose(state.eta, np.log([0.25, 0.75]), atol=1e-15)
        np.testing.assert_allclose(prediction_map(state.eta, SHANNON), [0.25, 0.75], atol=1e-15)

    @pytest.mark.parametrize("omega", [Regularizer(r) for r in (0.5, 1.0, 1.1, 1.5, 2.0, 3.0)], ids=str)
    def test_eta_update_inverts_the_map(self, omega):
        qbar = np.array([0.1, 0.2, 0.3, 0.4])
        eta = canonical_eta(qbar, omega)
        np.testing.assert_allclose(prediction_map(eta, omega), qbar, atol=1e-9)
        # the E-step prior score is the same vector up to a shift
        state = GmmState(eta, np.zeros((4, 1)), np.ones((4, 1, 1)), omega)
        shift = prior_scores(state) - eta
        np.testing.assert_allclose(shift, shift[0], atol=1e-8)

    def test_sparsemax_eta_is_qbar(self):
        x, _ = blobs()
        resp = np.random.default_rng(0).dirichlet(np.ones(3), size=len(x))
        np.testing.assert_allclose(m_step(x, resp, SPARSEMAX).eta, resp.mean(axis=0), atol=1e-15)

    def test_empty_component_keeps_previous(self):
        x, labels = blobs()
        resp = np.zeros((len(x), 4))
        resp[np.arange(len(x)), labels] = 1.0
        prev = random_state(4, 2, SPARSEMAX, seed=5)
        state = m_step(x, resp, SPARSEMAX, previous=prev)
        np.testing.assert_array_equal(state.means[3], prev.means[3])
        np.testing.assert_array_equal(state.covariances[3], prev.covariances[3])
        assert state.eta[3] == pytest.approx(EMPTY_MASS)
        assert mixing_proportions(state)[3] > 0
        # without a previous state the empty component falls back to global moments
        np.testing.assert_allclose(m_step(x, resp, SPARSEMAX).means[3], x.mean(axis=0))

    def test_excluded_samples_do_not_move_component(self):
        x, _ = blobs()
        state = fit(x, 3, SPARSEMAX, InitSpec(seed=1), max_iter=30).state
        resp = e_step(state, x)
        i, k = np.argwhere(resp == 0)[0]
        moved = x.copy()
        moved[i] += np.array([0.37, -0.81])
        resp2 = resp.copy()
        a = m_step(x, resp2, SPARSEMAX)
        b = m_step(moved, resp2, SPARSEMAX)
        np.testing.assert_array_equal(a.means[k], b.means[k])
        np.testing.assert_array_equal(a.covariances[k], b.covariances[k])


class TestFyvfe:
    def test_single_component_is_negative_log_likelihood(self):
        x, _ = blobs()
        mean, cov = x.mean(axis=0), np.cov(x.T)
        for omega in METHODS:
            state = GmmState(np.zeros(1), mean[None], cov[None], omega)
            ref = -gaussian_logpdf(x, mean, cov).sum()
            assert fyvfe(state, x, np.ones((len(x), 1))) == pytest.approx(ref, rel=1e-12)

    @pytest.mark.parametrize("omega", METHODS, ids=str)
    def test_e_step_is_optimal(self, omega):
        x, _ = blobs()
        state = random_state(3, 2, omega, seed=7)
        state = GmmState(canonical_eta(mixing_proportions(state), omega) if not omega.is_zero
                         else state.eta, state.means, state.covariances, omega)
        best = fyvfe(state, x, e_step(state, x))
        rng = np.random.default_rng(8)
        for _ in range(20):
            other = rng.dirichlet(np.ones(3), size=len(x))
            assert best <= fyvfe(state, x, other) + 1e-9

    def test_zero_entries_ignore_infinite_loss(self):
        # a point far enough that the component log-density underflows to -inf
        state = GmmState(np.array([0.5, 0.5]), np.array([[0.0], [1e200]]), np.ones((2, 1, 1)), SPARSEMAX)
        x = np.zeros((1, 1))
        assert np.isfinite(fyvfe(state, x, np.array([[1.0, 0.0]])))


class TestFit:
    def test_degenerate_clusters(self):
        pts = np.array([[0.0, 0.0], [5.0, 5.0], [-5.0, 5.0]])
        x = np.repeat(pts, 20, axis=0)
        init = GmmState(np.zeros(3), pts + 0.1, np.array([np.eye(2)] * 3), SHANNON)
        res = fit(x, 3, SHANNON, state=init, max_iter=100)
        np.testing.assert_allclose(res.resp, np.repeat(np.eye(3), 20, axis=0), atol=1e-9)
        assert abs(res.trace[-1] - res.trace[-2]) < 1e-8

    @pytest.mark.parametrize("omega", [SHANNON, Regularizer(1.5), SPARSEMAX, Regularizer(3.0), Regularizer(0.5)],
                             ids=str)
    def test_monotone_trace(self, omega):
        x, _ = blobs(seed=2)
        res = fit(x, 4, omega, InitSpec(seed=3), max_iter=100, tol=0.0)
        assert np.max(np.diff(res.trace)) <= 1e-8

    def test_matches_classical_em(self):
        x, _ = blobs(seed=4)
        k = 3
        init = init_state(x, k, SHANNON, InitSpec(seed=5))
        ref = classical_em(x, init.means, init.covariances, np.full(k, 1 / k), iters=50)
        state = init
        for it in range(50):
            resp = e_step(state, x)
            state = m_step(x, resp, SHANNON, previous=state)
            np.testing.assert_allclose(resp, ref[it]["resp"], atol=1e-8, rtol=0)
            np.testing.assert_allclose(state.means, ref[it]["means"], atol=1e-8, rtol=0)
            np.testing.assert_allclose(state.covariances, ref[it]["covs"], atol=1e-8, rtol=0)
            np.testing.assert_allclose(np.exp(state.eta), ref[it]["weights"], atol=1e-8, rtol=0)

    def test_hard_matches_classification_em(self):
        x, _ = blobs(seed=6)
        init = init_state(x, 3, ZERO, InitSpec(seed=7, low=-1, high=1))
        ref = classification_em(x, init.means, init.covariances, np.full(3, 1 / 3), iters=30)
        state = init
        for it in range(30):
            resp = e_step(state, x)
            np.testing.assert_array_equal(np.argmax(resp, axis=1), ref[it])
            assert set(np.unique(resp)) <= {0.0, 1.0}
            state = m_step(x, resp, ZERO, previous=state)

    def test_early_stop_and_validation(self):
        x, _ = blobs()
        res = fit(x, 3, SHANNON, InitSpec(seed=0), max_iter=500, tol=1e-3)
        assert res.n_iter < 500
        with pytest.raises(ValueError):
            fit(x, 0)
        with pytest.raises(ValueError):
            fit(x[:2], 3)

    def test_seeded(self):
        x, _ = blobs()
        a = fit(x, 3, SPARSEMAX, InitSpec(seed=9), max_iter=20)
        b = fit(x, 3, SPARSEMAX, InitSpec(seed=9), max_iter=20)
        np.testing.assert_array_equal(a.trace, b.trace)


class TestSparsity:
    def test_extremes(self):
        assert e_step_sparsity(np.full((5, 4), 0.25)) == 0
        assert e_step_sparsity(np.eye(4)) == 3
        assert e_step_sparsity(np.array([[0.5, 0.5, 0, 0], [1, 0, 0, 0]])) == 2.5


class TestCheckpoint:
    @pytest.mark.parametrize("omega", [SHANNON, Regularizer(1.5), ZERO], ids=str)
    def test_roundtrip(self, tmp_path, omega):
        state = random_state(3, 2, omega, seed=11)
        path = tmp_path / "model.json"
        save_checkpoint(state, path)
        back = load_checkpoint(path)
        assert back.omega == omega
        np.testing.assert_array_equal(back.eta, state.eta)
        np.testing.assert_array_equal(back.means, state.means)
        np.testing.assert_array_equal(back.covariances, state.covariances)
        obj = json.loads(path.read_text())
        assert obj["n_components"] == 3 and obj["dim"] == 2 and len(obj["covariances"][0]) == 4

    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "fyvi-gmm-checkpoint", "n_components": 2}')
        with pytest.raises(FormatError):
            load_checkpoint(path)
        path.write_text("{not json")
        with pytest.raises(FormatError) as info:
            load_checkpoint(path)
        assert info.value.offset == 1
