import numpy as np
import pytest

from dmlkit.crossfit import CrossfitConfig, crossfit_estimate, fit_nuisances, normal_quantile
from dmlkit.data import Dataset, FoldPartition, make_partition, validate_dataset
from dmlkit.errors import ArmMissingInTrainingFoldError
from dmlkit.learners import LearnerSpec
from dmlkit.scores import score_values
from dmlkit.simulation import DgpSpec, generate, true_nuisance_provider


def _oracle_config(score="ate", K=5, seed=17, **kw):
    return CrossfitConfig(
        score=score,
        K=K,
        learner_g=LearnerSpec("oracle_linear"),
        learner_m=LearnerSpec("oracle_linear", task="probability"),
        seed=seed,
        **kw,
    )


@pytest.fixture(scope="module")
def linear_sample():
    return generate(DgpSpec(p=5, theta0=0.5, seed=100), N=800)


class TestAlgorithmExactness:
    def test_theta_is_mean_of_fold_roots(self, linear_sample):
        report = crossfit_estimate(linear_sample.dataset, _oracle_config())
        assert report.theta_hat == float(np.mean(report.per_fold_thetas))

    def test_ci_halfwidth_formula(self, linear_sample):
        report = crossfit_estimate(linear_sample.dataset, _oracle_config(alpha=0.05))
        half = (report.ci_hi - report.ci_lo) / 2.0
        expected = normal_quantile(0.975) * report.sigma_hat / np.sqrt(linear_sample.dataset.n)
        assert half == pytest.approx(expected, rel=1e-12)
        assert report.ci_lo <= report.theta_hat <= report.ci_hi
        assert report.theta_hat - report.ci_lo == pytest.approx(report.ci_hi - report.theta_hat, rel=1e-9)

    @pytest.mark.parametrize("score", ["ate", "atte", "plm"])
    def test_fold_roots_zero_their_moments(self, linear_sample, score):
        config = _oracle_config(score=score)
        data = linear_sample.dataset
        partition = make_partition(data.n, config.K, config.seed)
        report = crossfit_estimate(data, config, partition=partition)
        for k in range(1, config.K + 1):
            nuis = fit_nuisances(data, partition, k, config)
            idx = partition.fold_indices(k)
            psi = score_values(score, data.outcomes[idx], data.treatments[idx], nuis, report.per_fold_thetas[k - 1])
            assert abs(psi.mean()) <= 1e-10

    def test_sigma_recomputable_from_fold_nuisances(self, linear_sample):
        config = _oracle_config()
        data = linear_sample.dataset
        partition = make_partition(data.n, config.K, config.seed)
        report = crossfit_estimate(data, config, partition=partition)
        psi = np.empty(data.n)
        for k in range(1, config.K + 1):
            nuis = fit_nuisances(data, partition, k, config)
            idx = partition.fold_indices(k)
            psi[idx] = score_values("ate", data.outcomes[idx], data.treatments[idx], nuis, report.theta_hat)
        assert report.sigma_hat == pytest.approx(float(np.sqrt(np.mean(psi**2))), rel=1e-12)
        assert report.sigma_hat > 0.0

    def test_permutation_invariance(self, linear_sample):
        config = _oracle_config()
        data = linear_sample.dataset
        partition = make_partition(data.n, config.K, config.seed)
        base = crossfit_estimate(data, config, partition=partition)

        rng = np.random.default_rng(3)
        perm = rng.permutation(data.n)
        permuted_data = Dataset(
            outcomes=data.outcomes[perm],
            treatments=data.treatments[perm],
            covariates=data.covariates[perm],
        )
        permuted_partition = FoldPartition(
            assignments=partition.assignments[perm], K=partition.K, seed=partition.seed
        )
        moved = crossfit_estimate(permuted_data, config, partition=permuted_partition)
        assert moved.theta_hat == pytest.approx(base.theta_hat, abs=1e-12 * max(1, abs(base.theta_hat)))
        assert moved.sigma_hat == pytest.approx(base.sigma_hat, rel=1e-12)


class TestFitNuisances:
    def test_separable_truth(self):
        # Y = D exactly: arm regressions must be exactly constant 0 and 1
        rng = np.random.default_rng(7)
        Z = rng.normal(size=(40, 2))
        d = np.tile([0, 1], 20)
        data = Dataset(outcomes=d.astype(float), treatments=d, covariates=Z)
        config = _oracle_config(K=4)
        partition = make_partition(data.n, 4, config.seed)
        for k in range(1, 5):
            nuis = fit_nuisances(data, partition, k, config)
            assert np.allclose(nuis.g0_hat, 0.0, atol=1e-10)
            assert np.allclose(nuis.g1_hat, 1.0, atol=1e-10)

    def test_fair_coin_propensity(self):
        rng = np.random.default_rng(8)
        n = 4000
        Z = rng.normal(size=(n, 3))
        d = (rng.random(n) < 0.5).astype(int)
        y = d + rng.normal(size=n)
        data = Dataset(outcomes=y, treatments=d, covariates=Z)
        config = _oracle_config(K=2)
        partition = make_partition(n, 2, config.seed)
        nuis = fit_nuisances(data, partition, 1, config)
        assert abs(nuis.m_hat.mean() - 0.5) < 0.05
        assert abs(nuis.m_bar - 0.5) < 0.05

    def test_arm_missing_in_training_fold(self):
        # both treated rows sit in fold 1, so fold 1's complement has none
        data = validate_dataset(
            [1.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            [1, 1, 0, 0, 0, 0],
            np.arange(12.0).reshape(6, 2),
        )
        partition = FoldPartition(assignments=[1, 1, 1, 2, 2, 2], K=2, seed=0)
        config = _oracle_config(K=2, seed=0)
        with pytest.raises(ArmMissingInTrainingFoldError, match="fold 1"):
            crossfit_estimate(data, config, partition=partition)

    def test_trimming_counted(self):
        rng = np.random.default_rng(9)
        n = 400
        Z = rng.normal(size=(n, 2))
        d = (rng.random(n) < 0.5).astype(int)
        y = rng.normal(size=n)
        data = Dataset(outcomes=y, treatments=d, covariates=Z)
        report = crossfit_estimate(data, _oracle_config(trim=(0.49, 0.51), K=2))
        assert report.n_trimmed > 0

    def test_plm_nuisances_have_no_trim(self, linear_sample):
        config = _oracle_config(score="plm")
        partition = make_partition(linear_sample.dataset.n, config.K, config.seed)
        nuis = fit_nuisances(linear_sample.dataset, partition, 1, config)
        assert hasattr(nuis, "l_hat")


class TestEstimates:
    def test_oracle_learners_recover_ate(self, linear_sample):
        report = crossfit_estimate(linear_sample.dataset, _oracle_config())
        se = report.sigma_hat / np.sqrt(linear_sample.dataset.n)
        assert abs(report.theta_hat - 0.5) < 4 * se

    @pytest.mark.parametrize("score", ["atte", "plm"])
    def test_other_scores_recover_homogeneous_effect(self, linear_sample, score):
        report = crossfit_estimate(linear_sample.dataset, _oracle_config(score=score))
        se = report.sigma_hat / np.sqrt(linear_sample.dataset.n)
        assert abs(report.theta_hat - 0.5) < 4 * se

    def test_k2_and_k5_agree(self, linear_sample):
        r2 = crossfit_estimate(linear_sample.dataset, _oracle_config(K=2))
        r5 = crossfit_estimate(linear_sample.dataset, _oracle_config(K=5))
        n = linear_sample.dataset.n
        combined_se = np.sqrt(r2.sigma_hat**2 + r5.sigma_hat**2) / np.sqrt(n)
        assert abs(r2.theta_hat - r5.theta_hat) < 4 * combined_se

    def test_ci_width_scales_as_root_n(self):
        spec = DgpSpec(p=5, theta0=0.5, seed=11)
        config = _oracle_config()
        ratios = []
        for rep in range(100):
            small = generate(spec, 1000, seed=1000 + rep)
            large = generate(spec, 4000, seed=5000 + rep)
            w = []
            for sample in (small, large):
                r = crossfit_estimate(
                    sample.dataset, config, nuisance_provider=true_nuisance_provider(sample)
                )
                w.append(r.ci_hi - r.ci_lo)
            ratios.append(w[1] / w[0])
        assert 0.45 <= np.mean(ratios) <= 0.55

    def test_fold_error_carries_index(self):
        # fold 1 trains fine on fold 2's rows; fold 2's complement lacks treated
        data = validate_dataset(
            [1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [1, 1, 0, 0, 0, 0, 0, 0],
            np.arange(16.0).reshape(8, 2),
        )
        partition = FoldPartition(assignments=[2, 2, 1, 1, 1, 2, 2, 2], K=2, seed=5)
        with pytest.raises(ArmMissingInTrainingFoldError, match=r"fold 2:"):
            crossfit_estimate(data, _oracle_config(K=2, seed=5), partition=partition)

    def test_learner_based_estimate_with_lasso(self, linear_sample):
        config = CrossfitConfig(score="ate", K=2, seed=21)  # default lasso learners
        report = crossfit_estimate(linear_sample.dataset, config)
        se = report.sigma_hat / np.sqrt(linear_sample.dataset.n)
        assert abs(report.theta_hat - 0.5) < 5 * se

    def test_estimate_within_three_sigma_at_scale(self):
        # correctly specified fast learners at N=10^4: the root-N normal
        # approximation puts essentially every replication within 3 SEs
        from dmlkit.simulation import coverage_experiment

        result = coverage_experiment(
            DgpSpec(p=10, theta0=0.5, seed=2718),
            N=10_000,
            reps=200,
            config=_oracle_config(seed=1),
            master_seed=5,
            workers=2,
        )
        within = np.mean([abs(r.error) <= 3 * r.sigma_hat / np.sqrt(r.N) for r in result.records])
        assert within >= 0.99


class TestConfigValidation:
    def test_bad_k(self):
        with pytest.raises(ValueError):
            CrossfitConfig(K=1)

    def test_bad_trim(self):
        with pytest.raises(ValueError):
            CrossfitConfig(trim=(0.5, 0.4))

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            CrossfitConfig(alpha=1.5)

    def test_bad_score(self):
        with pytest.raises(ValueError):
            CrossfitConfig(score="att")

    def test_tasks_coerced(self):
        config = CrossfitConfig(
            learner_g=LearnerSpec("lasso", task="probability"),
            learner_m=LearnerSpec("lasso", task="regression"),
        )
        assert config.learner_g.task == "regression"
        assert config.learner_m.task == "probability"
