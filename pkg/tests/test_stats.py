import numpy as np
import pytest

from conftest import random_config, solved_cycle
from ottoengine import reference, stats
from ottoengine.engine import unmeasured_thermo
from ottoengine.qcore import kl_divergence, trace_distance


def work_dist(joint, merge_tol):
    return stats.scheme_distributions(joint, merge_tol)[0]


class TestJoints:
    @pytest.mark.parametrize("scheme", ["TPM", "DBN"])
    def test_normalized_and_nonnegative(self, scheme, cold_cycle):
        config, ops, corners = cold_cycle
        fn = stats.tpm_joint if scheme == "TPM" else stats.dbn_joint
        joint = fn(corners, ops, config)
        assert abs(joint.total() - 1.0) < 1e-10
        assert joint.probs.min() >= 0.0

    def test_g0_schemes_identical(self):
        config = random_config(np.random.default_rng(0), d=3).with_overrides(g=0.0)
        ops, corners = solved_cycle(config)
        jt = stats.tpm_joint(corners, ops, config)
        jd = stats.dbn_joint(corners, ops, config)
        assert np.max(np.abs(jt.probs - jd.probs)) < 1e-10

    def test_full_thermalization_schemes_identical(self):
        config = random_config(np.random.default_rng(1), d=3).with_overrides(
            lambda_h=1.0, lambda_c=1.0
        )
        ops, corners = solved_cycle(config)
        jt = stats.tpm_joint(corners, ops, config)
        jd = stats.dbn_joint(corners, ops, config)
        assert np.max(np.abs(jt.probs - jd.probs)) < 1e-10

    @pytest.mark.parametrize("seed", [2, 3, 4])
    def test_bruteforce_oracles_d2(self, seed):
        config = random_config(np.random.default_rng(seed), d=2)
        ops, corners = solved_cycle(config)
        jt = stats.tpm_joint(corners, ops, config)
        assert np.max(np.abs(
            jt.probs - reference.tpm_joint_bruteforce(corners, ops, config)
        )) < 1e-10
        jd = stats.dbn_joint(corners, ops, config)
        assert np.max(np.abs(
            jd.probs - reference.dbn_joint_bruteforce(corners, ops, config)
        )) < 1e-10


class TestMarginals:
    def test_normalization_and_consistency(self, cold_cycle):
        config, ops, corners = cold_cycle
        joint = stats.tpm_joint(corners, ops, config)
        p_w, p_qh, p_qc = stats.marginals(joint)
        for m in (p_w, p_qh, p_qc):
            assert abs(m.sum() - 1.0) < 1e-10
        # the m-index marginal must agree between the work and hot-heat tables
        assert np.max(np.abs(p_w.sum(axis=(0, 1, 3)) - p_qh.sum(axis=0))) < 1e-12

    def test_work_marginal_matches_direct_chain(self):
        config = random_config(np.random.default_rng(5), d=2)
        ops, corners = solved_cycle(config)
        joint = stats.tpm_joint(corners, ops, config)
        p_w = joint.probs.sum(axis=4)
        direct = reference.tpm_work_marginal_direct(corners, ops, config)
        assert np.max(np.abs(p_w - direct)) < 1e-10


class TestValueDistribution:
    def test_diagonal_heat_is_zero_atom(self):
        energies = (np.array([0.0]), np.array([-1.0, 1.0]),
                    np.array([-1.0, 1.0]), np.array([0.0]), np.array([0.0]))
        marg = np.diag([0.4, 0.6])
        dist = stats.value_distribution("heat_h", marg, energies, 1e-9)
        assert list(dist.values) == [0.0]
        assert abs(dist.total() - 1.0) < 1e-15

    def test_work_support_from_level_spacings(self):
        config = random_config(np.random.default_rng(6), d=2).with_overrides(
            omega_h=10.0, omega_c=0.5
        )
        ops, corners = solved_cycle(config)
        joint = stats.tpm_joint(corners, ops, config)
        dist = work_dist(joint, config.merge_tol)
        ee, ek = ops.H_e_end.eigenvalues, ops.H_k_end.eigenvalues
        allowed = sorted({
            round(ee[j] - ek[l] + ek[m] - ee[n], 6)
            for j in range(2) for l in range(2) for m in range(2) for n in range(2)
        })
        for v in dist.values:
            assert any(abs(v - a) < 1e-6 for a in allowed)


class TestSchemeReport:
    def test_dbn_means_equal_unmeasured(self, cold_cycle):
        config, ops, corners = cold_cycle
        w, qh, qc = unmeasured_thermo(corners, ops, config)
        r = stats.scheme_report("DBN", corners, ops, config)
        assert abs(r.mean_w - w) < 1e-10
        assert abs(r.mean_qh - qh) < 1e-10
        assert abs(r.mean_qc - qc) < 1e-10
        assert abs(r.first_law_residual) < 1e-12

    def test_tpm_g0_mean_equals_unmeasured(self):
        config = random_config(np.random.default_rng(7), d=3).with_overrides(g=0.0)
        ops, corners = solved_cycle(config)
        w, _, _ = unmeasured_thermo(corners, ops, config)
        r = stats.scheme_report("TPM", corners, ops, config)
        assert abs(r.mean_w - w) < 1e-10

    @pytest.mark.parametrize("scheme", ["TPM", "DBN"])
    def test_closed_form_matches_distribution(self, scheme, cold_cycle):
        config, ops, corners = cold_cycle
        r = stats.scheme_report(scheme, corners, ops, config)
        assert r.max_closed_form_mismatch() < 1e-8

    def test_tpm_first_law_two_routes(self, cold_cycle):
        config, ops, corners = cold_cycle
        r = stats.scheme_report("TPM", corners, ops, config)
        assert abs((r.mean_w - r.mean_qh - r.mean_qc) - r.first_law_residual) < 1e-8
        # with strong driving the deviation itself is nonzero
        assert abs(r.first_law_residual) > 1e-6

    def test_fault_hook_breaks_agreement(self, cold_cycle):
        config, ops, corners = cold_cycle
        stats.FAULT_SKIP_TPM_DEPHASE = True
        try:
            r = stats.scheme_report("TPM", corners, ops, config)
        finally:
            stats.FAULT_SKIP_TPM_DEPHASE = False
        assert r.max_closed_form_mismatch() > 1e-3

    def test_closed_form_means_helper(self, cold_cycle):
        config, ops, corners = cold_cycle
        for scheme in ("TPM", "DBN"):
            r = stats.scheme_report(scheme, corners, ops, config)
            means = stats.closed_form_means(scheme, corners, ops, config)
            assert np.allclose(
                means,
                (r.closed_form_mean_w, r.closed_form_mean_qh, r.closed_form_mean_qc),
            )


class TestBackaction:
    def test_dbn_returns_limit_state(self, cold_cycle):
        config, ops, corners = cold_cycle
        avg = stats.avg_post_measurement_state("DBN", corners, ops, config)
        assert trace_distance(avg, corners[0]) < 1e-10

    def test_tpm_perturbs_when_coherent(self, cold_cycle):
        config, ops, corners = cold_cycle
        avg = stats.avg_post_measurement_state("TPM", corners, ops, config)
        assert trace_distance(avg, corners[0]) > 1e-3

    def test_tpm_matches_history_average(self):
        config = random_config(np.random.default_rng(8), d=2)
        ops, corners = solved_cycle(config)
        avg = stats.avg_post_measurement_state("TPM", corners, ops, config)
        oracle = reference.tpm_avg_state_bruteforce(corners, ops, config)
        assert np.max(np.abs(avg - oracle)) < 1e-9


class TestEquivalenceConditions:
    def test_g0_true(self):
        config = random_config(np.random.default_rng(9), d=3).with_overrides(g=0.0)
        ops, _ = solved_cycle(config)
        ok, worst = stats.check_equivalence_conditions(ops, config)
        assert ok and worst < 1e-12

    def test_strong_driving_false(self, cold_cycle):
        config, ops, _ = cold_cycle
        ok, worst = stats.check_equivalence_conditions(ops, config)
        assert not ok and worst > 0.01

    def test_thermalized_schemes_agree_despite_failure(self):
        config = random_config(np.random.default_rng(10), d=3).with_overrides(
            lambda_h=1.0, lambda_c=1.0, g=9.0
        )
        ops, corners = solved_cycle(config)
        ok, _ = stats.check_equivalence_conditions(ops, config)
        assert not ok
        pt = work_dist(stats.tpm_joint(corners, ops, config), config.merge_tol)
        pd = work_dist(stats.dbn_joint(corners, ops, config), config.merge_tol)
        assert kl_divergence(pd, pt) < 1e-10


class TestFluctuationRatio:
    def test_bound_value(self):
        config = random_config(np.random.default_rng(11)).with_overrides(
            T_h=1.2, T_c=1.0
        )
        r = stats.SchemeReport(
            "TPM", 0, 1.0, 0, 1.0, 0, 0, 0, 1.0, 0, 1.0, 0, 0, 0.0
        )
        fr = stats.fluctuation_ratio(r, config)
        assert abs(fr.bound - (1.0 / 6.0) ** 2) < 1e-12
        assert fr.eta2 == 1.0

    def test_undefined_below_threshold(self):
        config = random_config(np.random.default_rng(12))
        r = stats.SchemeReport(
            "TPM", 0, 1.0, 0, 0.0, 0, 0, 0, 1.0, 0, 0.0, 0, 0, 0.0
        )
        fr = stats.fluctuation_ratio(r, config)
        assert not fr.defined
        assert fr.eta2 is None and fr.violated is None
