import numpy as np
import pytest
import scipy.linalg

from conftest import random_config, random_state, solved_cycle
from ottoengine.engine import (
    ConvergenceError,
    CycleConfig,
    DrivingProtocol,
    build_cycle,
    classify_regime,
    cycle_map,
    gad_channel,
    limit_cycle,
    propagator,
    propagator_fixed_steps,
    unmeasured_thermo,
)
from ottoengine.qcore import eig_hermitian, spin_operators, trace_distance
from ottoengine.reference import two_level_otto_work


class TestDrivingProtocol:
    def test_endpoint_values(self):
        p = DrivingProtocol(0.5, 10.0, 9.0, 2.0)
        assert p.omega(0.0) == 0.5
        assert abs(p.omega(2.0) - 10.0) < 1e-14
        assert p.g(0.0) == 0.0
        assert abs(p.g(2.0)) < 1e-14
        assert abs(p.g(1.0) - 9.0) < 1e-14


class TestCycleConfig:
    def test_thermalization_times(self):
        c = random_config(np.random.default_rng(0)).with_overrides(
            lambda_h=0.5, lambda_c=1.0
        )
        t_h, t_c = c.thermalization_times()
        assert abs(t_h - (-np.log(0.5))) < 1e-14
        assert t_c == np.inf

    def test_with_overrides_rejects_unknown(self):
        c = random_config(np.random.default_rng(0))
        with pytest.raises((TypeError, ValueError)):
            c.with_overrides(not_a_field=1.0)

    def test_validate_rejects_bad_frequencies(self):
        with pytest.raises(ValueError):
            CycleConfig(
                d=2, omega_h=0.5, omega_c=1.0, T_h=1.0, T_c=0.5,
                g=0.0, lambda_h=0.5, lambda_c=0.5,
            ).validate()


class TestPropagator:
    def test_commuting_closed_form(self):
        # with no transverse drive every H(t) is diagonal, so the propagator
        # is exp(-i * integral of omega * Sz) with integral (w0 + w1) t / 2
        sx, _, sz = spin_operators(3)
        protocol = DrivingProtocol(0.5, 10.0, 0.0, 1.0)
        u = propagator(protocol, sx, sz, 256, 1e-11)
        expected = scipy.linalg.expm(-1j * 5.25 * sz)
        assert np.max(np.abs(u - expected)) < 1e-10

    @pytest.mark.parametrize("g", [0.0, 3.0, 9.0])
    def test_unitarity(self, g):
        sx, _, sz = spin_operators(3)
        u = propagator(DrivingProtocol(0.5, 10.0, g, 1.0), sx, sz, 256, 1e-9)
        assert np.max(np.abs(u @ u.conj().T - np.eye(3))) < 1e-10

    def test_step_doubling_self_consistency(self):
        sx, _, sz = spin_operators(2)
        protocol = DrivingProtocol(0.5, 10.0, 9.0, 1.0)
        a = propagator_fixed_steps(protocol, sx, sz, 2048)
        b = propagator_fixed_steps(protocol, sx, sz, 4096)
        assert np.max(np.abs(a - b)) < 1e-5

    def test_second_order_scaling(self):
        sx, _, sz = spin_operators(3)
        protocol = DrivingProtocol(0.5, 10.0, 9.0, 1.0)
        ref = propagator_fixed_steps(protocol, sx, sz, 4096)
        errs = [
            np.max(np.abs(propagator_fixed_steps(protocol, sx, sz, n) - ref))
            for n in (64, 128, 256)
        ]
        orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
        assert 1.7 <= orders.mean() <= 2.3

    def test_nonconvergence_reports_error(self):
        sx, _, sz = spin_operators(2)
        with pytest.raises(ConvergenceError) as exc:
            propagator(DrivingProtocol(0.5, 10.0, 9.0, 1.0), sx, sz, 2, 1e-16)
        assert exc.value.achieved > 0


def _thermal_basis(d, omega, T):
    _, _, sz = spin_operators(d)
    basis = eig_hermitian(omega * sz)
    w = np.exp(-basis.eigenvalues / T)
    w /= w.sum()
    sigma = sum(p * pr for p, pr in zip(w, basis.projectors))
    return sigma.astype(complex), basis


class TestGadChannel:
    def test_lambda_zero_identity(self):
        rng = np.random.default_rng(0)
        sigma, basis = _thermal_basis(3, 2.0, 1.0)
        rho = random_state(rng, 3)
        assert np.max(np.abs(gad_channel(rho, 0.0, sigma, basis) - rho)) < 1e-14

    def test_lambda_one_collapse(self):
        rng = np.random.default_rng(1)
        sigma, basis = _thermal_basis(4, 2.0, 1.0)
        rho = random_state(rng, 4)
        assert np.max(np.abs(gad_channel(rho, 1.0, sigma, basis) - sigma)) < 1e-14

    def test_diagonal_convex_combination(self):
        _, _, sz = spin_operators(2)
        basis = eig_hermitian(sz)
        rho = np.diag([1.0, 0.0]).astype(complex)
        sigma = np.diag([0.25, 0.75]).astype(complex)
        out = gad_channel(rho, 0.5, sigma, basis)
        assert np.allclose(out, np.diag([0.625, 0.375]))

    def test_qubit_offdiagonal_damping(self):
        rng = np.random.default_rng(2)
        sigma, basis = _thermal_basis(2, 2.0, 1.0)
        rho = random_state(rng, 2)
        lam = 0.37
        out = gad_channel(rho, lam, sigma, basis)
        assert abs(out[0, 1] - np.sqrt(1 - lam) * rho[0, 1]) < 1e-12

    @pytest.mark.parametrize("d", [2, 3, 4])
    def test_trace_hermiticity_positivity(self, d):
        rng = np.random.default_rng(d)
        sigma, basis = _thermal_basis(d, 1.5, 0.8)
        for _ in range(5):
            rho = random_state(rng, d)
            out = gad_channel(rho, float(rng.uniform(0, 1)), sigma, basis)
            assert abs(np.trace(out).real - 1.0) < 1e-12
            assert np.max(np.abs(out - out.conj().T)) < 1e-12
            assert np.min(np.linalg.eigvalsh(out)) > -1e-10

    def test_commutes_with_dephasing(self):
        from ottoengine.qcore import dephase

        rng = np.random.default_rng(5)
        sigma, basis = _thermal_basis(3, 1.5, 0.8)
        rho = random_state(rng, 3)
        lam = 0.6
        a = dephase(gad_channel(rho, lam, sigma, basis), basis)
        b = gad_channel(dephase(rho, basis), lam, sigma, basis)
        assert np.max(np.abs(a - b)) < 1e-10

    def test_rejects_nondiagonal_sigma(self):
        _, _, sz = spin_operators(2)
        basis = eig_hermitian(sz)
        sigma = np.array([[0.5, 0.2], [0.2, 0.5]], dtype=complex)
        with pytest.raises(ValueError):
            gad_channel(np.eye(2, dtype=complex) / 2, 0.5, sigma, basis)


class TestBuildCycle:
    def test_gibbs_populations_qubit(self):
        # d=2, omega_h=10, T_h=14: excited weight 1/(1 + e^(10/14))
        config = CycleConfig(
            d=2, omega_h=10.0, omega_c=0.5, T_h=14.0, T_c=0.1,
            g=0.0, lambda_h=0.5, lambda_c=0.5, propagator_tol=1e-9,
        )
        ops = build_cycle(config)
        pops = np.diag(ops.gibbs_h).real
        assert abs(pops[0] - 0.32865254651727005) < 1e-12
        assert abs(pops[1] - 0.67134745348273) < 1e-12

    def test_g0_unitary_diagonal(self):
        config = CycleConfig(
            d=3, omega_h=5.0, omega_c=0.5, T_h=5.0, T_c=0.5,
            g=0.0, lambda_h=0.5, lambda_c=0.5, propagator_tol=1e-9,
        )
        ops = build_cycle(config)
        off = ops.U_k - np.diag(np.diag(ops.U_k))
        assert np.max(np.abs(off)) < 1e-10

    def test_gibbs_states_are_states(self):
        config = random_config(np.random.default_rng(7))
        ops = build_cycle(config)
        for gibbs in (ops.gibbs_h, ops.gibbs_c):
            assert abs(np.trace(gibbs).real - 1.0) < 1e-12
            assert np.min(np.diag(gibbs).real) > 0


class TestCycleAndLimit:
    def test_full_thermalization_gives_cold_gibbs(self):
        config = random_config(np.random.default_rng(8), d=3).with_overrides(
            lambda_h=1.0, lambda_c=1.0
        )
        ops = build_cycle(config)
        rho = random_state(np.random.default_rng(9), 3)
        out = cycle_map(rho, ops, config)
        assert np.max(np.abs(out - ops.gibbs_c)) < 1e-12
        corners = limit_cycle(ops, config)
        assert trace_distance(corners[0], ops.gibbs_c) < 1e-12

    def test_identity_channels_preserve_diagonal(self):
        config = random_config(np.random.default_rng(10), d=3).with_overrides(
            g=0.0, lambda_h=0.0, lambda_c=0.0
        )
        ops = build_cycle(config)
        rho = np.diag([0.5, 0.3, 0.2]).astype(complex)
        assert np.max(np.abs(cycle_map(rho, ops, config) - rho)) < 1e-10

    def test_fixed_point_property_and_multistart(self):
        rng = np.random.default_rng(11)
        config = random_config(rng, d=3)
        ops = build_cycle(config)
        corners = limit_cycle(ops, config)
        assert trace_distance(cycle_map(corners[0], ops, config), corners[0]) \
            < 10 * config.fixed_point_tol
        alt = limit_cycle(ops, config, initial=random_state(rng, 3))
        assert trace_distance(corners[0], alt[0]) < 10 * config.fixed_point_tol

    def test_corner_chain(self):
        config = random_config(np.random.default_rng(12), d=2)
        ops, corners = solved_cycle(config)
        r1, r2, r3, r4 = corners
        assert np.max(np.abs(r2 - ops.U_k @ r1 @ ops.U_k.conj().T)) < 1e-12
        assert np.max(np.abs(r4 - ops.U_e @ r3 @ ops.U_e.conj().T)) < 1e-12


class TestThermo:
    def test_lambda_zero_no_heat(self):
        config = random_config(np.random.default_rng(13), d=2).with_overrides(
            lambda_h=0.0, lambda_c=0.0, g=1.0
        )
        ops, corners = solved_cycle(config)
        w, qh, qc = unmeasured_thermo(corners, ops, config)
        assert abs(qh) < 1e-10 and abs(qc) < 1e-10

    def test_quasistatic_two_level_closed_form(self):
        config = CycleConfig(
            d=2, omega_h=10.0, omega_c=0.5, T_h=14.0, T_c=0.1,
            g=0.0, lambda_h=1.0, lambda_c=1.0, propagator_tol=1e-9,
        )
        ops, corners = solved_cycle(config)
        w, qh, qc = unmeasured_thermo(corners, ops, config)
        assert abs(w - two_level_otto_work(10.0, 0.5, 14.0, 0.1)) < 1e-10
        assert w > 0

    def test_first_law(self):
        config = random_config(np.random.default_rng(14))
        ops, corners = solved_cycle(config)
        w, qh, qc = unmeasured_thermo(corners, ops, config)
        assert abs(w - qh - qc) < 1e-12

    def test_g0_diagonal_corners(self):
        config = random_config(np.random.default_rng(15), d=3).with_overrides(g=0.0)
        _, corners = solved_cycle(config)
        for c in corners:
            assert np.max(np.abs(c - np.diag(np.diag(c)))) < 1e-10


class TestClassifyRegime:
    def test_sign_conventions(self):
        assert classify_regime(1.0, 2.0, -1.0) == "Engine"
        assert classify_regime(-1.0, 2.0, -1.0) == "Accelerator"
        assert classify_regime(-1.0, -2.0, -1.0) == "Heater"
        assert classify_regime(0.0, 0.0, 0.0, tol=1e-9) == "Other"
        assert classify_regime(1.0, -1.0, 0.5) == "Other"
