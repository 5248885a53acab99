import numpy as np
import pytest

from ottoengine.engine import CycleConfig, build_cycle, limit_cycle


def random_state(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


def random_config(rng, d=None, lam_floor=0.05, propagator_tol=1e-7):
    """Randomized cycle parameters within the studied figure ranges.

    The propagator tolerance is relaxed because every identity under test
    holds exactly for whatever unitary the stepping scheme produces.
    """
    if d is None:
        d = int(rng.integers(2, 5))
    omega_c = float(rng.uniform(0.3, 2.0))
    return CycleConfig(
        d=d,
        omega_h=omega_c + float(rng.uniform(0.5, 9.0)),
        omega_c=omega_c,
        T_h=float(rng.uniform(1.0, 14.0)),
        T_c=float(rng.uniform(0.1, 1.0)),
        g=float(rng.uniform(0.0, 10.0)),
        lambda_h=float(rng.uniform(lam_floor, 1.0)),
        lambda_c=float(rng.uniform(lam_floor, 1.0)),
        propagator_tol=propagator_tol,
    )


def solved_cycle(config):
    ops = build_cycle(config)
    corners = limit_cycle(ops, config)
    return ops, corners


@pytest.fixture(scope="session")
def cold_cycle():
    """The strongly driven three-level cycle used by most report figures."""
    config = CycleConfig(
        d=3, omega_h=10.0, omega_c=0.5, T_h=14.0, T_c=0.1,
        g=9.0, lambda_h=0.3, lambda_c=0.3, propagator_tol=1e-9,
    )
    ops, corners = solved_cycle(config)
    return config, ops, corners
