"""Finite-time coherent Otto cycle on a d-level spin.

The working substance evolves under H(t) = omega(t) Sz + g(t) Sx during the
two unitary strokes and relaxes toward a Gibbs state through a generalized
amplitude damping channel during the two isochores. Units: hbar = k_B = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .qcore import (
    SpectralDecomposition,
    dagger,
    dephase,
    eig_hermitian,
    spin_operators,
    trace_distance,
)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error {achieved:.3e})")
        self.achieved = achieved


@dataclass(frozen=True)
class DrivingProtocol:
    """Linear frequency ramp with a sine-pulse transverse drive."""

    omega_start: float
    omega_end: float
    g_peak: float
    duration: float

    def omega(self, t):
        return (self.omega_end - self.omega_start) * t / self.duration + self.omega_start

    def g(self, t):
        return self.g_peak * np.sin(np.pi * t / self.duration)


@dataclass(frozen=True)
class CycleConfig:
    """All physical and numerical parameters of one Otto cycle."""

    d: int
    omega_h: float
    omega_c: float
    T_h: float
    T_c: float
    g: float
    lambda_h: float
    lambda_c: float
    t_k: float = 1.0
    t_e: float = 1.0
    propagator_steps: int = 256
    propagator_tol: float = 1e-11
    fixed_point_tol: float = 1e-13
    grouping_tol: float = 1e-9
    merge_tol: float = 1e-9

    def validate(self) -> None:
        if self.d < 2:
            raise ValueError(f"d must be >= 2, got {self.d}")
        if not (self.omega_h > self.omega_c > 0):
            raise ValueError(
                f"need omega_h > omega_c > 0, got {self.omega_h}, {self.omega_c}"
            )
        if self.T_h <= 0 or self.T_c <= 0:
            raise ValueError(f"temperatures must be > 0, got {self.T_h}, {self.T_c}")
        if self.g < 0:
            raise ValueError(f"g must be >= 0, got {self.g}")
        if self.t_k <= 0 or self.t_e <= 0:
            raise ValueError(f"stroke durations must be > 0, got {self.t_k}, {self.t_e}")
        for name in ("lambda_h", "lambda_c"):
            lam = getattr(self, name)
            if not 0.0 <= lam <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {lam}")
        if self.propagator_steps < 2:
            raise ValueError("propagator_steps must be >= 2")

    def thermalization_times(self) -> tuple[float, float]:
        """Bath coupling times t = -ln(1 - lambda); lambda = 1 maps to inf."""
        def t_of(lam):
            return math.inf if lam >= 1.0 else -math.log1p(-lam)

        return t_of(self.lambda_h), t_of(self.lambda_c)

    def with_overrides(self, **kwargs) -> "CycleConfig":
        unknown = set(kwargs) - set(self.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown CycleConfig field(s): {sorted(unknown)}")
        return replace(self, **kwargs)


@dataclass(frozen=True)
class CycleOperators:
    """Stroke unitaries, end-point Hamiltonian decompositions, Gibbs states."""

    U_k: np.ndarray
    U_e: np.ndarray
    H_k_end: SpectralDecomposition  # omega_h * Sz
    H_e_end: SpectralDecomposition  # omega_c * Sz
    gibbs_h: np.ndarray
    gibbs_c: np.ndarray

    @property
    def H_k_mat(self) -> np.ndarray:
        return self.H_k_end.operator()

    @property
    def H_e_mat(self) -> np.ndarray:
        return self.H_e_end.operator()


_PROPAGATOR_CHUNK = 1 << 16
_PROPAGATOR_MAX_DOUBLINGS = 16


def _product_in_time_order(us: np.ndarray) -> np.ndarray:
    """Ordered product U_n ... U_2 U_1 of a stack of step unitaries."""
    tail = None
    while us.shape[0] > 1:
        if us.shape[0] % 2:
            last = us[-1]
            tail = last if tail is None else tail @ last
            us = us[:-1]
        us = np.matmul(us[1::2], us[0::2])
    return us[0] if tail is None else tail @ us[0]


def _propagate(protocol, sz_diag, sy_vecs, sy_vals, n):
    """Midpoint piecewise-constant propagator with n slices, fully vectorized.

    Each slice uses H = |Omega| R_y(theta) Sz R_y(theta)^dag with
    theta = atan2(g, omega), valid for genuine spin operators;
    R_y(theta) = exp(-i theta Sy) comes from the one-time eigendecomposition
    of Sy, so every step unitary is exact for its frozen Hamiltonian.
    """
    d = len(sz_diag)
    total = np.eye(d, dtype=complex)
    for start in range(0, n, _PROPAGATOR_CHUNK):
        count = min(_PROPAGATOR_CHUNK, n - start)
        dt = protocol.duration / n
        t = (start + np.arange(count) + 0.5) * dt
        om = protocol.omega(t)
        gs = protocol.g(t)
        theta = np.arctan2(gs, om)
        mag = np.hypot(gs, om)
        ry = np.matmul(
            sy_vecs[None, :, :] * np.exp(-1j * theta[:, None] * sy_vals)[:, None, :],
            dagger(sy_vecs)[None, :, :],
        )
        pz = np.exp(-1j * (mag[:, None] * dt) * sz_diag[None, :])
        us = np.matmul(ry * pz[:, None, :], ry.conj().transpose(0, 2, 1))
        total = _product_in_time_order(us) @ total
    return total


def propagator_fixed_steps(
    protocol: DrivingProtocol, sx: np.ndarray, sz: np.ndarray, n: int
) -> np.ndarray:
    """Propagator at a fixed slice count, without adaptive refinement.

    Used to measure the convergence order of the stepping scheme.
    """
    sy = -1j * (sz @ sx - sx @ sz)
    sy_vals, sy_vecs = np.linalg.eigh(sy)
    sz_diag = np.diag(sz).real
    return _propagate(protocol, sz_diag, sy_vecs, sy_vals, n)


def propagator(
    protocol: DrivingProtocol,
    sx: np.ndarray,
    sz: np.ndarray,
    steps: int = 256,
    tol: float = 1e-11,
) -> np.ndarray:
    """Time-ordered propagator for H(t) = omega(t) Sz + g(t) Sx.

    Midpoint piecewise-constant exponentials (second order); the step count is
    doubled until successive results agree to tol in max-entry norm. The result
    is unitary by construction at every step count.
    """
    if steps < 2:
        raise ValueError("propagator needs at least 2 steps")
    sy = -1j * (sz @ sx - sx @ sz)
    sy_vals, sy_vecs = np.linalg.eigh(sy)
    sz_diag = np.diag(sz).real
    n = steps
    u_prev = _propagate(protocol, sz_diag, sy_vecs, sy_vals, n)
    for _ in range(_PROPAGATOR_MAX_DOUBLINGS):
        n *= 2
        u = _propagate(protocol, sz_diag, sy_vecs, sy_vals, n)
        err = float(np.max(np.abs(u - u_prev)))
        if err < tol:
            # Project onto the nearest unitary: slice products accumulate
            # rounding that leaves U unitary only to about tol, and a cycle
            # map built from a non-unitary U is not trace preserving, which
            # blocks tight fixed-point convergence downstream.
            w, _, vh = np.linalg.svd(u)
            return w @ vh
        u_prev = u
    raise ConvergenceError(
        f"propagator did not converge to {tol:.1e} within {n} steps", err
    )


def gad_channel(
    rho: np.ndarray,
    lam: float,
    sigma: np.ndarray,
    basis: SpectralDecomposition,
) -> np.ndarray:
    """Generalized amplitude damping toward the fixed point sigma.

    T(rho) = (1-lam) rho + lam tr(rho) sigma
             - 2 sqrt(1-lam) (1 - sqrt(1-lam)) sum_j p_j [P_j rho P_j - {P_j, rho}/2]

    with p_j the eigenvalue of sigma on eigenspace j of the basis. Linear in
    rho, so unnormalized Hermitian inputs are handled consistently.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if rho.shape[0] != basis.dim or sigma.shape != rho.shape:
        raise ValueError("gad_channel dimension mismatch")
    if np.max(np.abs(dephase(sigma, basis) - sigma)) > 1e-10:
        raise ValueError("gad_channel fixed point is not diagonal in the basis")
    tr = np.trace(rho)
    if lam >= 1.0:
        return tr * sigma
    p = basis.proj_stack
    ranks = np.einsum("aii->a", p).real
    pops = np.einsum("aij,ji->a", p, sigma).real / ranks
    x = math.sqrt(1.0 - lam)
    prp = np.einsum("a,aij,jk,akl->il", pops, p, rho, p, optimize=True)
    pbar = np.einsum("a,aij->ij", pops, p)
    anti = 0.5 * (pbar @ rho + rho @ pbar)
    return (1.0 - lam) * rho + lam * tr * sigma - 2.0 * x * (1.0 - x) * (prp - anti)


def _gibbs(basis: SpectralDecomposition, temperature: float) -> np.ndarray:
    w = np.exp(-(basis.eigenvalues - basis.eigenvalues.min()) / temperature)
    z = float(np.dot(w, basis.ranks))
    return np.einsum("a,aij->ij", w / z, basis.proj_stack)


def build_cycle(config: CycleConfig) -> CycleOperators:
    """Construct stroke unitaries, end-point Hamiltonians, and Gibbs states."""
    config.validate()
    sx, _, sz = spin_operators(config.d)
    u_k = propagator(
        DrivingProtocol(config.omega_c, config.omega_h, config.g, config.t_k),
        sx, sz, config.propagator_steps, config.propagator_tol,
    )
    u_e = propagator(
        DrivingProtocol(config.omega_h, config.omega_c, config.g, config.t_e),
        sx, sz, config.propagator_steps, config.propagator_tol,
    )
    h_k = eig_hermitian(config.omega_h * sz, config.grouping_tol)
    h_e = eig_hermitian(config.omega_c * sz, config.grouping_tol)
    return CycleOperators(
        U_k=u_k,
        U_e=u_e,
        H_k_end=h_k,
        H_e_end=h_e,
        gibbs_h=_gibbs(h_k, config.T_h),
        gibbs_c=_gibbs(h_e, config.T_c),
    )


def cycle_map(rho: np.ndarray, ops: CycleOperators, config: CycleConfig) -> np.ndarray:
    """One full cycle: compression, hot isochore, expansion, cold isochore."""
    s = ops.U_k @ rho @ dagger(ops.U_k)
    s = gad_channel(s, config.lambda_h, ops.gibbs_h, ops.H_k_end)
    s = ops.U_e @ s @ dagger(ops.U_e)
    return gad_channel(s, config.lambda_c, ops.gibbs_c, ops.H_e_end)


def limit_cycle(
    ops: CycleOperators,
    config: CycleConfig,
    initial: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Corner states (rho1, rho2, rho3, rho4) of the limit cycle.

    Iterates the cycle map from the maximally mixed state until successive
    iterates agree to fixed_point_tol, then verifies the fixed-point property.
    """
    tol = config.fixed_point_tol
    cap = 100_000 if min(config.lambda_h, config.lambda_c) >= 1e-3 else 1_000_000
    rho = np.eye(config.d, dtype=complex) / config.d if initial is None else initial
    diff = math.inf
    for _ in range(cap):
        nxt = cycle_map(rho, ops, config)
        # cheap max-entry prescreen; the trace-distance check below is the contract
        if np.max(np.abs(nxt - rho)) < tol:
            diff = trace_distance(nxt, rho)
            rho = nxt
            if diff < tol:
                break
        else:
            rho = nxt
    else:
        raise ConvergenceError(
            f"limit cycle did not converge to {tol:.1e} within {cap} iterations",
            diff if diff < math.inf else float(np.max(np.abs(cycle_map(rho, ops, config) - rho))),
        )
    resid = trace_distance(cycle_map(rho, ops, config), rho)
    if resid > 10 * tol:
        raise ConvergenceError("fixed point verification failed", resid)
    rho1 = rho
    rho2 = ops.U_k @ rho1 @ dagger(ops.U_k)
    rho3 = gad_channel(rho2, config.lambda_h, ops.gibbs_h, ops.H_k_end)
    rho4 = ops.U_e @ rho3 @ dagger(ops.U_e)
    return rho1, rho2, rho3, rho4


def unmeasured_thermo(
    corners, ops: CycleOperators, config: CycleConfig
) -> tuple[float, float, float]:
    """(W, Q_h, Q_c) of the unobserved limit cycle; W = Q_h + Q_c."""
    rho1, rho2, rho3, rho4 = corners
    q_h = float(np.trace(ops.H_k_mat @ (rho3 - rho2)).real)
    q_c = float(np.trace(ops.H_e_mat @ (rho1 - rho4)).real)
    return q_h + q_c, q_h, q_c


def classify_regime(w: float, qh: float, qc: float, tol: float = 1e-10) -> str:
    """Operation regime from the signs of mean work and the two heats."""
    if w > tol and qh > tol and qc < -tol:
        return "Engine"
    if w < -tol and qh > tol and qc < -tol:
        return "Accelerator"
    if w < -tol and qh < -tol and qc < -tol:
        return "Heater"
    return "Other"
