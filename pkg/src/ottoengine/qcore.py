"""Dense complex linear algebra and information metrics for small quantum systems.

Everything operates on plain numpy arrays (complex128). States are Hermitian,
unit-trace, positive semidefinite matrices; Hamiltonians are Hermitian. All
entropic quantities use the natural logarithm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

HERMITIAN_TOL = 1e-10
STATE_TOL = 1e-12
EIGVAL_CLAMP = 1e-14


class DimensionMismatchError(ValueError):
    pass


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(a - dagger(a))) <= tol)


def check_state(rho: np.ndarray, tol: float = STATE_TOL) -> None:
    """Raise ValueError unless rho is a valid density matrix."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"state must be square, got shape {rho.shape}")
    if np.max(np.abs(rho - dagger(rho))) > tol:
        raise ValueError("state is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError(f"state trace {np.trace(rho).real} != 1")
    if np.min(np.linalg.eigvalsh(rho)) < -tol:
        raise ValueError("state is not positive semidefinite")


def spin_operators(d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spin matrices (Sx, Sy, Sz) for total spin j = (d-1)/2, hbar = 1.

    Basis ordered by descending Sz eigenvalue, m = j, j-1, ..., -j.
    """
    if d < 2:
        raise ValueError(f"spin dimension must be >= 2, got {d}")
    j = (d - 1) / 2.0
    m = j - np.arange(d)
    sz = np.diag(m).astype(complex)
    # raising operator: S+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>
    c = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    sp = np.zeros((d, d), dtype=complex)
    sp[np.arange(d - 1), np.arange(1, d)] = c
    sx = (sp + dagger(sp)) / 2
    sy = (sp - dagger(sp)) / 2j
    return sx, sy, sz


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues of a Hermitian operator grouped into degenerate eigenspaces.

    eigenvalues are ascending and pairwise separated by more than grouping_tol;
    projectors[a] is the (possibly rank > 1) orthogonal projector onto the
    eigenspace of eigenvalues[a].
    """

    eigenvalues: np.ndarray
    projectors: tuple[np.ndarray, ...]
    grouping_tol: float
    # stacked view of the projectors, kept for vectorized channel/dephasing code
    proj_stack: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.proj_stack is None:
            object.__setattr__(self, "proj_stack", np.stack(self.projectors))

    @property
    def dim(self) -> int:
        return self.projectors[0].shape[0]

    @property
    def ranks(self) -> np.ndarray:
        return np.array([int(round(np.trace(p).real)) for p in self.projectors])

    def operator(self) -> np.ndarray:
        """Reconstruct sum_a lambda_a P_a."""
        return np.einsum("a,aij->ij", self.eigenvalues, self.proj_stack)


def eig_hermitian(h: np.ndarray, grouping_tol: float = 1e-9) -> SpectralDecomposition:
    """Spectral decomposition of a Hermitian matrix with degeneracy grouping.

    Eigenvalues closer than grouping_tol (chained by consecutive gaps) are
    merged into a single eigenspace carrying one rank-k projector.
    """
    if not is_hermitian(h):
        raise ValueError("eig_hermitian requires a Hermitian matrix")
    w, v = np.linalg.eigh(h)
    groups: list[list[int]] = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[groups[-1][-1]] <= grouping_tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    eigenvalues = np.array([w[g].mean() for g in groups])
    projectors = []
    for g in groups:
        vg = v[:, g]
        projectors.append(vg @ dagger(vg))
    return SpectralDecomposition(eigenvalues, tuple(projectors), grouping_tol)


def dephase(rho: np.ndarray, basis: SpectralDecomposition) -> np.ndarray:
    """Remove off-diagonal blocks of rho with respect to the basis projectors."""
    if rho.shape[0] != basis.dim:
        raise DimensionMismatchError(
            f"state dim {rho.shape[0]} != basis dim {basis.dim}"
        )
    p = basis.proj_stack
    return np.einsum("aij,jk,akl->il", p, rho, p, optimize=True)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """(1/2) * trace norm of rho - sigma."""
    if rho.shape != sigma.shape:
        raise DimensionMismatchError(f"shape mismatch {rho.shape} vs {sigma.shape}")
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(rho - sigma))))


def von_neumann_entropy(rho: np.ndarray) -> float:
    """-tr(rho ln rho); eigenvalues below the clamp count as exact zeros."""
    w = np.linalg.eigvalsh(rho)
    w = np.where(w < EIGVAL_CLAMP, 0.0, w)
    nz = w[w > 0]
    return float(-np.sum(nz * np.log(nz)))


def rel_entropy_coherence(rho: np.ndarray, basis: SpectralDecomposition) -> float:
    """Relative entropy of coherence of rho in the given projector basis."""
    val = von_neumann_entropy(dephase(rho, basis)) - von_neumann_entropy(rho)
    return max(val, 0.0)


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite real-valued distribution with atoms merged within merge_tol."""

    values: np.ndarray
    probs: np.ndarray
    merge_tol: float

    @classmethod
    def from_atoms(
        cls, values: np.ndarray, probs: np.ndarray, merge_tol: float
    ) -> "DiscreteDistribution":
        """Build a distribution, merging atoms whose values lie within merge_tol.

        Merged atoms get summed mass and the probability-weighted mean value.
        Zero-mass atoms are dropped; small negative masses (> -1e-12) clamp to 0.
        """
        values = np.asarray(values, dtype=float).ravel()
        probs = np.asarray(probs, dtype=float).ravel()
        if np.min(probs, initial=0.0) < -1e-12:
            raise ValueError("negative probability in distribution atoms")
        probs = np.clip(probs, 0.0, None)
        order = np.argsort(values)
        values, probs = values[order], probs[order]
        # chain-merge consecutive values whose gap is within tolerance
        split = np.nonzero(np.diff(values) > merge_tol)[0] + 1
        merged_v, merged_p = [], []
        for chunk_v, chunk_p in zip(np.split(values, split), np.split(probs, split)):
            mass = chunk_p.sum()
            if mass <= 0.0:
                continue
            merged_v.append(float(np.dot(chunk_v, chunk_p) / mass))
            merged_p.append(float(mass))
        return cls(np.array(merged_v), np.array(merged_p), merge_tol)

    def total(self) -> float:
        return float(self.probs.sum())


def moments(dist: DiscreteDistribution) -> tuple[float, float]:
    """Mean and variance of a discrete distribution."""
    mean = float(np.dot(dist.values, dist.probs))
    var = float(np.dot((dist.values - mean) ** 2, dist.probs))
    return mean, var


def kl_divergence(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Kullback-Leibler divergence sum p ln(p/q) over value-matched atoms.

    Atoms are matched by value within the larger of the two merge tolerances.
    Any atom of p with no matching atom in q makes the divergence +inf.
    """
    if abs(p.total() - 1.0) > 1e-10 or abs(q.total() - 1.0) > 1e-10:
        raise ValueError("kl_divergence requires normalized distributions")
    tol = max(p.merge_tol, q.merge_tol)
    qv = q.values
    total = 0.0
    for v, mass in zip(p.values, p.probs):
        if mass == 0.0:
            continue
        i = int(np.searchsorted(qv, v))
        best = None
        for k in (i - 1, i):
            if 0 <= k < len(qv) and abs(qv[k] - v) <= tol:
                if best is None or abs(qv[k] - v) < abs(qv[best] - v):
                    best = k
        if best is None:
            return math.inf
        total += mass * math.log(mass / q.probs[best])
    return max(total, 0.0)
