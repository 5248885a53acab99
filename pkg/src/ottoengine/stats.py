"""Work and heat fluctuation statistics of the measured Otto cycle.

Two measurement protocols are implemented: projective energy measurements at
the five corners of the cycle (TPM) and measurements in the instantaneous
state eigenbasis with Bayesian inference of the energy outcomes (DBN). Both
produce a joint probability table over the five energy-outcome indices
(j, l, m, n, r), from which work and heat distributions, moments, averaged
post-measurement states, and the fluctuation-bound ratio are derived.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import CycleConfig, CycleOperators, gad_channel
from .qcore import (
    DiscreteDistribution,
    SpectralDecomposition,
    dagger,
    dephase,
    eig_hermitian,
    moments,
)

# Eigenvalue branches of corner states below this weight carry zero probability
# and their Bayesian conditionals are skipped (the conditional divides by the
# branch weight).
BRANCH_EPS = 1e-14

# Variance ratio is reported as undefined below this heat variance.
VAR_QH_EPS = 1e-14

# Self-test hook: when True, the closed-form TPM chains skip the initial
# dephasing, which must break the closed-form/distribution agreement checks.
FAULT_SKIP_TPM_DEPHASE = False


@dataclass(frozen=True)
class OutcomeJoint:
    """Probability table over the five measurement-outcome indices.

    probs[j, l, m, n, r] with index energies energies[slot][index]; slots
    correspond to the corners (1, 2, 3, 4, 1') measured in the bases
    (H_e, H_k, H_k, H_e, H_e).
    """

    scheme: str
    probs: np.ndarray
    energies: tuple[np.ndarray, ...]
    corner_bases: tuple[SpectralDecomposition, ...]

    def total(self) -> float:
        return float(self.probs.sum())


@dataclass(frozen=True)
class SchemeReport:
    """Distribution-derived and closed-form moments for one scheme."""

    scheme: str
    mean_w: float
    var_w: float
    mean_qh: float
    var_qh: float
    mean_qc: float
    var_qc: float
    closed_form_mean_w: float
    closed_form_var_w: float
    closed_form_mean_qh: float
    closed_form_var_qh: float
    closed_form_mean_qc: float
    closed_form_var_qc: float
    first_law_residual: float

    def max_closed_form_mismatch(self) -> float:
        return max(
            abs(self.mean_w - self.closed_form_mean_w),
            abs(self.var_w - self.closed_form_var_w),
            abs(self.mean_qh - self.closed_form_mean_qh),
            abs(self.var_qh - self.closed_form_var_qh),
            abs(self.mean_qc - self.closed_form_mean_qc),
            abs(self.var_qc - self.closed_form_var_qc),
        )


def _conj(u, x):
    return u @ x @ dagger(u)


def _measurement_bases(ops: CycleOperators):
    e, k = ops.H_e_end, ops.H_k_end
    return (e, k, k, e, e)


def tpm_joint(corners, ops: CycleOperators, config: CycleConfig) -> OutcomeJoint:
    """Joint outcome table of five consecutive projective energy measurements."""
    rho1 = corners[0]
    be, bk = ops.H_e_end, ops.H_k_end
    pe, pk = be.proj_stack, bk.proj_stack
    ne, nk = len(be.eigenvalues), len(bk.eigenvalues)
    probs = np.zeros((ne, nk, nk, ne, ne))
    for j in range(ne):
        s2 = _conj(ops.U_k, pe[j] @ rho1 @ pe[j])
        for l in range(nk):
            s3 = gad_channel(pk[l] @ s2 @ pk[l], config.lambda_h, ops.gibbs_h, bk)
            for m in range(nk):
                s4 = _conj(ops.U_e, pk[m] @ s3 @ pk[m])
                for n in range(ne):
                    s5 = gad_channel(
                        pe[n] @ s4 @ pe[n], config.lambda_c, ops.gibbs_c, be
                    )
                    probs[j, l, m, n, :] = np.einsum("rab,ba->r", pe, s5).real
    probs = np.where(probs < 0, np.where(probs >= -1e-12, 0.0, probs), probs)
    bases = _measurement_bases(ops)
    return OutcomeJoint("TPM", probs, tuple(b.eigenvalues for b in bases), bases)


def corner_decompositions(corners, config: CycleConfig):
    """Spectral decompositions of the four limit-cycle corner states."""
    return tuple(eig_hermitian(rho, config.grouping_tol) for rho in corners)


def _dbn_tables(corners, ops: CycleOperators, config: CycleConfig, decomps=None):
    """Branch weights, stroke transfer matrices, and energy conditionals.

    Returns (weights, transfers, conditionals) where weights[i][a] is the
    probability of eigenvalue branch a of corner state i; transfers[s][a, b]
    is the probability of landing in branch b of the next corner given branch
    a before stroke s; conditionals[slot][a, j] is the Born probability of
    energy index j given branch a at measurement slot (corners 1, 2, 3, 4, 1).
    """
    rho1, rho2, rho3, rho4 = corners
    if decomps is None:
        decomps = corner_decompositions(corners, config)
    d1, d2, d3, d4 = decomps
    be, bk = ops.H_e_end, ops.H_k_end

    def stroke(decomp, rho, apply_map, next_decomp):
        branches = [p @ rho @ p for p in decomp.projectors]
        w = np.array([float(np.trace(b).real) for b in branches])
        t = np.zeros((len(branches), len(next_decomp.projectors)))
        for a, branch in enumerate(branches):
            if w[a] <= BRANCH_EPS:
                continue
            out = apply_map(branch)
            t[a] = np.einsum("bij,ji->b", next_decomp.proj_stack, out).real / w[a]
        return w, np.clip(t, 0.0, None), branches

    w1, t1, br1 = stroke(d1, rho1, lambda x: _conj(ops.U_k, x), d2)
    w2, t2, br2 = stroke(
        d2, rho2, lambda x: gad_channel(x, config.lambda_h, ops.gibbs_h, bk), d3
    )
    w3, t3, br3 = stroke(d3, rho3, lambda x: _conj(ops.U_e, x), d4)
    w4, t4, br4 = stroke(
        d4, rho4, lambda x: gad_channel(x, config.lambda_c, ops.gibbs_c, be), d1
    )

    def conditionals(branches, w, basis):
        c = np.zeros((len(branches), len(basis.projectors)))
        for a, branch in enumerate(branches):
            if w[a] <= BRANCH_EPS:
                continue
            c[a] = np.einsum("jab,ba->j", basis.proj_stack, branch).real / w[a]
        return np.clip(c, 0.0, None)

    conds = (
        conditionals(br1, w1, be),
        conditionals(br2, w2, bk),
        conditionals(br3, w3, bk),
        conditionals(br4, w4, be),
        conditionals(br1, w1, be),  # final measurement is back at corner 1
    )
    return (w1, w2, w3, w4), (t1, t2, t3, t4), conds, decomps


def dbn_joint(corners, ops: CycleOperators, config: CycleConfig) -> OutcomeJoint:
    """Joint energy-outcome table inferred from state-eigenbasis measurements."""
    weights, transfers, conds, _ = _dbn_tables(corners, ops, config)
    w1 = weights[0]
    t1, t2, t3, t4 = transfers
    chain = np.einsum("a,ab,bc,cd,de->abcde", w1, t1, t2, t3, t4, optimize=True)
    probs = np.einsum(
        "abcde,aj,bl,cm,dn,er->jlmnr", chain, *conds, optimize=True
    )
    probs = np.where(probs < 0, np.where(probs >= -1e-12, 0.0, probs), probs)
    bases = _measurement_bases(ops)
    return OutcomeJoint("DBN", probs, tuple(b.eigenvalues for b in bases), bases)


def marginals(joint: OutcomeJoint):
    """(p_w over (j,l,m,n), p_qh over (l,m), p_qc over (n,r))."""
    p_w = joint.probs.sum(axis=4)
    p_qh = joint.probs.sum(axis=(0, 3, 4))
    p_qc = joint.probs.sum(axis=(0, 1, 2))
    return p_w, p_qh, p_qc


def value_distribution(
    kind: str,
    marginal: np.ndarray,
    energies: tuple[np.ndarray, ...],
    merge_tol: float,
) -> DiscreteDistribution:
    """Map an outcome marginal onto the distribution of work or heat values.

    kind 'work' expects the 4-index marginal over (j, l, m, n); 'heat_h' the
    2-index marginal over (l, m); 'heat_c' the 2-index marginal over (n, r).
    """
    e1, e2, e3, e4, e5 = energies
    if kind == "work":
        vals = (
            e1[:, None, None, None]
            - e2[None, :, None, None]
            + e3[None, None, :, None]
            - e4[None, None, None, :]
        )
    elif kind == "heat_h":
        vals = e3[None, :] - e2[:, None]
    elif kind == "heat_c":
        vals = e5[None, :] - e4[:, None]
    else:
        raise ValueError(f"unknown distribution kind {kind!r}")
    return DiscreteDistribution.from_atoms(vals.ravel(), marginal.ravel(), merge_tol)


def scheme_distributions(joint: OutcomeJoint, merge_tol: float):
    """(P(w), P(q_h), P(q_c)) assembled from a five-index outcome joint."""
    p_w, p_qh, p_qc = marginals(joint)
    return (
        value_distribution("work", p_w, joint.energies, merge_tol),
        value_distribution("heat_h", p_qh, joint.energies, merge_tol),
        value_distribution("heat_c", p_qc, joint.energies, merge_tol),
    )


# ---------------------------------------------------------------------------
# Closed-form moments (direct operator algebra, no outcome-table assembly)
# ---------------------------------------------------------------------------


def _weighted_dephase(x, basis: SpectralDecomposition, weights):
    p = basis.proj_stack
    return np.einsum("a,aij,jk,akl->il", weights, p, x, p, optimize=True)


def _tpm_chain_moment(rho1, ops, config, w1, w2, w3, w4) -> float:
    """sum_{jlmn} w1_j w2_l w3_m w4_n p_w^TPM(j,l,m,n) via weighted dephasings.

    The final isochore and fifth measurement are trace preserving and drop out
    of any functional of the first four outcomes.
    """
    be, bk = ops.H_e_end, ops.H_k_end
    x = rho1 if FAULT_SKIP_TPM_DEPHASE else _weighted_dephase(rho1, be, w1)
    x = _conj(ops.U_k, x)
    x = _weighted_dephase(x, bk, w2)
    x = gad_channel(x, config.lambda_h, ops.gibbs_h, bk)
    x = _weighted_dephase(x, bk, w3)
    x = _conj(ops.U_e, x)
    x = _weighted_dephase(x, be, w4)
    return float(np.trace(x).real)


def _tpm_closed_form(corners, ops, config):
    rho1 = corners[0]
    be, bk = ops.H_e_end, ops.H_k_end
    he, hk = ops.H_e_mat, ops.H_k_mat

    def de(x):
        return x if FAULT_SKIP_TPM_DEPHASE else dephase(x, be)

    def dk(x):
        return dephase(x, bk)

    def th(x):
        return gad_channel(x, config.lambda_h, ops.gibbs_h, bk)

    def tc(x):
        return gad_channel(x, config.lambda_c, ops.gibbs_c, be)

    def tr(op, x):
        return float(np.trace(op @ x).real)

    a = _conj(ops.U_k, de(rho1))          # after compression of the dephased state
    b = th(a)                              # after hot isochore
    c = _conj(ops.U_e, dk(b))              # after expansion of the dephased state
    f = tc(c)                              # after cold isochore

    mean_qh = tr(hk, b) - tr(hk, a)
    mean_qc = tr(he, f) - tr(he, c)
    mean_w = tr(hk, b) - tr(hk, a) + tr(he, rho1) - tr(he, c)
    residual = tr(he, rho1) - tr(he, f)

    hk2, he2 = hk @ hk, he @ he
    var_qh = (
        tr(hk2, b) - tr(hk, b) ** 2 + tr(hk2, a) - tr(hk, a) ** 2
        + 2 * tr(hk, b) * tr(hk, a)
        - 2 * tr(hk, th(hk @ a))
    )
    var_qc = (
        tr(he2, f) - tr(he, f) ** 2 + tr(he2, c) - tr(he, c) ** 2
        + 2 * tr(he, f) * tr(he, c)
        - 2 * tr(he, tc(he @ c))
    )

    # Work variance through weighted-dephasing chains over the first four
    # outcome slots, w = e_j - e_l + e_m - e_n.
    ee, ek = be.eigenvalues, bk.eigenvalues
    ones_e, ones_k = np.ones_like(ee), np.ones_like(ek)
    slot_energy = (ee, ek, ek, ee)
    slot_ones = (ones_e, ones_k, ones_k, ones_e)
    signs = (1.0, -1.0, 1.0, -1.0)

    def chain(weighted_slots):
        ws = list(slot_ones)
        for u in weighted_slots:
            ws[u] = ws[u] * slot_energy[u]
        return _tpm_chain_moment(rho1, ops, config, *ws)

    first = [chain([u]) for u in range(4)]
    second = 0.0
    for u in range(4):
        for v in range(4):
            second += signs[u] * signs[v] * chain([u, v])
    mean_w_chain = sum(s * f1 for s, f1 in zip(signs, first))
    var_w = second - mean_w_chain**2

    return mean_w, var_w, mean_qh, var_qh, mean_qc, var_qc, residual


def _dbn_closed_form(corners, ops, config):
    rho1, rho2, rho3, rho4 = corners
    he, hk = ops.H_e_mat, ops.H_k_mat
    hk2, he2 = hk @ hk, he @ he

    def tr(op, x):
        return float(np.trace(op @ x).real)

    mean_qh = tr(hk, rho3) - tr(hk, rho2)
    mean_qc = tr(he, rho1) - tr(he, rho4)
    mean_w = mean_qh + mean_qc

    weights, transfers, _, decomps = _dbn_tables(corners, ops, config)
    w1, w2, w3, w4 = weights
    t1, t2, t3, t4 = transfers
    d1, d2, d3, d4 = decomps

    def cond_energy(decomp, rho, w, h):
        v = np.zeros(len(w))
        for a, p in enumerate(decomp.projectors):
            if w[a] > BRANCH_EPS:
                v[a] = float(np.trace(h @ p @ rho @ p).real) / w[a]
        return v

    he1 = cond_energy(d1, rho1, w1, he)
    hk2v = cond_energy(d2, rho2, w2, hk)
    hk3v = cond_energy(d3, rho3, w3, hk)
    he4 = cond_energy(d4, rho4, w4, he)

    var_qh = (
        tr(hk2, rho3) - tr(hk, rho3) ** 2 + tr(hk2, rho2) - tr(hk, rho2) ** 2
        + 2 * tr(hk, rho3) * tr(hk, rho2)
        - 2 * float(np.einsum("b,bc,b,c->", w2, t2, hk2v, hk3v))
    )
    var_qc = (
        tr(he2, rho1) - tr(he, rho1) ** 2 + tr(he2, rho4) - tr(he, rho4) ** 2
        + 2 * tr(he, rho1) * tr(he, rho4)
        - 2 * float(np.einsum("d,de,d,e->", w4, t4, he4, he1))
    )
    var_w = (
        var_qh + var_qc - 2 * mean_qh * mean_qc
        + 2 * float(np.einsum("d,de,d,e->", w4, t4, he4, he1))
        - 2 * float(np.einsum("a,ab,bc,cd,a,d->", w1, t1, t2, t3, he1, he4, optimize=True))
        + 2 * float(np.einsum("b,bc,cd,b,d->", w2, t2, t3, hk2v, he4, optimize=True))
        + 2 * float(np.einsum("a,ab,bc,a,c->", w1, t1, t2, he1, hk3v, optimize=True))
        - 2 * float(np.einsum("a,ab,a,b->", w1, t1, he1, hk2v))
        - 2 * float(np.einsum("c,cd,c,d->", w3, t3, hk3v, he4))
    )
    residual = mean_w - mean_qh - mean_qc  # exactly zero: first law holds for DBN
    return mean_w, var_w, mean_qh, var_qh, mean_qc, var_qc, residual


def scheme_report(
    scheme: str, corners, ops: CycleOperators, config: CycleConfig
) -> SchemeReport:
    """Distribution-derived moments paired with their closed-form counterparts."""
    if scheme == "TPM":
        joint = tpm_joint(corners, ops, config)
        closed = _tpm_closed_form(corners, ops, config)
    elif scheme == "DBN":
        joint = dbn_joint(corners, ops, config)
        closed = _dbn_closed_form(corners, ops, config)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    dist_w, dist_qh, dist_qc = scheme_distributions(joint, config.merge_tol)
    mean_w, var_w = moments(dist_w)
    mean_qh, var_qh = moments(dist_qh)
    mean_qc, var_qc = moments(dist_qc)
    return SchemeReport(
        scheme=scheme,
        mean_w=mean_w, var_w=var_w,
        mean_qh=mean_qh, var_qh=var_qh,
        mean_qc=mean_qc, var_qc=var_qc,
        closed_form_mean_w=closed[0], closed_form_var_w=closed[1],
        closed_form_mean_qh=closed[2], closed_form_var_qh=closed[3],
        closed_form_mean_qc=closed[4], closed_form_var_qc=closed[5],
        first_law_residual=closed[6],
    )


def closed_form_means(
    scheme: str, corners, ops: CycleOperators, config: CycleConfig
) -> tuple[float, float, float]:
    """(mean_w, mean_qh, mean_qc) from the closed forms, skipping the joint.

    Cheap enough for regime classification over large parameter grids.
    """
    if scheme == "TPM":
        c = _tpm_closed_form(corners, ops, config)
    elif scheme == "DBN":
        c = _dbn_closed_form(corners, ops, config)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return c[0], c[2], c[4]


def avg_post_measurement_state(
    scheme: str, corners, ops: CycleOperators, config: CycleConfig
) -> np.ndarray:
    """Ensemble-averaged state after one measured cycle, back at corner 1.

    TPM dephases in the energy eigenbasis at each of the five measurements;
    DBN dephases in the eigenbasis of the current state, which is computed
    (not short-circuited) and acts as the identity.
    """
    rho1 = corners[0]
    be, bk = ops.H_e_end, ops.H_k_end

    def basis_for(state, energy_basis):
        if scheme == "TPM":
            return energy_basis
        return eig_hermitian(state, config.grouping_tol)

    if scheme not in ("TPM", "DBN"):
        raise ValueError(f"unknown scheme {scheme!r}")
    s = dephase(rho1, basis_for(rho1, be))
    s = _conj(ops.U_k, s)
    s = dephase(s, basis_for(s, bk))
    s = gad_channel(s, config.lambda_h, ops.gibbs_h, bk)
    s = dephase(s, basis_for(s, bk))
    s = _conj(ops.U_e, s)
    s = dephase(s, basis_for(s, be))
    s = gad_channel(s, config.lambda_c, ops.gibbs_c, be)
    return dephase(s, basis_for(s, be))


def check_equivalence_conditions(
    ops: CycleOperators,
    config: CycleConfig,
    probe_states=None,
    seed: int = 0,
    tol: float = 1e-9,
) -> tuple[bool, float]:
    """Do the stroke unitaries keep dephased states free of new coherence?

    Checks, for each probe state rho, that U_k applied to the H_e-dephased
    probe lands on an H_k-diagonal state, and the mirrored condition for U_e.
    Returns (all conditions hold, worst residual).
    """
    be, bk = ops.H_e_end, ops.H_k_end
    if probe_states is None:
        rng = np.random.default_rng(seed)
        probe_states = []
        for basis in (be, bk):
            for p in basis.projectors:
                probe_states.append(p / np.trace(p).real)
        for _ in range(10):
            w = rng.dirichlet(np.ones(config.d))
            probe_states.append(np.diag(w).astype(complex))
    worst = 0.0
    for rho in probe_states:
        a = _conj(ops.U_k, dephase(rho, be))
        worst = max(worst, float(np.max(np.abs(a - dephase(a, bk)))))
        b = _conj(ops.U_e, dephase(rho, bk))
        worst = max(worst, float(np.max(np.abs(b - dephase(b, be)))))
    return worst < tol, worst


@dataclass(frozen=True)
class FluctuationRatio:
    eta2: float | None
    bound: float
    violated: bool | None
    defined: bool


def fluctuation_ratio(report: SchemeReport, config: CycleConfig) -> FluctuationRatio:
    """Work/heat variance ratio against the squared Carnot efficiency bound."""
    bound = (1.0 - config.T_c / config.T_h) ** 2
    if report.var_qh < VAR_QH_EPS:
        return FluctuationRatio(None, bound, None, False)
    eta2 = report.var_w / report.var_qh
    return FluctuationRatio(eta2, bound, eta2 > bound, True)
