"""Independent brute-force oracles for cross-checking the statistics code.

Everything here is deliberately written along a different computational route
than the production modules: normalized conditional states with explicit
probability bookkeeping instead of unnormalized linear chains, a vectorized
superoperator for the damping channel instead of the direct matrix formula,
and a separate eigenvalue-grouping loop. Slow and simple on purpose; intended
for small dimensions (d = 2, 3) in tests.
"""
from __future__ import annotations

import numpy as np

from .engine import CycleConfig, CycleOperators


def _dag(a):
    return a.conj().T


def gad_superoperator(lam: float, sigma: np.ndarray, projectors) -> np.ndarray:
    """d^2 x d^2 matrix of the damping channel acting on vec(rho).

    Built column by column from the channel's action on matrix units, then
    applied by plain matrix-vector multiplication.
    """
    d = sigma.shape[0]
    x = np.sqrt(1.0 - lam)
    pops = [float(np.trace(p @ sigma).real) / round(np.trace(p).real) for p in projectors]
    sup = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            unit = np.zeros((d, d), dtype=complex)
            unit[a, b] = 1.0
            out = (1.0 - lam) * unit + lam * np.trace(unit) * sigma
            for pj, proj in zip(pops, projectors):
                diss = proj @ unit @ proj - (proj @ unit + unit @ proj) / 2
                out -= 2.0 * x * (1.0 - x) * pj * diss
            sup[:, a * d + b] = out.ravel()
    return sup


def _apply_sup(sup, rho):
    d = rho.shape[0]
    return (sup @ rho.ravel()).reshape(d, d)


def tpm_joint_bruteforce(corners, ops: CycleOperators, config: CycleConfig):
    """Five-measurement outcome table by enumerating projection histories.

    Each history carries a normalized conditional state and an accumulated
    probability; branches of zero probability are dropped.
    """
    rho1 = corners[0]
    be, bk = ops.H_e_end, ops.H_k_end
    pe, pk = be.projectors, bk.projectors
    sup_h = gad_superoperator(config.lambda_h, ops.gibbs_h.astype(complex), pk)
    sup_c = gad_superoperator(config.lambda_c, ops.gibbs_c.astype(complex), pe)
    ne, nk = len(pe), len(pk)
    joint = np.zeros((ne, nk, nk, ne, ne))
    for j in range(ne):
        pj = float(np.trace(pe[j] @ rho1 @ pe[j]).real)
        if pj <= 0.0:
            continue
        s1 = ops.U_k @ (pe[j] @ rho1 @ pe[j] / pj) @ _dag(ops.U_k)
        for l in range(nk):
            pl = float(np.trace(pk[l] @ s1 @ pk[l]).real)
            if pl <= 0.0:
                continue
            s2 = _apply_sup(sup_h, pk[l] @ s1 @ pk[l] / pl)
            for m in range(nk):
                pm = float(np.trace(pk[m] @ s2 @ pk[m]).real)
                if pm <= 0.0:
                    continue
                s3 = ops.U_e @ (pk[m] @ s2 @ pk[m] / pm) @ _dag(ops.U_e)
                for n in range(ne):
                    pn = float(np.trace(pe[n] @ s3 @ pe[n]).real)
                    if pn <= 0.0:
                        continue
                    s4 = _apply_sup(sup_c, pe[n] @ s3 @ pe[n] / pn)
                    for r in range(ne):
                        pr = float(np.trace(pe[r] @ s4 @ pe[r]).real)
                        joint[j, l, m, n, r] = pj * pl * pm * pn * max(pr, 0.0)
    return joint


def tpm_avg_state_bruteforce(corners, ops: CycleOperators, config: CycleConfig):
    """Probability-weighted final projected state over all TPM histories."""
    rho1 = corners[0]
    be, bk = ops.H_e_end, ops.H_k_end
    pe, pk = be.projectors, bk.projectors
    sup_h = gad_superoperator(config.lambda_h, ops.gibbs_h.astype(complex), pk)
    sup_c = gad_superoperator(config.lambda_c, ops.gibbs_c.astype(complex), pe)
    d = rho1.shape[0]
    avg = np.zeros((d, d), dtype=complex)
    for j in range(len(pe)):
        pj = float(np.trace(pe[j] @ rho1 @ pe[j]).real)
        if pj <= 0.0:
            continue
        s1 = ops.U_k @ (pe[j] @ rho1 @ pe[j] / pj) @ _dag(ops.U_k)
        for l in range(len(pk)):
            pl = float(np.trace(pk[l] @ s1 @ pk[l]).real)
            if pl <= 0.0:
                continue
            s2 = _apply_sup(sup_h, pk[l] @ s1 @ pk[l] / pl)
            for m in range(len(pk)):
                pm = float(np.trace(pk[m] @ s2 @ pk[m]).real)
                if pm <= 0.0:
                    continue
                s3 = ops.U_e @ (pk[m] @ s2 @ pk[m] / pm) @ _dag(ops.U_e)
                for n in range(len(pe)):
                    pn = float(np.trace(pe[n] @ s3 @ pe[n]).real)
                    if pn <= 0.0:
                        continue
                    s4 = _apply_sup(sup_c, pe[n] @ s3 @ pe[n] / pn)
                    for r in range(len(pe)):
                        pr = float(np.trace(pe[r] @ s4 @ pe[r]).real)
                        if pr <= 0.0:
                            continue
                        final = pe[r] @ s4 @ pe[r] / pr
                        avg += pj * pl * pm * pn * pr * final
    return avg


def _group_eigh(rho, tol):
    """Eigenpairs of a Hermitian matrix grouped into near-degenerate spaces."""
    w, v = np.linalg.eigh(rho)
    groups = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[groups[-1][-1]] <= tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    out = []
    for g in groups:
        vg = v[:, g]
        out.append((float(w[g].mean()), vg @ _dag(vg)))
    return out


def dbn_joint_bruteforce(corners, ops: CycleOperators, config: CycleConfig):
    """Energy-outcome table of the state-eigenbasis protocol by path enumeration.

    Walks every chain of eigenvalue branches through the four strokes with
    normalized conditional states, then distributes each path's probability
    over energy outcomes via the Born conditionals of the measured corners.
    """
    rho1, rho2, rho3, rho4 = corners
    be, bk = ops.H_e_end, ops.H_k_end
    pe, pk = be.projectors, bk.projectors
    sup_h = gad_superoperator(config.lambda_h, ops.gibbs_h.astype(complex), pk)
    sup_c = gad_superoperator(config.lambda_c, ops.gibbs_c.astype(complex), pe)
    tol = config.grouping_tol
    dec = [_group_eigh(r, tol) for r in corners]
    ne, nk = len(pe), len(pk)
    joint = np.zeros((ne, nk, nk, ne, ne))

    def born(state, projs):
        return np.array([float(np.trace(p @ state @ p).real) for p in projs])

    for ia, (_, pa) in enumerate(dec[0]):
        wa = float(np.trace(pa @ rho1).real)
        if wa <= 0.0:
            continue
        cond_a = born(pa @ rho1 @ pa / wa, pe)
        s1 = ops.U_k @ (pa @ rho1 @ pa / wa) @ _dag(ops.U_k)
        for ib, (_, pb) in enumerate(dec[1]):
            wb = float(np.trace(pb @ s1 @ pb).real)
            if wb <= 0.0:
                continue
            cond_b = born(pb @ rho2 @ pb / float(np.trace(pb @ rho2).real), pk)
            s2 = _apply_sup(sup_h, pb @ s1 @ pb / wb)
            for ic, (_, pc) in enumerate(dec[2]):
                wc = float(np.trace(pc @ s2 @ pc).real)
                if wc <= 0.0:
                    continue
                cond_c = born(pc @ rho3 @ pc / float(np.trace(pc @ rho3).real), pk)
                s3 = ops.U_e @ (pc @ s2 @ pc / wc) @ _dag(ops.U_e)
                for idd, (_, pd) in enumerate(dec[3]):
                    wd = float(np.trace(pd @ s3 @ pd).real)
                    if wd <= 0.0:
                        continue
                    cond_d = born(pd @ rho4 @ pd / float(np.trace(pd @ rho4).real), pe)
                    s4 = _apply_sup(sup_c, pd @ s3 @ pd / wd)
                    for ie, (_, pf) in enumerate(dec[0]):
                        we = float(np.trace(pf @ s4 @ pf).real)
                        if we <= 0.0:
                            continue
                        cond_e = born(pf @ rho1 @ pf / float(np.trace(pf @ rho1).real), pe)
                        path_p = wa * wb * wc * wd * we
                        joint += path_p * np.einsum(
                            "j,l,m,n,r->jlmnr", cond_a, cond_b, cond_c, cond_d, cond_e
                        )
    return joint


def tpm_work_marginal_direct(corners, ops: CycleOperators, config: CycleConfig):
    """p_w(j, l, m, n) from the projector-chain trace without the final isochore."""
    from .engine import gad_channel

    rho1 = corners[0]
    be, bk = ops.H_e_end, ops.H_k_end
    pe, pk = be.projectors, bk.projectors
    ne, nk = len(pe), len(pk)
    out = np.zeros((ne, nk, nk, ne))
    for j in range(ne):
        s1 = ops.U_k @ (pe[j] @ rho1 @ pe[j]) @ _dag(ops.U_k)
        for l in range(nk):
            s2 = gad_channel(pk[l] @ s1 @ pk[l], config.lambda_h, ops.gibbs_h, bk)
            for m in range(nk):
                s3 = ops.U_e @ (pk[m] @ s2 @ pk[m]) @ _dag(ops.U_e)
                for n in range(ne):
                    out[j, l, m, n] = float(np.trace(pe[n] @ s3 @ pe[n]).real)
    return np.clip(out, 0.0, None)


def two_level_otto_work(omega_h, omega_c, T_h, T_c):
    """Quasistatic two-level Otto work (full thermalization, no transverse drive).

    With p the excited-state Boltzmann populations of the two Gibbs states,
    Q_h = omega_h (p_h - p_c), Q_c = omega_c (p_c - p_h), so
    W = (omega_h - omega_c) (p_h - p_c).
    """
    p_h = 1.0 / (1.0 + np.exp(omega_h / T_h))
    p_c = 1.0 / (1.0 + np.exp(omega_c / T_c))
    return (omega_h - omega_c) * (p_h - p_c)
