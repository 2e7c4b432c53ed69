"""Dense primal-dual interior-point method for box/equality-constrained
convex programs with diagonal quadratic objective and diagonal-quadratic
inequality constraints:

    minimize    0.5 w' diag(p0) w + q0' w
    subject to  A w = b
                lo <= w <= hi                                (+-inf allowed)
                0.5 w' diag(Pq[k]) w + Qq[k]' w + Rq[k] <= 0,  Pq[k] >= 0

This shape covers every solve in the package: the risk-neutral tariff QP,
the CVaR epigraph form (one quadratic constraint per scenario), the
optional pool-nonnegativity cuts (linear rows, Pq[k] = 0) and the plain
Rockafellar CVaR linear program.

The loop is a Mehrotra-style predictor-corrector on the perturbed KKT
system.  Iterates stay strictly feasible: the step to the inequality
boundary is computed exactly (quadratic constraints give a quadratic in
the step length), and a fraction-to-boundary rule is applied on both the
primal and the dual step.  CVaR optima sit at degenerate corners (the
shortfall bound and the epigraph constraint of the tail scenario activate
together), which is what the corrector is needed for.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InfeasibleError, MaxIterationsError, UnboundedError


@dataclass
class IPMResult:
    w: np.ndarray
    nu: np.ndarray            # equality multipliers
    lam_lo: np.ndarray        # lower-bound multipliers (full length, 0 where unbounded)
    lam_hi: np.ndarray
    lam_quad: np.ndarray
    objective: float
    iterations: int
    residuals: dict


def _objective(p0, q0, w):
    return 0.5 * float(w @ (p0 * w)) + float(q0 @ w)


def solve_qcqp(
    p0,
    q0,
    lo,
    hi,
    A,
    b,
    Pq,
    Qq,
    Rq,
    w0,
    eps_feas: float = 1e-9,
    eps_gap: float = 1e-9,
    max_iter: int = 200,
    ftb: float = 0.995,
    stall_relax: float = 100.0,
) -> IPMResult:
    p0 = np.asarray(p0, dtype=np.float64)
    q0 = np.asarray(q0, dtype=np.float64)
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    w = np.array(w0, dtype=np.float64)
    n = w.size
    K = 0 if Rq is None else len(Rq)
    if K:
        Pq = np.asarray(Pq, dtype=np.float64)
        Qq = np.asarray(Qq, dtype=np.float64)
        Rq = np.asarray(Rq, dtype=np.float64)
    has_eq = A is not None and len(A) > 0
    if has_eq:
        A = np.asarray(A, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        nu = np.zeros(A.shape[0])
    else:
        A = np.zeros((0, n))
        b = np.zeros(0)
        nu = np.zeros(0)

    idx_lo = np.flatnonzero(np.isfinite(lo))
    idx_hi = np.flatnonzero(np.isfinite(hi))
    n_lo, n_hi = idx_lo.size, idx_hi.size
    m = n_lo + n_hi + K

    if m == 0:
        return _solve_equality_qp(p0, q0, A, b, w)

    def f_vals(wv):
        flo = lo[idx_lo] - wv[idx_lo]
        fhi = wv[idx_hi] - hi[idx_hi]
        fq = 0.5 * (Pq @ (wv * wv)) + Qq @ wv + Rq if K else np.zeros(0)
        return flo, fhi, fq

    F_lo, F_hi, F_q = f_vals(w)
    if max(
        F_lo.max(initial=-np.inf), F_hi.max(initial=-np.inf), F_q.max(initial=-np.inf)
    ) >= 0.0:
        raise InfeasibleError("initial point is not strictly feasible")

    lam_lo = np.clip(1.0 / -F_lo, 1e-6, 1e6) if n_lo else np.zeros(0)
    lam_hi = np.clip(1.0 / -F_hi, 1e-6, 1e6) if n_hi else np.zeros(0)
    lam_q = np.clip(1.0 / -F_q, 1e-6, 1e6) if K else np.zeros(0)

    grad_scale = 1.0 + (float(np.max(np.abs(q0))) if q0.size else 0.0)
    b_scale = 1.0 + (float(np.max(np.abs(b))) if b.size else 0.0)

    def dual_residual(G):
        r = p0 * w + q0
        if n_lo:
            r[idx_lo] -= lam_lo
        if n_hi:
            r[idx_hi] += lam_hi
        if K:
            r += G.T @ lam_q
        if has_eq:
            r += A.T @ nu
        return r

    it = 0
    for it in range(1, max_iter + 1):
        F_lo, F_hi, F_q = f_vals(w)
        G = Pq * w[None, :] + Qq if K else np.zeros((0, n))
        gap = -(lam_lo @ F_lo) - (lam_hi @ F_hi) - (lam_q @ F_q)
        r_dual = dual_residual(G)
        r_pri = A @ w - b if has_eq else np.zeros(0)
        r_dual_inf = float(np.max(np.abs(r_dual)))
        r_pri_inf = float(np.max(np.abs(r_pri))) if r_pri.size else 0.0
        obj = _objective(p0, q0, w)
        if (
            gap <= eps_gap * (1.0 + abs(obj))
            and r_dual_inf <= eps_feas * grad_scale
            and r_pri_inf <= eps_feas * b_scale
        ):
            return IPMResult(
                w=w,
                nu=nu,
                lam_lo=_scatter(lam_lo, idx_lo, n),
                lam_hi=_scatter(lam_hi, idx_hi, n),
                lam_quad=lam_q,
                objective=obj,
                iterations=it - 1,
                residuals={"gap": float(gap), "r_dual": r_dual_inf, "r_pri": r_pri_inf},
            )

        # Newton matrix, shared by predictor and corrector
        Mdiag = p0.copy()
        if K:
            Mdiag = Mdiag + Pq.T @ lam_q
        if n_lo:
            Mdiag[idx_lo] += lam_lo / -F_lo
        if n_hi:
            Mdiag[idx_hi] += lam_hi / -F_hi
        M = np.diag(Mdiag)
        if K:
            M += (G * (lam_q / -F_q)[:, None]).T @ G

        if has_eq:
            p = A.shape[0]
            kkt = np.zeros((n + p, n + p))
            kkt[:n, :n] = M
            kkt[:n, n:] = A.T
            kkt[n:, :n] = A
            solve = _kkt_solver(kkt)
        else:
            solve = _kkt_solver(M)

        def direction(tau, corr_lo, corr_hi, corr_q):
            # rhs = -r_d + J' [(tau + lam*F + corr) / F]; the lam*F part cancels
            # the J'lam inside -r_d, leaving -grad_f0 - A'nu + J'[(tau + corr)/F]
            rhs = -(p0 * w + q0)
            if has_eq:
                rhs -= A.T @ nu
            if n_lo:
                rhs[idx_lo] -= (tau + corr_lo) / F_lo
            if n_hi:
                rhs[idx_hi] += (tau + corr_hi) / F_hi
            if K:
                rhs += G.T @ ((tau + corr_q) / F_q)
            if has_eq:
                sol = solve(np.concatenate([rhs, -r_pri]))
                dw, dnu = sol[:n], sol[n:]
            else:
                dw, dnu = solve(rhs), np.zeros(0)
            d_ll = (
                -(tau + lam_lo * F_lo + corr_lo) / F_lo - lam_lo * (-dw[idx_lo]) / F_lo
                if n_lo
                else np.zeros(0)
            )
            d_lh = (
                -(tau + lam_hi * F_hi + corr_hi) / F_hi - lam_hi * dw[idx_hi] / F_hi
                if n_hi
                else np.zeros(0)
            )
            if K:
                Gdw = G @ dw
                d_lq = -(tau + lam_q * F_q + corr_q) / F_q - lam_q * Gdw / F_q
            else:
                d_lq = np.zeros(0)
            return dw, dnu, d_ll, d_lh, d_lq

        def max_primal_step(dw):
            # largest step keeping every constraint strictly negative
            alpha = np.inf
            if n_lo:
                mask = dw[idx_lo] < 0.0
                if np.any(mask):
                    alpha = min(alpha, float(np.min(F_lo[mask] / dw[idx_lo][mask])))
            if n_hi:
                mask = dw[idx_hi] > 0.0
                if np.any(mask):
                    alpha = min(alpha, float(np.min(-F_hi[mask] / dw[idx_hi][mask])))
            if K:
                q2 = 0.5 * (Pq @ (dw * dw))
                q1 = G @ dw
                for kk in range(K):
                    a2, a1, a0 = q2[kk], q1[kk], F_q[kk]
                    if a2 > 0.0:
                        disc = a1 * a1 - 4.0 * a2 * a0
                        root = (-a1 + np.sqrt(disc)) / (2.0 * a2)
                        if root > 0.0:
                            alpha = min(alpha, float(root))
                    elif a1 > 0.0:
                        alpha = min(alpha, float(-a0 / a1))
            return alpha

        def max_dual_step(d_ll, d_lh, d_lq):
            alpha = np.inf
            for lam, dlam in ((lam_lo, d_ll), (lam_hi, d_lh), (lam_q, d_lq)):
                if lam.size:
                    mask = dlam < 0.0
                    if np.any(mask):
                        alpha = min(alpha, float(np.min(-lam[mask] / dlam[mask])))
            return alpha

        # predictor (affine scaling)
        zeros = (np.zeros(n_lo), np.zeros(n_hi), np.zeros(K))
        dw_a, dnu_a, dll_a, dlh_a, dlq_a = direction(0.0, *zeros)
        ap = min(1.0, max_primal_step(dw_a))
        ad = min(1.0, max_dual_step(dll_a, dlh_a, dlq_a))
        flo_a, fhi_a, fq_a = f_vals(w + ap * dw_a)
        gap_aff = (
            -((lam_lo + ad * dll_a) @ flo_a)
            - ((lam_hi + ad * dlh_a) @ fhi_a)
            - ((lam_q + ad * dlq_a) @ fq_a)
        )
        sigma = min(1.0, max(0.0, gap_aff / gap)) ** 3
        tau = sigma * gap / m

        # corrector with second-order complementarity terms
        corr_lo = dll_a * (-dw_a[idx_lo]) if n_lo else np.zeros(0)
        corr_hi = dlh_a * dw_a[idx_hi] if n_hi else np.zeros(0)
        if K:
            q2_a = 0.5 * (Pq @ (dw_a * dw_a))
            corr_q = dlq_a * (G @ dw_a) + (lam_q + dlq_a) * q2_a
        else:
            corr_q = np.zeros(0)
        dw, dnu, d_ll, d_lh, d_lq = direction(tau, corr_lo, corr_hi, corr_q)

        # the dual-residual term G(w)'lam is bilinear, so Newton cancellation
        # needs one common step length for primal and dual variables
        alpha = min(
            1.0,
            ftb * max_primal_step(dw),
            ftb * max_dual_step(d_ll, d_lh, d_lq),
        )
        if alpha <= 1e-13:
            break
        # roundoff guard: the boundary step is exact in real arithmetic but the
        # update can still land on (or lose) a constraint in floats
        ok = False
        for _ in range(50):
            w_try = w + alpha * dw
            ll = lam_lo + alpha * d_ll
            lh = lam_hi + alpha * d_lh
            lq = lam_q + alpha * d_lq
            flo, fhi, fq = f_vals(w_try)
            feas = max(
                flo.max(initial=-np.inf), fhi.max(initial=-np.inf), fq.max(initial=-np.inf)
            ) < 0.0
            pos = (
                (not ll.size or ll.min() > 0.0)
                and (not lh.size or lh.min() > 0.0)
                and (not lq.size or lq.min() > 0.0)
            )
            if feas and pos:
                ok = True
                break
            alpha *= 0.5
        if not ok:
            break
        w = w_try
        lam_lo, lam_hi, lam_q = ll, lh, lq
        nu = nu + alpha * dnu

    F_lo, F_hi, F_q = f_vals(w)
    G = Pq * w[None, :] + Qq if K else np.zeros((0, n))
    gap = -(lam_lo @ F_lo) - (lam_hi @ F_hi) - (lam_q @ F_q)
    res = {
        "gap": float(gap),
        "r_dual": float(np.max(np.abs(dual_residual(G)))),
        "r_pri": float(np.max(np.abs(A @ w - b))) if has_eq else 0.0,
    }
    best = IPMResult(
        w=w,
        nu=nu,
        lam_lo=_scatter(lam_lo, idx_lo, n),
        lam_hi=_scatter(lam_hi, idx_hi, n),
        lam_quad=lam_q,
        objective=_objective(p0, q0, w),
        iterations=it,
        residuals=res,
    )
    # steps can collapse at the limits of double precision; accept the point
    # if it clears a modest relaxation of the requested tolerances
    obj = best.objective
    if (
        gap <= stall_relax * eps_gap * (1.0 + abs(obj))
        and res["r_dual"] <= stall_relax * eps_feas * grad_scale
        and res["r_pri"] <= stall_relax * eps_feas * b_scale
    ):
        return best
    raise MaxIterationsError(it, res, best=best)


def _scatter(vals, idx, n):
    out = np.zeros(n)
    if idx.size:
        out[idx] = vals
    return out


def _kkt_solver(mat):
    """LU factorization with escalating regularization on singularity."""
    from scipy.linalg import lu_factor, lu_solve

    scale = float(np.max(np.abs(mat))) + 1.0
    jitter = 0.0
    for _ in range(6):
        try:
            m_try = mat if jitter == 0.0 else mat + jitter * scale * np.eye(mat.shape[0])
            fac = lu_factor(m_try)
            if np.all(np.isfinite(fac[0])):
                return lambda rhs: lu_solve(fac, rhs)
        except (np.linalg.LinAlgError, ValueError):
            pass
        jitter = 1e-13 if jitter == 0.0 else jitter * 100.0
    raise InfeasibleError("KKT system is numerically singular")


def _solve_equality_qp(p0, q0, A, b, w0):
    """No inequality constraints: one exact KKT solve."""
    n = w0.size
    if A.shape[0] == 0:
        w = w0.copy()
        for j in range(n):
            if p0[j] > 0.0:
                w[j] = -q0[j] / p0[j]
            elif q0[j] != 0.0:
                raise UnboundedError(f"objective unbounded in coordinate {j}")
        return IPMResult(
            w=w,
            nu=np.zeros(0),
            lam_lo=np.zeros(n),
            lam_hi=np.zeros(n),
            lam_quad=np.zeros(0),
            objective=_objective(p0, q0, w),
            iterations=0,
            residuals={"gap": 0.0, "r_dual": 0.0, "r_pri": 0.0},
        )
    p = A.shape[0]
    kkt = np.zeros((n + p, n + p))
    kkt[:n, :n] = np.diag(p0)
    kkt[:n, n:] = A.T
    kkt[n:, :n] = A
    rhs = np.concatenate([-q0, b])
    sol = _kkt_solver(kkt)(rhs)
    w, nu = sol[:n], sol[n:]
    r_d = float(np.max(np.abs(p0 * w + q0 + A.T @ nu)))
    r_p = float(np.max(np.abs(A @ w - b)))
    return IPMResult(
        w=w,
        nu=nu,
        lam_lo=np.zeros(n),
        lam_hi=np.zeros(n),
        lam_quad=np.zeros(0),
        objective=_objective(p0, q0, w),
        iterations=1,
        residuals={"gap": 0.0, "r_dual": r_d, "r_pri": r_p},
    )
