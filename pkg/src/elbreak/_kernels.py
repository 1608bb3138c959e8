"""Numba-accelerated numerical core.

Everything here is machine code on first use (cached across processes) and
releases the GIL, so scans and Monte Carlo replicates parallelize with plain
threads. Python-facing wrappers with validation and exceptions live in
:mod:`elbreak.el_solver` and :mod:`elbreak.scan`; this module communicates
failure through integer status codes only.

Status codes
------------
0  success
1  convex-hull violation: the moment conditions are unattainable
2  iteration cap reached without meeting tolerance
3  degenerate segment (rank-deficient design or zero residual variance)
4  negative likelihood-ratio statistic beyond the numerical clamp
"""

from __future__ import annotations

import numpy as np
from numba import njit

OK = 0
HULL = 1
NOCONV = 2
DEGENERATE = 3
NEGSTAT = 4

# -2 log Lambda values in [-NEG_CLAMP, 0) are clamped to 0; below is an error.
NEG_CLAMP = 1e-6

_BIG = 1e300
_MASK53 = 9007199254740992.0  # 2**53


@njit(cache=True, nogil=True)
def _splitmix64(state):
    """Advance a splitmix64 stream; returns (state, uniform in [-1, 1))."""
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    u = np.float64(z >> np.uint64(11)) / _MASK53
    return state, 2.0 * u - 1.0


@njit(cache=True, nogil=True)
def _dual_value(G, mu, eps):
    """Objective sum(log* (1 + mu'g_t)) with the quadratic pseudo-log below eps."""
    m, d = G.shape
    f = 0.0
    for t in range(m):
        w = 1.0
        for c in range(d):
            w += G[t, c] * mu[c]
        if w >= eps:
            f += np.log(w)
        else:
            f += np.log(eps) - 1.5 + 2.0 * w / eps - w * w / (2.0 * eps * eps)
    return f


@njit(cache=True, nogil=True)
def _chol_solve(A, b):
    """Solve A x = b for symmetric positive definite A. Returns (x, ok)."""
    d = A.shape[0]
    Lc = np.zeros((d, d))
    for i in range(d):
        for j in range(i + 1):
            s = A[i, j]
            for q in range(j):
                s -= Lc[i, q] * Lc[j, q]
            if i == j:
                if s <= 0.0:
                    return b.copy(), False
                Lc[i, i] = np.sqrt(s)
            else:
                Lc[i, j] = s / Lc[j, j]
    y = np.empty(d)
    for i in range(d):
        s = b[i]
        for q in range(i):
            s -= Lc[i, q] * y[q]
        y[i] = s / Lc[i, i]
    x = np.empty(d)
    for i in range(d - 1, -1, -1):
        s = y[i]
        for q in range(i + 1, d):
            s -= Lc[q, i] * x[q]
        x[i] = s / Lc[i, i]
    return x, True


@njit(cache=True, nogil=True)
def _dual_fgh(G, mu, eps):
    """Value, gradient, negated Hessian of the pseudo-log dual objective,
    plus a flag telling whether the quadratic branch was touched."""
    m, d = G.shape
    f = 0.0
    grad = np.zeros(d)
    nh = np.zeros((d, d))
    pactive = False
    for t in range(m):
        w = 1.0
        for c in range(d):
            w += G[t, c] * mu[c]
        if w >= eps:
            f += np.log(w)
            d1 = 1.0 / w
            d2 = d1 * d1
        else:
            pactive = True
            f += np.log(eps) - 1.5 + 2.0 * w / eps - w * w / (2.0 * eps * eps)
            d1 = 2.0 / eps - w / (eps * eps)
            d2 = 1.0 / (eps * eps)
        for c in range(d):
            gtc = G[t, c]
            grad[c] += d1 * gtc
            for e in range(c, d):
                nh[c, e] += d2 * gtc * G[t, e]
    for c in range(d):
        for e in range(c):
            nh[c, e] = nh[e, c]
    return f, grad, nh, pactive


@njit(cache=True, nogil=True)
def dual_newton_from(G, eps, tol, maxit, mu0):
    """Maximize sum(log(1 + mu'g_t)) over mu by damped Newton on the dual,
    starting from ``mu0`` (the pseudo-log extension keeps any start point
    defined). The returned value and the success status are certified
    against the true log. Returns (mu, value, grad_norm, iterations, status).
    """
    m, d = G.shape
    mu = mu0.copy()
    # Exact infeasibility along coordinate axes: a strictly one-signed
    # component keeps 0 outside the convex hull of the rows.
    for c in range(d):
        lo = G[0, c]
        hi = G[0, c]
        for t in range(1, m):
            v = G[t, c]
            if v < lo:
                lo = v
            if v > hi:
                hi = v
        if (lo >= 0.0 and hi > 0.0) or (hi <= 0.0 and lo < 0.0):
            return mu, 0.0, np.inf, 0, HULL

    # The tolerance bounds the weighted-moment norm ||grad||/m (the mean
    # gradient), loosened for badly scaled rows.
    gabs = 0.0
    for t in range(m):
        for c in range(d):
            v = abs(G[t, c])
            if v > gabs:
                gabs = v
    tol_eff = tol * m * max(1.0, gabs)

    f, grad, nh, pactive = _dual_fgh(G, mu, eps)
    gnorm = 0.0
    mudotg = 0.0
    for c in range(d):
        if abs(grad[c]) > gnorm:
            gnorm = abs(grad[c])
        mudotg += mu[c] * grad[c]
    # |mu' grad| bounds the weight-sum defect |sum 1/w - m|; iterate until it
    # clears the 1e-10 sum contract, not just the gradient tolerance.
    sum_tol = 0.5e-10 * m
    it = 0
    runaway = False
    while (gnorm > tol_eff or abs(mudotg) > sum_tol) and it < maxit:
        tr = 0.0
        for c in range(d):
            tr += nh[c, c]
        ridge = 1e-12 * (tr / d if tr > 0.0 else 1.0)
        step = grad.copy()
        for _attempt in range(4):
            M = nh.copy()
            for c in range(d):
                M[c, c] += ridge
            sol, chol_ok = _chol_solve(M, grad)
            if chol_ok:
                step = sol
                break
            ridge = ridge * 1e4 if ridge > 0.0 else 1e-8
        slope = 0.0
        for c in range(d):
            slope += step[c] * grad[c]
        if slope <= 0.0:
            step = grad.copy()
            slope = 0.0
            for c in range(d):
                slope += grad[c] * grad[c]
        # Full Newton step first, reusing its derivative evaluation when it
        # passes the sufficient-increase test (the common, quadratic phase).
        # Once steps shrink below the objective's float resolution the value
        # test cannot discriminate, so a tiny full step is also accepted
        # whenever it strictly shrinks the gradient norm.
        cand = mu + step
        fc, gc, nhc, pac = _dual_fgh(G, cand, eps)
        gn_cand = 0.0
        smax = 0.0
        for c in range(d):
            if abs(gc[c]) > gn_cand:
                gn_cand = abs(gc[c])
            if abs(step[c]) > smax:
                smax = abs(step[c])
        mu_scale = 1.0
        for c in range(d):
            if abs(mu[c]) > mu_scale:
                mu_scale = abs(mu[c])
        tiny_step = smax <= 1e-6 * mu_scale
        if fc >= f + 1e-4 * slope or (tiny_step and gn_cand < gnorm):
            accepted = True
            mu = cand
            f = fc
            grad = gc
            nh = nhc
            pactive = pac
        else:
            tstep = 0.5
            accepted = False
            for _ls in range(59):
                cand = mu + tstep * step
                fc = _dual_value(G, cand, eps)
                if fc >= f + 1e-4 * tstep * slope:
                    accepted = True
                    break
                tstep *= 0.5
            if not accepted:
                break
            moved = False
            for c in range(d):
                if cand[c] != mu[c]:
                    moved = True
                    break
            if not moved:
                break
            mu = cand
            f, grad, nh, pactive = _dual_fgh(G, mu, eps)
        gnorm = 0.0
        mudotg = 0.0
        for c in range(d):
            if abs(grad[c]) > gnorm:
                gnorm = abs(grad[c])
            mudotg += mu[c] * grad[c]
        it += 1
        mnorm = 0.0
        for c in range(d):
            if abs(mu[c]) > mnorm:
                mnorm = abs(mu[c])
        if mnorm > 1e9:
            runaway = True
            break

    # Certify the candidate on the true log. A residual stall at the
    # objective's float resolution is still accepted when the weighted
    # moment norm ||grad||/m meets the 1e-8 contract with a margin, but the
    # implied weights must sum to one within their own 1e-10 contract.
    stall_tol = max(tol_eff, 5e-9 * m * max(1.0, gabs))
    minw = np.inf
    sum_inv = 0.0
    positive = True
    for t in range(m):
        w = 1.0
        for c in range(d):
            w += G[t, c] * mu[c]
        if w < minw:
            minw = w
        if w <= 0.0:
            positive = False
        else:
            sum_inv += 1.0 / w
    if gnorm <= tol_eff or (not runaway and gnorm <= stall_tol):
        if not positive or minw < eps * (1.0 - 1e-9) or abs(sum_inv - m) > 1e-6 * m:
            return mu, f, gnorm, it, HULL
        if abs(sum_inv - m) > 1e-10 * m:
            return mu, f, gnorm, it, NOCONV
        if not pactive:
            return mu, f, gnorm, it, OK
        f_true = 0.0
        for t in range(m):
            w = 1.0
            for c in range(d):
                w += G[t, c] * mu[c]
            f_true += np.log(w)
        return mu, f_true, gnorm, it, OK
    if runaway or sum_inv < 0.5 * m:
        return mu, f, gnorm, it, HULL
    return mu, f, gnorm, it, NOCONV


@njit(cache=True, nogil=True)
def dual_newton(G, eps, tol, maxit):
    """Dual Newton from the zero multiplier."""
    return dual_newton_from(G, eps, tol, maxit, np.zeros(G.shape[1]))


@njit(cache=True, nogil=True)
def build_g(x0, L, phi, s2):
    """Estimating rows (X_t, X_{t-1}e_t, ..., X_{t-p}e_t, e_t^2 - s2) and residuals."""
    m = x0.shape[0]
    p = L.shape[1]
    G = np.empty((m, p + 2))
    eps_r = np.empty(m)
    for t in range(m):
        e = x0[t]
        for r in range(p):
            e -= phi[r] * L[t, r]
        eps_r[t] = e
        G[t, 0] = x0[t]
        for r in range(p):
            G[t, 1 + r] = L[t, r] * e
        G[t, p + 1] = e * e - s2
    return G, eps_r


@njit(cache=True, nogil=True)
def _seg_vg(x0, L, phi, s2, eps_user, lam_tol, max_inner, mu_ws):
    """Inner EL value for one segment at fixed (phi, s2), plus its envelope
    gradient with respect to (phi, log s2). ``mu_ws`` warm-starts the dual
    solve and receives the converged multiplier on success.
    Returns (f, gphi, glog, status)."""
    m = x0.shape[0]
    p = L.shape[1]
    gphi = np.zeros(p)
    for r in range(p):
        if abs(phi[r]) > 1e150:
            return _BIG, gphi, 0.0, HULL
    G, eps_r = build_g(x0, L, phi, s2)
    for t in range(m):
        for c in range(p + 2):
            if not np.isfinite(G[t, c]):
                return _BIG, gphi, 0.0, HULL
    epsl = 1.0 / m
    if eps_user > 0.0 and eps_user < epsl:
        epsl = eps_user
    mu, f, _gn, _it, st = dual_newton_from(G, epsl, lam_tol, max_inner, mu_ws)
    if st != OK:
        return _BIG, gphi, 0.0, st
    for c in range(p + 2):
        mu_ws[c] = mu[c]
    glog = 0.0
    for t in range(m):
        w = 1.0
        for c in range(p + 2):
            w += G[t, c] * mu[c]
        a = 2.0 * mu[p + 1] * eps_r[t]
        for r in range(p):
            a += mu[1 + r] * L[t, r]
        inv_w = 1.0 / w
        for r in range(p):
            gphi[r] -= L[t, r] * a * inv_w
        glog -= mu[p + 1] * inv_w
    glog *= s2
    return f, gphi, glog, OK


@njit(cache=True, nogil=True)
def _obj(mode, beta, x01, L1, x02, L2, eps_user, lam_tol, max_inner, mu1, mu2):
    """Profiled objective F(beta) = sum of segment EL sup-values, with gradient.

    mode 0: beta = (phi, log s2) shared by both segments.
    mode 1: beta = (phi, log s2) for the first segment only.
    mode 2: beta = (phi1, phi2, log s2), one variance shared across segments.

    ``mu1``/``mu2`` carry the segments' dual warm starts between calls.
    """
    p = L1.shape[1]
    nb = beta.shape[0]
    grad = np.zeros(nb)
    if abs(beta[nb - 1]) > 700.0:
        return _BIG, grad, HULL
    s2 = np.exp(beta[nb - 1])
    if mode == 0:
        phi = beta[:p].copy()
        f1, gp1, gl1, st1 = _seg_vg(x01, L1, phi, s2, eps_user, lam_tol, max_inner, mu1)
        if st1 != OK:
            return _BIG, grad, st1
        f2, gp2, gl2, st2 = _seg_vg(x02, L2, phi, s2, eps_user, lam_tol, max_inner, mu2)
        if st2 != OK:
            return _BIG, grad, st2
        for i in range(p):
            grad[i] = gp1[i] + gp2[i]
        grad[p] = gl1 + gl2
        return f1 + f2, grad, OK
    elif mode == 1:
        phi = beta[:p].copy()
        f1, gp1, gl1, st1 = _seg_vg(x01, L1, phi, s2, eps_user, lam_tol, max_inner, mu1)
        if st1 != OK:
            return _BIG, grad, st1
        for i in range(p):
            grad[i] = gp1[i]
        grad[p] = gl1
        return f1, grad, OK
    else:
        phi1 = beta[:p].copy()
        phi2 = beta[p : 2 * p].copy()
        f1, gp1, gl1, st1 = _seg_vg(x01, L1, phi1, s2, eps_user, lam_tol, max_inner, mu1)
        if st1 != OK:
            return _BIG, grad, st1
        f2, gp2, gl2, st2 = _seg_vg(x02, L2, phi2, s2, eps_user, lam_tol, max_inner, mu2)
        if st2 != OK:
            return _BIG, grad, st2
        for i in range(p):
            grad[i] = gp1[i]
            grad[p + i] = gp2[i]
        grad[2 * p] = gl1 + gl2
        return f1 + f2, grad, OK


@njit(cache=True, nogil=True)
def _nat_gnorm(grad, beta):
    """Gradient norm with the variance component mapped back from log scale."""
    nb = beta.shape[0]
    s2 = np.exp(beta[nb - 1])
    if not np.isfinite(s2) or s2 <= 0.0:
        return np.inf
    g = abs(grad[nb - 1]) / s2
    for i in range(nb - 1):
        if abs(grad[i]) > g:
            g = abs(grad[i])
    return g


@njit(cache=True, nogil=True)
def profile_bfgs(
    mode, beta_start, x01, L1, x02, L2, eps_user, lam_tol, max_inner,
    beta_tol, max_outer, gtol_nat,
):
    """Minimize the profiled EL objective by BFGS with the exact envelope
    gradient. Returns (beta, F, nat_grad_norm, iterations, status)."""
    nb = beta_start.shape[0]
    p = L1.shape[1]
    mu1 = np.zeros(p + 2)
    mu2 = np.zeros(p + 2)
    beta = beta_start.copy()
    F, grad, st = _obj(
        mode, beta, x01, L1, x02, L2, eps_user, lam_tol, max_inner, mu1, mu2
    )
    if st != OK:
        return beta, _BIG, np.inf, 0, st
    H = np.eye(nb)
    first = True
    it = 0
    while it < max_outer:
        gn = _nat_gnorm(grad, beta)
        if gn <= gtol_nat:
            return beta, F, gn, it, OK
        d = -(H @ grad)
        slope = 0.0
        for i in range(nb):
            slope += d[i] * grad[i]
        if slope >= 0.0:
            H = np.eye(nb)
            d = -grad.copy()
            slope = 0.0
            for i in range(nb):
                slope -= grad[i] * grad[i]
        tstep = 1.0
        accepted = False
        Fn = F
        gradn = grad
        bnew = beta
        for _ls in range(45):
            cand = beta + tstep * d
            Fc, gc, stc = _obj(
                mode, cand, x01, L1, x02, L2, eps_user, lam_tol, max_inner, mu1, mu2
            )
            if stc == OK and Fc <= F + 1e-4 * tstep * slope:
                Fn = Fc
                gradn = gc
                bnew = cand
                accepted = True
                break
            tstep *= 0.5
        if not accepted:
            gn = _nat_gnorm(grad, beta)
            if gn <= gtol_nat:
                return beta, F, gn, it, OK
            return beta, F, gn, it, NOCONV
        s = bnew - beta
        y = gradn - grad
        sy = 0.0
        ss = 0.0
        yy = 0.0
        for i in range(nb):
            sy += s[i] * y[i]
            ss += s[i] * s[i]
            yy += y[i] * y[i]
        if first and sy > 0.0 and yy > 0.0:
            scale = sy / yy
            for i in range(nb):
                for j in range(nb):
                    H[i, j] = scale if i == j else 0.0
            first = False
        if sy > 1e-14 * np.sqrt(ss * yy):
            rho = 1.0 / sy
            Hy = H @ y
            yhy = 0.0
            for i in range(nb):
                yhy += y[i] * Hy[i]
            coef = rho * rho * yhy + rho
            for i in range(nb):
                for j in range(nb):
                    H[i, j] += -rho * (s[i] * Hy[j] + Hy[i] * s[j]) + coef * s[i] * s[j]
        beta = bnew
        F = Fn
        grad = gradn
        it += 1
        smax = 0.0
        for i in range(nb):
            if abs(s[i]) > smax:
                smax = abs(s[i])
        if smax < beta_tol:
            gn = _nat_gnorm(grad, beta)
            if gn <= gtol_nat:
                return beta, F, gn, it, OK
            return beta, F, gn, it, NOCONV
    gn = _nat_gnorm(grad, beta)
    if gn <= gtol_nat:
        return beta, F, gn, it, OK
    return beta, F, gn, it, NOCONV


@njit(cache=True, nogil=True)
def profile_solve(
    mode, inits, x01, L1, x02, L2, eps_user, lam_tol, max_inner,
    beta_tol, max_outer, gtol_nat, seed,
):
    """Evaluate every init, descend by BFGS from the best feasible one, and
    fall back to the remaining inits and then to 3 jittered restarts
    (deterministic in ``seed``) on non-convergence.

    Because BFGS only accepts decreasing steps, the returned minimum never
    exceeds the objective at any supplied init, which is what guarantees the
    restricted/unrestricted nesting when the restricted optimum is passed as
    an init here. Returns (beta, F, nat_grad_norm, status).
    """
    ninit = inits.shape[0]
    nb = inits.shape[1]
    p = L1.shape[1]
    mu1 = np.zeros(p + 2)
    mu2 = np.zeros(p + 2)
    fvals = np.full(ninit, np.inf)
    feasible = False
    for i in range(ninit):
        Fi, _gi, sti = _obj(
            mode, inits[i], x01, L1, x02, L2, eps_user, lam_tol, max_inner, mu1, mu2
        )
        if sti == OK:
            fvals[i] = Fi
            feasible = True
    last_st = NOCONV
    if feasible:
        order = np.argsort(fvals)
        for oi in range(ninit):
            i = order[oi]
            if not np.isfinite(fvals[i]):
                break
            b, F, gn, _it, st = profile_bfgs(
                mode, inits[i].copy(), x01, L1, x02, L2, eps_user, lam_tol,
                max_inner, beta_tol, max_outer, gtol_nat,
            )
            if st == OK:
                return b, F, gn, OK
            last_st = st
    state = np.uint64(seed)
    for _r in range(3):
        jb = np.empty(nb)
        for c in range(nb):
            state, u1 = _splitmix64(state)
            state, u2 = _splitmix64(state)
            jb[c] = inits[0, c] * (1.0 + 1e-2 * u1) + 1e-6 * u2
        b, F, gn, _it, st = profile_bfgs(
            mode, jb, x01, L1, x02, L2, eps_user, lam_tol,
            max_inner, beta_tol, max_outer, gtol_nat,
        )
        if st == OK:
            return b, F, gn, OK
        last_st = st
    return inits[0].copy(), _BIG, np.inf, last_st


@njit(cache=True, nogil=True)
def ols_fit(x0, L):
    """SVD least squares with rank certification. Returns (phi, s2, status)."""
    m = x0.shape[0]
    p = L.shape[1]
    phi = np.zeros(p)
    if m < p + 2:
        return phi, 0.0, DEGENERATE
    U, S, Vt = np.linalg.svd(L, full_matrices=False)
    if S[0] <= 0.0 or S[p - 1] <= 1e-10 * S[0]:
        return phi, 0.0, DEGENERATE
    coef = (U.T @ x0) / S
    phi = Vt.T @ coef
    s2 = 0.0
    ms = 0.0
    for t in range(m):
        e = x0[t]
        for r in range(p):
            e -= phi[r] * L[t, r]
        s2 += e * e
        ms += x0[t] * x0[t]
    s2 /= m
    ms /= m
    if s2 <= 1e-24 * max(ms, 1e-300):
        return phi, s2, DEGENERATE
    return phi, s2, OK


@njit(cache=True, nogil=True)
def split_segments(x, p, k):
    """Lagged designs for the two segments induced by a 1-based split at k.

    Segment one covers t in {p+1, ..., k}; segment two covers
    t in {k+1, ..., n} with lags allowed to reach back across k.
    """
    n = x.shape[0]
    m1 = k - p
    m2 = n - k
    x01 = x[p:k].copy()
    x02 = x[k:n].copy()
    L1 = np.empty((m1, p))
    L2 = np.empty((m2, p))
    for r in range(1, p + 1):
        L1[:, r - 1] = x[p - r : k - r]
        L2[:, r - 1] = x[k - r : n - r]
    return x01, L1, x02, L2


@njit(cache=True, nogil=True)
def stat_at_k(
    x, p, k, shared_s2, eps_user, lam_tol, max_inner, beta_tol, max_outer,
    gtol_nat, seed, warm0, warm1a, warm1b, warm2, have_warm,
):
    """-2 log Lambda_k at one split, with the common-parameter optimum
    seeding the per-segment solves so the restricted value can never fall
    below the unrestricted one by more than float noise.

    Returns (stat, z0, z1, status, beta0, beta1a, beta1b, beta2).
    """
    n = x.shape[0]
    b0 = np.zeros(p + 1)
    b1a = np.zeros(p + 1)
    b1b = np.zeros(p + 1)
    b2 = np.zeros(2 * p + 1)
    min_rows = 2 * (p + 2)
    if k - p < min_rows or n - k < min_rows:
        return np.nan, np.nan, np.nan, DEGENERATE, b0, b1a, b1b, b2
    x01, L1, x02, L2 = split_segments(x, p, k)
    phi1, s21, st1 = ols_fit(x01, L1)
    if st1 != OK:
        return np.nan, np.nan, np.nan, st1, b0, b1a, b1b, b2
    phi2, s22, st2 = ols_fit(x02, L2)
    if st2 != OK:
        return np.nan, np.nan, np.nan, st2, b0, b1a, b1b, b2
    x0p = np.concatenate((x01, x02))
    Lp = np.concatenate((L1, L2))
    phi0, s20, st0 = ols_fit(x0p, Lp)
    if st0 != OK:
        return np.nan, np.nan, np.nan, st0, b0, b1a, b1b, b2

    kseed = np.uint64(seed) ^ (np.uint64(k) * np.uint64(0x9E3779B97F4A7C15))

    # Restricted problem first: shared (phi, s2) across both segments.
    n0 = 2 if have_warm else 1
    inits0 = np.empty((n0, p + 1))
    for i in range(p):
        inits0[0, i] = phi0[i]
    inits0[0, p] = np.log(s20)
    if have_warm:
        inits0[1] = warm0
    b0, f0, _g0, stp0 = profile_solve(
        0, inits0, x01, L1, x02, L2, eps_user, lam_tol, max_inner,
        beta_tol, max_outer, gtol_nat, kseed,
    )
    if stp0 != OK:
        return np.nan, np.nan, np.nan, stp0, b0, b1a, b1b, b2
    z0 = 2.0 * f0

    if shared_s2:
        n2 = 3 if have_warm else 2
        inits2 = np.empty((n2, 2 * p + 1))
        for i in range(p):
            inits2[0, i] = phi1[i]
            inits2[0, p + i] = phi2[i]
        m1 = x01.shape[0]
        m2 = x02.shape[0]
        inits2[0, 2 * p] = np.log((m1 * s21 + m2 * s22) / (m1 + m2))
        for i in range(p):
            inits2[1, i] = b0[i]
            inits2[1, p + i] = b0[i]
        inits2[1, 2 * p] = b0[p]
        if have_warm:
            inits2[2] = warm2
        b2, f12, _g12, stp12 = profile_solve(
            2, inits2, x01, L1, x02, L2, eps_user, lam_tol, max_inner,
            beta_tol, max_outer, gtol_nat, kseed + np.uint64(1),
        )
        if stp12 != OK:
            return np.nan, np.nan, np.nan, stp12, b0, b1a, b1b, b2
        z1 = 2.0 * f12
    else:
        na = 3 if have_warm else 2
        inits1a = np.empty((na, p + 1))
        for i in range(p):
            inits1a[0, i] = phi1[i]
        inits1a[0, p] = np.log(s21)
        inits1a[1] = b0
        if have_warm:
            inits1a[2] = warm1a
        b1a, f1a, _ga, stpa = profile_solve(
            1, inits1a, x01, L1, x02, L2, eps_user, lam_tol, max_inner,
            beta_tol, max_outer, gtol_nat, kseed + np.uint64(2),
        )
        if stpa != OK:
            return np.nan, np.nan, np.nan, stpa, b0, b1a, b1b, b2
        inits1b = np.empty((na, p + 1))
        for i in range(p):
            inits1b[0, i] = phi2[i]
        inits1b[0, p] = np.log(s22)
        inits1b[1] = b0
        if have_warm:
            inits1b[2] = warm1b
        b1b, f1b, _gb, stpb = profile_solve(
            1, inits1b, x02, L2, x01, L1, eps_user, lam_tol, max_inner,
            beta_tol, max_outer, gtol_nat, kseed + np.uint64(3),
        )
        if stpb != OK:
            return np.nan, np.nan, np.nan, stpb, b0, b1a, b1b, b2
        z1 = 2.0 * (f1a + f1b)

    stat = z0 - z1
    if stat < -NEG_CLAMP:
        return stat, z0, z1, NEGSTAT, b0, b1a, b1b, b2
    if stat < 0.0:
        stat = 0.0
    return stat, z0, z1, OK, b0, b1a, b1b, b2


@njit(cache=True, nogil=True)
def scan_ks(
    x, p, ks, shared_s2, eps_user, lam_tol, max_inner, beta_tol, max_outer,
    gtol_nat, seed, use_warm,
):
    """Evaluate -2 log Lambda_k over an ordered block of candidate splits.

    Within the block each solve warm-starts from the previous k's optimum
    (disabled when ``use_warm`` is false). Returns (values, z0s, z1s, codes);
    failed splits carry NaN and a nonzero code.
    """
    nk = ks.shape[0]
    vals = np.full(nk, np.nan)
    z0s = np.full(nk, np.nan)
    z1s = np.full(nk, np.nan)
    codes = np.zeros(nk, dtype=np.int64)
    warm0 = np.zeros(p + 1)
    warm1a = np.zeros(p + 1)
    warm1b = np.zeros(p + 1)
    warm2 = np.zeros(2 * p + 1)
    have = False
    for i in range(nk):
        stat, z0, z1, st, b0, b1a, b1b, b2 = stat_at_k(
            x, p, ks[i], shared_s2, eps_user, lam_tol, max_inner, beta_tol,
            max_outer, gtol_nat, seed, warm0, warm1a, warm1b, warm2, have,
        )
        codes[i] = st
        if st == OK:
            vals[i] = stat
            z0s[i] = z0
            z1s[i] = z1
            warm0 = b0
            warm1a = b1a
            warm1b = b1b
            warm2 = b2
            if use_warm:
                have = True
    return vals, z0s, z1s, codes


@njit(cache=True, nogil=True)
def ar_change_path(noise, phi_pre, phi_post, k, burn_in):
    """AR recursion from zero pre-sample state; coefficients switch after
    kept index k. ``noise`` supplies burn_in + n innovations; the first
    burn_in outputs are discarded."""
    total = noise.shape[0]
    n = total - burn_in
    p = phi_pre.shape[0]
    buf = np.zeros(total + p)
    for t in range(total):
        acc = noise[t]
        pre = (t - burn_in) < k
        for r in range(p):
            c = phi_pre[r] if pre else phi_post[r]
            acc += c * buf[p + t - 1 - r]
        buf[p + t] = acc
    out = np.empty(n)
    for i in range(n):
        out[i] = buf[p + burn_in + i]
    return out


@njit(cache=True, nogil=True)
def ar_rebuild_path(first_p, phi, innov):
    """Rebuild a series from observed initial values and innovations."""
    p = first_p.shape[0]
    n = p + innov.shape[0]
    out = np.empty(n)
    for i in range(p):
        out[i] = first_p[i]
    for t in range(p, n):
        acc = innov[t - p]
        for r in range(p):
            acc += phi[r] * out[t - 1 - r]
        out[t] = acc
    return out
