"""Compiled inner loops for the B-step and the graphical lasso."""

import numpy as np
from numba import njit

# B-step termination codes
MAX_ITER, CONVERGED, STEP_FLOOR = 0, 1, 2


@njit(cache=True)
def _soft(x, t):
    if np.isinf(t):
        return 0.0
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


@njit(cache=True)
def prox_grad_b(Sxx, Sxy, Omega, Lam, B0, c1, c2, max_iter, tol):
    """Proximal gradient on ``1/2 tr{Omega (Y-XB)^T (Y-XB)} + sum Lam |B|``.

    Objective differences are evaluated in closed form (the loss is quadratic
    in B) so the Armijo test stays meaningful near the optimum.  Each
    iteration starts backtracking one decade above the last accepted step
    (capped at 1).
    """
    p = B0.shape[0]
    B = B0.copy()
    for i in range(p):
        for j in range(p):
            if np.isinf(Lam[i, j]):
                B[i, j] = 0.0
    Bn = np.empty_like(B)
    D = np.empty_like(B)
    status = MAX_ITER
    it = 0
    alpha_prev = 0.1
    while it < max_iter:
        it += 1
        G = (Sxx @ B - Sxy) @ Omega
        alpha = min(1.0, 10.0 * alpha_prev)
        accepted = False
        step = 0.0
        scale = 1.0
        while alpha >= c2:
            lin = 0.0
            dpen = 0.0
            sub = 0.0
            step = 0.0
            scale = 1.0
            for i in range(p):
                for j in range(p):
                    lam = Lam[i, j]
                    b = B[i, j]
                    v = _soft(b - alpha * G[i, j], alpha * lam)
                    Bn[i, j] = v
                    d = v - b
                    D[i, j] = d
                    lin += d * G[i, j]
                    if not np.isinf(lam) and lam > 0.0:
                        dpen += lam * (abs(v) - abs(b))
                        if b > 0.0:
                            sub += d * lam
                        elif b < 0.0:
                            sub -= d * lam
                    if abs(d) > step:
                        step = abs(d)
                    if abs(v) > scale:
                        scale = abs(v)
            if step == 0.0:
                accepted = True
                break
            SD = Sxx @ D
            DO = D @ Omega
            quad = 0.0
            for i in range(p):
                for j in range(p):
                    quad += SD[i, j] * DO[i, j]
            diff = lin + 0.5 * quad + dpen
            if diff <= c1 * (lin + sub):
                accepted = True
                alpha_prev = alpha
                break
            alpha /= 10.0
        if not accepted:
            status = STEP_FLOOR
            break
        B[:, :] = Bn
        if step <= tol * scale:
            status = CONVERGED
            break
    return B, it, status


@njit(cache=True)
def glasso_cd(S, rho, W0, Beta0, tol, max_sweeps, cd_tol, max_cd):
    """Block coordinate descent for ``tr(S O) - log|O| + sum rho |O|``.

    ``W`` tracks the covariance estimate; column ``j`` of ``Beta`` holds the
    lasso coefficients of node ``j`` regressed on the others (``Beta[j, j]``
    unused).  Infinite ``rho`` pins a coefficient to zero.
    """
    p = S.shape[0]
    W = W0.copy()
    Beta = Beta0.copy()
    for j in range(p):
        W[j, j] = S[j, j] + rho[j, j]
    off = 0.0
    cnt = 0
    for i in range(p):
        for j in range(p):
            if i != j:
                off += abs(S[i, j])
                cnt += 1
    thr = tol * (off / cnt if cnt > 0 and off > 0 else 1.0)
    WB = np.zeros(p)
    converged = False
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        change = 0.0
        for j in range(p):
            # WB[k] = sum_{l != j} W[k, l] Beta[l, j]  for k != j
            for k in range(p):
                acc = 0.0
                for l in range(p):
                    if l != j:
                        acc += W[k, l] * Beta[l, j]
                WB[k] = acc
            for cd in range(max_cd):
                dmax = 0.0
                for k in range(p):
                    if k == j:
                        continue
                    r = rho[k, j]
                    old = Beta[k, j]
                    if np.isinf(r):
                        new = 0.0
                    else:
                        z = S[k, j] - WB[k] + W[k, k] * old
                        new = _soft(z, r) / W[k, k]
                    if new != old:
                        delta = new - old
                        Beta[k, j] = new
                        for l in range(p):
                            WB[l] += W[l, k] * delta
                        if abs(delta) > dmax:
                            dmax = abs(delta)
                if dmax < cd_tol:
                    break
            for k in range(p):
                if k != j:
                    change += abs(W[k, j] - WB[k])
                    W[k, j] = WB[k]
                    W[j, k] = WB[k]
        if change / max(cnt, 1) < thr:
            converged = True
            break
    Theta = np.zeros((p, p))
    for j in range(p):
        acc = 0.0
        for k in range(p):
            if k != j:
                acc += W[k, j] * Beta[k, j]
        t22 = 1.0 / (W[j, j] - acc)
        Theta[j, j] = t22
        for k in range(p):
            if k != j:
                Theta[k, j] = -Beta[k, j] * t22
    return Theta, W, Beta, sweeps, converged
