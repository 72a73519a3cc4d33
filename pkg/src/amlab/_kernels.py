"""Compiled inner loops shared by the proposal and chain modules."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def cholesky_lower(s, out):
    """Cholesky factor of ``s`` written into ``out``; False on a non-positive pivot."""
    d = s.shape[0]
    for j in range(d):
        acc = s[j, j]
        for k in range(j):
            acc -= out[j, k] * out[j, k]
        if not acc > 0.0 or not math.isfinite(acc):
            return False
        ljj = math.sqrt(acc)
        out[j, j] = ljj
        for i in range(j + 1, d):
            acc = s[i, j]
            for k in range(j):
                acc -= out[i, k] * out[j, k]
            out[i, j] = acc / ljj
        for i in range(j):
            out[i, j] = 0.0
    return True


@njit(cache=True)
def lambda_min(s):
    d = s.shape[0]
    if d == 1:
        return s[0, 0]
    scale = 0.0
    for i in range(d):
        for j in range(d):
            a = abs(s[i, j])
            if a > scale:
                scale = a
    if scale == 0.0 or not math.isfinite(scale):
        return np.linalg.eigvalsh(s)[0]
    return np.linalg.eigvalsh(s / scale)[0] * scale


@njit(cache=True)
def _log_target(code, x, p_scalar, p_vec, p_mat):
    d = x.shape[0]
    if code == 1:
        m = p_scalar[0]
        b = p_scalar[1]
        acc = 0.0
        for i in range(d):
            acc += abs(x[i] - m)
        return -d * math.log(2.0 * b) - acc / b
    if code == 2:
        q = 0.0
        for i in range(d):
            z = 0.0
            for k in range(i + 1):
                z += p_mat[i, k] * (x[k] - p_vec[k])
            q += z * z
        return p_scalar[0] - 0.5 * q
    return 0.0


@njit(cache=True)
def chol_rank1_update(L, alpha, w):
    """Overwrite ``L`` with the factor of ``alpha * L L^T + w w^T`` (``w`` is clobbered).

    Returns False if a diagonal entry becomes non-finite or non-positive.
    """
    d = L.shape[0]
    ra = math.sqrt(alpha)
    for i in range(d):
        for j in range(i + 1):
            L[i, j] *= ra
    for k in range(d):
        lkk = L[k, k]
        r = math.hypot(lkk, w[k])
        if not (r > 0.0 and math.isfinite(r)):
            return False
        c = r / lkk
        sn = w[k] / lkk
        L[k, k] = r
        for i in range(k + 1, d):
            L[i, k] = (L[i, k] + sn * w[i]) / c
            w[i] = c * w[i] - sn * L[i, k]
    return True


@njit(cache=True)
def factor_lambda_min(L):
    """Smallest eigenvalue of ``L L^T`` as the squared smallest singular value of ``L``."""
    d = L.shape[0]
    if d == 1:
        return L[0, 0] * L[0, 0]
    scale = 0.0
    for i in range(d):
        for j in range(i + 1):
            a = abs(L[i, j])
            if a > scale:
                scale = a
    sv = np.linalg.svd(L / scale)[1]
    smin = sv[d - 1] * scale
    return smin * smin


@njit(cache=True)
def factor_product(L, out):
    d = L.shape[0]
    for i in range(d):
        for j in range(i + 1):
            acc = 0.0
            for k in range(j + 1):
                acc += L[i, k] * L[j, k]
            out[i, j] = acc
            out[j, i] = acc


@njit(cache=True)
def run_block(code, p_scalar, p_vec, p_mat, theta, beta, update_factor,
              x, m, s, chol, W, ub, V, lu, eta,
              xs, ms, sdiag, lmin, accepted, used_fixed,
              rec_every, rec_offset, rec_s, rec_pos):
    """Advance the AM chain over one block of pre-drawn randomness.

    ``x, m, s, chol`` hold the current state and are updated in place.  With
    ``update_factor`` the factor ``chol`` is propagated by rank-one updates
    and ``s`` is rebuilt from it; otherwise ``s`` follows the matrix
    recursion and is refactorized every step.  Row ``k`` of ``xs, ms, sdiag,
    lmin`` receives the state after step ``k``.  Returns
    ``(steps_done, collapsed)``.
    """
    K = W.shape[0]
    d = x.shape[0]
    y = np.empty(d)
    w = np.empty(d)
    lx = _log_target(code, x, p_scalar, p_vec, p_mat)
    for k in range(K):
        if not update_factor:
            if not cholesky_lower(s, chol):
                return k, True
        fixed = False
        if beta > 0.0 and ub[k] < beta:
            fixed = True
            for i in range(d):
                y[i] = x[i] + V[k, i]
        else:
            for i in range(d):
                acc = 0.0
                for j in range(i + 1):
                    acc += chol[i, j] * W[k, j]
                y[i] = x[i] + theta * acc
        acc_flag = True
        if code != 0:
            ly = _log_target(code, y, p_scalar, p_vec, p_mat)
            delta = ly - lx
            if delta < 0.0 and not lu[k] < delta:
                acc_flag = False
            if acc_flag:
                lx = ly
        if acc_flag:
            for i in range(d):
                x[i] = y[i]
        e = eta[k]
        for i in range(d):
            y[i] = x[i] - m[i]
        if update_factor:
            se = math.sqrt(e)
            for i in range(d):
                w[i] = se * y[i]
            ok = chol_rank1_update(chol, 1.0 - e, w)
            factor_product(chol, s)
            if not ok:
                return k, True
        else:
            for i in range(d):
                for j in range(d):
                    s[i, j] = (1.0 - e) * s[i, j] + e * y[i] * y[j]
        for i in range(d):
            m[i] = (1.0 - e) * m[i] + e * x[i]
        accepted[k] = acc_flag
        used_fixed[k] = fixed
        for i in range(d):
            xs[k, i] = x[i]
            ms[k, i] = m[i]
            sdiag[k, i] = s[i, i]
        if update_factor:
            lmin[k] = factor_lambda_min(chol)
        else:
            lmin[k] = lambda_min(s)
        if (rec_offset + k + 1) % rec_every == 0:
            rec_s[rec_pos[0]] = s
            rec_pos[0] += 1
    return K, False


@njit(cache=True)
def expectation_kernel(theta, eta, ratio0, log_b, ratio):
    """(ratio, log b) form of the joint a/b expectation recursion.

    ``eta[i]`` is the weight of index ``n = i + 1``.
    """
    t2 = theta * theta
    r = ratio0
    lb = 0.0
    log_b[0] = 0.0
    ratio[0] = r
    for i in range(1, log_b.shape[0]):
        en = eta[i - 1]
        en1 = eta[i]
        rp = (1.0 - en) * (1.0 - en) * r + t2
        g = (1.0 - en1) + en1 * rp
        lb += math.log(g)
        r = rp / g
        log_b[i] = lb
        ratio[i] = r


@njit(cache=True)
def g_kernel(theta_tilde, eta, g0, g):
    """``g[i+1] = f(g[i])`` where ``eta[i], eta[i+1]`` are the weights of the step."""
    t2 = theta_tilde * theta_tilde
    g[0] = g0
    for i in range(g.shape[0] - 1):
        en = eta[i]
        en1 = eta[i + 1]
        x = g[i]
        frac = x / (x + en ** -0.5) if x > 0.0 else 0.0
        g[i + 1] = math.sqrt(en1) * ((1.0 - en) ** 3 / en * frac + t2)
