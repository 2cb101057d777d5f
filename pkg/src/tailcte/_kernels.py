"""Compiled inner loops of the CML solver.

Each kernel evaluates many trial points ``(alpha_j, beta_j)`` against the
same log-excesses in one fused pass, which avoids the per-call overhead of
a dozen small numpy temporaries inside the Newton iteration.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True, error_model="numpy")
def reduced_residuals(L, M, alphas, betas):
    """Reduced and raw CML residuals at each trial point.

    Returns ``(reduced, raw, ok)`` with shapes ``(m, 2)``, ``(m, 2)``, ``(m,)``.
    ``ok[j]`` is False when some ``G_i`` is not finite and positive or a
    residual is not finite.
    """
    m = alphas.size
    k = L.size
    reduced = np.full((m, 2), np.nan)
    raw = np.full((m, 2), np.nan)
    ok = np.zeros(m, dtype=np.bool_)
    for j in range(m):
        a = alphas[j]
        b = betas[j]
        if not (math.isfinite(a) and math.isfinite(b)) or a <= 0.0:
            continue
        d = b - a
        c = a * (b * M - 1.0)
        shift = math.log1p(d / a)
        s1 = 0.0
        sl = 0.0
        good = True
        for i in range(k):
            phi = math.expm1(d * L[i] - shift) / d
            g = 1.0 + c * phi
            if not (g > 0.0 and g < math.inf):
                good = False
            r = phi / g
            s1 += r
            sl += L[i] * r
        s1 /= k
        s2 = 1.0 / (a * b) - sl / k
        t2 = (c * s2 - (1.0 - c / a) * s1) / d
        reduced[j, 0] = s1
        reduced[j, 1] = t2
        raw[j, 0] = -c * s1
        raw[j, 1] = d * t2 + (1.0 - c / a) * s1
        ok[j] = good and math.isfinite(s1) and math.isfinite(t2)
    return reduced, raw, ok


@njit(cache=True, error_model="numpy")
def profile_log_likelihood(L, M, alphas, betas):
    """``k log(beta) + sum log G_i - beta k M`` per trial point; ``-inf`` if some ``G_i <= 0``."""
    m = alphas.size
    k = L.size
    out = np.full(m, -np.inf)
    for j in range(m):
        a = alphas[j]
        b = betas[j]
        if not (math.isfinite(a) and math.isfinite(b)) or a <= 0.0 or b <= 0.0:
            continue
        d = b - a
        c = a * (b * M - 1.0)
        shift = math.log1p(d / a)
        total = 0.0
        good = True
        for i in range(k):
            g = 1.0 + c * math.expm1(d * L[i] - shift) / d
            if not (g > 0.0 and g < math.inf):
                good = False
                break
            total += math.log(g)
        if good:
            ll = k * math.log(b) + total - b * k * M
            if math.isfinite(ll):
                out[j] = ll
    return out


@njit(cache=True, error_model="numpy")
def _point(L, M, u0, u1):
    """Reduced residual ``(f0, f1)`` and merit norm at ``u = (log alpha, log(beta - alpha))``.

    The norm is ``inf`` where the point is outside the admissible region.
    """
    if abs(u0) > 30.0 or u1 > 700.0:
        return math.nan, math.nan, math.inf
    a = math.exp(u0)
    b = a + math.exp(u1)
    d = b - a
    c = a * (b * M - 1.0)
    shift = math.log1p(d / a)
    k = L.size
    s1 = 0.0
    sl = 0.0
    good = True
    for i in range(k):
        phi = math.expm1(d * L[i] - shift) / d
        g = 1.0 + c * phi
        if not (g > 0.0 and g < math.inf):
            good = False
        r = phi / g
        s1 += r
        sl += L[i] * r
    s1 /= k
    s2 = 1.0 / (a * b) - sl / k
    t2 = (c * s2 - (1.0 - c / a) * s1) / d
    raw0 = -c * s1
    raw1 = d * t2 + (1.0 - c / a) * s1
    norm = max(abs(s1), abs(t2), abs(raw0), abs(raw1))
    if not (good and math.isfinite(norm)):
        norm = math.inf
    return s1, t2, norm


@njit(cache=True, error_model="numpy")
def newton_solve(L, M, u0, u1, tol, max_iterations, max_halvings, rel_step,
                 edge_lo, edge_hi, stall_window, stall_ratio):
    """Damped Newton on the reduced CML residual.

    Returns ``(u0, u1, iterations, norm, status)`` where ``status`` is 0 when
    the merit norm reached ``tol``, 1 when the attempt stopped early and 2
    when every damped step left the admissible region.
    """
    f0, f1, norm = _point(L, M, u0, u1)
    if not math.isfinite(norm):
        return u0, u1, 0, math.inf, 2
    history = np.empty(max_iterations + 2)
    history[0] = norm
    n_hist = 1
    it = 0
    while True:
        if norm <= tol:
            return u0, u1, it, norm, 0
        if it == max_iterations or not (edge_lo < u1 - u0 < edge_hi):
            break
        if n_hist > stall_window and norm > stall_ratio * history[n_hist - stall_window - 1]:
            break
        h0 = rel_step * max(1.0, abs(u0))
        h1 = rel_step * max(1.0, abs(u1))
        p0, p1, _ = _point(L, M, u0 + h0, u1)
        q0, q1, _ = _point(L, M, u0 - h0, u1)
        r0, r1, _ = _point(L, M, u0, u1 + h1)
        w0, w1, _ = _point(L, M, u0, u1 - h1)
        j00 = (p0 - q0) / (2.0 * h0)
        j10 = (p1 - q1) / (2.0 * h0)
        j01 = (r0 - w0) / (2.0 * h1)
        j11 = (r1 - w1) / (2.0 * h1)
        det = j00 * j11 - j01 * j10
        if det == 0.0 or not math.isfinite(det):
            break
        s0 = (-f0 * j11 + f1 * j01) / det
        s1 = (-f1 * j00 + f0 * j10) / det
        if not (math.isfinite(s0) and math.isfinite(s1)):
            break
        accepted = False
        left_region = False
        lam = 1.0
        for _ in range(max_halvings + 1):
            g0, g1, g_norm = _point(L, M, u0 + lam * s0, u1 + lam * s1)
            if g_norm <= norm:
                accepted = True
                break
            if not math.isfinite(g_norm):
                left_region = True
            lam *= 0.5
        if not accepted:
            return u0, u1, it, norm, 2 if left_region else 1
        u0 += lam * s0
        u1 += lam * s1
        f0, f1, norm = g0, g1, g_norm
        history[n_hist] = norm
        n_hist += 1
        it += 1
    return u0, u1, it, norm, 1


@njit(cache=True, error_model="numpy")
def neg_log_likelihood_point(L, M, v0, v1):
    """Negative profile log-likelihood at ``v = (log alpha, log(beta/alpha - 1))``; ``inf`` outside."""
    if abs(v0) > 30.0 or abs(v1) > 30.0:
        return math.inf
    a = math.exp(v0)
    b = a * (1.0 + math.exp(v1))
    d = b - a
    c = a * (b * M - 1.0)
    shift = math.log1p(d / a)
    k = L.size
    total = 0.0
    for i in range(k):
        g = 1.0 + c * math.expm1(d * L[i] - shift) / d
        if not (g > 0.0 and g < math.inf):
            return math.inf
        total += math.log(g)
    ll = k * math.log(b) + total - b * k * M
    return -ll if math.isfinite(ll) else math.inf
