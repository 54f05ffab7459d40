"""Compiled per-pixel kernels.

Every pass reads only its input buffers and writes a separate output, so
results do not depend on pixel visiting order.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def median_candidates(vals, wts, n, target, half_coeff):
    """Median of {vals[0..n-1], r_0..r_n} for ascending `vals`.

    r_h = target + half_coeff * (sum_{j>=h} w_j - sum_{j<h} w_j). The r_h are
    non-increasing in h, so the rank-n element of the 2n+1 candidates is
    found with a merge against the reversed r sequence.
    """
    total = 0.0
    for j in range(n):
        total += wts[j]
    # r_asc[k] = r_{n-k}; cum before h is prefix sum of wts
    r = np.empty(n + 1)
    cum = 0.0
    for h in range(n + 1):
        r[h] = target + half_coeff * (total - 2.0 * cum)
        if h < n:
            cum += wts[h]
    i = 0  # into vals, ascending
    k = n  # into r, walking from r_n (smallest) upward
    cur = 0.0
    for _ in range(n + 1):
        if i < n and (k < 0 or vals[i] <= r[k]):
            cur = vals[i]
            i += 1
        else:
            cur = r[k]
            k -= 1
    return cur


@njit(cache=True, nogil=True)
def bilateral_round(src, out, radius, inv2ss, inv2sr):
    h, w, c = src.shape
    for y in range(h):
        y0 = max(0, y - radius)
        y1 = min(h, y + radius + 1)
        for x in range(w):
            x0 = max(0, x - radius)
            x1 = min(w, x + radius + 1)
            acc = np.zeros(c)
            wsum = 0.0
            for yy in range(y0, y1):
                dy = yy - y
                for xx in range(x0, x1):
                    dx = xx - x
                    d2 = 0.0
                    for ch in range(c):
                        diff = src[yy, xx, ch] - src[y, x, ch]
                        d2 += diff * diff
                    d2 /= c
                    wt = math.exp(-(dy * dy + dx * dx) * inv2ss - d2 * inv2sr)
                    wsum += wt
                    for ch in range(c):
                        acc[ch] += wt * (src[yy, xx, ch] - src[y, x, ch])
            # offsets from the center keep flat regions exactly flat
            for ch in range(c):
                out[y, x, ch] = src[y, x, ch] + acc[ch] / wsum


@njit(cache=True, nogil=True)
def iterate_d_pass(d_prev, target, v, s, radius, inv2ss, lam, n_channels, out, out_raw):
    """One Jacobi pass of the selective-neighbor weighted-median update."""
    h, w = d_prev.shape
    c = s.shape[2]
    half = lam / (2.0 * n_channels)
    cap = (2 * radius + 1) * (2 * radius + 1)
    vals = np.empty(cap)
    wts = np.empty(cap)
    sv = np.empty(cap)
    sw = np.empty(cap)
    for y in range(h):
        y0 = max(0, y - radius)
        y1 = min(h, y + radius + 1)
        for x in range(w):
            x0 = max(0, x - radius)
            x1 = min(w, x + radius + 1)
            bound = v[y, x]
            n = 0
            for yy in range(y0, y1):
                for xx in range(x0, x1):
                    if yy == y and xx == x:
                        continue
                    dval = d_prev[yy, xx]
                    if dval < bound:
                        continue
                    d2 = 0.0
                    for ch in range(c):
                        diff = s[y, x, ch] - s[yy, xx, ch]
                        d2 += diff * diff
                    vals[n] = dval
                    wts[n] = math.exp(-(d2 / c) * inv2ss)
                    n += 1
            order = np.argsort(vals[:n], kind="mergesort")
            for j in range(n):
                sv[j] = vals[order[j]]
                sw[j] = wts[order[j]]
            raw = median_candidates(sv, sw, n, target[y, x], half)
            out_raw[y, x] = raw
            if raw < bound:
                raw = bound
            if raw > 0.0:
                raw = 0.0
            out[y, x] = raw


@njit(cache=True, nogil=True)
def iterate_l_pass(l_prev, l0, t_eff, weights, offsets, degenerate, lam, out):
    """One Jacobi pass of the transmission-aware latent update, all channels."""
    h, w, c = l_prev.shape
    k_total = offsets.shape[0]
    vals = np.empty(k_total)
    wts = np.empty(k_total)
    sv = np.empty(k_total)
    sw = np.empty(k_total)
    for y in range(h):
        for x in range(w):
            tt = t_eff[y, x]
            half = lam / (2.0 * tt * tt)
            for ch in range(c):
                data = l0[y, x, ch]
                if degenerate[y, x]:
                    res = data
                else:
                    n = 0
                    for k in range(k_total):
                        wt = weights[y, x, k]
                        if wt <= 0.0:
                            continue
                        yy = y + offsets[k, 0]
                        xx = x + offsets[k, 1]
                        vals[n] = l_prev[yy, xx, ch]
                        wts[n] = wt
                        n += 1
                    order = np.argsort(vals[:n], kind="mergesort")
                    for j in range(n):
                        sv[j] = vals[order[j]]
                        sw[j] = wts[order[j]]
                    res = median_candidates(sv, sw, n, data, half)
                if res < 0.0:
                    res = 0.0
                elif res > 1.0:
                    res = 1.0
                out[y, x, ch] = res
