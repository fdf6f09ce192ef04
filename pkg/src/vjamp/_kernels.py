"""Compiled inner loops.

Every kernel releases the GIL so the detector can run disjoint column
blocks on a thread pool.  Semantics mirror the scalar functions in
:mod:`vjamp.cascade` exactly; the tests hold them to that.
"""

import numpy as np
from numba import njit

FIXED_ONE = 4096


@njit(cache=True, nogil=True, inline="always")
def _isqrt(v):
    if v <= 0:
        return 0
    r = np.int64(np.sqrt(np.float64(v)))
    while r * r > v:
        r -= 1
    while (r + 1) * (r + 1) <= v:
        r += 1
    return r


@njit(cache=True, nogil=True, inline="always")
def _box(t, x, y, w, h):
    return t[y + h, x + w] + t[y, x] - t[y, x + w] - t[y + h, x]


@njit(cache=True, nogil=True)
def window_sigma_n(ii, sq, x, y, ww, wh):
    s = _box(ii, x, y, ww, wh)
    s2 = _box(sq, x, y, ww, wh)
    return _isqrt(ww * wh * s2 - s * s)


@njit(cache=True, nogil=True)
def run_window(ii, sq, x, y, rects, thr, left, right, starts, stage_thr, ww, wh):
    """Return ``(stages_passed, weak_evals)`` for the window at (x, y)."""
    sigma_n = window_sigma_n(ii, sq, x, y, ww, wh)
    n_stages = stage_thr.shape[0]
    evals = 0
    for s in range(n_stages):
        total = 0
        for k in range(starts[s], starts[s + 1]):
            f = 0
            for r in range(3):
                wt = rects[k, r, 4]
                if wt != 0:
                    f += wt * _box(ii, x + rects[k, r, 0], y + rects[k, r, 1], rects[k, r, 2], rects[k, r, 3])
            if f * FIXED_ONE < thr[k] * sigma_n:
                total += left[k]
            else:
                total += right[k]
        evals += starts[s + 1] - starts[s]
        if total < stage_thr[s]:
            return s, evals
    return n_stages, evals


@njit(cache=True, nogil=True)
def scan_columns(ii, sq, xs, y_stop, step, rects, thr, left, right, starts, stage_thr, ww, wh):
    """Scan every y in ``range(0, y_stop + 1, step)`` for each x in ``xs``.

    x is the outer loop, y the inner one.  Returns the accepted origins
    plus window, stage and weak-evaluation counts.
    """
    n_stages = stage_thr.shape[0]
    ny = y_stop // step + 1
    cap = xs.shape[0] * ny
    out = np.empty((cap, 2), dtype=np.int64)
    n_acc = 0
    windows = 0
    stages = 0
    evals = 0
    for i in range(xs.shape[0]):
        x = xs[i]
        for y in range(0, y_stop + 1, step):
            depth, e = run_window(ii, sq, x, y, rects, thr, left, right, starts, stage_thr, ww, wh)
            windows += 1
            evals += e
            if depth == n_stages:
                stages += n_stages
                out[n_acc, 0] = x
                out[n_acc, 1] = y
                n_acc += 1
            else:
                stages += depth + 1
    return out[:n_acc].copy(), windows, stages, evals


@njit(cache=True, nogil=True)
def batch_depths(ii_stack, sq_stack, rects, thr, left, right, starts, stage_thr, ww, wh):
    """Stages passed by each window of a stack of window-sized integrals."""
    n = ii_stack.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        d, _ = run_window(ii_stack[i], sq_stack[i], 0, 0, rects, thr, left, right, starts, stage_thr, ww, wh)
        out[i] = d
    return out


@njit(cache=True, nogil=True)
def feature_values(ii_stack, rects):
    """Raw feature sums, shape (n_features, n_windows)."""
    nf = rects.shape[0]
    n = ii_stack.shape[0]
    out = np.empty((nf, n), dtype=np.int64)
    for j in range(nf):
        for i in range(n):
            t = ii_stack[i]
            f = 0
            for r in range(3):
                wt = rects[j, r, 4]
                if wt != 0:
                    f += wt * _box(t, rects[j, r, 0], rects[j, r, 1], rects[j, r, 2], rects[j, r, 3])
            out[j, i] = f
    return out


@njit(cache=True, nogil=True, inline="always")
def _floor_q(raw, sig):
    """``floor(raw * FIXED_ONE / sig)`` for ``sig > 0``."""
    return (np.int64(raw) * FIXED_ONE) // np.int64(sig)


@njit(cache=True, nogil=True)
def best_stump(sorted_values, order, raw, sigma, signed_weights, t_pos, t_neg):
    """Exact weighted-error decision stump search over all features.

    ``sorted_values[j]`` holds feature ``j``'s normalised values in
    ascending order (``+inf`` for flat windows, which always fall right)
    and ``order[j]`` the matching sample indices; ``raw`` and ``sigma`` are
    the integer sums the runtime compares.  Only fixed-point thresholds
    ``q`` are considered, so a sample falls left exactly when
    ``raw * FIXED_ONE < q * sigma``.  Each realisable split is tried at the
    smallest ``q`` producing it.  ``signed_weights`` is ``+w`` for
    positives and ``-w`` for negatives; with ``d`` the signed weight left
    of a split, ``p=+1`` (positive on the left) errs ``t_pos - d`` and
    ``p=-1`` errs ``t_neg + d``.  Ties go to the lowest feature index, then
    the lowest threshold, then ``p=+1``.

    Returns ``(feature, q, polarity, error)``.
    """
    nf, n = sorted_values.shape
    best_err = np.inf
    best_f = -1
    best_q = 0
    best_pol = 1
    for j in range(nf):
        row = sorted_values[j]
        idx = order[j]
        # everything right: just below the smallest value
        i0 = idx[0]
        q = _floor_q(raw[j, i0], sigma[i0]) if sigma[i0] > 0 else 0
        if t_pos < best_err:
            best_err, best_f, best_q, best_pol = t_pos, j, q, 1
        if t_neg < best_err:
            best_err, best_f, best_q, best_pol = t_neg, j, q, -1
        d = 0.0
        for k in range(n):
            i = idx[k]
            if sigma[i] == 0:
                break  # flat windows sort last and never fall left
            d += signed_weights[i]
            q = _floor_q(raw[j, i], sigma[i]) + 1
            if k + 1 < n:
                if row[k + 1] == row[k]:
                    continue
                i1 = idx[k + 1]
                if sigma[i1] > 0 and q * np.int64(sigma[i1]) > np.int64(raw[j, i1]) * FIXED_ONE:
                    continue  # no fixed-point threshold separates k from k + 1
            e_plus = t_pos - d
            e_minus = t_neg + d
            if e_plus < best_err:
                best_err, best_f, best_q, best_pol = e_plus, j, q, 1
            if e_minus < best_err:
                best_err, best_f, best_q, best_pol = e_minus, j, q, -1
    return best_f, best_q, best_pol, best_err


@njit(cache=True, nogil=True)
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit(cache=True, nogil=True)
def overlap_components(boxes, overlap):
    """Component root of every box in the graph linking pairs with IoU >= overlap.

    Roots are the smallest member index, so the labelling does not depend
    on the order in which pairs are visited.
    """
    n = boxes.shape[0]
    parent = np.arange(n)
    for i in range(n):
        ax, ay, aw, ah = boxes[i, 0], boxes[i, 1], boxes[i, 2], boxes[i, 3]
        for j in range(i + 1, n):
            bx, by, bw, bh = boxes[j, 0], boxes[j, 1], boxes[j, 2], boxes[j, 3]
            iw = min(ax + aw, bx + bw) - max(ax, bx)
            ih = min(ay + ah, by + bh) - max(ay, by)
            if iw <= 0 or ih <= 0:
                continue
            inter = iw * ih
            if inter / (aw * ah + bw * bh - inter) >= overlap:
                ri = _find(parent, i)
                rj = _find(parent, j)
                if ri < rj:
                    parent[rj] = ri
                elif rj < ri:
                    parent[ri] = rj
    for i in range(n):
        parent[i] = _find(parent, i)
    return parent
