"""Hot inner loops, each in a numba flavour and a pure-numpy flavour.

The numba versions are used by default. Setting the environment variable
``MEMBRANE_PATTERNS_NUMBA=0`` (read at import time) selects the numpy
versions everywhere, which is also what happens when numba is missing.
Both flavours are always importable as ``NUMPY_KERNELS`` / ``NUMBA_KERNELS``
so tests and ``benchmarks/bench_kernels.py`` can compare them directly.
"""

from __future__ import annotations

import os
from types import SimpleNamespace

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _env_wants_numba() -> bool:
    flag = os.environ.get("MEMBRANE_PATTERNS_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and _env_wants_numba()


# ---------------------------------------------------------------------------
# pure numpy
# ---------------------------------------------------------------------------

def csr_matvec_np(indptr, indices, data, x):
    nrows = indptr.shape[0] - 1
    rows = np.repeat(np.arange(nrows), np.diff(indptr))
    return np.bincount(rows, weights=data * x[indices], minlength=nrows)


def log_convex_np(s, theta, seam):
    """Taylor-extended convex logarithmic part and its first two derivatives.

    Inside ``|s| < seam`` this is ``theta/2 ((1+s)ln(1+s) + (1-s)ln(1-s))``;
    outside, the second-order Taylor polynomial taken at ``+-seam``.
    """
    s = np.asarray(s, dtype=np.float64)
    half = 0.5 * theta
    inside = np.abs(s) < seam
    si = np.where(inside, s, 0.0)
    w = half * ((1.0 + si) * np.log1p(si) + (1.0 - si) * np.log1p(-si))
    dw = half * (np.log1p(si) - np.log1p(-si))
    d2w = theta / (1.0 - si * si)

    # seam data, symmetric in the sign of s
    w_a = half * ((1.0 + seam) * np.log1p(seam) + (1.0 - seam) * np.log1p(-seam))
    dw_a = half * (np.log1p(seam) - np.log1p(-seam))
    d2w_a = theta / (1.0 - seam * seam)
    sign = np.where(s < 0.0, -1.0, 1.0)
    t = s - sign * seam
    w_out = w_a + sign * dw_a * t + 0.5 * d2w_a * t * t
    dw_out = sign * dw_a + d2w_a * t
    return (np.where(inside, w, w_out),
            np.where(inside, dw, dw_out),
            np.where(inside, d2w, d2w_a))


def log_resolvent_np(r, lam, theta, tol=1e-12, max_iter=200):
    """Solve ``s + lam * theta/2 * ln((1+s)/(1-s)) = r`` for s in (-1, 1), elementwise.

    Newton steps safeguarded by a shrinking bracket; returns (s, iterations).
    """
    r = np.asarray(r, dtype=np.float64)
    half = 0.5 * theta
    lo = np.full(r.shape, -1.0)
    hi = np.full(r.shape, 1.0)
    s = np.clip(r, -0.5, 0.5)
    done = np.zeros(r.shape, dtype=bool)
    it = 0
    for it in range(1, max_iter + 1):
        f = s + lam * half * (np.log1p(s) - np.log1p(-s)) - r
        done = np.abs(f) <= tol
        if done.all():
            return s, it
        hi = np.where(f > 0.0, s, hi)
        lo = np.where(f < 0.0, s, lo)
        df = 1.0 + lam * theta / ((1.0 - s) * (1.0 + s))
        trial = s - f / df
        mid = 0.5 * (lo + hi)
        # a bracket that no longer splits means s is pinned at float resolution
        pinned = (mid <= lo) | (mid >= hi)
        done = done | pinned
        if done.all():
            return s, it
        bad = ~((trial > lo) & (trial < hi))
        s = np.where(done, s, np.where(bad, mid, trial))
    return s, -1


def p1_local_matrices_np(local_xy, A):
    """Element stiffness ``area * B^T A B`` for P1 triangles, shape (T, 3, 3)."""
    x = local_xy[:, :, 0]
    y = local_xy[:, :, 1]
    det = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    area = 0.5 * np.abs(det)
    # gradients of the barycentric coordinates, shape (T, 2, 3)
    B = np.empty((local_xy.shape[0], 2, 3))
    B[:, 0, 0] = y[:, 1] - y[:, 2]
    B[:, 0, 1] = y[:, 2] - y[:, 0]
    B[:, 0, 2] = y[:, 0] - y[:, 1]
    B[:, 1, 0] = x[:, 2] - x[:, 1]
    B[:, 1, 1] = x[:, 0] - x[:, 2]
    B[:, 1, 2] = x[:, 1] - x[:, 0]
    B /= det[:, None, None]
    return area[:, None, None] * np.einsum("tki,kl,tlj->tij", B, A, B)


def label_periodic_np(mask):
    """4-connected components of a boolean (n, n) array on the torus.

    Returns (labels, count); background is -1, components are 0..count-1
    numbered in order of their first row-major cell.
    """
    from scipy import ndimage

    mask = np.asarray(mask, dtype=bool)
    raw, count = ndimage.label(mask)
    if count == 0:
        return np.full(mask.shape, -1, dtype=np.int64), 0
    parent = np.arange(count + 1)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    # stitch the wrap-around seams
    for a, b in zip(np.concatenate([raw[0, :], raw[:, 0]]),
                    np.concatenate([raw[-1, :], raw[:, -1]])):
        if a and b:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    roots = np.array([find(a) for a in range(count + 1)])
    flat = roots[raw].ravel()
    labels = np.full(flat.shape, -1, dtype=np.int64)
    fg = flat > 0
    _, first = np.unique(flat[fg], return_index=True)
    order = np.argsort(first)
    remap = np.zeros(count + 1, dtype=np.int64)
    remap[np.unique(flat[fg])[order]] = np.arange(order.size)
    labels[fg] = remap[flat[fg]]
    return labels.reshape(mask.shape), int(order.size)


NUMPY_KERNELS = SimpleNamespace(
    name="numpy",
    csr_matvec=csr_matvec_np,
    log_convex=log_convex_np,
    log_resolvent=log_resolvent_np,
    p1_local_matrices=p1_local_matrices_np,
    label_periodic=label_periodic_np,
)


# ---------------------------------------------------------------------------
# numba
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    _njit = numba.njit(cache=True, nogil=True)

    @_njit
    def csr_matvec_nb(indptr, indices, data, x):
        nrows = indptr.shape[0] - 1
        y = np.zeros(nrows)
        for i in range(nrows):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc += data[k] * x[indices[k]]
            y[i] = acc
        return y

    @_njit
    def _log_convex_nb(s, theta, seam):
        half = 0.5 * theta
        w_a = half * ((1.0 + seam) * np.log1p(seam) + (1.0 - seam) * np.log1p(-seam))
        dw_a = half * (np.log1p(seam) - np.log1p(-seam))
        d2w_a = theta / (1.0 - seam * seam)
        w = np.empty(s.shape[0])
        dw = np.empty(s.shape[0])
        d2w = np.empty(s.shape[0])
        for i in range(s.shape[0]):
            v = s[i]
            if abs(v) < seam:
                lp = np.log1p(v)
                lm = np.log1p(-v)
                w[i] = half * ((1.0 + v) * lp + (1.0 - v) * lm)
                dw[i] = half * (lp - lm)
                d2w[i] = theta / (1.0 - v * v)
            else:
                sign = -1.0 if v < 0.0 else 1.0
                t = v - sign * seam
                w[i] = w_a + sign * dw_a * t + 0.5 * d2w_a * t * t
                dw[i] = sign * dw_a + d2w_a * t
                d2w[i] = d2w_a
        return w, dw, d2w

    def log_convex_nb(s, theta, seam):
        s = np.asarray(s, dtype=np.float64)
        w, dw, d2w = _log_convex_nb(np.ascontiguousarray(s).ravel(), float(theta), float(seam))
        return w.reshape(s.shape), dw.reshape(s.shape), d2w.reshape(s.shape)

    @_njit
    def _log_resolvent_nb(r, lam, theta, tol, max_iter):
        half = 0.5 * theta
        out = np.empty(r.shape[0])
        worst = 0
        for i in range(r.shape[0]):
            lo, hi = -1.0, 1.0
            s = min(max(r[i], -0.5), 0.5)
            converged = False
            for it in range(1, max_iter + 1):
                f = s + lam * half * (np.log1p(s) - np.log1p(-s)) - r[i]
                if abs(f) <= tol:
                    converged = True
                    worst = max(worst, it)
                    break
                if f > 0.0:
                    hi = s
                else:
                    lo = s
                trial = s - f / (1.0 + lam * theta / ((1.0 - s) * (1.0 + s)))
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    converged = True
                    worst = max(worst, it)
                    break
                if trial > lo and trial < hi:
                    s = trial
                else:
                    s = mid
            if not converged:
                worst = -1
                out[i] = s
                break
            out[i] = s
        return out, worst

    def log_resolvent_nb(r, lam, theta, tol=1e-12, max_iter=200):
        r = np.asarray(r, dtype=np.float64)
        s, it = _log_resolvent_nb(np.ascontiguousarray(r).ravel(), float(lam), float(theta),
                                  float(tol), int(max_iter))
        return s.reshape(r.shape), it

    @_njit
    def _p1_local_matrices_nb(local_xy, A):
        T = local_xy.shape[0]
        out = np.empty((T, 3, 3))
        B = np.empty((2, 3))
        for t in range(T):
            x0, y0 = local_xy[t, 0, 0], local_xy[t, 0, 1]
            x1, y1 = local_xy[t, 1, 0], local_xy[t, 1, 1]
            x2, y2 = local_xy[t, 2, 0], local_xy[t, 2, 1]
            det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
            area = 0.5 * abs(det)
            B[0, 0] = (y1 - y2) / det
            B[0, 1] = (y2 - y0) / det
            B[0, 2] = (y0 - y1) / det
            B[1, 0] = (x2 - x1) / det
            B[1, 1] = (x0 - x2) / det
            B[1, 2] = (x1 - x0) / det
            for i in range(3):
                ax = A[0, 0] * B[0, i] + A[0, 1] * B[1, i]
                ay = A[1, 0] * B[0, i] + A[1, 1] * B[1, i]
                for j in range(3):
                    out[t, j, i] = area * (B[0, j] * ax + B[1, j] * ay)
        return out

    def p1_local_matrices_nb(local_xy, A):
        return _p1_local_matrices_nb(np.ascontiguousarray(local_xy, dtype=np.float64),
                                     np.ascontiguousarray(A, dtype=np.float64))

    @_njit
    def _label_periodic_nb(mask):
        n0, n1 = mask.shape
        labels = np.full((n0, n1), -1, dtype=np.int64)
        stack = np.empty(n0 * n1, dtype=np.int64)
        count = 0
        for start in range(n0 * n1):
            a0, a1 = start // n1, start % n1
            if not mask[a0, a1] or labels[a0, a1] >= 0:
                continue
            labels[a0, a1] = count
            top = 0
            stack[top] = start
            top += 1
            while top > 0:
                top -= 1
                p = stack[top]
                p0, p1 = p // n1, p % n1
                for d in range(4):
                    q0, q1 = p0, p1
                    if d == 0:
                        q0 = (p0 + 1) % n0
                    elif d == 1:
                        q0 = (p0 - 1) % n0
                    elif d == 2:
                        q1 = (p1 + 1) % n1
                    else:
                        q1 = (p1 - 1) % n1
                    if mask[q0, q1] and labels[q0, q1] < 0:
                        labels[q0, q1] = count
                        stack[top] = q0 * n1 + q1
                        top += 1
            count += 1
        return labels, count

    def label_periodic_nb(mask):
        labels, count = _label_periodic_nb(np.ascontiguousarray(mask, dtype=np.bool_))
        return labels, int(count)

    NUMBA_KERNELS = SimpleNamespace(
        name="numba",
        csr_matvec=csr_matvec_nb,
        log_convex=log_convex_nb,
        log_resolvent=log_resolvent_nb,
        p1_local_matrices=p1_local_matrices_nb,
        label_periodic=label_periodic_nb,
    )
else:  # pragma: no cover
    NUMBA_KERNELS = None


def active_kernels():
    return NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS


K = active_kernels()
