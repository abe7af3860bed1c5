"""Hot numeric kernels: Moore boundary tracing, region labeling, SMO.

Each kernel is written as a plain-Python loop that numba can compile.
By default the loops are JIT-compiled with ``numba.njit``; setting the
environment variable ``FLOWERID_PURE_NUMPY=1`` (before import) selects the
uncompiled pure-Python/NumPy path instead.  ``benchmarks/bench_kernels.py``
compares the two paths.
"""

import os

import numpy as np

PURE_NUMPY = os.environ.get("FLOWERID_PURE_NUMPY", "").lower() in ("1", "true", "yes")

if not PURE_NUMPY:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        PURE_NUMPY = True

if PURE_NUMPY:
    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f


# Moore neighborhood in clockwise order starting from west: (dx, dy),
# y pointing down.  _REV[dy+1, dx+1] maps an offset back to its index.
_OFFS = np.array(
    [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)],
    dtype=np.int64,
)
_REV = np.zeros((3, 3), dtype=np.int64)
for _i, (_dx, _dy) in enumerate(_OFFS):
    _REV[_dy + 1, _dx + 1] = _i


@njit(cache=True)
def _scan_next(mask, cx, cy, b_idx):
    """Clockwise Moore scan from the backtrack direction; returns
    (found, nx, ny, new_backtrack_idx)."""
    h, w = mask.shape
    for k in range(1, 9):
        idx = (b_idx + k) % 8
        nx = cx + _OFFS[idx, 0]
        ny = cy + _OFFS[idx, 1]
        if 0 <= nx < w and 0 <= ny < h and mask[ny, nx] != 0:
            prev = (b_idx + k - 1) % 8
            bx = cx + _OFFS[prev, 0]
            by = cy + _OFFS[prev, 1]
            return True, nx, ny, _REV[by - ny + 1, bx - nx + 1]
    return False, cx, cy, b_idx


@njit(cache=True)
def trace_boundary(mask):
    """Moore-neighbor trace of the outer boundary of a binary mask.

    ``mask`` is a 2-D uint8 array with one object component.  Returns an
    (n, 2) int64 array of (x, y) walk points forming a closed loop (the
    start point is not repeated at the end).  The walk starts at the
    topmost-leftmost object pixel and stops when it re-enters the start
    about to repeat the opening move.
    """
    h, w = mask.shape
    sy = -1
    sx = -1
    for y in range(h):
        for x in range(w):
            if mask[y, x] != 0:
                sy = y
                sx = x
                break
        if sy >= 0:
            break
    if sy < 0:
        return np.empty((0, 2), dtype=np.int64)

    # count boundary pixels to bound the walk length
    nb = 0
    for y in range(h):
        for x in range(w):
            if mask[y, x] == 0:
                continue
            edge = False
            for k in range(8):
                nx = x + _OFFS[k, 0]
                ny = y + _OFFS[k, 1]
                if nx < 0 or ny < 0 or nx >= w or ny >= h or mask[ny, nx] == 0:
                    edge = True
                    break
            if edge:
                nb += 1
    cap = 4 * nb + 8
    pts = np.empty((cap, 2), dtype=np.int64)

    cx = sx
    cy = sy
    b_idx = 0  # backtrack direction: west of the start pixel is background
    n = 0
    pts[n, 0] = cx
    pts[n, 1] = cy
    n += 1
    second_x = -1
    second_y = -1
    second_b = -1
    while n < cap:
        found, nx, ny, nb = _scan_next(mask, cx, cy, b_idx)
        if not found:
            break  # isolated pixel
        if n == 1:
            second_x = nx
            second_y = ny
            second_b = nb
        elif nx == sx and ny == sy:
            # closure test: would the walk repeat its opening move?
            pfound, px, py, pb = _scan_next(mask, nx, ny, nb)
            if pfound and px == second_x and py == second_y and pb == second_b:
                break
        cx = nx
        cy = ny
        b_idx = nb
        pts[n, 0] = cx
        pts[n, 1] = cy
        n += 1
    return pts[:n].copy()


@njit(cache=True)
def label_regions(codes):
    """4-connected components of equal values in a 2-D int32 array.

    Labels are assigned in raster-scan first-occurrence order starting at 0,
    so the result is canonical and path-independent.  Returns (labels, count).
    """
    h, w = codes.shape
    labels = np.full((h, w), -1, dtype=np.int32)
    stack = np.empty(h * w, dtype=np.int64)
    next_label = 0
    for y0 in range(h):
        for x0 in range(w):
            if labels[y0, x0] >= 0:
                continue
            code = codes[y0, x0]
            top = 0
            stack[top] = y0 * w + x0
            top += 1
            labels[y0, x0] = next_label
            while top > 0:
                top -= 1
                p = stack[top]
                py = p // w
                px = p % w
                if px > 0 and labels[py, px - 1] < 0 and codes[py, px - 1] == code:
                    labels[py, px - 1] = next_label
                    stack[top] = p - 1
                    top += 1
                if px + 1 < w and labels[py, px + 1] < 0 and codes[py, px + 1] == code:
                    labels[py, px + 1] = next_label
                    stack[top] = p + 1
                    top += 1
                if py > 0 and labels[py - 1, px] < 0 and codes[py - 1, px] == code:
                    labels[py - 1, px] = next_label
                    stack[top] = p - w
                    top += 1
                if py + 1 < h and labels[py + 1, px] < 0 and codes[py + 1, px] == code:
                    labels[py + 1, px] = next_label
                    stack[top] = p + w
                    top += 1
            next_label += 1
    return labels, next_label


@njit(cache=True)
def solve_smo(K, y, c, tol, max_updates):
    """SMO solver for the soft-margin SVM dual on a precomputed kernel matrix.

    Maximal-violating-pair working-set selection; converges when the maximal
    KKT violation drops below ``tol``.  Returns (alpha, bias, n_updates,
    converged).  ``y`` must be +/-1 floats.
    """
    n = K.shape[0]
    alpha = np.zeros(n, dtype=np.float64)
    grad = np.full(n, -1.0, dtype=np.float64)  # d/dalpha of 0.5 a'Qa - e'a
    updates = 0
    converged = False
    while updates < max_updates:
        # select i in I_up maximizing -y*grad, j in I_low minimizing it
        gmax = -1e300
        gmin = 1e300
        i = -1
        j = -1
        for t in range(n):
            yt = y[t]
            v = -yt * grad[t]
            if (yt > 0 and alpha[t] < c) or (yt < 0 and alpha[t] > 0):
                if v > gmax:
                    gmax = v
                    i = t
            if (yt > 0 and alpha[t] > 0) or (yt < 0 and alpha[t] < c):
                if v < gmin:
                    gmin = v
                    j = t
        if i < 0 or j < 0 or gmax - gmin < tol:
            converged = True
            break

        quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if quad <= 1e-12:
            quad = 1e-12
        ai_old = alpha[i]
        aj_old = alpha[j]
        if y[i] != y[j]:
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0.0:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = diff
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = c - diff
            else:
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = c + diff
        else:
            delta = (grad[i] - grad[j]) / quad
            asum = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if asum > c:
                if alpha[i] > c:
                    alpha[i] = c
                    alpha[j] = asum - c
                if alpha[j] > c:
                    alpha[j] = c
                    alpha[i] = asum - c
            else:
                if alpha[j] < 0.0:
                    alpha[j] = 0.0
                    alpha[i] = asum
                if alpha[i] < 0.0:
                    alpha[i] = 0.0
                    alpha[j] = asum

        dai = alpha[i] - ai_old
        daj = alpha[j] - aj_old
        for t in range(n):
            grad[t] += y[t] * (y[i] * K[t, i] * dai + y[j] * K[t, j] * daj)
        updates += 1

    # bias from free support vectors, else midpoint of the violation bounds
    nfree = 0
    bsum = 0.0
    for t in range(n):
        if 1e-8 < alpha[t] < c - 1e-8:
            bsum += -y[t] * grad[t]
            nfree += 1
    if nfree > 0:
        b = bsum / nfree
    else:
        gmax = -1e300
        gmin = 1e300
        for t in range(n):
            yt = y[t]
            v = -yt * grad[t]
            if (yt > 0 and alpha[t] < c) or (yt < 0 and alpha[t] > 0):
                if v > gmax:
                    gmax = v
            if (yt > 0 and alpha[t] > 0) or (yt < 0 and alpha[t] < c):
                if v < gmin:
                    gmin = v
        b = (gmax + gmin) / 2.0
    return alpha, b, updates, converged
