"""Hot inner loops: one covariance-lasso sweep and Ward agglomeration.

Each kernel exists twice, a numba version written with explicit loops and a
vectorized numpy version.  :func:`covglasso_sweep` and :func:`ward_merges`
dispatch on the backend chosen in :mod:`sparsewishart._accel`; both
implementations are kept numerically interchangeable (the test-suite checks
parity).
"""
import numpy as np

from ._accel import dispatch, njit

INNER_TOL = 1e-9
INNER_MAX = 20


# ---------------------------------------------------------------------------
# covariance graphical lasso: one pass over all columns
# ---------------------------------------------------------------------------
#
# For column j write Sigma = [[S11, b], [b', s]] and g = s - b' S11^{-1} b.
# With Omega = Sigma^{-1} kept in sync, S11^{-1} = O11 - o o' / o22 costs
# O(p^2).  Given the rest of Sigma, the objective in (b, g) is
#
#     log g + (b'Vb - 2u'b + s22) / g + d (g + b'S11^{-1}b) + 2 sum_h w_h |b_h|
#
# with V = S11^{-1} T11 S11^{-1}, u = S11^{-1} t12 (T the sample matrix),
# d = rho P_jj, w = rho P_{.j}.  When d = 0 the optimal g is c(b) = b'Vb - 2u'b
# + s22, leaving log c(b) + 2 sum w|b| to be minimised coordinate-wise exactly
# (a quadratic per half-line).  Otherwise b gets soft-thresholded lasso steps
# at fixed g, then g its closed-form update.  Every step is a descent step.


@njit
def _profile_coord(a, b, c0, w):
    """Minimise ``log(a x^2 + 2 b x + c0) + 2 w |x|`` over ``x``.

    This is the column objective with ``gamma`` profiled out (``d = 0``);
    stationary points on each half-line solve a quadratic, and the best of
    them and ``x = 0`` is returned.
    """
    best_x = 0.0
    best_v = np.log(c0)
    if w == 0.0:
        x = -b / a
        q = a * x * x + 2.0 * b * x + c0
        if q > 0.0 and np.log(q) < best_v:
            return x
        return best_x
    for sgn in (1.0, -1.0):
        # a x + b + sgn w q(x) = 0
        qa = sgn * w * a
        qb = a + 2.0 * sgn * w * b
        qc = b + sgn * w * c0
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0.0:
            continue
        root = np.sqrt(disc)
        # numerically stable pair of roots
        if qb >= 0.0:
            t = -0.5 * (qb + root)
        else:
            t = -0.5 * (qb - root)
        for k in range(2):
            if k == 0:
                if t == 0.0:
                    continue
                x = qc / t
            else:
                x = t / qa
            if not np.isfinite(x) or x * sgn <= 0.0:
                continue
            q = a * x * x + 2.0 * b * x + c0
            if not q > 0.0:
                continue
            v = np.log(q) + 2.0 * w * abs(x)
            if v < best_v:
                best_v = v
                best_x = x
    return best_x


@njit
def _sweep_nb(sigma, omega, s, weights, gamma_floor):
    p = sigma.shape[0]
    m = p - 1
    idx = np.empty(m, dtype=np.int64)
    inv11 = np.empty((m, m))
    s11 = np.empty((m, m))
    beta = np.empty(m)
    s12 = np.empty(m)
    w = np.empty(m)
    o12 = np.empty(m)
    for j in range(p):
        k = 0
        for h in range(p):
            if h != j:
                idx[k] = h
                k += 1
        o22 = omega[j, j]
        for a in range(m):
            ia = idx[a]
            o12[a] = omega[ia, j]
            beta[a] = sigma[ia, j]
            s12[a] = s[ia, j]
            w[a] = weights[ia, j]
        for a in range(m):
            ia = idx[a]
            for c in range(m):
                ic = idx[c]
                inv11[a, c] = omega[ia, ic] - o12[a] * o12[c] / o22
                s11[a, c] = s[ia, ic]
        d = weights[j, j]
        s22 = s[j, j]
        gamma = 1.0 / o22
        tmat = np.dot(inv11, s11)
        V = np.dot(tmat, inv11)
        u = np.dot(inv11, s12)
        A = V + (d * gamma) * inv11

        bmax = 0.0
        for a in range(m):
            if abs(beta[a]) > bmax:
                bmax = abs(beta[a])
        profile = d == 0.0
        if profile:
            # exact coordinate descent with gamma profiled out
            vb = np.dot(V, beta)
            c = np.dot(beta, vb) - 2.0 * np.dot(u, beta) + s22
            for _ in range(INNER_MAX):
                maxdelta = 0.0
                for h in range(m):
                    vhh = V[h, h]
                    bh = vb[h] - vhh * beta[h] - u[h]
                    c0 = c - vhh * beta[h] * beta[h] - 2.0 * bh * beta[h]
                    if not c0 > gamma_floor:
                        profile = False
                        break
                    new = _profile_coord(vhh, bh, c0, w[h])
                    delta = new - beta[h]
                    if delta != 0.0:
                        beta[h] = new
                        for a in range(m):
                            vb[a] += V[a, h] * delta
                        c = c0 + vhh * new * new + 2.0 * bh * new
                        if abs(delta) > maxdelta:
                            maxdelta = abs(delta)
                        if abs(new) > bmax:
                            bmax = abs(new)
                if not profile or maxdelta <= INNER_TOL * (bmax + 1e-300):
                    break

        # lasso coordinate descent on b at fixed gamma, warm started at the
        # current column (penalised diagonal, or near-singular sample matrix)
        g = np.dot(A, beta)
        for _ in range(0 if profile else INNER_MAX):
            maxdelta = 0.0
            for h in range(m):
                ahh = A[h, h]
                r = u[h] - (g[h] - ahh * beta[h])
                thr = gamma * w[h]
                if r > thr:
                    new = (r - thr) / ahh
                elif r < -thr:
                    new = (r + thr) / ahh
                else:
                    new = 0.0
                delta = new - beta[h]
                if delta != 0.0:
                    beta[h] = new
                    for a in range(m):
                        g[a] += A[a, h] * delta
                    if abs(delta) > maxdelta:
                        maxdelta = abs(delta)
                    if abs(new) > bmax:
                        bmax = abs(new)
            if maxdelta <= INNER_TOL * (bmax + 1e-300):
                break

        vb = np.dot(V, beta)
        c = np.dot(beta, vb) - 2.0 * np.dot(u, beta) + s22
        if d > 0.0:
            gamma = (-1.0 + np.sqrt(1.0 + 4.0 * d * c)) / (2.0 * d)
        else:
            gamma = c
        if gamma < gamma_floor:
            gamma = gamma_floor

        t = np.dot(inv11, beta)
        btb = np.dot(beta, t)
        for a in range(m):
            ia = idx[a]
            sigma[ia, j] = beta[a]
            sigma[j, ia] = beta[a]
            omega[ia, j] = -t[a] / gamma
            omega[j, ia] = -t[a] / gamma
            for cc in range(m):
                omega[ia, idx[cc]] = inv11[a, cc] + t[a] * t[cc] / gamma
        sigma[j, j] = gamma + btb
        omega[j, j] = 1.0 / gamma


def _profile_coord_py(a, b, c0, w):
    best_x, best_v = 0.0, np.log(c0)
    if w == 0.0:
        x = -b / a
        q = a * x * x + 2.0 * b * x + c0
        return x if q > 0.0 and np.log(q) < best_v else best_x
    for sgn in (1.0, -1.0):
        coeffs = (sgn * w * a, a + 2.0 * sgn * w * b, b + sgn * w * c0)
        disc = coeffs[1] ** 2 - 4.0 * coeffs[0] * coeffs[2]
        if disc < 0.0:
            continue
        root = np.sqrt(disc)
        t = -0.5 * (coeffs[1] + root) if coeffs[1] >= 0.0 else -0.5 * (coeffs[1] - root)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            xs = ([coeffs[2] / t] if t != 0.0 else []) + [t / coeffs[0]]
        for x in xs:
            if not np.isfinite(x) or x * sgn <= 0.0:
                continue
            q = a * x * x + 2.0 * b * x + c0
            if not q > 0.0:
                continue
            v = np.log(q) + 2.0 * w * abs(x)
            if v < best_v:
                best_v, best_x = v, x
    return best_x


def _sweep_np(sigma, omega, s, weights, gamma_floor):
    p = sigma.shape[0]
    everything = np.arange(p)
    for j in range(p):
        idx = everything[everything != j]
        o12 = omega[idx, j]
        o22 = omega[j, j]
        inv11 = omega[np.ix_(idx, idx)] - np.outer(o12, o12) / o22
        beta = sigma[idx, j].copy()
        w = weights[idx, j]
        d = weights[j, j]
        gamma = 1.0 / o22
        V = inv11 @ s[np.ix_(idx, idx)] @ inv11
        u = inv11 @ s[idx, j]
        A = V + (d * gamma) * inv11
        diagA = np.diag(A).copy()
        thr = gamma * w

        bmax = np.max(np.abs(beta)) if beta.size else 0.0
        profile = d == 0.0
        if profile:
            vb = V @ beta
            c = beta @ vb - 2.0 * (u @ beta) + s[j, j]
            diagV = np.diag(V).copy()
            for _ in range(INNER_MAX):
                maxdelta = 0.0
                for h in range(p - 1):
                    bh = vb[h] - diagV[h] * beta[h] - u[h]
                    c0 = c - diagV[h] * beta[h] ** 2 - 2.0 * bh * beta[h]
                    if not c0 > gamma_floor:
                        profile = False
                        break
                    new = _profile_coord_py(diagV[h], bh, c0, w[h])
                    delta = new - beta[h]
                    if delta != 0.0:
                        beta[h] = new
                        vb += V[:, h] * delta
                        c = c0 + diagV[h] * new * new + 2.0 * bh * new
                        maxdelta = max(maxdelta, abs(delta))
                        bmax = max(bmax, abs(new))
                if not profile or maxdelta <= INNER_TOL * (bmax + 1e-300):
                    break

        g = A @ beta
        for _ in range(0 if profile else INNER_MAX):
            maxdelta = 0.0
            for h in range(p - 1):
                r = u[h] - (g[h] - diagA[h] * beta[h])
                new = np.sign(r) * max(abs(r) - thr[h], 0.0) / diagA[h]
                delta = new - beta[h]
                if delta != 0.0:
                    beta[h] = new
                    g += A[:, h] * delta
                    maxdelta = max(maxdelta, abs(delta))
                    bmax = max(bmax, abs(new))
            if maxdelta <= INNER_TOL * (bmax + 1e-300):
                break

        c = beta @ V @ beta - 2.0 * (u @ beta) + s[j, j]
        if d > 0.0:
            gamma = (-1.0 + np.sqrt(1.0 + 4.0 * d * c)) / (2.0 * d)
        else:
            gamma = c
        gamma = max(gamma, gamma_floor)

        t = inv11 @ beta
        sigma[idx, j] = beta
        sigma[j, idx] = beta
        sigma[j, j] = gamma + beta @ t
        omega[np.ix_(idx, idx)] = inv11 + np.outer(t, t) / gamma
        omega[idx, j] = -t / gamma
        omega[j, idx] = -t / gamma
        omega[j, j] = 1.0 / gamma


covglasso_sweep = dispatch(_sweep_nb, _sweep_np)
covglasso_sweep.__doc__ = """One in-place coordinate-descent pass over every column.

Parameters
----------
sigma, omega : (p, p) float arrays
    Current iterate and its inverse; both updated in place.
s : (p, p) float array
    Sample matrix of the subproblem.
weights : (p, p) float array
    Entrywise penalty ``rho * P``.
gamma_floor : float
    Lower bound on Schur complements (only active for singular ``s``).
"""


# ---------------------------------------------------------------------------
# Ward agglomeration (Lance-Williams on squared dissimilarities)
# ---------------------------------------------------------------------------


@njit
def _ward_nb(dist):
    n = dist.shape[0]
    d2 = dist * dist
    size = np.ones(n)
    ident = np.arange(n)
    active = np.ones(n, dtype=np.bool_)
    merges = np.empty((max(n - 1, 0), 4))
    for step in range(n - 1):
        best = np.inf
        bi = -1
        bj = -1
        for i in range(n):
            if not active[i]:
                continue
            for j in range(i + 1, n):
                if active[j] and d2[i, j] < best:
                    best = d2[i, j]
                    bi = i
                    bj = j
        ni = size[bi]
        nj = size[bj]
        for k in range(n):
            if active[k] and k != bi and k != bj:
                nk = size[k]
                val = ((ni + nk) * d2[bi, k] + (nj + nk) * d2[bj, k] - nk * best) / (ni + nj + nk)
                if val < 0.0:
                    val = 0.0
                d2[bi, k] = val
                d2[k, bi] = val
        a = ident[bi]
        b = ident[bj]
        merges[step, 0] = min(a, b)
        merges[step, 1] = max(a, b)
        merges[step, 2] = np.sqrt(best)
        merges[step, 3] = ni + nj
        size[bi] = ni + nj
        active[bj] = False
        ident[bi] = n + step
    return merges


def _ward_np(dist):
    n = dist.shape[0]
    d2 = np.array(dist, dtype=float) ** 2
    # only the strict upper triangle takes part in the search
    search = np.where(np.triu(np.ones((n, n), dtype=bool), 1), d2, np.inf)
    size = np.ones(n)
    ident = np.arange(n)
    active = np.ones(n, dtype=bool)
    merges = np.empty((max(n - 1, 0), 4))
    for step in range(n - 1):
        flat = int(np.argmin(search))
        bi, bj = divmod(flat, n)
        best = search[bi, bj]
        ni, nj = size[bi], size[bj]
        others = active.copy()
        others[[bi, bj]] = False
        nk = size[others]
        val = ((ni + nk) * d2[bi, others] + (nj + nk) * d2[bj, others] - nk * best) / (ni + nj + nk)
        val = np.maximum(val, 0.0)
        d2[bi, others] = val
        d2[others, bi] = val
        ks = np.flatnonzero(others)
        lower = ks < bi
        search[ks[lower], bi] = val[lower]
        search[bi, ks[~lower]] = val[~lower]
        search[bj, :] = np.inf
        search[:, bj] = np.inf
        a, b = ident[bi], ident[bj]
        merges[step] = (min(a, b), max(a, b), np.sqrt(best), ni + nj)
        size[bi] = ni + nj
        active[bj] = False
        ident[bi] = n + step
    return merges


ward_merges = dispatch(_ward_nb, _ward_np)
ward_merges.__doc__ = """Ward linkage of a dissimilarity matrix.

Returns an ``(n - 1, 4)`` merge table laid out like scipy's linkage
matrix: the two merged cluster ids, the merge height and the new cluster
size.  Ties go to the lowest ``(i, j)`` pair in row-major order.
"""
