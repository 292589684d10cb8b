"""Compiled inner loops.

Every function here is written in the numba-compatible subset of Python so it
runs unchanged (just slowly) when compilation is disabled.  Failure is
signalled through integer status codes rather than exceptions; the public
wrappers translate them.

Status codes: 0 ok, 1 singular within-class covariance, 2 no labeled data.
"""
import numpy as np

from ._accel import jit, prange

OK = 0
SINGULAR = 1
NO_LABELS = 2

PIVOT_REL_TOL = 1e-12
FLOOR_REL = 1e-8


# ---------------------------------------------------------------------------
# dense linear algebra
# ---------------------------------------------------------------------------

@jit
def cholesky(a, rel_tol):
    n = a.shape[0]
    L = np.zeros((n, n))
    tr = 0.0
    for i in range(n):
        tr += a[i, i]
    thresh = rel_tol * tr / n
    for j in range(n):
        s = a[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not (s > thresh and s > 0.0):
            return L, False
        ljj = np.sqrt(s)
        L[j, j] = ljj
        for i in range(j + 1, n):
            s = a[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / ljj
    return L, True


@jit
def chol_solve(L, b):
    """Solve (L L^T) x = b for a 2-d right-hand side."""
    n, m = b.shape
    x = b.copy()
    for c in range(m):
        for i in range(n):
            s = x[i, c]
            for k in range(i):
                s -= L[i, k] * x[k, c]
            x[i, c] = s / L[i, i]
        for i in range(n - 1, -1, -1):
            s = x[i, c]
            for k in range(i + 1, n):
                s -= L[k, i] * x[k, c]
            x[i, c] = s / L[i, i]
    return x


@jit
def jacobi_eigh(a):
    """Cyclic Jacobi; eigenvalues descending, columns sign-normalised."""
    n = a.shape[0]
    A = a.copy()
    V = np.eye(n)
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += A[i, j] * A[i, j]
    scale = np.sqrt(scale)
    for sweep in range(100):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += A[i, j] * A[i, j]
        if np.sqrt(off) <= 1e-15 * scale or off == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + np.sqrt(1.0 + theta * theta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = A[k, p]
                    akq = A[k, q]
                    A[k, p] = c * akp - s * akq
                    A[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = A[p, k]
                    aqk = A[q, k]
                    A[p, k] = c * apk - s * aqk
                    A[q, k] = s * apk + c * aqk
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
    w = np.empty(n)
    for i in range(n):
        w[i] = A[i, i]
    order = np.argsort(-w, kind="mergesort")
    w_out = np.empty(n)
    V_out = np.empty((n, n))
    for j in range(n):
        w_out[j] = w[order[j]]
        col = order[j]
        best = 0
        for k in range(n):
            if abs(V[k, col]) > abs(V[best, col]):
                best = k
        sgn = 1.0 if V[best, col] >= 0.0 else -1.0
        for k in range(n):
            V_out[k, j] = sgn * V[k, col]
    return w_out, V_out


@jit
def gram(a):
    m, n = a.shape
    g = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            s = 0.0
            for k in range(m):
                s += a[k, i] * a[k, j]
            g[i, j] = s
            g[j, i] = s
    return g


@jit
def op_norm(a):
    w, _ = jacobi_eigh(gram(a))
    top = w[0] if w.shape[0] > 0 else 0.0
    return np.sqrt(top) if top > 0.0 else 0.0


@jit
def floor_covariance(s, ref_trace):
    """Clip eigenvalues of ``s`` below 1e-8 * (trace/d).  Returns (s', clipped)."""
    d = s.shape[0]
    tr = 0.0
    for i in range(d):
        tr += s[i, i]
    scale = tr / d
    if not scale > 0.0:
        scale = ref_trace / d
    if not scale > 0.0:
        scale = 1.0
    floor = FLOOR_REL * scale
    w, V = jacobi_eigh(s)
    if w[d - 1] >= floor:
        return s.copy(), False
    for i in range(d):
        if w[i] < floor:
            w[i] = floor
    out = np.zeros((d, d))
    for i in range(d):
        for j in range(i, d):
            v = 0.0
            for k in range(d):
                v += V[i, k] * w[k] * V[j, k]
            out[i, j] = v
            out[j, i] = v
    return out, True


# ---------------------------------------------------------------------------
# Ward linkage (nearest-neighbour chain) and cluster/label alignment
# ---------------------------------------------------------------------------

@jit
def ward_cut(z, K):
    """Ward agglomeration of the rows of ``z`` cut at ``K`` clusters.

    Labels are 0..K-1 numbered by first appearance.
    """
    n, d = z.shape
    labels = np.zeros(n, dtype=np.int64)
    if K >= n:
        for i in range(n):
            labels[i] = i
        return labels
    zt = z.T.copy()
    D = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            D[i, j] = 0.0
        for c in range(d):
            zic = zt[c, i]
            for j in range(n):
                t = zic - zt[c, j]
                D[i, j] += t * t
        D[i, i] = np.inf
    size = np.ones(n)
    # compact list of live slots; pos[i] is i's position in it
    live = np.arange(n)
    pos = np.arange(n)
    nlive = n
    chain = np.empty(n, dtype=np.int64)
    m_a = np.empty(n - 1, dtype=np.int64)
    m_b = np.empty(n - 1, dtype=np.int64)
    m_h = np.empty(n - 1)
    clen = 0
    for step in range(n - 1):
        if clen == 0:
            chain[0] = live[0]
            clen = 1
        while True:
            x = chain[clen - 1]
            if clen > 1:
                y = chain[clen - 2]
                best = D[x, y]
            else:
                y = -1
                best = np.inf
            for r in range(nlive):
                k = live[r]
                v = D[x, k]
                if v < best:
                    best = v
                    y = k
            if clen > 1 and y == chain[clen - 2]:
                break
            chain[clen] = y
            clen += 1
        clen -= 2
        if x > y:
            x, y = y, x
        m_a[step] = x
        m_b[step] = y
        m_h[step] = best
        nx = size[x]
        ny = size[y]
        py = pos[y]
        last = live[nlive - 1]
        live[py] = last
        pos[last] = py
        nlive -= 1
        for r in range(nlive):
            k = live[r]
            if k != x:
                nk = size[k]
                val = ((nx + nk) * D[x, k] + (ny + nk) * D[y, k] - nk * best) / (nx + ny + nk)
                D[x, k] = val
                D[k, x] = val
        size[x] = nx + ny
    order = np.argsort(m_h, kind="mergesort")
    parent = np.arange(n)
    for r in range(n - K):
        s = order[r]
        a = m_a[s]
        while parent[a] != a:
            a = parent[a]
        b = m_b[s]
        while parent[b] != b:
            b = parent[b]
        if a < b:
            parent[b] = a
        elif b < a:
            parent[a] = b
    root_label = -np.ones(n, dtype=np.int64)
    nxt = 0
    for i in range(n):
        r = i
        while parent[r] != r:
            r = parent[r]
        if root_label[r] < 0:
            root_label[r] = nxt
            nxt += 1
        labels[i] = root_label[r]
    return labels


@jit
def align_to_labels(clusters, y, K):
    """Map cluster ids to classes so observed labels agree as much as possible.

    Returns ``perm`` with ``perm[c]`` = class index (0-based) for cluster c.
    Ties go to the lexicographically first permutation; K > 8 is left as is.
    """
    perm = np.arange(K)
    counts = np.zeros((K, K))
    nlab = 0
    for i in range(clusters.shape[0]):
        if y[i] > 0:
            counts[clusters[i], y[i] - 1] += 1.0
            nlab += 1
    if nlab == 0 or K > 8:
        return perm
    cur = np.arange(K)
    best = perm.copy()
    best_score = -1.0
    while True:
        s = 0.0
        for c in range(K):
            s += counts[c, cur[c]]
        if s > best_score:
            best_score = s
            best[:] = cur
        # next lexicographic permutation
        i = K - 2
        while i >= 0 and cur[i] >= cur[i + 1]:
            i -= 1
        if i < 0:
            break
        j = K - 1
        while cur[j] <= cur[i]:
            j -= 1
        t = cur[i]
        cur[i] = cur[j]
        cur[j] = t
        lo = i + 1
        hi = K - 1
        while lo < hi:
            t = cur[lo]
            cur[lo] = cur[hi]
            cur[hi] = t
            lo += 1
            hi -= 1
    return best


@jit
def hierarchical_init(z, y, K):
    """Means and floored pooled covariance from a Ward cut aligned to ``y``."""
    n, d = z.shape
    clusters = ward_cut(z, K)
    perm = align_to_labels(clusters, y, K)
    means = np.zeros((K, d))
    counts = np.zeros(K)
    for i in range(n):
        k = perm[clusters[i]]
        counts[k] += 1.0
        for j in range(d):
            means[k, j] += z[i, j]
    for k in range(K):
        if counts[k] > 0:
            for j in range(d):
                means[k, j] /= counts[k]
    grand = np.zeros(d)
    for i in range(n):
        for j in range(d):
            grand[j] += z[i, j]
    grand /= n
    S = np.zeros((d, d))
    total_tr = 0.0
    for i in range(n):
        k = perm[clusters[i]]
        for a in range(d):
            ra = z[i, a] - means[k, a]
            total_tr += (z[i, a] - grand[a]) ** 2
            for b in range(a, d):
                S[a, b] += ra * (z[i, b] - means[k, b])
    for a in range(d):
        for b in range(a, d):
            S[a, b] /= n
            S[b, a] = S[a, b]
    S, clipped = floor_covariance(S, total_tr / n)
    return means, S, clipped


# ---------------------------------------------------------------------------
# base learners on one projected dataset
# ---------------------------------------------------------------------------

@jit
def lda_cell(z, y, K):
    n, d = z.shape
    mu = np.zeros(d)
    for i in range(n):
        for j in range(d):
            mu[j] += z[i, j]
    mu /= n
    nk = np.zeros(K)
    mk = np.zeros((K, d))
    for i in range(n):
        k = y[i]
        if k > 0:
            nk[k - 1] += 1.0
            for j in range(d):
                mk[k - 1, j] += z[i, j]
    nl = 0.0
    for k in range(K):
        nl += nk[k]
        if nk[k] > 0:
            for j in range(d):
                mk[k, j] /= nk[k]
    q = np.zeros((d, d))
    if nl == 0:
        return q, NO_LABELS
    sw = np.zeros((d, d))
    for i in range(n):
        k = y[i]
        if k > 0:
            for a in range(d):
                ra = z[i, a] - mk[k - 1, a]
                for b in range(a, d):
                    sw[a, b] += ra * (z[i, b] - mk[k - 1, b])
    sb = np.zeros((d, d))
    for k in range(K):
        if nk[k] > 0:
            w = nk[k] / nl
            for a in range(d):
                da = mk[k, a] - mu[a]
                for b in range(a, d):
                    sb[a, b] += w * da * (mk[k, b] - mu[b])
    for a in range(d):
        for b in range(a, d):
            sw[a, b] /= nl
            sw[b, a] = sw[a, b]
            sb[b, a] = sb[a, b]
    L, ok = cholesky(sw, PIVOT_REL_TOL)
    if not ok:
        return q, SINGULAR
    return chol_solve(L, sb), OK


@jit
def _responsibilities(z, y, K, W, c, resp):
    n, d = z.shape
    logit = np.empty(K)
    for i in range(n):
        if y[i] > 0:
            for k in range(K):
                resp[i, k] = 0.0
            resp[i, y[i] - 1] = 1.0
            continue
        mx = -np.inf
        for k in range(K):
            s = c[k]
            for j in range(d):
                s += z[i, j] * W[j, k]
            logit[k] = s
            if s > mx:
                mx = s
        tot = 0.0
        for k in range(K):
            e = np.exp(logit[k] - mx)
            resp[i, k] = e
            tot += e
        for k in range(K):
            resp[i, k] /= tot


@jit
def _linear_scores(means, sigma, K, d):
    """W = sigma^-1 means^T and offsets c_k = -mu_k^T W_k / 2, or ok=False."""
    L, ok = cholesky(sigma, PIVOT_REL_TOL)
    W = np.empty((d, K))
    c = np.empty(K)
    if not ok:
        return W, c, False
    W = chol_solve(L, means.T.copy())
    for k in range(K):
        s = 0.0
        for j in range(d):
            s += means[k, j] * W[j, k]
        c[k] = -0.5 * s
    return W, c, True


@jit
def _em_general_core(z, y, K, means0, sigma0, T, tol):
    """General-variant EM on centred data; returns (q, means, sigma, resp, status).

    E and M steps are fused: labeled rows contribute constant sufficient
    statistics, and the quadratic term in z cancels inside the softmax, so an
    iteration costs one pass over the unlabeled rows.
    """
    n, d = z.shape
    means = means0.copy()
    sigma = sigma0.copy()
    S2 = np.zeros((d, d))
    for i in range(n):
        for a in range(d):
            for b in range(a, d):
                S2[a, b] += z[i, a] * z[i, b]
    for a in range(d):
        for b in range(a, d):
            S2[b, a] = S2[a, b]
    n_unl = 0
    for i in range(n):
        if y[i] == 0:
            n_unl += 1
    zu = np.empty((n_unl, d))
    Nk_lab = np.zeros(K)
    sums_lab = np.zeros((K, d))
    r = 0
    for i in range(n):
        if y[i] == 0:
            for j in range(d):
                zu[r, j] = z[i, j]
            r += 1
        else:
            k = y[i] - 1
            Nk_lab[k] += 1.0
            for j in range(d):
                sums_lab[k, j] += z[i, j]
    q = np.zeros((d, d))
    resp = np.zeros((n, K))
    logit = np.empty(K)
    Nk = np.empty(K)
    sums = np.empty((K, d))
    for t in range(T):
        W, c, ok = _linear_scores(means, sigma, K, d)
        if not ok:
            return q, means, sigma, resp, SINGULAR
        Nk[:] = Nk_lab
        sums[:, :] = sums_lab
        for i in range(n_unl):
            mx = -np.inf
            kmax = 0
            for k in range(K):
                s = c[k]
                for j in range(d):
                    s += zu[i, j] * W[j, k]
                logit[k] = s
                if s > mx:
                    mx = s
                    kmax = k
            tot = 0.0
            for k in range(K):
                if k == kmax:
                    e = 1.0
                else:
                    e = np.exp(logit[k] - mx)
                logit[k] = e
                tot += e
            inv = 1.0 / tot
            for k in range(K):
                rk = logit[k] * inv
                Nk[k] += rk
                for j in range(d):
                    sums[k, j] += rk * zu[i, j]
        delta = 0.0
        for k in range(K):
            if Nk[k] > 0.0:
                ch = 0.0
                for j in range(d):
                    v = sums[k, j] / Nk[k]
                    ch += (v - means[k, j]) ** 2
                    means[k, j] = v
                if ch > delta:
                    delta = ch
        for a in range(d):
            for b in range(a, d):
                s = S2[a, b]
                for k in range(K):
                    s -= Nk[k] * means[k, a] * means[k, b]
                sigma[a, b] = s / n
                sigma[b, a] = sigma[a, b]
        if tol > 0.0 and np.sqrt(delta) < tol:
            break
    W, c, ok = _linear_scores(means, sigma, K, d)
    if not ok:
        return q, means, sigma, resp, SINGULAR
    _responsibilities(z, y, K, W, c, resp)
    tot_mean = np.zeros(d)
    Nk = np.zeros(K)
    for i in range(n):
        for k in range(K):
            Nk[k] += resp[i, k]
    for k in range(K):
        for j in range(d):
            tot_mean[j] += Nk[k] * means[k, j]
    tot_mean /= n
    sb = np.zeros((d, d))
    for k in range(K):
        w = Nk[k] / n
        for a in range(d):
            da = means[k, a] - tot_mean[a]
            for b in range(d):
                sb[a, b] += w * da * (means[k, b] - tot_mean[b])
    L, ok = cholesky(sigma, PIVOT_REL_TOL)
    if not ok:
        return q, means, sigma, resp, SINGULAR
    return chol_solve(L, sb), means, sigma, resp, OK


@jit
def em_general(z, y, K, means0, sigma0, T, tol):
    n, d = z.shape
    centre = np.zeros(d)
    for i in range(n):
        for j in range(d):
            centre[j] += z[i, j]
    centre /= n
    zc = z - centre
    m0 = means0 - centre
    q, means, sigma, resp, status = _em_general_core(zc, y, K, m0, sigma0, T, tol)
    return q, means + centre, sigma, resp, status


@jit
def em_symmetric(z, y, mu0, T, tol):
    """Closed-form iteration for the (-mu, mu, I) constraint set."""
    n, d = z.shape
    mu = mu0.copy()
    s = np.empty(n)
    for t in range(T + 1):
        for i in range(n):
            if y[i] > 0:
                s[i] = 1.0 if y[i] == 2 else -1.0
            else:
                v = 0.0
                for j in range(d):
                    v += z[i, j] * mu[j]
                s[i] = np.tanh(v)
        if t == T:
            break
        new = np.zeros(d)
        for i in range(n):
            for j in range(d):
                new[j] += s[i] * z[i, j]
        ch = 0.0
        for j in range(d):
            new[j] /= n
            ch += (new[j] - mu[j]) ** 2
        mu = new
        if tol > 0.0 and np.sqrt(ch) < tol:
            T = t + 1
    sbar = 0.0
    for i in range(n):
        sbar += s[i]
    sbar /= n
    q = np.empty((d, d))
    for a in range(d):
        for b in range(d):
            q[a, b] = mu[a] * mu[b] - sbar * sbar * mu[a] * mu[b]
    return q, mu, s


@jit
def median_select(qs, ok):
    """Index of the chain whose Q has the smallest median op-distance to the rest."""
    M = qs.shape[0]
    best = -1
    best_val = np.inf
    nvalid = 0
    for m in range(M):
        if ok[m]:
            nvalid += 1
    for m in range(M):
        if not ok[m]:
            continue
        dist = np.empty(nvalid - 1)
        c = 0
        for m2 in range(M):
            if m2 != m and ok[m2]:
                dist[c] = op_norm(qs[m] - qs[m2])
                c += 1
        if c == 0:
            med = 0.0
        else:
            dist = np.sort(dist)
            if c % 2 == 1:
                med = dist[c // 2]
            else:
                med = 0.5 * (dist[c // 2 - 1] + dist[c // 2])
        if med < best_val:
            best_val = med
            best = m
    return best


@jit
def em_cell(z, y, K, variant, hier, means0, sigma0, T, tol):
    """All M chains of the EM base learner on one projected dataset."""
    n, d = z.shape
    M = means0.shape[0]
    if hier:
        M = 1
    qs = np.zeros((M, d, d))
    ok = np.zeros(M, dtype=np.bool_)
    for m in range(M):
        if hier:
            mi, si, _ = hierarchical_init(z, y, K)
        else:
            mi = means0[m].copy()
            si = sigma0[m].copy()
        if variant == 1:
            mu = 0.5 * (mi[1] - mi[0])
            q, _, _ = em_symmetric(z, y, mu, T, tol)
            qs[m] = q
            ok[m] = True
        else:
            q, _, _, _, status = em_general(z, y, K, mi, si, T, tol)
            if status == OK:
                qs[m] = q
                ok[m] = True
    m_hat = median_select(qs, ok)
    if m_hat < 0:
        return np.zeros((d, d)), SINGULAR
    return qs[m_hat], OK


# ---------------------------------------------------------------------------
# projection sweeps
# ---------------------------------------------------------------------------

@jit
def _gather(x, cols):
    n = x.shape[0]
    d = cols.shape[0]
    z = np.empty((n, d))
    for i in range(n):
        for j in range(d):
            z[i, j] = x[i, cols[j]]
    return z


@jit(parallel=True)
def sweep_lda(x, y, K, idx):
    C, d = idx.shape
    qs = np.zeros((C, d, d))
    status = np.zeros(C, dtype=np.int64)
    for c in prange(C):
        z = _gather(x, idx[c])
        q, st = lda_cell(z, y, K)
        qs[c] = q
        status[c] = st
    return qs, status


@jit(parallel=True)
def sweep_em(x, y, K, idx, variant, hier, means0, sigma0, T, tol):
    C, d = idx.shape
    qs = np.zeros((C, d, d))
    status = np.zeros(C, dtype=np.int64)
    for c in prange(C):
        z = _gather(x, idx[c])
        q, st = em_cell(z, y, K, variant, hier, means0[c], sigma0[c], T, tol)
        qs[c] = q
        status[c] = st
    return qs, status
