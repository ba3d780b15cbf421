"""Compiled inner loops for the discrete collision operator."""

import math

import numba as nb
import numpy as np

_SHIFTS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.int64
)


@nb.njit(cache=True)
def _flat(a, n):
    return (a[0] * n + a[1]) * n + a[2]


@nb.njit(cache=True)
def count_pairs(n, axis, r2):
    size = n**3
    s2 = np.empty(size)
    for i in range(size):
        s2[i] = axis[i // (n * n)] ** 2 + axis[(i // n) % n] ** 2 + axis[i % n] ** 2
    cnt = 0
    for i in range(size):
        for j in range(i + 1, size):
            if min(s2[i], s2[j]) <= r2:
                cnt += 1
    return cnt


@nb.njit(cache=True)
def build_table(n, axis, dv, r2, sigma, sweight, rots, seed_a, seed_b):
    """Enumerate projected collisions.

    For every unordered node pair with at least one member inside the ball of
    radius sqrt(r2), and every post-collision direction in the (rotated)
    angular design, the post-collision pair is replaced by the nearest grid
    pair ``(lam, mu)`` and a neighbouring pair ``(lam + s, mu - s)`` whose
    energies bracket the exact one; ``r`` is the energy-conserving weight of
    the second pair.  Rates are renormalised per pre-collision pair so the
    accepted directions carry the full loss rate ``2 pi |g| dv^3``.
    """
    size = n**3
    nd = sigma.shape[0]
    nrot = rots.shape[0]
    cap = count_pairs(n, axis, r2) * nd
    I = np.empty(cap, np.int16)
    J = np.empty(cap, np.int16)
    LA = np.empty(cap, np.int16)
    LB = np.empty(cap, np.int16)
    R = np.empty(cap, np.float64)
    K = np.empty(cap, np.float32)
    lo = axis[0]
    m = 0
    rejected = 0
    acc = np.zeros(nd, np.int64)
    lam = np.zeros((nd, 3), np.int64)
    lbm = np.zeros((nd, 3), np.int64)
    rr = np.zeros(nd)
    ia = np.empty(3, np.int64)
    ja = np.empty(3, np.int64)
    vi = np.empty(3)
    vj = np.empty(3)
    la = np.empty(3, np.int64)
    mu = np.empty(3, np.int64)
    lb = np.empty(3, np.int64)
    mb = np.empty(3, np.int64)
    vp = np.empty(3)
    for i in range(size):
        ia[0] = i // (n * n)
        ia[1] = (i // n) % n
        ia[2] = i % n
        for d in range(3):
            vi[d] = axis[ia[d]]
        ei = vi[0] ** 2 + vi[1] ** 2 + vi[2] ** 2
        for j in range(i + 1, size):
            ja[0] = j // (n * n)
            ja[1] = (j // n) % n
            ja[2] = j % n
            for d in range(3):
                vj[d] = axis[ja[d]]
            ej = vj[0] ** 2 + vj[1] ** 2 + vj[2] ** 2
            if min(ei, ej) > r2:
                continue
            E = ei + ej
            gn = math.sqrt((vj[0] - vi[0]) ** 2 + (vj[1] - vi[1]) ** 2 + (vj[2] - vi[2]) ** 2)
            rot = rots[(i * seed_a + j * seed_b) % nrot]
            total = 0.0
            for o in range(nd):
                acc[o] = 0
                for d in range(3):
                    s = rot[d, 0] * sigma[o, 0] + rot[d, 1] * sigma[o, 1] + rot[d, 2] * sigma[o, 2]
                    vp[d] = 0.5 * (vi[d] + vj[d]) + 0.5 * gn * s
                ok = True
                for d in range(3):
                    la[d] = int(round((vp[d] - lo) / dv))
                    mu[d] = ia[d] + ja[d] - la[d]
                    if la[d] < 0 or la[d] >= n or mu[d] < 0 or mu[d] >= n:
                        ok = False
                if not ok:
                    rejected += 1
                    continue
                E0 = 0.0
                for d in range(3):
                    E0 += axis[la[d]] ** 2 + axis[mu[d]] ** 2
                if abs(E0 - E) <= 1e-12 * max(E, 1.0):
                    for d in range(3):
                        lam[o, d] = la[d]
                        lbm[o, d] = la[d]
                    rr[o] = 0.0
                    acc[o] = 1
                    total += sweight[o]
                    continue
                best = -1
                gap = 1e300
                Ebest = 0.0
                for q in range(6):
                    ok2 = True
                    for d in range(3):
                        lb[d] = la[d] + _SHIFTS[q, d]
                        mb[d] = mu[d] - _SHIFTS[q, d]
                        if lb[d] < 0 or lb[d] >= n or mb[d] < 0 or mb[d] >= n:
                            ok2 = False
                    if not ok2:
                        continue
                    E1 = 0.0
                    for d in range(3):
                        E1 += axis[lb[d]] ** 2 + axis[mb[d]] ** 2
                    if (E1 - E) * (E0 - E) < 0.0 and abs(E1 - E0) < gap:
                        gap = abs(E1 - E0)
                        best = q
                        Ebest = E1
                if best < 0:
                    rejected += 1
                    continue
                for d in range(3):
                    lam[o, d] = la[d]
                    lbm[o, d] = la[d] + _SHIFTS[best, d]
                rr[o] = (E - E0) / (Ebest - E0)
                acc[o] = 1
                total += sweight[o]
            if total == 0.0:
                continue
            scale = 2.0 * math.pi * gn * dv**3 / total
            for o in range(nd):
                if acc[o] == 0:
                    continue
                I[m] = i
                J[m] = j
                for d in range(3):
                    la[d] = lam[o, d]
                    lb[d] = lbm[o, d]
                LA[m] = _flat(la, n)
                LB[m] = _flat(lb, n)
                R[m] = rr[o]
                K[m] = scale * sweight[o]
                m += 1
    return I[:m].copy(), J[:m].copy(), LA[:m].copy(), LB[:m].copy(), R[:m].copy(), K[:m].copy(), rejected


@nb.njit(cache=True, nogil=True)
def collide(I, J, LA, LB, R, KM, h1, h2, out):
    """Accumulate the bilinear operator into ``out`` (one profile).

    ``h1``, ``h2`` are the arguments divided by the reference Maxwellian and
    ``KM`` the collision rates multiplied by the reference Maxwellian of the
    pre-collision pair; the reference state is then an exact equilibrium.
    """
    for m in range(I.shape[0]):
        i = np.int64(I[m])
        j = np.int64(J[m])
        a = np.int64(LA[m])
        b = np.int64(LB[m])
        ma = i + j - a
        mb = i + j - b
        r = R[m]
        s = 1.0 - r
        d = 0.5 * KM[m] * (s * h1[ma] * h2[a] + r * h1[mb] * h2[b] - h1[j] * h2[i])
        out[i] += d
        out[j] += d
        out[a] -= s * d
        out[ma] -= s * d
        out[b] -= r * d
        out[mb] -= r * d


@nb.njit(cache=True, nogil=True)
def collide_field(I, J, LA, LB, R, KM, h1, h2, out):
    """Field version of :func:`collide` on velocity-major arrays of shape ``(Nv, Nx)``.

    The table is streamed once for all cells; per cell the accumulation order
    is that of :func:`collide`, so results agree bit for bit.
    """
    nc = h1.shape[1]
    d = np.empty(nc)
    for m in range(I.shape[0]):
        i = np.int64(I[m])
        j = np.int64(J[m])
        a = np.int64(LA[m])
        b = np.int64(LB[m])
        ma = i + j - a
        mb = i + j - b
        r = R[m]
        s = 1.0 - r
        k = 0.5 * KM[m]
        # separate sweeps keep each loop free of aliasing so it vectorises
        for c in range(nc):
            d[c] = k * (s * h1[ma, c] * h2[a, c] + r * h1[mb, c] * h2[b, c] - h1[j, c] * h2[i, c])
        for c in range(nc):
            out[i, c] += d[c]
        for c in range(nc):
            out[j, c] += d[c]
        for c in range(nc):
            out[a, c] -= s * d[c]
        for c in range(nc):
            out[ma, c] -= s * d[c]
        for c in range(nc):
            out[b, c] -= r * d[c]
        for c in range(nc):
            out[mb, c] -= r * d[c]


@nb.njit(cache=True, nogil=True)
def linearized_apply(I, J, LA, LB, R, KM, h, out):
    """out += -L g for g = Mr h, in one pass over the table."""
    for m in range(I.shape[0]):
        i = np.int64(I[m])
        j = np.int64(J[m])
        a = np.int64(LA[m])
        b = np.int64(LB[m])
        ma = i + j - a
        mb = i + j - b
        r = R[m]
        s = 1.0 - r
        d = 0.5 * KM[m] * (s * (h[ma] + h[a]) + r * (h[mb] + h[b]) - h[j] - h[i])
        out[i] += d
        out[j] += d
        out[a] -= s * d
        out[ma] -= s * d
        out[b] -= r * d
        out[mb] -= r * d


@nb.njit(cache=True)
def weighted_rates(I, J, K, Mr):
    out = np.empty(I.shape[0])
    for m in range(I.shape[0]):
        out[m] = np.float64(K[m]) * Mr[np.int64(I[m])] * Mr[np.int64(J[m])]
    return out


@nb.njit(cache=True)
def linearization(I, J, LA, LB, R, K, Mr, size):
    """Dense symmetric matrix A with L g = A (g / Mr)."""
    A = np.zeros((size, size))
    idx = np.empty(6, np.int64)
    w = np.empty(6)
    for m in range(I.shape[0]):
        i = np.int64(I[m])
        j = np.int64(J[m])
        a = np.int64(LA[m])
        b = np.int64(LB[m])
        r = R[m]
        idx[0] = a
        idx[1] = i + j - a
        idx[2] = b
        idx[3] = i + j - b
        idx[4] = i
        idx[5] = j
        w[0] = 1.0 - r
        w[1] = 1.0 - r
        w[2] = r
        w[3] = r
        w[4] = -1.0
        w[5] = -1.0
        c = 0.5 * np.float64(K[m]) * Mr[i] * Mr[j]
        for p in range(6):
            cp = c * w[p]
            for q in range(6):
                A[idx[p], idx[q]] += cp * w[q]
    # exact symmetry regardless of accumulation order
    for p in range(size):
        for q in range(p + 1, size):
            s = 0.5 * (A[p, q] + A[q, p])
            A[p, q] = s
            A[q, p] = s
    return A


@nb.njit(cache=True, nogil=True)
def loss_frequency(nodes, weight, F):
    """nu_F(v_i) = 2 pi sum_j |v_i - v_j| F_j dv^3 (exact sphere integral of |g.omega|)."""
    size = nodes.shape[0]
    out = np.zeros(size)
    for i in range(size):
        acc = 0.0
        for j in range(size):
            g = math.sqrt(
                (nodes[i, 0] - nodes[j, 0]) ** 2
                + (nodes[i, 1] - nodes[j, 1]) ** 2
                + (nodes[i, 2] - nodes[j, 2]) ** 2
            )
            acc += g * F[j]
        out[i] = 2.0 * math.pi * weight * acc
    return out
