"""Independent reference computations used by the tests.

``lab_frame_transport`` evaluates the hard-sphere brackets by brute force in
the laboratory frame: a Gauss-Hermite product rule in v and in v* separately,
the omega-representation of the collision (v' = v - (g.omega) omega) and, for
each pair, a scattering frame aligned with g so that the |g.omega| kink sits
on a quadrature boundary.  Trial functions are monomials |V|^{2k} times the
relevant tensor component.  Nothing is shared with the package code.
"""

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss


def _frames(g):
    """Orthonormal (e1, e2, e3) per row with e3 parallel to g."""
    n = np.linalg.norm(g, axis=1)
    e3 = g / np.where(n > 0, n, 1.0)[:, None]
    e3[n == 0] = (0.0, 0.0, 1.0)
    trial = np.where(np.abs(e3[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    e1 = np.cross(e3, trial)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    e2 = np.cross(e3, e1)
    return e1, e2, e3, n


def _visc(v, theta, order):
    V = v / np.sqrt(theta)
    s = np.sum(V * V, axis=-1)
    return np.stack([V[..., 0] * V[..., 1] * s**k for k in range(order)], axis=-1)


def _cond(v, theta, order):
    V = v / np.sqrt(theta)
    s = np.sum(V * V, axis=-1)
    return np.stack([V[..., 0] * s**k for k in range(1, order + 1)], axis=-1)


def _bracket(basis, theta, order, n_h, n_pol, n_az):
    x, w = hermgauss(n_h)
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3) * np.sqrt(2.0 * theta)
    W = np.einsum("i,j,k->ijk", w, w, w).reshape(-1) / np.pi**1.5  # int M f dv for M = M[1,0,theta]
    v = np.repeat(X, len(X), axis=0)
    vs = np.tile(X, (len(X), 1))
    wp = np.repeat(W, len(W)) * np.tile(W, len(W))
    e1, e2, e3, gn = _frames(v - vs)
    c, wc = leggauss(n_pol)
    c, wc = 0.5 * (c + 1.0), 0.5 * wc  # cos(alpha) on [0, 1]; the other hemisphere is a mirror copy
    beta = 2.0 * np.pi * np.arange(n_az) / n_az
    pre = basis(v, theta, order) + basis(vs, theta, order)
    B = np.zeros((order, order))
    for ci, wci in zip(c, wc):
        s = np.sqrt(1.0 - ci * ci)
        for b in beta:
            om = ci * e3 + s * (np.cos(b) * e1 + np.sin(b) * e2)
            gw = gn * ci  # g . omega >= 0 in this hemisphere
            dv = gw[:, None] * om
            D = basis(v - dv, theta, order) + basis(vs + dv, theta, order) - pre
            kern = wp * gw * (2.0 * wci * 2.0 * np.pi / n_az)
            B += np.einsum("p,pk,pl->kl", kern, D, D)
    return 0.25 * B


def _rhs(basis, target, theta, order, n=10):
    x, w = hermgauss(n)
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3) * np.sqrt(2.0 * theta)
    W = np.einsum("i,j,k->ijk", w, w, w).reshape(-1) / np.pi**1.5
    return np.einsum("g,gk,g->k", W, basis(X, theta, order), target(X / np.sqrt(theta)))


def lab_frame_transport(theta=1.0, order=3, n_h=8, n_pol=12, n_az=24):
    """Hard-sphere (mu, kappa) at rho = 1, u = 0 from the single-component variational problems.

    mu = theta <A_12, L^{-1}(A_12 M)> and kappa = theta <B_1, L^{-1}(B_1 M)>.
    """
    Bv = _bracket(_visc, theta, order, n_h, n_pol, n_az)
    rv = _rhs(_visc, lambda V: V[:, 0] * V[:, 1], theta, order)
    mu = theta * rv @ np.linalg.solve(Bv, rv)
    Bc = _bracket(_cond, theta, order, n_h, n_pol, n_az)
    rc = _rhs(_cond, lambda V: 0.5 * (np.sum(V * V, axis=1) - 5.0) * V[:, 0], theta, order)
    kappa = theta * rc @ np.linalg.solve(Bc, rc)
    return float(mu), float(kappa)


def radial_loss_frequency(speed, rho=1.0, theta=1.0):
    """nu(v) = 2 pi rho int |v - w| M(w) dw in closed form (hard spheres, |g.omega| kernel)."""
    a = np.asarray(speed, float) / np.sqrt(2.0 * theta)
    from scipy.special import erf

    a = np.where(a == 0, 1e-300, a)
    mean_rel = np.sqrt(2.0 * theta) * ((a + 1.0 / (2.0 * a)) * erf(a) + np.exp(-a * a) / np.sqrt(np.pi))
    return 2.0 * np.pi * rho * mean_rel
