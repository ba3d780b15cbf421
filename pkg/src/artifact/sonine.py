"""Sonine-polynomial Galerkin solution of the hard-sphere bracket problems.

The bracket ``[f, g] = 1/4 int int int |(v*-v).omega| M M* Df Dg`` (``D`` the
collisional change of a test function) is evaluated by a quadrature that is
exact for the polynomial test spaces used here: Gauss-Hermite in the centre
of mass velocity, generalised Gauss-Laguerre in the relative speed, and a
Gauss-Legendre x trapezoid product rule for the scattering direction.  The
relative velocity is aligned with the z-axis, which is legitimate because
the fully contracted brackets are rotation invariant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre, roots_genlaguerre, roots_hermite, roots_legendre

__all__ = ["SonineResult", "sonine_transport"]


@dataclass(frozen=True)
class SonineResult:
    theta: float
    order: int
    mu: float
    kappa: float
    mu_coeffs: np.ndarray
    kappa_coeffs: np.ndarray


def _A(V):
    """Traceless second-rank tensor V V - |V|^2 I / 3, shape (..., 3, 3)."""
    T = V[..., :, None] * V[..., None, :]
    tr = np.einsum("...ii->...", T) / 3.0
    return T - tr[..., None, None] * np.eye(3)


def _visc_basis(V, order):
    """Components A_ij(V) S^{5/2}_k(|V|^2/2), k < order; shape (..., order, 9)."""
    x = 0.5 * np.sum(V * V, axis=-1)
    A = _A(V).reshape(V.shape[:-1] + (9,))
    S = np.stack([eval_genlaguerre(k, 2.5, x) for k in range(order)], axis=-1)
    return S[..., :, None] * A[..., None, :]


def _cond_basis(V, order):
    """Components V_i S^{3/2}_k(|V|^2/2), 1 <= k <= order; shape (..., order, 3)."""
    x = 0.5 * np.sum(V * V, axis=-1)
    S = np.stack([eval_genlaguerre(k, 1.5, x) for k in range(1, order + 1)], axis=-1)
    return S[..., :, None] * V[..., None, :]


def _bracket(basis, order, theta, n_cm, n_rel, n_pol, n_az):
    """Matrix of contracted brackets [phi_k, phi_l] for a basis in V = v / sqrt(theta)."""
    # centre of mass G with weight exp(-|G|^2/theta)
    x, w = roots_hermite(n_cm)
    G = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3) * np.sqrt(theta)
    wG = np.einsum("i,j,k->ijk", w, w, w).reshape(-1) * theta**1.5
    # relative speed: |g|^3 exp(-|g|^2/(4 theta)) d|g| = 8 theta^2 t e^{-t} dt
    t, wt = roots_genlaguerre(n_rel, 1.0)
    gabs = 2.0 * np.sqrt(theta * t)
    wg = 8.0 * theta**2 * wt
    # scattering direction sigma of the post-collision relative velocity
    c, wc = roots_legendre(n_pol)
    phi = 2.0 * np.pi * np.arange(n_az) / n_az
    s = np.sqrt(1.0 - c**2)
    sig = np.stack(
        [np.outer(s, np.cos(phi)), np.outer(s, np.sin(phi)), np.outer(c, np.ones(n_az))], -1
    ).reshape(-1, 3)
    ws = np.outer(wc, np.full(n_az, 2.0 * np.pi / n_az)).reshape(-1)
    ez = np.array([0.0, 0.0, 1.0])
    # prefactor: 1/4 * (2 pi theta)^-3 (Maxwellians) * 4 pi (direction of g) * 1/2 (|g.omega| d omega -> |g|/2 d sigma)
    pref = 0.25 * (2.0 * np.pi * theta) ** -3 * 4.0 * np.pi * 0.5
    out = np.zeros((order, order))
    sq = np.sqrt(theta)
    for gi, wgi in zip(gabs, wg):
        half = 0.5 * gi * ez
        v = (G - half) / sq
        vs = (G + half) / sq
        pre = basis(v, order) + basis(vs, order)  # (nG, order, ncomp)
        for si, wsi in zip(sig, ws):
            hp = 0.5 * gi * si
            post = basis((G - hp) / sq, order) + basis((G + hp) / sq, order)
            D = post - pre
            out += pref * wgi * wsi * np.einsum("g,gkc,glc->kl", wG, D, D)
    return out


def _rhs(basis, target, order, theta, n=12):
    """int phi_k . target(V) M dv for M = M_[1,0,theta], contracted over components."""
    x, w = roots_hermite(n)
    V = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1).reshape(-1, 3) * np.sqrt(2.0)
    wV = np.einsum("i,j,k->ijk", w, w, w).reshape(-1) * np.pi**-1.5
    return np.einsum("g,gkc,gc->k", wV, basis(V, order), target(V))


def sonine_transport(theta: float = 1.0, order: int = 3) -> SonineResult:
    """Viscosity and conductivity of hard spheres from an ``order``-term Sonine expansion.

    ``mu = (theta/10) int A : L^{-1}(A M)`` and ``kappa = (theta/3) int B . L^{-1}(B M)``,
    with M = M_[1,0,theta] and the collision kernel |(v*-v).omega|.
    """
    n_cm = order + 3
    n_rel = 2 * order + 3
    n_pol = 2 * order + 3
    n_az = 4 * order + 6

    Bv = _bracket(_visc_basis, order, theta, n_cm, n_rel, n_pol, n_az)
    rv = _rhs(_visc_basis, lambda V: _A(V).reshape(V.shape[:-1] + (9,)), order, theta)
    av = np.linalg.solve(Bv, rv)
    mu = theta / 10.0 * rv @ av

    Bc = _bracket(_cond_basis, order, theta, n_cm, n_rel, n_pol, n_az)
    rc = _rhs(
        _cond_basis,
        lambda V: 0.5 * (np.sum(V * V, axis=-1) - 5.0)[..., None] * V,
        order,
        theta,
    )
    ac = np.linalg.solve(Bc, rc)
    kappa = theta / 3.0 * rc @ ac
    return SonineResult(float(theta), int(order), float(mu), float(kappa), av, ac)
