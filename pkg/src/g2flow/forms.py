"""G2-structure tensor operations on R^7 with the Euclidean metric.

Forms are dense totally antisymmetric tables with trailing axes of size 7;
leading axes broadcast (one form per lattice point, for instance).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .octonions import STANDARD, DomainError, check_unit, hodge_star, permutation_sign


def wedge_1_2(v: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """(v ^ beta)_{abc} = v_a beta_bc + v_b beta_ca + v_c beta_ab."""
    return (np.einsum("...a,...bc->...abc", v, beta)
            + np.einsum("...b,...ca->...abc", v, beta)
            + np.einsum("...c,...ab->...abc", v, beta))


def sigma_V(v: np.ndarray, phi: np.ndarray | None = None, psi: np.ndarray | None = None) -> np.ndarray:
    """The isometric 3-form determined by the unit octonion ``v``.

    ``(v0^2 - |v|^2) phi - 2 v0 v⌟psi + 2 v ^ (v⌟phi)`` with ``v = (v0, v)``.
    ``phi``/``psi`` default to the standard pair and may carry the same
    leading axes as ``v``.
    """
    check_unit(v)
    phi = STANDARD.phi if phi is None else phi
    psi = STANDARD.psi if psi is None else psi
    v0 = v[..., 0]
    w = v[..., 1:]
    scale = v0**2 - np.einsum("...a,...a->...", w, w)
    w_phi = np.einsum("...a,...abc->...bc", w, np.broadcast_to(phi, w.shape[:-1] + (7, 7, 7)))
    w_psi = np.einsum("...a,...abcd->...bcd", w, np.broadcast_to(psi, w.shape[:-1] + (7,) * 4))
    return (scale[..., None, None, None] * phi
            - 2.0 * v0[..., None, None, None] * w_psi
            + 2.0 * wedge_1_2(w, w_phi))


@lru_cache(maxsize=1)
def _levi_civita() -> np.ndarray:
    eps = np.zeros((7,) * 7)
    for perm in itertools.permutations(range(7)):
        eps[perm] = permutation_sign(perm)
    return eps


def bilinear_form(phi: np.ndarray) -> np.ndarray:
    """Coefficient b_ab of e^{1..7} in (1/6)(e_a⌟phi)^(e_b⌟phi)^phi."""
    # dense components: (alpha^beta^gamma)_{1..7} = eps^{ijklmnp} a_ij b_kl c_mnp / (2! 2! 3!)
    return np.einsum("ijklmnp,...aij,...bkl,...mnp->...ab", _levi_civita(), phi, phi, phi,
                     optimize=True) / (6.0 * 24.0)


def metric_from_phi(phi: np.ndarray) -> tuple[np.ndarray, float]:
    """Metric and volume factor determined by a single positive 3-form.

    Returns ``(g, vol)`` with ``g vol = b`` and ``vol = sqrt(det g)``.
    """
    b = bilinear_form(phi)
    b = 0.5 * (b + b.T)
    eig = np.linalg.eigvalsh(b)
    if not np.all(eig > 0.0):
        raise DomainError(f"3-form is not positive (eigenvalues of B_phi: {eig})")
    # det b = vol^7 det g = vol^9
    vol = float(np.prod(eig) ** (1.0 / 9.0))
    return b / vol, vol


def _P(beta: np.ndarray) -> np.ndarray:
    return 0.5 * np.einsum("abcd,...cd->...ab", STANDARD.psi, beta)


def lambda2_project(beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split an antisymmetric 2-tensor into its 7- and 14-dimensional parts.

    Uses the eigenvalues 2 and -1 of ``beta -> (1/2) psi_abcd beta^cd``.
    """
    p = _P(beta)
    b7 = (beta + p) / 3.0
    return b7, beta - b7


@dataclass(frozen=True)
class TorsionComponents:
    tau0: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    tau3: np.ndarray


def torsion_decompose(t: np.ndarray) -> TorsionComponents:
    """Components of ``2T = tau0 g/4 - tau1⌟phi + tau2/2 - tau3/3``."""
    phi = STANDARD.phi
    eye = np.eye(7)
    sym = 0.5 * (t + np.swapaxes(t, -1, -2))
    anti = 0.5 * (t - np.swapaxes(t, -1, -2))
    tr = np.trace(t, axis1=-2, axis2=-1)
    tau0 = 8.0 * tr / 7.0
    # <a⌟phi, b⌟phi> = 6 <a, b>
    tau1 = -np.einsum("eab,...ab->...e", phi, anti) / 3.0
    _, anti14 = lambda2_project(anti)
    tau2 = 4.0 * anti14
    tau3 = -6.0 * (sym - (tr / 7.0)[..., None, None] * eye)
    return TorsionComponents(tau0=tau0, tau1=tau1, tau2=tau2, tau3=tau3)


def torsion_reconstruct(c: TorsionComponents) -> np.ndarray:
    phi = STANDARD.phi
    tau0 = np.asarray(c.tau0, dtype=float)
    two_t = (0.25 * tau0[..., None, None] * np.eye(7)
             - np.einsum("...c,cab->...ab", c.tau1, phi)
             + 0.5 * c.tau2
             - c.tau3 / 3.0)
    return 0.5 * two_t


def hodge_dual_3(phi: np.ndarray) -> np.ndarray:
    return hodge_star(phi, 3)
