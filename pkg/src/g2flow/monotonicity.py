"""Backward heat kernels on the flat torus and the weighted energies Z, F, W.

The kernel is the product over active axes of periodized 1-D Gaussians of
variance 2(t0 - t) (plus an optional initial spread), i.e. a positive
solution of dk/dt = -Lap k with unit mass.  Inactive axes contribute a
factor that integrates to one and is dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import (BackgroundData, LatticeSpec, OctonionField, _check_bg, _cov_deriv,
                      _cov_laplacian)
from .octonions import norm_sq


class KernelTimeError(ValueError):
    """Kernel queried at or after its reference time."""


@dataclass(frozen=True)
class KernelSpec:
    center: tuple[float, ...]
    t0: float
    tol: float = 1e-12
    spread: float = 0.0  # k(t0) is a Gaussian of variance 2*spread; 0 gives the heat kernel


def _tau(kspec: KernelSpec, t: float) -> float:
    if not t < kspec.t0:
        raise KernelTimeError(f"t = {t} is not before the kernel reference time t0 = {kspec.t0}")
    return kspec.t0 - t + kspec.spread


def _periodized_1d(x: np.ndarray, c: float, L: float, tau: float, tol: float):
    """Image sum of exp(-(x - c + mL)^2 / 4 tau) and its x-derivative."""
    dx = x - c
    dx = dx - L * np.round(dx / L)
    total = np.exp(-dx**2 / (4.0 * tau))
    deriv = -dx / (2.0 * tau) * total
    m = 1
    while True:
        added = 0.0
        for s in (m, -m):
            y = dx + s * L
            g = np.exp(-y**2 / (4.0 * tau))
            total = total + g
            deriv = deriv - y / (2.0 * tau) * g
            added = max(added, float(np.max(g)))
        if added < tol * float(np.max(total)):
            break
        m += 1
    return total, deriv


def backward_kernel(spec: LatticeSpec, kspec: KernelSpec, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Kernel k on the lattice and grad(k)/k, shapes ``spec.shape`` and ``(7, *spec.shape)``.

    Each 1-D factor is renormalized to unit lattice mass.
    """
    tau = _tau(kspec, t)
    if len(kspec.center) != spec.d:
        raise ValueError("kernel center needs one coordinate per active axis")
    k = np.ones(spec.shape)
    logd = np.zeros((7,) + spec.shape)
    for j, (axis, x) in enumerate(zip(spec.active_axes, spec.coords())):
        g, dg = _periodized_1d(np.ravel(x), kspec.center[j], spec.L, tau, kspec.tol)
        mass = spec.h * g.sum()
        shape = [1] * spec.d
        shape[j] = spec.n
        k = k * (g / mass).reshape(shape)
        logd[axis - 1] = np.broadcast_to((dg / g).reshape(shape), spec.shape)
    return k, logd


def Z_functional(V: OctonionField, bg: BackgroundData | None, kspec: KernelSpec, t: float,
                 density: np.ndarray | None = None) -> float:
    """(t0 - t) * integral of |DV|^2 k."""
    bg = _check_bg(V.spec, bg)
    k, _ = backward_kernel(V.spec, kspec, t)
    if density is None:
        density = norm_sq(_cov_deriv(V.spec, V.values, bg)).sum(axis=0)
    return (kspec.t0 - t) * V.spec.integrate(density * k)


def F_functional(V: OctonionField, bg: BackgroundData | None, x0, t0: float, t: float,
                 tol: float = 1e-12) -> float:
    """Z weighted by the heat kernel concentrating at (x0, t0)."""
    return Z_functional(V, bg, KernelSpec(tuple(x0), t0, tol), t)


def W_term(V: OctonionField, bg: BackgroundData | None, kspec: KernelSpec, t: float) -> float:
    """(t0 - t) * integral of |Lap_D V + |DV|^2 V + (grad_i k / k) D_i V|^2 k."""
    bg = _check_bg(V.spec, bg)
    spec = V.spec
    k, logd = backward_kernel(spec, kspec, t)
    dv = _cov_deriv(spec, V.values, bg)
    lam = norm_sq(dv).sum(axis=0)
    integrand = (_cov_laplacian(spec, V.values, bg) + lam[..., None] * V.values
                 + np.einsum("a...,a...i->...i", logd, dv))
    return (kspec.t0 - t) * spec.integrate(norm_sq(integrand) * k)


def backward_heat_residual(spec: LatticeSpec, kspec: KernelSpec, t: float, dt: float) -> float:
    """sup |(k(t) - k(t - dt))/dt + Lap_h k(t)|."""
    k1, _ = backward_kernel(spec, kspec, t)
    k0, _ = backward_kernel(spec, kspec, t - dt)
    lap = -2.0 * spec.d * k1
    for j in range(spec.d):
        lap = lap + np.roll(k1, 1, axis=j) + np.roll(k1, -1, axis=j)
    lap /= spec.h**2
    return float(np.max(np.abs((k1 - k0) / dt + lap)))
