"""Initial unit sections: constant, winding, random perturbation of 1, hedgehog."""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import brentq

from .lattice import BackgroundData, LatticeSpec, OctonionField, energy_density
from .octonions import DomainError, norm_sq


def constant(spec: LatticeSpec, U=None) -> OctonionField:
    u = np.zeros(8) if U is None else np.asarray(U, dtype=float)
    if U is None:
        u[0] = 1.0
    values = np.broadcast_to(u, spec.shape + (8,)).copy()
    return OctonionField(spec, values)


def winding(spec: LatticeSpec, axis: int, twists: int = 1, direction: int = 1) -> OctonionField:
    """cos(theta) + sin(theta) e_direction with theta = 2 pi m x_axis / L."""
    if axis not in spec.active_axes:
        raise ValueError(f"winding axis {axis} is not active in {spec.active_axes}")
    theta = 2.0 * np.pi * twists * spec.coordinate(axis) / spec.L
    values = np.zeros(spec.shape + (8,))
    values[..., 0] = np.cos(theta)
    values[..., direction] = np.sin(theta)
    return OctonionField(spec, values)


def _low_frequency_imaginary(spec: LatticeSpec, seed: int, max_freq: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    xs = spec.coords()
    w = np.zeros(spec.shape + (7,))
    seen = set()
    for k in itertools.product(range(-max_freq, max_freq + 1), repeat=spec.d):
        if not any(k) or tuple(-c for c in k) in seen:
            continue
        seen.add(k)
        phase = sum(2.0 * np.pi * kj * x / spec.L for kj, x in zip(k, xs))
        a, b = rng.normal(size=(2, 7))
        w += np.cos(phase)[..., None] * a + np.sin(phase)[..., None] * b
    return w


def perturbation(spec: LatticeSpec, amplitude: float, seed: int = 0, max_freq: int = 2) -> OctonionField:
    """Normalized 1 + w with w imaginary, low frequency, and sup |w| = amplitude.

    Then inf Re(V)^2 = 1 / (1 + amplitude^2) exactly on the lattice.
    """
    w = _low_frequency_imaginary(spec, seed, max_freq)
    w *= amplitude / np.sqrt(np.max(np.sum(w * w, axis=-1)))
    values = np.zeros(spec.shape + (8,))
    values[..., 0] = 1.0
    values[..., 1:] = w
    return OctonionField(spec, values / np.sqrt(norm_sq(values))[..., None])


def perturbation_with_lambda(spec: LatticeSpec, lambda0: float, seed: int = 0,
                             max_freq: int = 2) -> OctonionField:
    """Perturbation whose initial sup |DV|^2 equals ``lambda0``."""
    flat = BackgroundData.torsion_free(spec)

    def gap(a):
        return np.max(energy_density(perturbation(spec, a, seed, max_freq), flat)) - lambda0

    hi = 1e-3
    while gap(hi) < 0:
        hi *= 2.0
        if hi > 1e3:
            raise DomainError(f"no perturbation amplitude reaches Lambda_0 = {lambda0}")
    a = brentq(gap, 0.0, hi, xtol=1e-14, rtol=1e-14)
    return perturbation(spec, a, seed, max_freq)


def hedgehog(spec: LatticeSpec, radius: float, twists: int = 1, center=None) -> OctonionField:
    """cos f(r) + sin f(r) (x/r . e) with f = m pi (1 - 3 rho^2 + 2 rho^3), rho = min(r/R, 1).

    x is the periodic displacement from ``center`` along the active axes and
    e = (e_1, ..., e_d).  For d = 3 this is a degree-m map onto a 3-sphere in
    the octonions, the standard blow-up candidate for heat flows into spheres.
    """
    if not 0 < radius <= spec.L / 2:
        raise ValueError("radius must lie in (0, L/2]")
    center = [spec.L / 2] * spec.d if center is None else list(center)
    disp = []
    for x, c in zip(spec.coords(), center):
        dx = x - c
        disp.append(np.broadcast_to(dx - spec.L * np.round(dx / spec.L), spec.shape))
    r = np.sqrt(sum(dx * dx for dx in disp))
    rho = np.clip(r / radius, 0.0, 1.0)
    f = twists * np.pi * (1.0 - 3.0 * rho**2 + 2.0 * rho**3)
    values = np.zeros(spec.shape + (8,))
    values[..., 0] = np.cos(f)
    safe = np.where(r > 0, r, 1.0)
    for j, dx in enumerate(disp):
        values[..., 1 + j] = np.sin(f) * dx / safe
    return OctonionField(spec, values / np.sqrt(norm_sq(values))[..., None])
