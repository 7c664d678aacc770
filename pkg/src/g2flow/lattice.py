"""Octonion sections on a flat periodic 7-torus.

Fields vary only along a chosen set of "active" axes; derivatives along the
remaining axes are identically zero and those axes are not stored.  A field
of octonions has shape ``(*spec.shape, 8)``; an octonion-valued 1-form
(gradients, torsion) has shape ``(7, *spec.shape, 8)`` with one slot per
torus direction, inactive slots included.

Pointwise diagnostics use centered second-order differences.  The energy
uses forward differences, which pair exactly with the standard Laplacian
stencil under summation by parts on the periodic lattice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .octonions import check_unit, conjugate, inverse, mod_product, norm_sq, oct_mul

MAX_DEFAULT_AXES = 3


@dataclass(frozen=True)
class LatticeSpec:
    active_axes: tuple[int, ...]
    n: int
    L: float = 1.0
    allow_many_axes: bool = False

    def __post_init__(self):
        axes = tuple(int(a) for a in self.active_axes)
        object.__setattr__(self, "active_axes", axes)
        if not axes or len(set(axes)) != len(axes) or not all(1 <= a <= 7 for a in axes):
            raise ValueError(f"active_axes must be distinct values in 1..7, got {axes}")
        if len(axes) > MAX_DEFAULT_AXES and not self.allow_many_axes:
            raise ValueError(f"{len(axes)} active axes exceeds the default limit of "
                             f"{MAX_DEFAULT_AXES}; pass allow_many_axes=True")
        if int(self.n) != self.n or self.n < 4:
            raise ValueError(f"n must be an integer >= 4, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def d(self) -> int:
        return len(self.active_axes)

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per active axis."""
        x = np.arange(self.n) * self.h
        return [x.reshape((1,) * j + (self.n,) + (1,) * (self.d - j - 1)) for j in range(self.d)]

    def coordinate(self, axis: int) -> np.ndarray:
        """Coordinate along torus direction ``axis`` (zero if inactive), broadcast to shape."""
        if axis not in self.active_axes:
            return np.zeros(self.shape)
        return np.broadcast_to(self.coords()[self.active_axes.index(axis)], self.shape)

    def integrate(self, density: np.ndarray) -> float:
        return float(self.cell_volume * np.sum(density))

    def to_dict(self) -> dict:
        return {"active_axes": list(self.active_axes), "n": int(self.n), "L": float(self.L)}

    @classmethod
    def from_dict(cls, d: dict) -> "LatticeSpec":
        return cls(tuple(d["active_axes"]), int(d["n"]), float(d["L"]),
                   allow_many_axes=len(d["active_axes"]) > MAX_DEFAULT_AXES)


@dataclass(frozen=True)
class OctonionField:
    spec: LatticeSpec
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.spec.shape + (8,):
            raise ValueError(f"field shape {self.values.shape} does not match lattice "
                             f"{self.spec.shape + (8,)}")

    def norm_drift(self) -> float:
        return float(np.max(np.abs(norm_sq(self.values) - 1.0)))

    def normalized(self) -> "OctonionField":
        return OctonionField(self.spec, self.values / np.sqrt(norm_sq(self.values))[..., None])


@dataclass(frozen=True)
class TorsionField:
    """Seven octonions per point.  The real parts are a discretization residue."""

    spec: LatticeSpec
    values: np.ndarray

    def tensor(self) -> np.ndarray:
        """T_ab per point, shape (*shape, 7, 7): a the form slot, b the imaginary index."""
        return np.moveaxis(self.values[..., 1:], 0, -2)

    def real_residual(self) -> float:
        return float(np.max(np.abs(self.values[..., 0])))


@dataclass(frozen=True)
class BackgroundData:
    """Background torsion and its octonion divergence Div T = div T + |T|^2.

    When the background is the structure induced by a unit section U over
    the flat one, ``section`` holds U and every product with background
    quantities is the induced product A o_U B = (AU)(U^{-1}B).  Without a
    section the plain product is used.
    """

    spec: LatticeSpec
    torsion: np.ndarray
    div: np.ndarray
    flat: bool = field(default=False)
    section: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def torsion_free(cls, spec: LatticeSpec) -> "BackgroundData":
        return cls(spec, np.zeros((7,) + spec.shape + (8,)), np.zeros(spec.shape + (8,)), True)

    @classmethod
    def from_torsion(cls, spec: LatticeSpec, torsion: np.ndarray,
                     section: np.ndarray | None = None) -> "BackgroundData":
        t = np.array(torsion, dtype=float, copy=True)
        t[..., 0] = 0.0
        grad_t = np.stack([_grad(spec, t[a])[a] for a in range(7)])
        div = np.zeros(spec.shape + (8,))
        div[..., 1:] = grad_t.sum(axis=0)[..., 1:]
        div[..., 0] = norm_sq(t).sum(axis=0)
        flat = not np.any(t)
        return cls(spec, t, div, flat=flat, section=None if flat else section)

    @classmethod
    def from_section(cls, U: OctonionField) -> "BackgroundData":
        """Background realized as the structure of a unit section U over the flat one."""
        tor = section_torsion(U, cls.torsion_free(U.spec))
        return cls.from_torsion(U.spec, tor.values, section=np.array(U.values))

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Product of the background structure (broadcast over leading axes)."""
        if self.section is None:
            return oct_mul(a, b)
        u = self.section
        return oct_mul(oct_mul(a, u), oct_mul(conjugate(u), b))


def _check_bg(spec: LatticeSpec, bg: BackgroundData | None) -> BackgroundData:
    if bg is None:
        return BackgroundData.torsion_free(spec)
    if bg.spec != spec:
        raise ValueError(f"background lattice {bg.spec} differs from field lattice {spec}")
    return bg


def _shift(values: np.ndarray, j: int, k: int) -> np.ndarray:
    """values at index + k along active axis number j."""
    return np.roll(values, -k, axis=j)


def _grad(spec: LatticeSpec, values: np.ndarray) -> np.ndarray:
    out = np.zeros((7,) + values.shape)
    for j, axis in enumerate(spec.active_axes):
        out[axis - 1] = (_shift(values, j, 1) - _shift(values, j, -1)) / (2.0 * spec.h)
    return out


def _grad_forward(spec: LatticeSpec, values: np.ndarray) -> np.ndarray:
    out = np.zeros((7,) + values.shape)
    for j, axis in enumerate(spec.active_axes):
        out[axis - 1] = (_shift(values, j, 1) - values) / spec.h
    return out


def _laplacian(spec: LatticeSpec, values: np.ndarray) -> np.ndarray:
    # in-place periodic neighbour sums; several times faster than np.roll
    out = (-2.0 * spec.d) * values
    full = [slice(None)] * values.ndim
    for j in range(spec.d):
        for lo, hi in ((slice(1, None), slice(None, -1)), (0, -1)):
            a, b = list(full), list(full)
            a[j], b[j] = lo, hi
            out[tuple(a)] += values[tuple(b)]
            out[tuple(b)] += values[tuple(a)]
    out *= 1.0 / spec.h**2
    return out


def grad(F: OctonionField) -> np.ndarray:
    return _grad(F.spec, F.values)


def grad_forward(F: OctonionField) -> np.ndarray:
    return _grad_forward(F.spec, F.values)


def laplacian(F: OctonionField) -> OctonionField:
    return OctonionField(F.spec, _laplacian(F.spec, F.values))


def _cov_deriv(spec, values, bg: BackgroundData, forward=False) -> np.ndarray:
    g = _grad_forward(spec, values) if forward else _grad(spec, values)
    if bg.flat:
        return g
    return g - bg.mul(values[None], bg.torsion)


def _cov_laplacian(spec, values, bg: BackgroundData) -> np.ndarray:
    lap = _laplacian(spec, values)
    if bg.flat:
        return lap
    g = _grad(spec, values)
    lap = lap - 2.0 * bg.mul(g, bg.torsion).sum(axis=0)
    return lap - bg.mul(values, bg.div)


def cov_deriv(F: OctonionField, bg: BackgroundData | None = None) -> np.ndarray:
    """D_a F = grad_a F - F T_a, shape (7, *shape, 8)."""
    return _cov_deriv(F.spec, F.values, _check_bg(F.spec, bg))


def cov_deriv_forward(F: OctonionField, bg: BackgroundData | None = None) -> np.ndarray:
    return _cov_deriv(F.spec, F.values, _check_bg(F.spec, bg), forward=True)


def cov_laplacian(F: OctonionField, bg: BackgroundData | None = None) -> OctonionField:
    """Lap F - 2 (grad_a F) T^a - F (Div T) on the standard stencil."""
    return OctonionField(F.spec, _cov_laplacian(F.spec, F.values, _check_bg(F.spec, bg)))


def energy_density(F: OctonionField, bg: BackgroundData | None = None) -> np.ndarray:
    """Centered |DF|^2 per point."""
    return norm_sq(cov_deriv(F, bg)).sum(axis=0)


def section_torsion(V: OctonionField, bg: BackgroundData | None = None) -> TorsionField:
    """Torsion -(DV)V^{-1} of the structure defined by a unit section."""
    check_unit(V.values)
    bg = _check_bg(V.spec, bg)
    dv = cov_deriv(V, bg)
    return TorsionField(V.spec, -bg.mul(dv, inverse(V.values)[None]))


def div_torsion(V: OctonionField, bg: BackgroundData | None = None) -> np.ndarray:
    """-(Lap_D V + |DV|^2 V) V^{-1}.

    The imaginary part is div T^(V); the real part vanishes in the continuum
    and is kept as a consistency residual.
    """
    check_unit(V.values)
    bg = _check_bg(V.spec, bg)
    lam = energy_density(V, bg)
    lap = _cov_laplacian(V.spec, V.values, bg)
    return -bg.mul(lap + lam[..., None] * V.values, inverse(V.values))


def covariance_residual(A: OctonionField, U: OctonionField) -> float:
    """sup |D^(U) A - (D(AU)) U^{-1}| over a torsion-free base."""
    check_unit(U.values)
    flat = BackgroundData.torsion_free(U.spec)
    bg_u = BackgroundData.from_section(U)
    lhs = cov_deriv(A, bg_u)
    au = OctonionField(A.spec, oct_mul(A.values, U.values))
    rhs = oct_mul(cov_deriv(au, flat), inverse(U.values)[None])
    return float(np.max(np.abs(lhs - rhs)))


def exterior_torsion(V: OctonionField) -> np.ndarray:
    """(d T)_ab = grad_a T_b - grad_b T_a + T_a o_V T_b - T_b o_V T_a for T = T^(V).

    Flat torus, torsion-free base.  Products use the structure induced by V.
    Shape (7, 7, *shape, 8); vanishes in the continuum.
    """
    t = section_torsion(V).values
    t[..., 0] = 0.0
    spec = V.spec
    g = np.stack([_grad(spec, t[b]) for b in range(7)], axis=1)  # [a, b] = grad_a T_b
    vinv = inverse(V.values)
    tv = oct_mul(t, V.values[None])
    vt = oct_mul(vinv[None], t)
    prod = oct_mul(tv[:, None], vt[None, :])  # [a, b] = (T_a V)(V^{-1} T_b)
    return g - np.swapaxes(g, 0, 1) + prod - np.swapaxes(prod, 0, 1)


def second_derivative_sup(F: OctonionField, bg: BackgroundData | None = None) -> float:
    """sup |D D F|^2 by repeated centered differencing (a monitor only)."""
    bg = _check_bg(F.spec, bg)
    d1 = _cov_deriv(F.spec, F.values, bg)
    total = np.zeros(F.spec.shape)
    for a in range(7):
        total += norm_sq(_cov_deriv(F.spec, d1[a], bg)).sum(axis=0)
    return float(np.max(total))


def product_rule_residual(A: OctonionField, B: OctonionField, U: OctonionField) -> float:
    """sup |D(A o_U B) - (grad A) o_U B - A o_U (DB)| for the background defined by U.

    Products are those of the structure induced by U; with the plain product
    the rule fails at O(1) unless A, B and U happen to associate.
    """
    bg = BackgroundData.from_section(U)
    u7 = np.broadcast_to(U.values, (7,) + U.values.shape)
    ab = OctonionField(A.spec, mod_product(A.values, B.values, U.values))
    lhs = cov_deriv(ab, bg)
    rhs = mod_product(grad(A), B.values[None], u7) + mod_product(A.values[None], cov_deriv(B, bg), u7)
    return float(np.max(np.abs(lhs - rhs)))


__all__ = [
    "LatticeSpec", "OctonionField", "TorsionField", "BackgroundData",
    "grad", "grad_forward", "laplacian", "cov_deriv", "cov_deriv_forward", "cov_laplacian",
    "energy_density", "section_torsion", "div_torsion", "covariance_residual",
    "exterior_torsion", "second_derivative_sup", "product_rule_residual",
]
