"""Pointwise octonion algebra generated by the standard G2 3-form.

Octonions are numpy arrays whose last axis has length 8: index 0 is the
real part, indices 1..7 the imaginary part in the basis e_1..e_7.  Every
function broadcasts over leading axes, so the same code serves single
octonions and whole lattices of them.

The multiplication is

    (a, alpha)(b, beta) = (ab - <alpha, beta>, a beta + b alpha + alpha x beta)

with the cross product read off the 3-form
``phi_0 = e123 + e145 + e167 + e246 - e257 - e347 - e356``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

UNIT_TOL = 1e-9

# (i, j, k) one-based, coefficient of e^{ijk}
PHI0_TERMS = (
    ((1, 2, 3), 1.0),
    ((1, 4, 5), 1.0),
    ((1, 6, 7), 1.0),
    ((2, 4, 6), 1.0),
    ((2, 5, 7), -1.0),
    ((3, 4, 7), -1.0),
    ((3, 5, 6), -1.0),
)


class DomainError(ValueError):
    """Raised when an argument lies outside an operation's domain."""


def permutation_sign(seq) -> int:
    """Sign of the permutation that sorts ``seq`` (entries distinct)."""
    sign = 1
    seq = list(seq)
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def antisymmetrize_into(table: np.ndarray, index: tuple, value) -> None:
    """Write ``value`` at ``index`` and every signed permutation of it."""
    for perm in itertools.permutations(range(len(index))):
        table[(...,) + tuple(index[p] for p in perm)] = value * permutation_sign(perm)


@lru_cache(maxsize=None)
def _complements(k: int):
    out = []
    for idx in itertools.combinations(range(7), k):
        comp = tuple(i for i in range(7) if i not in idx)
        out.append((idx, comp, permutation_sign(idx + comp)))
    return tuple(out)


def hodge_star(form: np.ndarray, degree: int) -> np.ndarray:
    """Euclidean Hodge star of a dense ``degree``-form on R^7.

    Orientation e^1 ^ ... ^ e^7 is positive.  ``form`` has shape
    ``(..., 7, ..., 7)`` with ``degree`` trailing axes and is assumed totally
    antisymmetric; only its sorted-index components are read.
    """
    lead = form.shape[: form.ndim - degree]
    out = np.zeros(lead + (7,) * (7 - degree))
    for idx, comp, sign in _complements(degree):
        antisymmetrize_into(out, comp, sign * form[(...,) + idx])
    return out


@dataclass(frozen=True)
class StructureTensors:
    """Dense phi_{abc} and psi_{abcd} tables (zero-based indices)."""

    phi: np.ndarray
    psi: np.ndarray

    @property
    def mul_table(self) -> np.ndarray:
        return multiplication_table(self.phi)


def build_structure_tensors() -> StructureTensors:
    phi = np.zeros((7, 7, 7))
    for (i, j, k), c in PHI0_TERMS:
        antisymmetrize_into(phi, (i - 1, j - 1, k - 1), c)
    psi = hodge_star(phi, 3)
    phi.setflags(write=False)
    psi.setflags(write=False)
    return StructureTensors(phi=phi, psi=psi)


def multiplication_table(phi: np.ndarray) -> np.ndarray:
    """Structure constants C with (AB)_k = C[i, j, k] A_i B_j."""
    c = np.zeros((8, 8, 8))
    c[0, 0, 0] = 1.0
    for i in range(1, 8):
        c[0, i, i] = 1.0
        c[i, 0, i] = 1.0
        c[i, i, 0] = -1.0
    c[1:, 1:, 1:] = phi
    return c


STANDARD = build_structure_tensors()
_MUL = multiplication_table(STANDARD.phi).reshape(64, 8)


def _table(st: StructureTensors | None) -> np.ndarray:
    if st is None:
        return _MUL
    return multiplication_table(st.phi).reshape(64, 8)


def octonion(re, im) -> np.ndarray:
    re = np.asarray(re, dtype=float)
    im = np.asarray(im, dtype=float)
    return np.concatenate([re[..., None], im], axis=-1)


def basis(i: int) -> np.ndarray:
    """Unit octonion e_i; ``basis(0)`` is the identity 1."""
    e = np.zeros(8)
    e[i] = 1.0
    return e


def oct_mul(a: np.ndarray, b: np.ndarray, st: StructureTensors | None = None) -> np.ndarray:
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    outer = a[..., :, None] * b[..., None, :]
    return outer.reshape(a.shape[:-1] + (64,)) @ _table(st)


def conjugate(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out[..., 1:] *= -1.0
    return out


def norm_sq(a: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", a, a)


def inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", a, b)


def inverse(a: np.ndarray) -> np.ndarray:
    n = norm_sq(a)
    if np.any(n == 0.0):
        raise DomainError("inverse of the zero octonion")
    return conjugate(a) / n[..., None]


def cross(u: np.ndarray, v: np.ndarray, st: StructureTensors | None = None) -> np.ndarray:
    phi = STANDARD.phi if st is None else st.phi
    return np.einsum("abc,...a,...b->...c", phi, u, v)


def associator(a, b, c, st: StructureTensors | None = None) -> np.ndarray:
    """[A, B, C] = A(BC) - (AB)C."""
    return oct_mul(a, oct_mul(b, c, st), st) - oct_mul(oct_mul(a, b, st), c, st)


def psi_contraction(alpha, beta, gamma, st: StructureTensors | None = None) -> np.ndarray:
    """Imaginary octonion 2 psi(., alpha, beta, gamma)."""
    psi = STANDARD.psi if st is None else st.psi
    im = 2.0 * np.einsum("dabc,...a,...b,...c->...d", psi, alpha, beta, gamma)
    return octonion(np.zeros(im.shape[:-1]), im)


def check_unit(v: np.ndarray, tol: float = UNIT_TOL, what: str = "V") -> None:
    drift = np.max(np.abs(norm_sq(v) - 1.0))
    if not drift < tol:
        raise DomainError(f"{what} is not a unit octonion (max |norm^2 - 1| = {drift:.3e})")


def mod_product(a, b, v, st: StructureTensors | None = None) -> np.ndarray:
    """Product A o_V B = (AV)(V^{-1}B) of the structure induced by unit V."""
    check_unit(v)
    return oct_mul(oct_mul(a, v, st), oct_mul(inverse(v), b, st), st)


def random_unit(rng: np.random.Generator, shape: tuple[int, ...] = ()) -> np.ndarray:
    x = rng.normal(size=tuple(shape) + (8,))
    return x / np.sqrt(norm_sq(x))[..., None]
