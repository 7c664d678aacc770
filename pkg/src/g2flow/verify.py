"""Self-check suite: algebraic identities, discrete exactness, convergence orders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import forms, initial
from .lattice import (LatticeSpec, _grad_forward, _laplacian, cov_laplacian, covariance_residual,
                      energy_density)
from .octonions import (STANDARD, StructureTensors, antisymmetrize_into, hodge_star, inner,
                        norm_sq, oct_mul, psi_contraction, random_unit)

RATIO_BAND = (3.5, 4.5)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    criterion: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<28} {self.measured:.3e}  ({self.criterion})"


def corrupted_structure() -> StructureTensors:
    """Standard tables with the e^{123} coefficient of phi changed to 1.1 (test fault)."""
    phi = np.array(STANDARD.phi)
    antisymmetrize_into(phi, (0, 1, 2), 1.1)
    return StructureTensors(phi=phi, psi=np.array(STANDARD.psi))


def _rel(a, b):
    scale = max(1.0, float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


def _algebra_checks(st: StructureTensors, rng, cases: int) -> list[CheckResult]:
    tol = 1e-12
    out = []
    contraction = np.einsum("apq,bpq->ab", st.phi, st.phi)
    out.append(CheckResult("phi contraction", _rel(contraction, 6 * np.eye(7)) < tol,
                           _rel(contraction, 6 * np.eye(7)), "phi_apq phi_bpq = 6 delta_ab"))
    hod = _rel(st.psi, hodge_star(st.phi, 3))
    out.append(CheckResult("psi is Hodge dual", hod < tol, hod, "psi = *phi"))
    a, b, c = rng.normal(size=(3, cases, 8))
    ab = oct_mul(a, b, st)
    nm = float(np.max(np.abs(norm_sq(ab) - norm_sq(a) * norm_sq(b)) / (norm_sq(a) * norm_sq(b))))
    out.append(CheckResult("norm multiplicativity", nm < tol, nm, "|AB|^2 = |A|^2 |B|^2"))
    assoc = oct_mul(a, oct_mul(b, c, st), st) - oct_mul(ab, c, st)
    scale = np.sqrt(norm_sq(a) * norm_sq(b) * norm_sq(c))[:, None]
    alt = oct_mul(a, oct_mul(a, b, st), st) - oct_mul(oct_mul(a, a, st), b, st)
    err = max(float(np.max(np.abs(alt) / scale)), float(np.max(np.abs(assoc[:, 0]) / scale[:, 0])))
    out.append(CheckResult("associator alternating", err < tol, err, "[A,A,B] = 0, Re[A,B,C] = 0"))
    ident = float(np.max(np.abs(assoc - psi_contraction(a[:, 1:], b[:, 1:], c[:, 1:], st)) / scale))
    out.append(CheckResult("associator-psi identity", ident < tol, ident,
                           "Im[A,B,C]_d = 2 psi_dabc a^a b^b c^c"))
    return out


def _form_checks(st: StructureTensors, rng, cases: int) -> list[CheckResult]:
    tol = 1e-12
    u = random_unit(rng, (cases,))
    v = random_unit(rng, (cases,))
    sv = forms.sigma_V(v, st.phi, st.psi)
    comp = forms.sigma_V(u, sv, hodge_star(sv, 3))
    try:
        direct = forms.sigma_V(oct_mul(u, v, st), st.phi, st.psi)
        err = _rel(comp, direct)
    except ValueError:  # UV fails to be a unit octonion when the table is broken
        err = np.inf
    out = [CheckResult("sigma composition", err < tol, err, "sigma_U sigma_V = sigma_UV")]
    worst = 0.0
    for k in range(min(cases, 100)):
        try:
            g, vol = forms.metric_from_phi(sv[k])
            worst = max(worst, _rel(g, np.eye(7)), abs(vol - 1.0))
        except ValueError:
            worst = np.inf
    out.append(CheckResult("sigma metric invariance", worst < tol, worst, "g(sigma_V phi) = g"))
    t = rng.normal(size=(cases, 7, 7))
    rt = _rel(forms.torsion_reconstruct(forms.torsion_decompose(t)), t)
    out.append(CheckResult("torsion round-trip", rt < tol, rt, "reconstruct(decompose(T)) = T"))
    beta = t - np.swapaxes(t, -1, -2)
    b7, b14 = forms.lambda2_project(beta)
    b77, b714 = forms.lambda2_project(b7)
    idem = max(_rel(b77, b7), _rel(b714, 0 * b7), _rel(forms.lambda2_project(b14)[1], b14))
    out.append(CheckResult("projector idempotence", idem < tol, idem, "pi^2 = pi, pi7 pi14 = 0"))
    return out


def _lattice_checks(spec: LatticeSpec, rng) -> list[CheckResult]:
    out = []
    field = initial.perturbation(spec, 0.7, seed=int(rng.integers(1 << 31)))
    v = field.values
    sbp = spec.integrate(inner(_laplacian(spec, v), v)) + spec.integrate(norm_sq(_grad_forward(spec, v)))
    scale = spec.integrate(norm_sq(_grad_forward(spec, v)))
    rel = abs(sbp) / max(scale, 1e-300)
    out.append(CheckResult("summation by parts", rel < 1e-12, rel,
                           "sum <Lap F, F> + sum |grad+ F|^2 = 0"))

    axis = spec.active_axes[0]
    res, stat = [], []
    for n in (spec.n, 2 * spec.n):
        s1 = LatticeSpec((axis,), n, spec.L)
        A = initial.perturbation(s1, 1.0, seed=11)
        U = initial.winding(s1, axis, 1, direction=3)
        res.append(covariance_residual(A, U))
        W = initial.winding(s1, axis, 1)
        lit = cov_laplacian(W).values + energy_density(W)[..., None] * W.values
        stat.append(float(np.max(np.abs(lit))))
    for name, pair in (("covariance convergence", res), ("stationarity convergence", stat)):
        ratio = pair[0] / pair[1]
        out.append(CheckResult(name, RATIO_BAND[0] <= ratio <= RATIO_BAND[1], ratio,
                               f"residual ratio n={spec.n} vs {2 * spec.n} in {list(RATIO_BAND)}"))
    return out


def run_checks(spec: LatticeSpec, st: StructureTensors | None = None, seed: int = 0,
               cases: int = 1000) -> list[CheckResult]:
    st = st or STANDARD
    rng = np.random.default_rng(seed)
    return _algebra_checks(st, rng, cases) + _form_checks(st, rng, min(cases, 100)) \
        + _lattice_checks(spec, rng)


__all__ = ["CheckResult", "corrupted_structure", "run_checks"]
