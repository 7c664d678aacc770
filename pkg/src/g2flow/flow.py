"""Explicit time integration of dV/dt = Lap_D V + |DV|^2 V and its diagnostics.

The right-hand side is evaluated in the tangent-projected form
``Lap_D V - <Lap_D V, V> V``, which agrees with the literal one in the
continuum and is tangent to the unit sphere at every lattice point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .forms import sigma_V
from .lattice import (BackgroundData, LatticeSpec, OctonionField, _check_bg, _cov_deriv,
                      _cov_laplacian, _grad, _laplacian, div_torsion)
from .monotonicity import KernelSpec, W_term, Z_functional
from .octonions import check_unit, conjugate, hodge_star, inner, norm_sq


class CFLViolation(ValueError):
    """Time step above the explicit stability ceiling."""


class FlowNaNError(FloatingPointError):
    """Non-finite values produced by a step."""


class BoundExpired(ValueError):
    """Time at or past the blow-up time of the comparison ODE."""


INTEGRATORS = ("rk4", "euler")


@dataclass(frozen=True)
class FlowConfig:
    integrator: str = "rk4"
    cfl_factor: float = 0.25
    dt: float | None = None
    renormalize_stride: int = 1
    blowup_factor: float = 1e3

    def __post_init__(self):
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if not 0 < self.cfl_factor <= 1:
            raise ValueError(f"cfl_factor must lie in (0, 1], got {self.cfl_factor}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.renormalize_stride) != self.renormalize_stride or self.renormalize_stride < 1:
            raise ValueError("renormalize_stride must be a positive integer")
        if not self.blowup_factor > 1:
            raise ValueError("blowup_factor must exceed 1")

    def ceiling(self, spec: LatticeSpec) -> float:
        return self.cfl_factor * cfl_limit(spec)

    def time_step(self, spec: LatticeSpec) -> float:
        return self.ceiling(spec) if self.dt is None else float(self.dt)


def cfl_limit(spec: LatticeSpec) -> float:
    """h^2 / (2 d), the forward Euler stability limit of the standard stencil."""
    return spec.h**2 / (2.0 * spec.d)


@dataclass(frozen=True)
class FlowState:
    V: OctonionField
    bg: BackgroundData
    t: float = 0.0
    step: int = 0
    norm_drift: float = 0.0
    dt_last: float | None = None


def initial_state(V: OctonionField, bg: BackgroundData | None = None) -> FlowState:
    check_unit(V.values)
    return FlowState(V=V, bg=_check_bg(V.spec, bg))


def _rhs_values(spec: LatticeSpec, values: np.ndarray, bg: BackgroundData) -> np.ndarray:
    lap = _cov_laplacian(spec, values, bg)
    return lap - inner(lap, values)[..., None] * values


def rhs(state: FlowState) -> OctonionField:
    return OctonionField(state.V.spec, _rhs_values(state.V.spec, state.V.values, state.bg))


def _advance(spec, values, bg, dt, integrator):
    f = lambda v: _rhs_values(spec, v, bg)  # noqa: E731
    if integrator == "euler":
        return values + dt * f(values)
    k1 = f(values)
    k2 = f(values + 0.5 * dt * k1)
    k3 = f(values + 0.5 * dt * k2)
    k4 = f(values + dt * k3)
    return values + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step(state: FlowState, dt: float, cfg: FlowConfig | None = None) -> FlowState:
    cfg = cfg or FlowConfig()
    spec = state.V.spec
    ceiling = cfg.ceiling(spec)
    if dt > ceiling * (1.0 + 1e-12):
        raise CFLViolation(f"dt = {dt:.6g} exceeds cfl_factor * h^2/(2d) = {ceiling:.6g} "
                           f"(h = {spec.h:.6g}, d = {spec.d}, cfl_factor = {cfg.cfl_factor})")
    new = _advance(spec, state.V.values, state.bg, dt, cfg.integrator)
    if not np.all(np.isfinite(new)):
        bad = int(np.count_nonzero(~np.isfinite(new).all(axis=-1)))
        raise FlowNaNError(f"non-finite values at step {state.step + 1} (t = {state.t + dt:.6g}, "
                           f"dt = {dt:.6g}): {bad} of {int(np.prod(spec.shape))} points affected")
    nsq = norm_sq(new)
    drift = float(np.max(np.abs(nsq - 1.0)))
    if (state.step + 1) % cfg.renormalize_stride == 0:
        new = new / np.sqrt(nsq)[..., None]
    return FlowState(V=OctonionField(spec, new), bg=state.bg, t=state.t + dt,
                     step=state.step + 1, norm_drift=drift, dt_last=dt)


def energy(V: OctonionField, bg: BackgroundData | None = None) -> float:
    """h^d sum |D+ V|^2 with forward differences."""
    bg = _check_bg(V.spec, bg)
    return V.spec.integrate(norm_sq(_cov_deriv(V.spec, V.values, bg, forward=True)))


def lambda_diagnostics(V: OctonionField, bg: BackgroundData | None = None):
    bg = _check_bg(V.spec, bg)
    lam = norm_sq(_cov_deriv(V.spec, V.values, bg)).sum(axis=0)
    return lam, float(np.max(lam))


def lambda_upper_bound(t: float, lambda0: float) -> float:
    """Lambda_0 / (1 - 2 Lambda_0 t), the solution of u' = 2u^2 with u(0) = Lambda_0."""
    if lambda0 == 0:
        return 0.0
    if 2.0 * lambda0 * t >= 1.0:
        raise BoundExpired(f"t = {t} is past the comparison blow-up time 1/(2 Lambda_0) = "
                           f"{1.0 / (2.0 * lambda0)}")
    return lambda0 / (1.0 - 2.0 * lambda0 * t)


def flow_divergence(state: FlowState) -> np.ndarray:
    """The discrete Q = -(dV/dt) V^{-1}, imaginary part, shape (*shape, 7).

    In the continuum this is div T^(V); computing it from the evaluated
    right-hand side keeps the dissipation and 3-form identities free of the
    O(h^2) gap between the projected and literal stencils.
    """
    v = state.V.values
    q = -state.bg.mul(_rhs_values(state.V.spec, v, state.bg), conjugate(v))
    return q[..., 1:]


@dataclass(frozen=True)
class Monitor:
    """Reference point and time for the weighted energies Z, F, W."""

    x0: tuple[float, ...]
    t0: float
    spread: float = 0.0
    tol: float = 1e-12

    def kernel(self) -> KernelSpec:
        return KernelSpec(tuple(self.x0), self.t0, self.tol, self.spread)


@dataclass(frozen=True)
class DiagnosticsRecord:
    step: int
    t: float
    E: float
    Lambda_sup: float
    sup_divT: float
    G: float
    inf_f_sq: float
    norm_drift: float
    dEdt_residual: float | None = None
    Z: float | None = None
    F: float | None = None
    W: float | None = None
    dissipation: float = 0.0
    lambda2_sup: float | None = None

    CSV_COLUMNS = ("step", "t", "E", "Lambda_sup", "sup_divT", "G", "inf_f_sq",
                   "norm_drift", "dEdt_residual", "Z", "F", "W")

    def csv_row(self) -> list[str]:
        out = []
        for name in self.CSV_COLUMNS:
            v = getattr(self, name)
            if v is None:
                out.append("")
            elif isinstance(v, (int, np.integer)):
                out.append(str(int(v)))
            else:
                out.append(format(float(v), ".17g"))
        return out


def diagnostics(state: FlowState, prev_record: DiagnosticsRecord | None = None,
                monitor: Monitor | None = None, higher: bool = False) -> DiagnosticsRecord:
    """All per-sample quantities.

    ``dEdt_residual`` is (E(t) - E(t_prev))/(t - t_prev) + 2 h^d sum |Q|^2,
    where Q is :func:`flow_divergence` and ``prev_record`` is anything with
    ``t`` and ``E`` attributes (a record, or an :class:`EnergySample` of the
    previous step).
    """
    V, bg = state.V, state.bg
    spec = V.spec
    E = energy(V, bg)
    lam, lam_sup = lambda_diagnostics(V, bg)
    divT = div_torsion(V, bg)[..., 1:]
    f = V.values[..., 0]
    q = flow_divergence(state)
    dissipation = 2.0 * spec.integrate(norm_sq(q))
    res = None
    if prev_record is not None and state.t > prev_record.t:
        res = (E - prev_record.E) / (state.t - prev_record.t) + dissipation
    z = zf = w = None
    if monitor is not None and state.t < monitor.t0:
        kspec = monitor.kernel()
        z = Z_functional(V, bg, kspec, state.t, density=lam)
        zf = z if monitor.spread == 0 else Z_functional(V, bg, replace(kspec, spread=0.0),
                                                        state.t, density=lam)
        w = W_term(V, bg, kspec, state.t)
    l2 = None
    if higher:
        from .lattice import second_derivative_sup
        l2 = second_derivative_sup(V, bg)
    return DiagnosticsRecord(
        step=state.step, t=state.t, E=E, Lambda_sup=lam_sup,
        sup_divT=float(np.max(np.sqrt(norm_sq(divT)))),
        G=spec.integrate(np.abs(f)), inf_f_sq=float(np.min(f * f)),
        norm_drift=state.norm_drift, dEdt_residual=res, Z=z, F=zf, W=w,
        dissipation=dissipation, lambda2_sup=l2)


@dataclass(frozen=True)
class EnergySample:
    t: float
    E: float


@dataclass(frozen=True)
class HessianResult:
    value: float
    critical: bool
    sup_divT: float


def hessian_form(V: OctonionField, W1: OctonionField, W2: OctonionField,
                 bg: BackgroundData | None = None, crit_tol: float = 1e-6,
                 tangent_tol: float = 1e-9) -> HessianResult:
    """2 h^d sum (<D+W1, D+W2> - lambda <W1, W2>) with lambda = -<Lap_D V, V>.

    lambda is the lattice form of |DV|^2 dual to the forward-difference
    energy, which makes the value the exact second variation of
    :func:`energy` along normalized two-parameter families.  ``critical`` is
    False when sup |div T^(V)| exceeds ``crit_tol``.
    """
    bg = _check_bg(V.spec, bg)
    spec = V.spec
    for name, w in (("W1", W1), ("W2", W2)):
        off = float(np.max(np.abs(inner(w.values, V.values))))
        if off > tangent_tol:
            raise ValueError(f"{name} is not tangent to V (max |<W, V>| = {off:.3e})")
    d1 = _cov_deriv(spec, W1.values, bg, forward=True)
    d2 = _cov_deriv(spec, W2.values, bg, forward=True)
    lam = -inner(_cov_laplacian(spec, V.values, bg), V.values)
    val = 2.0 * spec.integrate(inner(d1, d2).sum(axis=0) - lam * inner(W1.values, W2.values))
    sup_div = float(np.max(np.sqrt(norm_sq(div_torsion(V, bg)[..., 1:]))))
    return HessianResult(val, sup_div <= crit_tol, sup_div)


def background_forms(bg: BackgroundData):
    """The background 3-form and 4-form: standard ones, or sigma_U of them."""
    if bg.section is None:
        return None, None
    phi = sigma_V(bg.section)
    return phi, hodge_star(phi, 3)


def phi_evolution_residual(state: FlowState, next_state: FlowState) -> float:
    """sup |(sigma_{V(t+dt)} - sigma_{V(t)})/dt - 2 Q ⌟ psi(t)|."""
    dt = next_state.t - state.t
    if not dt > 0:
        raise ValueError("next_state must be later than state")
    phi_bg, psi_bg = background_forms(state.bg)
    s0 = sigma_V(state.V.values, phi_bg, psi_bg)
    s1 = sigma_V(next_state.V.values, phi_bg, psi_bg)
    psi_t = hodge_star(s0, 3)
    q = flow_divergence(state)
    pred = 2.0 * np.einsum("...a,...abcd->...bcd", q, psi_t)
    return float(np.max(np.abs((s1 - s0) / dt - pred)))


def real_part_residual(state: FlowState, next_state: FlowState) -> float:
    """Check of the evolution of f = Re V with background torsion terms.

    sup |(f(t+dt) - f(t))/dt - [Lap f + f |grad V|^2 + <v, Div T> + 2<grad_a V, (1 - fV) T^a>]|
    where v = Im V and Div T is the imaginary divergence of the background.
    Optional: only meaningful for resolved runs.
    """
    spec = state.V.spec
    dt = next_state.t - state.t
    v = state.V.values
    f = v[..., 0]
    g = _grad(spec, v)
    one = np.zeros(8)
    one[0] = 1.0
    one_minus_fv = one - f[..., None] * v
    t = state.bg.torsion
    pred = (_laplacian(spec, f) + f * norm_sq(g).sum(axis=0)
            + inner(v[..., 1:], state.bg.div[..., 1:])
            + 2.0 * inner(g, state.bg.mul(one_minus_fv[None], t)).sum(axis=0))
    lhs = (next_state.V.values[..., 0] - f) / dt
    return float(np.max(np.abs(lhs - pred)))


@dataclass(frozen=True)
class BlowupFit:
    C: float
    t_max: float
    r2: float
    samples: int


def fit_blowup(times, lambdas) -> BlowupFit:
    """Least squares 1/Lambda = a + b t over the last decade of Lambda samples.

    Lambda ~ C/(t_max - t) corresponds to C = -1/b and t_max = -a/b.
    """
    t = np.asarray(times, dtype=float)
    lam = np.asarray(lambdas, dtype=float)
    keep = np.isfinite(lam) & (lam > 0)
    t, lam = t[keep], lam[keep]
    if t.size == 0:
        raise ValueError("no finite samples to fit")
    sel = lam >= lam[-1] / 10.0
    # last decade: the contiguous tail above Lambda_last / 10
    start = t.size - 1
    while start > 0 and sel[start - 1]:
        start -= 1
    t, y = t[start:], 1.0 / lam[start:]
    if t.size < 3:
        raise ValueError(f"only {t.size} samples in the last decade; need at least 3")
    b, a = np.polyfit(t, y, 1)
    resid = y - (a + b * t)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    C = -1.0 / b if b != 0 else math.inf
    t_max = -a / b if b != 0 else math.inf
    return BlowupFit(C=C, t_max=t_max, r2=r2, samples=int(t.size))


@dataclass
class RunResult:
    state: FlowState
    records: list[DiagnosticsRecord] = field(default_factory=list)
    status: str = "completed"  # completed | blowup | nan
    message: str = ""
    lambda0: float = 0.0
    history_t: list[float] = field(default_factory=list)
    history_lambda: list[float] = field(default_factory=list)
    fit: BlowupFit | None = None

    @property
    def blew_up(self) -> bool:
        return self.status != "completed"


def run_flow(state: FlowState, t_end: float, cfg: FlowConfig | None = None, *,
             record_stride: int = 1, monitor: Monitor | None = None,
             on_record: Callable[[FlowState, DiagnosticsRecord], None] | None = None,
             on_step: Callable[[FlowState], None] | None = None,
             max_steps: int | None = None) -> RunResult:
    """Integrate to ``t_end`` (the last step is shortened to land on it).

    Records diagnostics every ``record_stride`` steps plus the final state;
    the energy residual of a record always refers to the step just taken.
    Stops early when Lambda_sup exceeds ``blowup_factor`` times its initial
    value or a step produces non-finite values; the blow-up rate is then fit
    from the per-step Lambda_sup history.
    """
    cfg = cfg or FlowConfig()
    dt0 = cfg.time_step(state.V.spec)
    rec = diagnostics(state, None, monitor)
    result = RunResult(state=state, lambda0=rec.Lambda_sup)
    result.records.append(rec)
    result.history_t.append(state.t)
    result.history_lambda.append(rec.Lambda_sup)
    if on_record:
        on_record(state, rec)
    threshold = cfg.blowup_factor * rec.Lambda_sup
    eps = 1e-6 * dt0
    while state.t < t_end - eps:
        if max_steps is not None and state.step >= max_steps:
            break
        dt = min(dt0, t_end - state.t)
        before = EnergySample(state.t, energy(state.V, state.bg))
        try:
            state = step(state, dt, cfg)
        except FlowNaNError as exc:
            result.status, result.message = "nan", str(exc)
            break
        if on_step:
            on_step(state)
        _, lam_sup = lambda_diagnostics(state.V, state.bg)
        result.history_t.append(state.t)
        result.history_lambda.append(lam_sup)
        done = state.t >= t_end - eps
        blown = threshold > 0 and lam_sup > threshold
        if blown or done or state.step % record_stride == 0:
            rec = diagnostics(state, before, monitor)
            result.records.append(rec)
            if on_record:
                on_record(state, rec)
        if blown:
            result.status = "blowup"
            result.message = (f"Lambda_sup = {lam_sup:.6g} exceeded {cfg.blowup_factor:g} x "
                              f"Lambda_0 = {result.lambda0:.6g} at t = {state.t:.6g}")
            break
    result.state = state
    if result.blew_up:
        try:
            result.fit = fit_blowup(result.history_t, result.history_lambda)
        except ValueError as exc:
            result.message += f"; no rate fit: {exc}"
    return result


__all__ = [
    "CFLViolation", "FlowNaNError", "BoundExpired", "FlowConfig", "FlowState", "initial_state",
    "cfl_limit", "rhs", "step", "energy", "lambda_diagnostics", "lambda_upper_bound",
    "flow_divergence", "Monitor", "DiagnosticsRecord", "EnergySample", "diagnostics",
    "HessianResult", "hessian_form", "phi_evolution_residual", "real_part_residual", "BlowupFit", "fit_blowup",
    "RunResult", "run_flow",
]
