import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from g2flow.initial import constant, perturbation, winding
from g2flow.lattice import (BackgroundData, LatticeSpec, OctonionField, cov_deriv,
                            cov_laplacian, covariance_residual, div_torsion, energy_density,
                            exterior_torsion, grad, grad_forward, laplacian, product_rule_residual,
                            second_derivative_sup, section_torsion)
from g2flow.octonions import DomainError, basis, inner, inverse, norm_sq, oct_mul, random_unit

TWO_PI = 2 * np.pi


def sin_field(spec, axis=1, comp=2):
    v = np.zeros(spec.shape + (8,))
    v[..., comp] = np.sin(TWO_PI * spec.coordinate(axis) / spec.L)
    return OctonionField(spec, v)


class TestLatticeSpec:
    def test_derived_quantities(self):
        s = LatticeSpec((1, 3), 16, 2.0)
        assert s.d == 2 and s.h == 0.125 and s.shape == (16, 16)
        assert s.cell_volume == 0.125**2
        assert LatticeSpec.from_dict(s.to_dict()) == s

    @pytest.mark.parametrize("kwargs", [dict(active_axes=(), n=8), dict(active_axes=(0,), n=8),
                                        dict(active_axes=(1, 1), n=8), dict(active_axes=(1,), n=3),
                                        dict(active_axes=(1,), n=8, L=0.0),
                                        dict(active_axes=(1, 2, 3, 4), n=8)])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ValueError):
            LatticeSpec(**kwargs)

    def test_many_axes_opt_in(self):
        assert LatticeSpec((1, 2, 3, 4), 4, allow_many_axes=True).d == 4

    def test_field_shape_checked(self):
        with pytest.raises(ValueError):
            OctonionField(LatticeSpec((1,), 8), np.zeros((9, 8)))


class TestGradient:
    def test_constant_and_inactive_slots(self):
        s = LatticeSpec((2, 5), 8)
        g = grad(constant(s, random_unit(np.random.default_rng(0))))
        assert not np.any(g)
        g = grad(perturbation(s, 0.5, seed=1))
        assert not np.any(g[[0, 2, 3, 5, 6]]) and np.any(g[1]) and np.any(g[4])

    def test_sine_second_order(self):
        errs = []
        for n in (32, 64):
            s = LatticeSpec((1,), n)
            exact = TWO_PI * np.cos(TWO_PI * s.coordinate(1))
            errs.append(np.max(np.abs(grad(sin_field(s))[0][..., 2] - exact)))
        assert 3.8 < errs[0] / errs[1] < 4.2

    def test_affine_exact_away_from_seam(self):
        s = LatticeSpec((1,), 16, 1.0)
        v = np.zeros((16, 8))
        v[:, 3] = 3.0 * s.coordinate(1) + 1.0
        g = grad(OctonionField(s, v))[0][1:-1, 3]
        assert np.allclose(g, 3.0, atol=1e-12)
        gf = grad_forward(OctonionField(s, v))[0][:-1, 3]
        assert np.allclose(gf, 3.0, atol=1e-12)


class TestCovariantDerivative:
    def test_zero_background_is_grad(self):
        s = LatticeSpec((1, 2), 8)
        F = perturbation(s, 0.3, seed=0)
        assert np.array_equal(cov_deriv(F, BackgroundData.torsion_free(s)), grad(F))

    def test_unit_field_derivative_of_one(self):
        s = LatticeSpec((1,), 16)
        bg = BackgroundData.from_section(winding(s, 1, 1, direction=2))
        d1 = cov_deriv(constant(s), bg)
        assert np.allclose(d1, -bg.torsion, atol=1e-15)

    def test_metric_compatibility(self):
        s = LatticeSpec((1,), 64)
        bg = BackgroundData.from_section(winding(s, 1, 2, direction=5))
        F = perturbation(s, 0.8, seed=3)
        torsion_part = cov_deriv(F, bg) - grad(F)
        assert np.max(np.abs(inner(torsion_part, F.values[None]))) < 1e-10
        W = winding(s, 1, 1, direction=3)
        assert np.max(np.abs(inner(cov_deriv(W, bg), W.values[None]))) < 1e-10


class TestLaplacian:
    def test_sine_eigenfunction(self):
        errs = []
        for n in (32, 64):
            s = LatticeSpec((1,), n)
            F = sin_field(s)
            errs.append(np.max(np.abs(cov_laplacian(F).values + TWO_PI**2 * F.values)))
        assert 3.8 < errs[0] / errs[1] < 4.2

    def test_constant_zero(self):
        s = LatticeSpec((1, 2, 3), 6)
        assert not np.any(laplacian(constant(s)).values)

    @pytest.mark.parametrize("axes,n", [((1,), 64), ((2, 4), 16), ((1, 2, 3), 8)])
    def test_summation_by_parts_exact(self, axes, n):
        s = LatticeSpec(axes, n)
        V = perturbation(s, 1.3, seed=7)
        lhs = s.integrate(inner(laplacian(V).values, V.values))
        rhs = -s.integrate(norm_sq(grad_forward(V)))
        assert abs(lhs - rhs) <= 1e-12 * abs(rhs)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_operators_linear(alpha, beta, seed):
    s = LatticeSpec((1, 2), 8)
    bg = BackgroundData.from_section(winding(s, 2, 1, direction=4))
    rng = np.random.default_rng(seed)
    F, G = (OctonionField(s, rng.normal(size=s.shape + (8,))) for _ in range(2))
    H = OctonionField(s, alpha * F.values + beta * G.values)
    for op in (lambda X: grad(X), lambda X: cov_laplacian(X, bg).values):
        assert np.allclose(op(H), alpha * op(F) + beta * op(G), atol=1e-9)


class TestTorsion:
    def test_constant_section(self):
        s = LatticeSpec((1,), 8)
        assert not np.any(section_torsion(constant(s)).values)

    def test_rejects_non_unit(self):
        s = LatticeSpec((1,), 8)
        with pytest.raises(DomainError):
            section_torsion(OctonionField(s, 2 * constant(s).values))
        with pytest.raises(DomainError):
            div_torsion(OctonionField(s, 2 * constant(s).values))

    def test_winding_torsion(self):
        errs = []
        for n in (64, 128):
            s = LatticeSpec((1,), n)
            t = section_torsion(winding(s, 1, 2)).values
            exact = np.zeros_like(t)
            exact[0, ..., 1] = -2 * TWO_PI
            errs.append(np.max(np.abs(t - exact)))
        assert 3.8 < errs[0] / errs[1] < 4.2

    def test_constant_section_over_torsion_background(self):
        s = LatticeSpec((1,), 16)
        bg = BackgroundData.from_section(winding(s, 1, 1, direction=6))
        u = random_unit(np.random.default_rng(5))
        t = section_torsion(constant(s, u), bg).values
        expected = oct_mul(oct_mul(u, bg.torsion), inverse(u))
        assert np.allclose(t, expected, atol=1e-12)

    def test_real_residual_second_order(self):
        res = []
        for n in (32, 64):
            s = LatticeSpec((1, 2), n)
            res.append(section_torsion(perturbation(s, 1.0, seed=2)).real_residual())
        assert 3.5 < res[0] / res[1] < 4.5

    def test_tensor_layout(self):
        s = LatticeSpec((1,), 16)
        t = section_torsion(winding(s, 1, 1)).tensor()
        assert t.shape == (16, 7, 7)
        assert np.allclose(t[..., 0, 0], -TWO_PI * np.sin(TWO_PI / 16) / (TWO_PI / 16), atol=1e-12)

    def test_background_divergence_real_part(self):
        s = LatticeSpec((1,), 32)
        bg = BackgroundData.from_section(winding(s, 1, 3, direction=2))
        assert not np.any(bg.torsion[..., 0])
        assert np.allclose(bg.div[..., 0], norm_sq(bg.torsion).sum(axis=0))
        assert not bg.flat and BackgroundData.torsion_free(s).flat


class TestDivergence:
    def test_constant_and_winding_vanish(self):
        s = LatticeSpec((1,), 128)
        assert not np.any(div_torsion(constant(s)))
        assert np.max(np.abs(div_torsion(winding(s, 1, 1))[..., 1:])) < 1e-9

    def test_matches_covariant_divergence_oracle(self):
        # independent discretization: div T = sum_a (grad_a (T_a V)) V^{-1}
        errs = []
        for n in (64, 128):
            s = LatticeSpec((1, 2), n)
            V = perturbation(s, 0.9, seed=4)
            t = section_torsion(V).values
            tv = oct_mul(t, V.values[None])
            oracle = sum(grad(OctonionField(s, tv[a]))[a] for a in range(7))
            oracle = oct_mul(oracle, inverse(V.values))[..., 1:]
            errs.append(np.max(np.abs(div_torsion(V)[..., 1:] - oracle)))
        assert 3.5 < errs[0] / errs[1] < 4.5


class TestCovariance:
    def test_trivial_sections(self):
        s = LatticeSpec((1,), 32)
        A = perturbation(s, 1.0, seed=0)
        assert covariance_residual(A, constant(s)) == 0.0
        u = random_unit(np.random.default_rng(1))
        assert covariance_residual(A, constant(s, u)) < 1e-13

    def test_second_order_convergence(self):
        res = []
        for n in (64, 128, 256):
            s = LatticeSpec((1,), n)
            res.append(covariance_residual(perturbation(s, 1.0, seed=9), winding(s, 1, 1, 3)))
        for a, b in zip(res, res[1:]):
            assert 3.5 < a / b < 4.5

    def test_general_section_convergence(self):
        # a section outside any complex subalgebra: needs the induced product
        res = []
        for n in (64, 128, 256):
            s = LatticeSpec((1,), n)
            res.append(covariance_residual(perturbation(s, 1.0, seed=9),
                                           perturbation(s, 1.5, seed=3)))
        for a, b in zip(res, res[1:]):
            assert 3.5 < a / b < 4.5

    def test_induced_product_used_for_general_background(self):
        s = LatticeSpec((1,), 16)
        U = perturbation(s, 1.5, seed=3)
        bg = BackgroundData.from_section(U)
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=(2,) + s.shape + (8,))
        expected = oct_mul(oct_mul(a, U.values), oct_mul(inverse(U.values), b))
        assert np.allclose(bg.mul(a, b), expected, atol=1e-13)
        assert np.max(np.abs(bg.mul(a, b) - oct_mul(a, b))) > 1e-3

    def test_product_rule_second_order(self):
        res = []
        for n in (64, 128, 256):
            s = LatticeSpec((1,), n)
            A = perturbation(s, 0.7, seed=1)
            B = perturbation(s, 0.4, seed=2)
            res.append(product_rule_residual(A, B, perturbation(s, 1.5, seed=3)))
        for a, b in zip(res, res[1:]):
            assert 3.5 < a / b < 4.5

    def test_exterior_torsion_second_order(self):
        res = []
        for n in (64, 128):
            s = LatticeSpec((1, 2), n)
            res.append(np.max(np.abs(exterior_torsion(perturbation(s, 0.8, seed=6)))))
        assert 3.5 < res[0] / res[1] < 4.5


def test_second_derivative_monitor():
    s = LatticeSpec((1,), 256)
    k = TWO_PI
    assert second_derivative_sup(winding(s, 1, 1)) == pytest.approx(k**4, rel=1e-3)
    assert second_derivative_sup(constant(s)) == 0.0


def test_energy_density_winding():
    s = LatticeSpec((1,), 128)
    lam = energy_density(winding(s, 1, 2))
    assert np.allclose(lam, lam[0]) and lam[0] == pytest.approx((2 * TWO_PI) ** 2, rel=5e-3)


def test_basis_helper():
    assert basis(3)[3] == 1.0
