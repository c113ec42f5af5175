"""Material tensor validation and the derived block operators."""

import numpy as np
import pytest

from ferrosolve import (NonPositiveDefinite, assemble_block_A,
                        assemble_block_D, isotropic_stiffness, make_tensors,
                        pack_sym, unpack_sym)
from ferrosolve.tensors import constitutive_stress_field


def test_packing_preserves_frobenius_inner_product():
    rng = np.random.default_rng(7)
    for d in (1, 2, 3):
        A = rng.standard_normal((d, d))
        A = 0.5 * (A + A.T)
        B = rng.standard_normal((d, d))
        B = 0.5 * (B + B.T)
        lhs = np.sum(A * B)
        rhs = np.dot(pack_sym(A), pack_sym(B))
        assert lhs == pytest.approx(rhs, rel=1e-14)
        assert np.allclose(unpack_sym(pack_sym(A)), A)


def test_isotropic_stiffness_eigenvalues_d2():
    # lam = mu = 1: deviatoric modes see 2 mu, the trace mode 2 mu + d lam
    C = isotropic_stiffness(2, 1.0, 1.0)
    w = np.sort(np.linalg.eigvalsh(C))
    assert w[0] == pytest.approx(2.0, rel=1e-14)
    assert w[-1] == pytest.approx(4.0, rel=1e-14)


def test_isotropic_stiffness_matches_tensor_contraction():
    rng = np.random.default_rng(3)
    lam, mu = 1.3, 0.8
    for d in (2, 3):
        C = isotropic_stiffness(d, lam, mu)
        eps = rng.standard_normal((d, d))
        eps = 0.5 * (eps + eps.T)
        sigma_ref = 2 * mu * eps + lam * np.trace(eps) * np.eye(d)
        sigma = unpack_sym(C @ pack_sym(eps))
        assert np.allclose(sigma, sigma_ref, atol=1e-13)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_make_tensors_shapes(dim):
    t = make_tensors(dim, ("isotropic", 1.0, 1.0), 2.0, hardening=0.5)
    s = dim * (dim + 1) // 2
    assert t.C.shape == (s, s)
    assert t.eps.shape == (dim, dim)
    assert t.e_piezo.shape == (dim, s)
    assert t.L_hard.shape == (s + dim, s + dim)
    assert t.hardening_definite


def test_make_tensors_rejects_indefinite():
    with pytest.raises(NonPositiveDefinite):
        make_tensors(1, -1.0, 1.0)
    with pytest.raises(NonPositiveDefinite):
        make_tensors(2, ("isotropic", 1.0, 1.0), [-0.5, 1.0])
    with pytest.raises(NonPositiveDefinite):
        make_tensors(1, 1.0, 1.0, hardening=-0.1)


def test_block_A_c0_equals_min_of_block_eigenvalues():
    rng = np.random.default_rng(11)
    for dim in (1, 2, 3):
        s = dim * (dim + 1) // 2
        e = rng.standard_normal((dim, s))
        t = make_tensors(dim, ("isotropic", 0.7, 1.1), np.diag(rng.uniform(0.5, 2.0, dim)),
                         coupling=e)
        block = assemble_block_A(t)
        expected = min(np.linalg.eigvalsh(t.C).min(), np.linalg.eigvalsh(t.eps).min())
        assert block.c0 == pytest.approx(expected, rel=1e-12)
        # skew coupling blocks cancel in the quadratic form
        v = rng.standard_normal(s + dim)
        quad = v @ block.matrix @ v
        split = v[:s] @ t.C @ v[:s] + v[s:] @ t.eps @ v[s:]
        assert quad == pytest.approx(split, rel=1e-12)


def test_block_D_d1_closed_form():
    # C = eps = e = 1 in one dimension
    t = make_tensors(1, 1.0, 1.0, coupling=1.0)
    D = assemble_block_D(t).matrix
    assert np.allclose(D, [[2.0, -1.0], [-1.0, 1.0]], atol=1e-14)


def test_block_D_inverts_constitutive_relations():
    """(sigma, E) = D (strain - r, D_field - P) reproduces the constitutive laws."""
    rng = np.random.default_rng(23)
    for dim in (1, 2, 3):
        s = dim * (dim + 1) // 2
        t = make_tensors(dim, ("isotropic", 1.2, 0.9),
                         np.diag(rng.uniform(1.0, 2.0, dim)),
                         coupling=0.3 * rng.standard_normal((dim, s)))
        block = assemble_block_D(t)
        eps_s = rng.standard_normal((5, s))
        E = rng.standard_normal((5, dim))
        r = rng.standard_normal((5, s))
        P = rng.standard_normal((5, dim))
        sigma, Dfield = constitutive_stress_field(t, eps_s, E, r, P)
        reversible = np.concatenate([eps_s - r, Dfield - P], axis=-1)
        out = reversible @ block.matrix.T
        assert np.allclose(out[:, :s], sigma, atol=1e-12)
        assert np.allclose(out[:, s:], E, atol=1e-12)


def test_block_D_sqrt_factors():
    t = make_tensors(2, ("isotropic", 1.0, 2.0), [1.5, 0.5],
                     coupling=0.2 * np.ones((2, 3)))
    block = assemble_block_D(t)
    assert np.allclose(block.sqrt @ block.sqrt, block.matrix, atol=1e-12)
    assert np.allclose(block.inv_sqrt @ block.sqrt, np.eye(5), atol=1e-12)
    assert np.allclose(block.inverse @ block.matrix, np.eye(5), atol=1e-12)
    assert block.lam_min > 0.0
