"""FEM kernel tests: element matrices, assembly, solvers and convergence."""

import numpy as np
import pytest
import scipy.sparse.linalg as spla

from mslab import coeff, fem, grid
from mslab.errors import NoConvergence, NotSPD


def unit_field(pair):
    return coeff.CoefficientField(np.ones((pair.fine.n, pair.fine.n)))


def test_element_stiffness_scalar_properties():
    K = fem.element_stiffness(fem.DIFFUSION, 1.0, 0.1)
    np.testing.assert_allclose(K, K.T)
    np.testing.assert_allclose(K.sum(axis=1), 0.0, atol=1e-14)   # constants in kernel
    w = np.linalg.eigvalsh(K)
    assert abs(w[0]) < 1e-14 and w[1] > 0                        # rank 3


def test_element_stiffness_quadrature_oracle():
    """Compare the closed-form scalar stiffness to 2x2 Gauss integration."""
    K = np.zeros((4, 4))
    for xi in fem._GAUSS:
        for eta in fem._GAUSS:
            dxi, deta = fem._shape_grads(xi, eta)
            G = np.vstack([dxi, deta])
            K += 0.25 * G.T @ G
    np.testing.assert_allclose(K, fem._K_SCALAR, atol=1e-14)


def test_element_mass_integrates_constants():
    h = 0.25
    M = fem.element_mass(h)
    assert abs(M.sum() - h * h) < 1e-15                          # integral of 1
    np.testing.assert_allclose(M, M.T)
    assert np.linalg.eigvalsh(M)[0] > 0


def test_elasticity_element_rigid_body_modes():
    Ke = fem.element_stiffness(fem.ELASTICITY, (1.0, 1.0), 0.5)
    np.testing.assert_allclose(Ke, Ke.T, atol=1e-14)
    w = np.linalg.eigvalsh(Ke)
    assert np.all(np.abs(w[:3]) < 1e-12)                         # 3 rigid body modes
    assert w[3] > 1e-10
    # translations explicitly
    tx = np.zeros(8); tx[0::2] = 1.0
    ty = np.zeros(8); ty[1::2] = 1.0
    np.testing.assert_allclose(Ke @ tx, 0.0, atol=1e-13)
    np.testing.assert_allclose(Ke @ ty, 0.0, atol=1e-13)


def test_elasticity_mass_blocks():
    M = fem.element_mass(0.5, fem.ELASTICITY)
    np.testing.assert_allclose(M[0::2, 0::2], fem.element_mass(0.5))
    np.testing.assert_allclose(M[0::2, 1::2], 0.0)


def test_assemble_global_shapes():
    pair = grid.NestedPair(2, 8)
    sysd = fem.assemble(pair, unit_field(pair), fem.DIFFUSION)
    assert sysd.ndof == 49                                       # (n-1)^2 free nodes
    syse = fem.assemble(pair, unit_field(pair), fem.ELASTICITY)
    assert syse.ndof == 98


def test_assemble_patch_matches_submatrix():
    """Patch assembly equals the global matrix restricted to the patch DOFs
    when the patch spans the whole mesh."""
    pair = grid.NestedPair(3, 9)
    field = coeff.gen_inclusions(pair, 0.1, 1e3, seed=1)
    gsys = fem.assemble(pair, field, fem.DIFFUSION)
    p = grid.build_patch(pair, 4, 5)                             # whole domain
    psys = fem.assemble(pair, field, fem.DIFFUSION, patch=p)
    np.testing.assert_array_equal(psys.dofs, gsys.dofs)
    np.testing.assert_allclose(psys.stiffness.toarray(), gsys.stiffness.toarray())
    np.testing.assert_allclose(psys.mass.toarray(), gsys.mass.toarray())


def test_m_pair_consistent_with_mass():
    pair = grid.NestedPair(3, 9)
    field = unit_field(pair)
    sys_ = fem.assemble(pair, field, fem.DIFFUSION)
    v_full = np.cos(np.arange(sys_.n_full) * 0.1)
    lhs = sys_.m_pair @ v_full
    # against a vector supported on the free DOFs, m_pair reduces to the mass
    w = np.zeros(sys_.n_full)
    w[sys_.dofs] = v_full[sys_.dofs]
    np.testing.assert_allclose(sys_.m_pair @ w, sys_.mass @ v_full[sys_.dofs])
    assert lhs.shape == (sys_.ndof,)


def test_spd_factor_rejects_indefinite():
    import scipy.sparse as sp
    A = sp.csc_matrix(np.array([[1.0, 2.0], [2.0, 1.0]]))        # eigenvalues 3, -1
    with pytest.raises(NotSPD):
        fem.SpdFactor(A)


def test_solve_spd_direct_vs_cg():
    pair = grid.NestedPair(2, 8)
    sys_ = fem.assemble(pair, unit_field(pair), fem.DIFFUSION)
    b = np.sin(np.arange(sys_.ndof) * 0.3)
    xd = fem.solve_spd(sys_.stiffness, b, method="direct")
    xc = fem.solve_spd(sys_.stiffness, b, method="cg", tol=1e-12)
    np.testing.assert_allclose(xd, xc, atol=1e-8)


def test_cg_no_convergence_reports_residual():
    pair = grid.NestedPair(2, 16)
    sys_ = fem.assemble(pair, unit_field(pair), fem.DIFFUSION)
    b = np.ones(sys_.ndof)
    with pytest.raises(NoConvergence) as err:
        fem.solve_spd(sys_.stiffness, b, method="cg", tol=1e-14, maxiter=2)
    assert err.value.residual > 0


def test_rhs_integrates_exactly_for_bilinear_f():
    """2x2 Gauss is exact for bilinear integrands, so f=1 gives row sums of M."""
    pair = grid.NestedPair(2, 6)
    b = fem.assemble_rhs(pair, fem.DIFFUSION, lambda x, y: np.ones_like(x))
    sys_ = fem.assemble(pair, unit_field(pair), fem.DIFFUSION)
    lump = np.asarray(sys_.m_pair.sum(axis=1)).ravel()
    np.testing.assert_allclose(b[sys_.dofs], lump, atol=1e-14)


def manufactured_error(n):
    """True H1-seminorm error against u = sin(pi x) sin(pi y), f = 2 pi^2 u,
    computed by elementwise 2x2 Gauss quadrature of the gradient mismatch."""
    pair = grid.NestedPair(2, n)
    field = unit_field(pair)
    f = lambda x, y: 2 * np.pi ** 2 * np.sin(np.pi * x) * np.sin(np.pi * y)
    u_pad, sys_, _ = fem.reference_solve(pair, field, fem.DIFFUSION, f)
    mesh = pair.fine
    h = mesh.h
    conn = mesh.elem_nodes
    ue = u_pad[conn]                                     # (ne, 4)
    x0 = mesh.coords[conn[:, 0]]
    err2 = 0.0
    for xi in fem._GAUSS:
        for eta in fem._GAUSS:
            dxi, deta = fem._shape_grads(xi, eta)
            gx = ue @ dxi / h
            gy = ue @ deta / h
            xs = x0[:, 0] + xi * h
            ys = x0[:, 1] + eta * h
            ex = np.pi * np.cos(np.pi * xs) * np.sin(np.pi * ys)
            ey = np.pi * np.sin(np.pi * xs) * np.cos(np.pi * ys)
            err2 += 0.25 * h * h * np.sum((gx - ex) ** 2 + (gy - ey) ** 2)
    return np.sqrt(err2)


def test_manufactured_solution_first_order_in_energy():
    errs = [manufactured_error(n) for n in (8, 16, 32)]
    r1 = errs[0] / errs[1]
    r2 = errs[1] / errs[2]
    assert 1.8 <= r1 <= 2.2
    assert 1.8 <= r2 <= 2.2


def test_elasticity_reference_solve_runs():
    pair = grid.NestedPair(2, 8)
    field = unit_field(pair)
    f = lambda x, y: (np.sin(np.pi * x) * np.sin(np.pi * y), np.ones_like(x))
    u_pad, sys_, b = fem.reference_solve(pair, field, fem.ELASTICITY, f)
    assert u_pad.size == 2 * pair.fine.n_nodes
    res = sys_.stiffness @ u_pad[sys_.dofs] - b
    assert np.linalg.norm(res) < 1e-10 * np.linalg.norm(b)


def test_global_stiffness_spectrum_positive():
    pair = grid.NestedPair(2, 8)
    sys_ = fem.assemble(pair, unit_field(pair), fem.ELASTICITY)
    w = spla.eigsh(sys_.stiffness, k=1, which="SA",
                   return_eigenvectors=False)
    assert w[0] > 0                                              # Dirichlet kills rigid modes
