"""Coarse Galerkin solve tests: triple-product oracle, orthogonality, reporting."""

import numpy as np
import pytest

from mslab import coeff, fem, grid, msbasis, msgalerkin
from mslab.errors import SingularCoarse


@pytest.fixture(scope="module")
def setup():
    pair = grid.NestedPair(4, 16)
    field = coeff.gen_inclusions(pair, 0.15, 1e3, seed=5)
    system = fem.assemble(pair, field, fem.DIFFUSION)
    f = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)
    b = fem.assemble_rhs(pair, fem.DIFFUSION, f)[system.dofs]
    basis = msbasis.build_lssi(pair, field, fem.DIFFUSION, 1, 1)
    return pair, field, system, b, basis


def test_basis_matrix_dense_oracle(setup):
    pair, _, system, _, basis = setup
    Phi = msgalerkin.basis_matrix(system, basis)
    dense = basis.padded_vectors(system.n_full)[system.dofs]
    np.testing.assert_allclose(Phi.toarray(), dense, atol=1e-14)


def test_coarse_matrix_is_triple_product(setup):
    _, _, system, b, basis = setup
    cs = msgalerkin.assemble_coarse(system, b, basis)
    Phi = cs.Phi.toarray()
    oracle = Phi.T @ system.stiffness.toarray() @ Phi
    np.testing.assert_allclose(cs.A_ms, oracle, atol=1e-10 * np.abs(oracle).max())
    np.testing.assert_allclose(cs.b_ms, Phi.T @ b, atol=1e-14)


def test_galerkin_orthogonality(setup):
    """The residual of the coarse solution is A-orthogonal to the space."""
    _, _, system, b, basis = setup
    cs = msgalerkin.assemble_coarse(system, b, basis)
    u_ms, _ = msgalerkin.solve_ms(cs)
    u = fem.solve_spd(system.stiffness, b)
    resid = cs.Phi.T @ (system.stiffness @ (u - u_ms))
    assert np.abs(resid).max() < 1e-8 * np.abs(cs.b_ms).max()


def test_cea_best_approximation(setup):
    """Galerkin error equals the energy-norm best approximation error."""
    _, _, system, b, basis = setup
    cs = msgalerkin.assemble_coarse(system, b, basis)
    u_ms, _ = msgalerkin.solve_ms(cs)
    u = fem.solve_spd(system.stiffness, b)
    e_gal = fem.energy_norm(system.stiffness, u - u_ms)
    Phi = cs.Phi.toarray()
    G = Phi.T @ system.stiffness.toarray() @ Phi
    rhs = Phi.T @ (system.stiffness @ u)
    u_best = Phi @ np.linalg.solve(G, rhs)
    e_best = fem.energy_norm(system.stiffness, u - u_best)
    assert e_gal <= e_best * (1 + 1e-10)


def test_singular_coarse_detected(setup):
    _, _, system, b, _ = setup
    rng = np.random.default_rng(0)
    col = rng.standard_normal(system.ndof)
    Phi = np.column_stack([col, col])                   # rank 1
    with pytest.raises(SingularCoarse):
        msgalerkin.assemble_coarse(system, b, Phi)


def test_solve_ms_reconstruction(setup):
    _, _, system, b, basis = setup
    cs = msgalerkin.assemble_coarse(system, b, basis)
    u_ms, c = msgalerkin.solve_ms(cs)
    np.testing.assert_allclose(u_ms, cs.Phi @ c, atol=1e-14)
    np.testing.assert_allclose(cs.A_ms @ c, cs.b_ms, atol=1e-8 * np.abs(cs.b_ms).max())


def test_result_row_csv():
    row = msgalerkin.ResultRow(
        method="lssi-2", n=2, m=4, H=0.25, h=0.0625, contrast=1e3, channel_len=0,
        e_energy=1.2e-2, e_L2=3.4e-4, DoF=64, wall_time_s=1.5, NoLP=128)
    line = row.to_csv()
    parts = line.split(",")
    assert len(parts) == len(msgalerkin.CSV_COLUMNS)
    assert parts[0] == "lssi-2"
    assert parts[10] == "1.500"
    # timing blanked when requested
    assert row.to_csv(with_timing=False).split(",")[10] == ""


def test_report_errors_match_direct(setup):
    _, _, system, b, basis = setup
    cs = msgalerkin.assemble_coarse(system, b, basis)
    u_ms, _ = msgalerkin.solve_ms(cs)
    u = fem.solve_spd(system.stiffness, b)
    row = msgalerkin.report(u, u_ms, system.stiffness, system.mass, {
        "method": "lssi-1", "n": 1, "m": 1, "H": 0.25, "h": 0.0625,
        "contrast": 1e3, "DoF": 64, "wall_time_s": 0.0, "NoLP": 64})
    ea, el = fem.relative_errors(u, u_ms, system.stiffness, system.mass)
    assert row.e_energy == ea
    assert row.e_L2 == el


def test_cond_estimate_positive(setup):
    _, _, system, b, basis = setup
    cs = msgalerkin.assemble_coarse(system, b, basis)
    assert cs.cond_estimate >= 1.0
