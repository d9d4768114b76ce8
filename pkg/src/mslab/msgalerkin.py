"""Coarse Galerkin solve in a multiscale space and result reporting."""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import fem
from .errors import SingularCoarse

CSV_COLUMNS = ["method", "n", "m", "H", "h", "contrast", "channel_len",
               "e_energy", "e_L2", "DoF", "wall_time_s", "NoLP"]


def basis_matrix(system, basis):
    """Sparse fine-DOF x coarse-DoF matrix of all basis vectors."""
    free_index = np.full(system.n_full, -1, dtype=np.int64)
    free_index[system.dofs] = np.arange(system.ndof)
    nb = fem.nblock(basis.kind)
    rows, cols, vals = [], [], []
    col0 = 0
    for pb in basis.patch_bases:
        dofs = pb.patch.interior_dofs(nb)
        r = free_index[dofs]
        if np.any(r < 0):
            raise ValueError("basis vector supported outside the free DOFs")
        for k in range(pb.count):
            rows.append(r)
            cols.append(np.full(r.size, col0 + k, dtype=np.int64))
            vals.append(pb.vectors[:, k])
        col0 += pb.count
    Phi = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(system.ndof, col0),
    ).tocsr()
    return Phi


class CoarseSystem:
    """Galerkin triple product over a multiscale basis, ready to solve."""

    def __init__(self, Phi, A_ms, b_ms, factor, cond_estimate):
        self.Phi = Phi
        self.A_ms = A_ms
        self.b_ms = b_ms
        self._factor = factor
        self.cond_estimate = cond_estimate

    @property
    def dof(self):
        return self.A_ms.shape[0]


def assemble_coarse(system, b, basis_or_phi):
    """Form Phi^T A Phi and Phi^T b; SPD-checked by attempted factorization."""
    if sp.issparse(basis_or_phi) or isinstance(basis_or_phi, np.ndarray):
        Phi = sp.csr_matrix(basis_or_phi)
    else:
        Phi = basis_matrix(system, basis_or_phi)
    A = system.stiffness
    A_ms = (Phi.T @ (A @ Phi)).toarray()
    A_ms = 0.5 * (A_ms + A_ms.T)
    b_ms = Phi.T @ np.asarray(b)
    try:
        factor = sla.cho_factor(A_ms, lower=True)
    except sla.LinAlgError:
        w = sla.eigvalsh(A_ms, subset_by_index=[0, 0])[0]
        raise SingularCoarse(
            f"coarse matrix not SPD (smallest eigenvalue ~ {w:.3e})")
    piv = np.diag(factor[0])
    cond = float((piv.max() / piv.min()) ** 2) if piv.size else 1.0
    return CoarseSystem(Phi, A_ms, b_ms, factor, cond)


def solve_ms(cs):
    """Solve the coarse system; returns (fine-grid free vector, coarse coefficients)."""
    c = sla.cho_solve(cs._factor, cs.b_ms)
    u = cs.Phi @ c
    return u, c


@dataclass
class ResultRow:
    method: str
    n: int
    m: int
    H: float
    h: float
    contrast: float
    channel_len: int
    e_energy: float
    e_L2: float
    DoF: int
    wall_time_s: float
    NoLP: int

    def to_csv(self, with_timing=True):
        t = f"{self.wall_time_s:.3f}" if with_timing else ""
        return ",".join([
            self.method, str(self.n), str(self.m),
            f"{self.H:.17g}", f"{self.h:.17g}", f"{self.contrast:.17g}",
            str(self.channel_len),
            f"{self.e_energy:.10e}", f"{self.e_L2:.10e}",
            str(self.DoF), t, str(self.NoLP),
        ])

    @staticmethod
    def header():
        return ",".join(CSV_COLUMNS)


def report(u_ref, u_ms, A, M, metadata):
    """Build a ResultRow from a reference/multiscale solution pair.

    metadata must provide: method, n, m, H, h, contrast, channel_len, DoF,
    wall_time_s, NoLP.
    """
    ea, el = fem.relative_errors(np.asarray(u_ref), np.asarray(u_ms), A, M)
    return ResultRow(
        method=metadata["method"], n=int(metadata["n"]), m=int(metadata["m"]),
        H=float(metadata["H"]), h=float(metadata["h"]),
        contrast=float(metadata["contrast"]),
        channel_len=int(metadata.get("channel_len", 0)),
        e_energy=ea, e_L2=el, DoF=int(metadata["DoF"]),
        wall_time_s=float(metadata.get("wall_time_s", 0.0)),
        NoLP=int(metadata["NoLP"]),
    )
