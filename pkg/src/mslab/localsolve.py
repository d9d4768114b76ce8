"""Constrained local solver shared by the multiscale basis constructions.

A PatchSystem holds the patch stiffness/mass on the interior DOFs together
with a cached factorization; saddle problems with L2 constraints are solved
through the Schur complement of the factorized stiffness.
"""

import numpy as np
import scipy.linalg as sla

from . import fem
from .errors import DependentConstraints


class PatchSystem:
    """Factorized local operator on the interior DOFs of one patch."""

    def __init__(self, patch, system):
        self.patch = patch
        self.system = system
        self.A = system.stiffness
        self.M = system.mass
        self._factor = fem.SpdFactor(self.A)

    @classmethod
    def build(cls, pair, field, kind, patch):
        return cls(patch, fem.assemble(pair, field, kind, patch=patch))

    @property
    def ndof(self):
        return self.A.shape[0]

    def solve(self, b):
        """A_omega^{-1} b for a vector or a column block."""
        return self._factor.solve(b)

    def pair_full(self, v_full):
        """Exact L2 pairing of a full fine-grid function against interior tests."""
        return self.system.m_pair @ np.asarray(v_full)

    def restrict(self, v_full):
        return self.system.restrict(v_full)

    def pad(self, v):
        return self.system.pad(v)


class ConstraintSet:
    """Mass-weighted constraint vectors b_j for a patch saddle problem."""

    def __init__(self, B):
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        self.B = B

    @classmethod
    def from_local_functions(cls, sys, funcs):
        """Constraints (phi_j, .)_{L2} for functions given on the interior DOFs."""
        F = np.asarray(funcs, dtype=float)
        if F.ndim == 1:
            F = F[:, None]
        return cls(sys.M @ F)

    @property
    def count(self):
        return self.B.shape[1]


def _schur_solve(sys, B, rtol=1e-12):
    """Y = A^{-1}B and a Cholesky factor of S = B^T Y; raises on dependence."""
    Y = sys.solve(B)
    S = B.T @ Y
    S = 0.5 * (S + S.T)
    try:
        cf = sla.cho_factor(S, lower=True)
    except sla.LinAlgError:
        raise DependentConstraints("constraint Schur complement is not positive definite")
    piv = np.diag(cf[0]) ** 2
    if piv.min() <= rtol * np.abs(S).max():
        raise DependentConstraints("constraint vectors dependent to tolerance")
    return Y, cf


def solve_saddle(sys, constraints, k, rtol=1e-12):
    """Solve the patch saddle problem with Kronecker right-hand side e_k.

    Returns (phi, mu) with a(phi, v) + sum_j mu_j b_j^T v = 0 for interior v
    and b_j^T phi = delta_{jk}.
    """
    B = constraints.B
    if not 0 <= k < B.shape[1]:
        raise ValueError("target index out of range")
    Y, cf = _schur_solve(sys, B, rtol)
    e = np.zeros(B.shape[1])
    e[k] = 1.0
    c = sla.cho_solve(cf, e)
    mu = -c
    phi = Y @ c
    return phi, mu


def solve_saddle_block(sys, constraints, targets=None, rhs=None, rtol=1e-12):
    """All saddle solutions at once: column k solves the RHS e_{targets[k]},
    or the columns of ``rhs`` (L x p) when given.

    Shares one factorization and one Schur complement across the block.
    """
    B = constraints.B
    Y, cf = _schur_solve(sys, B, rtol)
    L = B.shape[1]
    if rhs is None:
        if targets is None:
            targets = np.arange(L)
        rhs = np.zeros((L, len(targets)))
        rhs[targets, np.arange(len(targets))] = 1.0
    C = sla.cho_solve(cf, rhs)
    return Y @ C


def apply_local_inverse(sys, g):
    """Discrete local solution operator: A_omega^{-1} M_omega g."""
    return sys.solve(sys.M @ np.asarray(g))
