"""Multiscale basis construction: LOD baseline, LSSI-n and LKSI-n spaces.

Every basis vector lives on the interior DOFs of its patch and is zero
elsewhere by construction.  Patches are processed one at a time so that only
one local factorization is alive at once; build_bases shares that
factorization across all requested methods on the same coefficient field.
"""

import logging
import time

import numpy as np

from . import fem
from .errors import DependentConstraints
from .localsolve import ConstraintSet, PatchSystem, solve_saddle_block

log = logging.getLogger(__name__)

LOD = "lod"
LSSI = "lssi"
LKSI = "lksi"


class PatchBasis:
    """Basis vectors of one patch, stored on the patch interior DOFs."""

    def __init__(self, patch, vectors, rounds):
        self.patch = patch
        vectors = np.asarray(vectors, dtype=float)
        if vectors.ndim == 1:
            vectors = vectors[:, None]
        if vectors.shape[0] % patch.interior_nodes.size != 0:
            raise ValueError("vector length inconsistent with patch")
        self.vectors = vectors
        self.rounds = list(rounds)

    @property
    def count(self):
        return self.vectors.shape[1]


class MsBasis:
    """Collection of per-patch basis vectors defining a multiscale space."""

    def __init__(self, method, n_iter, kind, patch_bases):
        self.method = method
        self.n_iter = n_iter
        self.kind = kind
        self.patch_bases = patch_bases

    @property
    def total_dofs(self):
        return sum(pb.count for pb in self.patch_bases)

    def padded_vectors(self, n_full):
        """All basis vectors as full fine-grid columns (dense, for diagnostics)."""
        nb = fem.nblock(self.kind)
        out = np.zeros((n_full, self.total_dofs))
        col = 0
        for pb in self.patch_bases:
            dofs = pb.patch.interior_dofs(nb)
            out[dofs, col:col + pb.count] = pb.vectors
            col += pb.count
        return out

    def save(self, path):
        """Text dump: one block per vector (patch id, method, round, values)."""
        nb = fem.nblock(self.kind)
        with open(path, "w") as f:
            for pb in self.patch_bases:
                dofs = pb.patch.interior_dofs(nb)
                for k in range(pb.count):
                    f.write(f"# patch {pb.patch.center} method {self.method} "
                            f"round {pb.rounds[k]} ndof {dofs.size}\n")
                    for d, v in zip(dofs, pb.vectors[:, k]):
                        f.write(f"{d} {v:.17g}\n")


def iter_patch_systems(pair, field, kind, m, patches=None):
    """Lazily yield one factorized patch system at a time (bounded memory)."""
    from .grid import build_all_patches

    if patches is None:
        patches = build_all_patches(pair, m)
    for p in patches:
        yield PatchSystem.build(pair, field, kind, p)


def build_patch_systems(pair, field, kind, m, patches=None):
    """All patch systems as a list; only for desk-scale problems."""
    return list(iter_patch_systems(pair, field, kind, m, patches))


def _coarse_cell_box(pair, coarse_elem):
    N, r, n = pair.coarse.n, pair.r, pair.fine.n
    ci, cj = coarse_elem % N, coarse_elem // N
    return ci, cj, r, n


def element_shape_functions(pair, coarse_elem, kind=fem.DIFFUSION):
    """The Q1 shape functions of one coarse element, sampled on its fine nodes.

    Returns (dofs, V): fine DOF indices of the closed cell and a matrix whose
    columns are the 4 shapes (scalar) or 8 per-component shapes (elasticity).
    """
    ci, cj, r, n = _coarse_cell_box(pair, coarse_elem)
    fi = np.arange(ci * r, (ci + 1) * r + 1)
    fj = np.arange(cj * r, (cj + 1) * r + 1)
    FI, FJ = np.meshgrid(fi, fj, indexing="xy")
    nodes = (FJ * (n + 1) + FI).ravel()
    xi = (FI.ravel() - ci * r) / r
    eta = (FJ.ravel() - cj * r) / r
    shapes = np.column_stack(
        [(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta]
    )
    nb = fem.nblock(kind)
    if nb == 1:
        return nodes, shapes
    dofs = np.empty(nodes.size * nb, dtype=np.int64)
    for c in range(nb):
        dofs[c::nb] = nb * nodes + c
    V = np.zeros((dofs.size, 4 * nb))
    for s in range(4):
        for c in range(nb):
            V[c::nb, nb * s + c] = shapes[:, s]
    return dofs, V


def seed_bilinear(pair, i, kind=fem.DIFFUSION):
    """LSSI/LOD seeds: the coarse Q1 shapes of element K_i (4 scalar / 8 elasticity)."""
    return element_shape_functions(pair, i, kind)


def seed_constant(pair, i, kind=fem.DIFFUSION):
    """LKSI seed: indicator of the fine nodes strictly inside K_i (1 scalar / 2 elasticity)."""
    ci, cj, r, n = _coarse_cell_box(pair, i)
    fi = np.arange(ci * r + 1, (ci + 1) * r)
    fj = np.arange(cj * r + 1, (cj + 1) * r)
    FI, FJ = np.meshgrid(fi, fj, indexing="xy")
    nodes = (FJ * (n + 1) + FI).ravel()
    nb = fem.nblock(kind)
    if nb == 1:
        return nodes, np.ones((nodes.size, 1))
    dofs = np.empty(nodes.size * nb, dtype=np.int64)
    for c in range(nb):
        dofs[c::nb] = nb * nodes + c
    V = np.zeros((dofs.size, nb))
    for c in range(nb):
        V[c::nb, c] = 1.0
    return dofs, V


def restrict_entry(entry, sys, kind):
    """Restrict full-grid seed columns to the interior DOFs of a patch system."""
    dofs, V = entry
    nb = fem.nblock(kind)
    pos = {int(d): k for k, d in enumerate(sys.patch.interior_dofs(nb))}
    out = np.zeros((sys.ndof, V.shape[1]))
    for row, d in enumerate(dofs):
        k = pos.get(int(d))
        if k is not None:
            out[k] = V[row]
    return out


def m_orthonormalize(M, V, drop_tol=1e-10):
    """Modified Gram-Schmidt in the M inner product; drops dependent columns.

    Returns (Q, kept_indices).
    """
    V = np.array(V, dtype=float)
    cols = []
    kept = []
    mcols = []
    for k in range(V.shape[1]):
        v = V[:, k].copy()
        norm0 = np.sqrt(max(v @ (M @ v), 0.0))
        for q, mq in zip(cols, mcols):
            v -= (mq @ v) * q
        mv = M @ v
        nrm = np.sqrt(max(v @ mv, 0.0))
        if norm0 == 0.0 or nrm <= drop_tol * norm0:
            continue
        v /= nrm
        cols.append(v)
        mcols.append(mv / nrm)
        kept.append(k)
    Q = np.column_stack(cols) if cols else np.zeros((V.shape[0], 0))
    return Q, kept


class BuildStats:
    """Counts the saddle solves performed during a basis construction."""

    def __init__(self):
        self.n_local_problems = 0


def _lssi_patch(sys, pair, kind, n, seeds=None, stats=None):
    entry = seeds if seeds is not None else seed_bilinear(pair, sys.patch.center, kind)
    Phi = restrict_entry(entry, sys, kind)
    L = Phi.shape[1]
    for rnd in range(1, n + 1):
        constraints = ConstraintSet.from_local_functions(sys, Phi)
        try:
            Phi = solve_saddle_block(sys, constraints)
        except DependentConstraints as exc:
            raise DependentConstraints(
                f"patch {sys.patch.center}, round {rnd}: {exc}") from exc
        if stats is not None:
            stats.n_local_problems += L
    Q, kept = m_orthonormalize(sys.M, Phi)
    if len(kept) != L:
        raise DependentConstraints(
            f"patch {sys.patch.center}: iterates degenerate after round {n}")
    return PatchBasis(sys.patch, Q, [n] * L)


def _lksi_patch(sys, pair, kind, n, seeds=None, stats=None, include_seed=False):
    entry = seeds if seeds is not None else seed_constant(pair, sys.patch.center, kind)
    Psi0 = restrict_entry(entry, sys, kind)
    collected = []
    rounds = []
    for chain in range(Psi0.shape[1]):
        psi = Psi0[:, chain]
        chain_hist = []
        for k in range(1, n + 1):
            b = sys.M @ psi
            y = sys.solve(b)
            s = b @ y
            if s <= 0.0:
                log.info("patch %d chain %d: breakdown at step %d",
                         sys.patch.center, chain, k)
                break
            psi_next = y / s
            if stats is not None:
                stats.n_local_problems += 1
            # stagnation check: new iterate adds nothing to the Krylov span
            # of the previous iterates (the seed itself is not part of it)
            if chain_hist:
                _, kept = m_orthonormalize(
                    sys.M, np.column_stack(chain_hist + [psi_next]))
                if len(kept) <= len(chain_hist):
                    log.info("patch %d chain %d: Krylov space stagnated at step %d",
                             sys.patch.center, chain, k)
                    break
            chain_hist.append(psi_next)
            collected.append(psi_next)
            rounds.append(k)
            psi = psi_next
        if include_seed:
            collected.insert(0, Psi0[:, chain])
            rounds.insert(0, 0)
    V = np.column_stack(collected)
    Q, kept = m_orthonormalize(sys.M, V)
    return PatchBasis(sys.patch, Q, [rounds[k] for k in kept])


def _lod_patch(sys, pair, kind, stats=None):
    patch = sys.patch
    nshape = 4 * fem.nblock(kind)
    cols = []
    for T in patch.coarse_elems:
        dofs, V = element_shape_functions(pair, int(T), kind)
        cols.append(sys.system.m_pair[:, dofs] @ V)
    B = np.hstack(cols)
    # the baseline basis is the energy minimizer that reproduces the center
    # element's shape functions under every constraint functional of the
    # patch; unlike a delta right-hand side, this decays exponentially away
    # from the center element, so moderate oversampling suffices
    lam = restrict_entry(seed_bilinear(pair, patch.center, kind), sys, kind)
    try:
        Phi = solve_saddle_block(sys, ConstraintSet(B), rhs=B.T @ lam)
    except DependentConstraints as exc:
        raise DependentConstraints(f"patch {patch.center}: {exc}") from exc
    if stats is not None:
        stats.n_local_problems += nshape
    Q, kept = m_orthonormalize(sys.M, Phi)
    if len(kept) != nshape:
        raise DependentConstraints(f"patch {patch.center}: degenerate baseline basis")
    return PatchBasis(patch, Q, [1] * nshape)


def _patch_basis(sys, pair, kind, name, n, stats, include_seed=False):
    if name == LOD:
        return _lod_patch(sys, pair, kind, stats=stats)
    if name == LSSI:
        return _lssi_patch(sys, pair, kind, n, stats=stats)
    if name == LKSI:
        return _lksi_patch(sys, pair, kind, n, stats=stats,
                           include_seed=include_seed)
    raise ValueError(f"unknown method: {name}")


def build_bases(pair, field, kind, m, requests, patches=None):
    """Build several bases in one pass over the patches.

    requests is a list of (method, n); returns a list of
    (label, MsBasis, BuildStats, wall_seconds) in request order, where each
    wall time includes the shared local-factorization cost.
    """
    labels = [name if name == LOD else f"{name}-{n}" for name, n in requests]
    per = {lab: [] for lab in labels}
    stats = {lab: BuildStats() for lab in labels}
    secs = {lab: 0.0 for lab in labels}
    t_shared = 0.0
    from .grid import build_all_patches

    if patches is None:
        patches = build_all_patches(pair, m)
    for p in patches:
        t0 = time.perf_counter()
        sys = PatchSystem.build(pair, field, kind, p)
        t_shared += time.perf_counter() - t0
        for lab, (name, n) in zip(labels, requests):
            t0 = time.perf_counter()
            per[lab].append(_patch_basis(sys, pair, kind, name, n, stats[lab]))
            secs[lab] += time.perf_counter() - t0
    out = []
    for lab, (name, n) in zip(labels, requests):
        basis = MsBasis(name, n, kind, per[lab])
        out.append((lab, basis, stats[lab], secs[lab] + t_shared))
    return out


def build_lssi(pair, field, kind, m, n, seeds=None, systems=None, stats=None):
    """n rounds of constrained local subspace iteration per patch."""
    if n < 1:
        raise ValueError("iteration count must be >= 1")
    if systems is None:
        systems = iter_patch_systems(pair, field, kind, m)
    bases = []
    for sys in systems:
        entry = seeds[sys.patch.center] if seeds is not None else None
        bases.append(_lssi_patch(sys, pair, kind, n, seeds=entry, stats=stats))
    return MsBasis(LSSI, n, kind, bases)


def build_lksi(pair, field, kind, m, n, seeds=None, systems=None, stats=None,
               include_seed=False):
    """n single-constraint solves per patch; basis = collected iterates.

    On Krylov breakdown (stagnated iterate) the chain is truncated and the
    event logged; the basis keeps the iterates gathered so far.
    """
    if n < 1:
        raise ValueError("iteration count must be >= 1")
    if systems is None:
        systems = iter_patch_systems(pair, field, kind, m)
    bases = []
    for sys in systems:
        entry = seeds[sys.patch.center] if seeds is not None else None
        bases.append(_lksi_patch(sys, pair, kind, n, seeds=entry, stats=stats,
                                 include_seed=include_seed))
    return MsBasis(LKSI, n, kind, bases)


def build_lod(pair, field, kind, m, systems=None, stats=None):
    """Element-based one-round orthogonal decomposition baseline.

    Per patch, one saddle round targeting the center element's Q1 shapes, with
    quantities of interest taken against the shapes of every coarse element in
    the patch (the localized kernel-space constraints of the baseline method).
    """
    if systems is None:
        systems = iter_patch_systems(pair, field, kind, m)
    bases = [_lod_patch(sys, pair, kind, stats=stats) for sys in systems]
    return MsBasis(LOD, 1, kind, bases)
