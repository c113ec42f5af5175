"""Discrete coupled piezoelectric boundary value problem.

Assembles the coupled bilinear form over P1 fields (displacement + electric
potential, homogeneous Dirichlet on the whole boundary), solves it with a
sparse direct factorization computed once per grid, and exposes the derived
objects of the reduction step: the projection Q onto attainable reversible
states, the load trace z_hat and the operator M = D (I - Q).
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import LinearSolveFailure, SingularSystem
from .tensors import assemble_block_A, assemble_block_D, constitutive_stress_field


@dataclass
class FieldState:
    """Electromechanical fields produced by one elliptic solve."""

    u: np.ndarray          # nodal displacement (n_nodes, d)
    phi: np.ndarray        # nodal potential (n_nodes,)
    eps: np.ndarray        # per-cell packed strain (n_cells, s)
    E: np.ndarray          # per-cell electric field (n_cells, d)
    sigma: np.ndarray      # per-cell packed stress (n_cells, s)
    D: np.ndarray          # per-cell electric displacement (n_cells, d)


class AssembledSystem:
    """Factorized discrete operator plus right-hand-side builders.

    Immutable after construction; concurrent solves with distinct right-hand
    sides are safe because the factorization is read-only.
    """

    def __init__(self, grid, tensors, linear_tol=1e-10):
        if grid.dim != tensors.dim:
            raise ValueError("grid and tensors disagree on the spatial dimension")
        self.grid = grid
        self.tensors = tensors
        self.linear_tol = float(linear_tol)
        self.block_A = assemble_block_A(tensors)
        self.block_D = assemble_block_D(tensors)
        self._build_dof_map()
        self._build_B()
        self._assemble()

    # ------------------------------------------------------------------

    def _build_dof_map(self):
        g = self.grid
        d = g.dim
        self.n_comp = d + 1
        interior = ~g.boundary_mask
        self.free_nodes = np.nonzero(interior)[0]
        # global dof = node * (d+1) + comp; free dofs keep that order
        dof_of = -np.ones(g.n_nodes * self.n_comp, dtype=np.int64)
        free = (self.free_nodes[:, None] * self.n_comp
                + np.arange(self.n_comp)[None, :]).ravel()
        dof_of[free] = np.arange(free.size)
        self.dof_of = dof_of
        self.n_free = free.size
        if self.n_free == 0 and g.n_cells == 0:
            raise SingularSystem("grid has no degrees of freedom")

    def _build_B(self):
        """Per-cell map from element dofs to (packed strain, potential gradient)."""
        g = self.grid
        d, s = g.dim, g.strain_dim
        nn = d + 1                       # nodes per simplex
        k = s + d
        from .packing import sym_index_pairs
        pairs = sym_index_pairs(d)
        B = np.zeros((g.n_cells, k, nn * self.n_comp))
        grads = g.grads                  # (nc, nn, d)
        for a in range(nn):
            for n, (i, j) in enumerate(pairs):
                col_i = a * self.n_comp + i
                col_j = a * self.n_comp + j
                if i == j:
                    B[:, n, col_i] += grads[:, a, i]
                else:
                    B[:, n, col_i] += grads[:, a, j] / np.sqrt(2.0)
                    B[:, n, col_j] += grads[:, a, i] / np.sqrt(2.0)
            phi_col = a * self.n_comp + d
            B[:, s:, phi_col] += grads[:, a, :]
        self.B = B

    def _assemble(self):
        g = self.grid
        A = self.block_A.matrix
        # element matrices: vol * B^T A B, with the test index first
        elem = np.einsum("c,cie,ij,cjf->cef", g.volumes, self.B, A, self.B)
        nn = g.dim + 1
        el_dofs = (g.cells[:, :, None] * self.n_comp
                   + np.arange(self.n_comp)[None, None, :]).reshape(g.n_cells, -1)
        el_free = self.dof_of[el_dofs]                    # (nc, ne)
        rows = np.repeat(el_free, el_free.shape[1], axis=1).ravel()
        cols = np.tile(el_free, (1, el_free.shape[1])).ravel()
        vals = elem.ravel()
        keep = (rows >= 0) & (cols >= 0)
        K = sp.coo_matrix(
            (vals[keep], (rows[keep], cols[keep])),
            shape=(self.n_free, self.n_free),
        ).tocsc()
        self.K = K
        if self.n_free:
            try:
                self.lu = spla.splu(K)
            except RuntimeError as exc:      # pragma: no cover - guarded by tensor checks
                raise SingularSystem(str(exc)) from exc
        else:
            self.lu = None

    # ------------------------------------------------------------------

    def _scatter(self, cell_vecs):
        """Assemble sum_c vol_c B_c^T w_c into the free-dof vector."""
        g = self.grid
        contrib = np.einsum("c,cie,ci->ce", g.volumes, self.B, cell_vecs)
        nn = g.dim + 1
        el_dofs = (g.cells[:, :, None] * self.n_comp
                   + np.arange(self.n_comp)[None, None, :]).reshape(g.n_cells, -1)
        el_free = self.dof_of[el_dofs]
        out = np.zeros(self.n_free)
        keep = el_free >= 0
        np.add.at(out, el_free[keep], contrib[keep])
        return out

    def rhs_from_internal(self, z):
        """Load vector of the internal-variable source terms."""
        t = self.tensors
        s = self.grid.strain_dim
        r = z[:, :s]
        P = z[:, s:]
        w = np.concatenate([r @ t.C.T, P - r @ t.e_piezo.T], axis=-1)
        return self._scatter(w)

    def rhs_from_loads(self, b, q):
        """Load vector of body force b (n_cells, d) and charge density q (n_cells,)."""
        g = self.grid
        d = g.dim
        cell_vals = np.concatenate([np.asarray(b, dtype=float),
                                    np.asarray(q, dtype=float)[:, None]], axis=-1)
        weights = g.volumes / (d + 1)
        out = np.zeros(self.n_free)
        for a in range(d + 1):
            el_dofs = (g.cells[:, a, None] * self.n_comp
                       + np.arange(self.n_comp)[None, :])
            el_free = self.dof_of[el_dofs]
            keep = el_free >= 0
            np.add.at(out, el_free[keep], (weights[:, None] * cell_vals)[keep])
        return out

    # ------------------------------------------------------------------

    def solve_bvp(self, z=None, b=None, q=None):
        """Solve the coupled problem; returns the full :class:`FieldState`.

        Any of z, b, q may be omitted (treated as zero).
        """
        g = self.grid
        d, s = g.dim, g.strain_dim
        if z is None:
            z = np.zeros((g.n_cells, g.internal_dim))
        z = np.asarray(z, dtype=float)
        rhs = self.rhs_from_internal(z)
        if b is not None or q is not None:
            if b is None:
                b = np.zeros((g.n_cells, d))
            if q is None:
                q = np.zeros(g.n_cells)
            rhs = rhs + self.rhs_from_loads(b, q)

        U_free = np.zeros(0)
        if self.n_free:
            U_free = self.lu.solve(rhs)
            res = self.K @ U_free - rhs
            scale = max(np.linalg.norm(rhs), 1e-300)
            rel = np.linalg.norm(res) / scale
            if rel > self.linear_tol:
                U_free = U_free - self.lu.solve(res)
                rel = np.linalg.norm(self.K @ U_free - rhs) / scale
                if rel > self.linear_tol:
                    raise LinearSolveFailure(rel)

        full = np.zeros(g.n_nodes * self.n_comp)
        mask = self.dof_of >= 0
        full[mask] = U_free[self.dof_of[mask]]
        nodal = full.reshape(g.n_nodes, self.n_comp)
        u = nodal[:, :d]
        phi = nodal[:, d]

        eps = g.cell_strain(u)
        E = -g.cell_gradient(phi)
        sigma, D = constitutive_stress_field(self.tensors, eps, E, z[:, :s], z[:, s:])
        return FieldState(u=u, phi=phi, eps=eps, E=E, sigma=sigma, D=D)

    # ------------------------------------------------------------------

    def project_Q(self, z):
        """Projection Q z = (strain, electric displacement) of the zero-load solve."""
        f = self.solve_bvp(z=z)
        return np.concatenate([f.eps, f.D], axis=-1)

    def apply_M(self, z):
        """M z = D (z - Q z); equals minus (stress, field) of the zero-load solve."""
        z = np.asarray(z, dtype=float)
        return (z - self.project_Q(z)) @ self.block_D.matrix.T

    def load_trace(self, b, q):
        """z_hat = (stress, electric field) of the solve with zero internal state."""
        f = self.solve_bvp(b=b, q=q)
        return np.concatenate([f.sigma, f.E], axis=-1)

    def assemble_M_matrix(self):
        """Dense matrix of M on per-cell internal states (desk-scale only)."""
        n = self.grid.n_cells * self.grid.internal_dim
        cols = np.empty((n, n))
        for j in range(n):
            e = np.zeros(n)
            e[j] = 1.0
            cols[:, j] = self.apply_M(
                e.reshape(self.grid.n_cells, self.grid.internal_dim)).ravel()
        return cols

    # ------------------------------------------------------------------

    def field_norms(self, fields):
        """Lumped H1-type norm pieces used by the measured stability constant."""
        g = self.grid
        nm = g.node_measures()
        u_l2 = np.sqrt(np.sum(nm[:, None] * fields.u ** 2))
        phi_l2 = np.sqrt(np.sum(nm * fields.phi ** 2))
        grad_u = np.sqrt(np.sum(g.volumes[:, None, None] * g.cell_gradient(fields.u) ** 2))
        grad_phi = np.sqrt(np.sum(g.volumes[:, None] * g.cell_gradient(fields.phi) ** 2))
        return u_l2 + grad_u, phi_l2 + grad_phi

    def measured_stability(self, z=None, b=None, q=None):
        """Ratio (|u|_1 + |phi|_1) / (|z| + |b| + |q|) for the given data."""
        g = self.grid
        f = self.solve_bvp(z=z, b=b, q=q)
        nu, nphi = self.field_norms(f)
        data = 0.0
        if z is not None:
            data += np.sqrt(np.sum(g.volumes[:, None] * np.asarray(z) ** 2))
        if b is not None:
            data += np.sqrt(np.sum(g.volumes[:, None] * np.asarray(b) ** 2))
        if q is not None:
            data += np.sqrt(np.sum(g.volumes * np.asarray(q) ** 2))
        if data == 0.0:
            return 0.0
        return (nu + nphi) / data
