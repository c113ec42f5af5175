"""Orthonormal (Mandel) packing of symmetric tensors.

Symmetric d x d matrices are stored as vectors of length d(d+1)/2 with the
diagonal entries first and the off-diagonal entries scaled by sqrt(2), so that
the Frobenius inner product of two matrices equals the dot product of their
packed vectors.  All tensor algebra in the solver runs on packed vectors.
"""

import itertools

import numpy as np

SQRT2 = np.sqrt(2.0)


def sym_dim(dim):
    """Dimension of the space of symmetric dim x dim matrices."""
    return dim * (dim + 1) // 2


def internal_dim(dim):
    """Dimension of the internal-variable space (packed strain + vector)."""
    return sym_dim(dim) + dim


def sym_index_pairs(dim):
    """Index pairs (i, j) in packing order: diagonal first, then i < j."""
    diag = [(i, i) for i in range(dim)]
    off = list(itertools.combinations(range(dim), 2))
    return diag + off


def pack_sym(mat):
    """Pack a symmetric matrix (last two axes) into a Mandel vector."""
    mat = np.asarray(mat, dtype=float)
    dim = mat.shape[-1]
    pairs = sym_index_pairs(dim)
    out = np.empty(mat.shape[:-2] + (len(pairs),))
    for n, (i, j) in enumerate(pairs):
        out[..., n] = mat[..., i, j] if i == j else SQRT2 * mat[..., i, j]
    return out


def unpack_sym(vec):
    """Inverse of :func:`pack_sym`."""
    vec = np.asarray(vec, dtype=float)
    s = vec.shape[-1]
    dim = int(round((np.sqrt(8 * s + 1) - 1) / 2))
    pairs = sym_index_pairs(dim)
    out = np.zeros(vec.shape[:-1] + (dim, dim))
    for n, (i, j) in enumerate(pairs):
        if i == j:
            out[..., i, i] = vec[..., n]
        else:
            out[..., i, j] = vec[..., n] / SQRT2
            out[..., j, i] = vec[..., n] / SQRT2
    return out


def identity_packed(dim):
    """Packed form of the identity matrix."""
    out = np.zeros(sym_dim(dim))
    out[:dim] = 1.0
    return out


def isotropic_stiffness(dim, lam, mu):
    """Packed matrix of the isotropic map ``x -> 2 mu x + lam tr(x) I``.

    Because the packing is orthonormal the matrix is simply
    ``2 mu I + lam m m^T`` with ``m`` the packed identity.
    """
    s = sym_dim(dim)
    m = identity_packed(dim)
    return 2.0 * mu * np.eye(s) + lam * np.outer(m, m)


def sym_map_as_packed(apply_fn, dim):
    """Packed matrix of a linear map on symmetric matrices given as a callable."""
    s = sym_dim(dim)
    cols = []
    for n in range(s):
        basis = np.zeros(s)
        basis[n] = 1.0
        cols.append(pack_sym(np.asarray(apply_fn(unpack_sym(basis)))))
    return np.stack(cols, axis=-1)
