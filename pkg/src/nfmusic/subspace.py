"""Hermitian eigendecomposition and noise subspace extraction.

The decomposition contract: eigenvalues ascending, eigenvectors orthonormal
columns aligned with them.  The noise subspace of an assumed-K-source
covariance is spanned by the eigenvectors of the N - K smallest eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOLERANCE = 1e-10


class NonHermitianInput(ValueError):
    """Input matrix is not Hermitian within tolerance."""


class ConvergenceFailure(RuntimeError):
    """The eigensolver failed to converge or produced non-finite output."""


class TooManySources(ValueError):
    """Assumed source count leaves no noise subspace."""


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Eigenpairs of a Hermitian matrix, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True, eq=False)
class NoiseSubspace:
    """Orthonormal basis of the noise subspace, shape (n, n - n_sources_assumed)."""

    basis: np.ndarray
    n_sources_assumed: int


def eig_hermitian(r: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix.

    The input is checked against Hermitian symmetry (relative Frobenius
    tolerance 1e-10) and symmetrized before the solve, so rounding-level
    asymmetry from matrix products is accepted.
    """
    r = np.asarray(r, dtype=complex)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {r.shape}")
    scale = float(np.linalg.norm(r))
    asym = float(np.linalg.norm(r - r.conj().T))
    if asym > HERMITIAN_TOLERANCE * max(1.0, scale):
        raise NonHermitianInput(f"asymmetry {asym:.3e} exceeds tolerance at scale {scale:.3e}")
    try:
        w, v = np.linalg.eigh((r + r.conj().T) / 2.0)
    except np.linalg.LinAlgError as err:
        raise ConvergenceFailure(str(err)) from err
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(v))):
        raise ConvergenceFailure("eigensolver produced non-finite output")
    w.setflags(write=False)
    v.setflags(write=False)
    return EigenDecomposition(eigenvalues=w, eigenvectors=v)


def noise_subspace(decomposition: EigenDecomposition, n_sources: int) -> NoiseSubspace:
    """Eigenvectors of the n - n_sources smallest eigenvalues."""
    n = decomposition.eigenvectors.shape[0]
    if n_sources < 1:
        raise ValueError(f"need at least one source, got {n_sources}")
    if n_sources >= n:
        raise TooManySources(f"{n_sources} sources with dimension {n} leaves no noise subspace")
    basis = decomposition.eigenvectors[:, : n - n_sources]
    return NoiseSubspace(basis=basis, n_sources_assumed=n_sources)


def orthogonal_complement(basis: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of `basis`'s column span."""
    n, k = basis.shape
    u, _, _ = np.linalg.svd(basis, full_matrices=True)
    return u[:, k:]
