"""Sparse-backed operators and the cyclic mode lattice.

All finite-volume models in this package share one representation: the
Hilbert space is (functions on a cyclic mode lattice Z_M^p) tensor a small
spinor factor, and algebra elements are stored by their values on the dual
spatial grid.  Multiplication operators are then group-algebra circulants,
so truncated generators commute exactly and all edge effects are pushed
into the wrap-around band handled by :class:`BandPolicy` (see triple.py).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "MatrixOperator",
    "ModeLattice",
    "AlgebraElement",
    "operator_norm",
    "eigendecompose",
    "functional_calculus",
]

_DENSE_NORM_CUTOFF = 1600  # exact SVD below this dimension
_SHIFT_NNZ_CUTOFF = 96     # circulants with more Fourier modes go dense


class MatrixOperator:
    """Thin wrapper over a scipy CSR matrix with operator conveniences."""

    __slots__ = ("mat",)

    def __init__(self, mat):
        if isinstance(mat, MatrixOperator):
            mat = mat.mat
        if not sp.issparse(mat):
            mat = sp.csr_matrix(np.asarray(mat, dtype=complex))
        self.mat = mat.tocsr().astype(complex)

    # -- basic algebra -------------------------------------------------
    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def shape(self):
        return self.mat.shape

    def __matmul__(self, other):
        if isinstance(other, MatrixOperator):
            return MatrixOperator(self.mat @ other.mat)
        return self.mat @ other  # matrix-vector

    def __add__(self, other):
        return MatrixOperator(self.mat + _raw(other))

    def __sub__(self, other):
        return MatrixOperator(self.mat - _raw(other))

    def __mul__(self, scalar):
        return MatrixOperator(self.mat * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return MatrixOperator(-self.mat)

    @property
    def H(self) -> "MatrixOperator":
        return MatrixOperator(self.mat.conj().T)

    def dense(self) -> np.ndarray:
        return self.mat.toarray()

    def diagonal(self) -> np.ndarray:
        return self.mat.diagonal()

    def trace(self) -> complex:
        return complex(self.mat.diagonal().sum())

    # -- norms and checks ----------------------------------------------
    def fro(self) -> float:
        return float(spla.norm(self.mat, "fro"))

    def norm(self) -> float:
        return operator_norm(self)

    def herm_defect(self) -> float:
        d = self.mat - self.mat.conj().T
        return float(abs(d).max()) if d.nnz else 0.0

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return self.herm_defect() <= tol * max(1.0, self.fro())

    def submatrix(self, mask: np.ndarray) -> "MatrixOperator":
        """Compression to the subspace selected by a boolean mask."""
        idx = np.flatnonzero(mask)
        return MatrixOperator(self.mat[np.ix_(idx, idx)])

    @staticmethod
    def identity(n: int) -> "MatrixOperator":
        return MatrixOperator(sp.identity(n, dtype=complex, format="csr"))

    @staticmethod
    def diag(values) -> "MatrixOperator":
        return MatrixOperator(sp.diags(np.asarray(values, dtype=complex)))

    def commutator(self, other) -> "MatrixOperator":
        o = _raw(other)
        return MatrixOperator(self.mat @ o - o @ self.mat)

    def __repr__(self):
        return f"MatrixOperator(dim={self.dim}, nnz={self.mat.nnz})"


def _raw(x):
    return x.mat if isinstance(x, MatrixOperator) else x


def operator_norm(T, tol: float = 1e-8) -> float:
    """Spectral norm.

    Exact (dense SVD) below a dimension cutoff; above it a deterministic
    Lanczos bidiagonalization with fixed start vector.  Tiny matrices in
    the Frobenius sense short-circuit to the Frobenius bound, which is the
    honest thing to report for residuals that are numerically zero.
    """
    A = _raw(T)
    if min(A.shape) == 0:
        return 0.0
    fro = spla.norm(A, "fro") if sp.issparse(A) else np.linalg.norm(A)
    if fro < 1e-13:
        return float(fro)
    n = A.shape[0]
    if n <= _DENSE_NORM_CUTOFF:
        dense = A.toarray() if sp.issparse(A) else np.asarray(A)
        return float(np.linalg.svd(dense, compute_uv=False)[0])
    return _power_norm(A, tol)


def _power_norm(A, tol: float, maxiter: int = 600) -> float:
    """Largest singular value by power iteration on A^H A.

    Deterministic (fixed-seed starts); robust on degenerate spectra where
    ARPACK's k=1 mode tends not to converge.  Two independent starts guard
    against an unlucky orthogonal initial vector.
    """
    n = A.shape[1]
    AH = A.conj().T if sp.issparse(A) else np.asarray(A).conj().T
    best = 0.0
    for seed in (0, 1):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=n) + 1j * rng.normal(size=n)
        v /= np.linalg.norm(v)
        prev = 0.0
        for _ in range(maxiter):
            w = AH @ (A @ v)
            s = np.linalg.norm(w)
            if s == 0.0:
                break
            v = w / s
            est = np.sqrt(s)
            if abs(est - prev) <= tol * max(est, 1.0):
                prev = est
                break
            prev = est
        best = max(best, prev)
    return float(best)


def eigendecompose(H, tol: float = 1e-10):
    """Eigenvalues (ascending) and eigenvectors of a Hermitian operator.

    Raises ValueError when the input is not Hermitian to tolerance.
    """
    A = _raw(H)
    dense = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=complex)
    defect = np.abs(dense - dense.conj().T).max()
    scale = max(1.0, np.abs(dense).max())
    if defect > tol * scale:
        raise ValueError(f"matrix is not Hermitian: defect {defect:.3e}")
    w, v = np.linalg.eigh(dense)
    return w, v


def functional_calculus(H, f, *, eigs=None, kernel_shift: float | None = None,
                        kernel_tol: float = 1e-9):
    """Apply a scalar function to a Hermitian operator spectrally.

    With ``kernel_shift`` set, eigenvalues with |lambda| below
    ``kernel_tol`` are replaced by the shift before applying ``f`` -- the
    convention used throughout for |D| on its kernel.
    """
    if eigs is None:
        w, v = eigendecompose(H)
    else:
        w, v = eigs
    w = np.asarray(w, dtype=float).copy()
    if kernel_shift is not None:
        w[np.abs(w) < kernel_tol] = kernel_shift
    fw = np.asarray([f(x) for x in w], dtype=complex)
    if np.allclose(fw.imag, 0.0):
        fw = fw.real.astype(complex)
    return MatrixOperator(v @ (fw[:, None] * v.conj().T))


class ModeLattice:
    """Cyclic mode lattice Z_M^p with symmetric integer representatives."""

    def __init__(self, M: int, p_axes: int):
        self.M = int(M)
        self.p_axes = int(p_axes)
        self.shape = (self.M,) * self.p_axes
        self.n_modes = self.M ** self.p_axes
        ax = np.fft.fftfreq(self.M, d=1.0 / self.M).astype(int)  # fft order
        self.axis_reps = ax
        grids = np.meshgrid(*([ax] * self.p_axes), indexing="ij")
        self.reps = np.stack([g.ravel() for g in grids], axis=1)  # (n, p)

    @property
    def inf_norms(self) -> np.ndarray:
        return np.abs(self.reps).max(axis=1)

    def grid_points(self) -> np.ndarray:
        """Spatial grid in [0,1)^p (unit cell coordinates), shape (n, p)."""
        x = np.arange(self.M) / self.M
        grids = np.meshgrid(*([x] * self.p_axes), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def shift_indices(self, m) -> np.ndarray:
        """Flat index of k+m (mod M per axis) for every lattice point k."""
        m = np.atleast_1d(np.asarray(m, dtype=int))
        out = np.zeros(self.n_modes, dtype=int)
        for a in range(self.p_axes):
            idx = (self.reps[:, a] + m[a]) % self.M
            out = out * self.M + idx % self.M
        # reps are in fft order; convert k+m back to flat fft-order index
        return out

    def flat_index(self, modes: np.ndarray) -> np.ndarray:
        """Flat (C-order, fft layout) index of integer mode vectors."""
        modes = np.atleast_2d(modes)
        out = np.zeros(len(modes), dtype=int)
        for a in range(self.p_axes):
            out = out * self.M + (modes[:, a] % self.M)
        return out

    def nearest_grid_index(self, x) -> int:
        """Flat index of the grid point closest to x in [0,1)^p."""
        x = np.atleast_1d(np.asarray(x, dtype=float)) % 1.0
        j = np.rint(x * self.M).astype(int) % self.M
        out = 0
        for a in range(self.p_axes):
            out = out * self.M + j[a]
        return int(out)


class AlgebraElement:
    """A function on the spatial grid, acting by (wrapped) convolution.

    ``symbol`` holds grid values; Fourier coefficients are the normalized
    FFT.  Products are pointwise in the symbol, so the algebra is exactly
    commutative at machine precision.
    """

    def __init__(self, lattice: ModeLattice, symbol: np.ndarray, name: str = ""):
        self.lattice = lattice
        self.symbol = np.asarray(symbol, dtype=complex).reshape(lattice.shape)
        self.name = name
        self._coeffs = None

    # -- algebra -------------------------------------------------------
    def __mul__(self, other):
        if isinstance(other, AlgebraElement):
            nm = f"({self.name}*{other.name})" if self.name and other.name else ""
            # order operands canonically: vectorized complex multiplication
            # need not be bitwise commutative, and chain bookkeeping relies
            # on exact equality of products taken in either order
            s, o = self.symbol, other.symbol
            if s.tobytes() > o.tobytes():
                s, o = o, s
            return AlgebraElement(self.lattice, s * o, nm)
        return AlgebraElement(self.lattice, self.symbol * other, self.name)

    __rmul__ = __mul__

    def __add__(self, other):
        if isinstance(other, AlgebraElement):
            return AlgebraElement(self.lattice, self.symbol + other.symbol)
        return AlgebraElement(self.lattice, self.symbol + other)

    def __sub__(self, other):
        o = other.symbol if isinstance(other, AlgebraElement) else other
        return AlgebraElement(self.lattice, self.symbol - o)

    def __neg__(self):
        return AlgebraElement(self.lattice, -self.symbol, self.name)

    def conj(self) -> "AlgebraElement":
        nm = f"{self.name}*" if self.name else ""
        return AlgebraElement(self.lattice, self.symbol.conj(), nm)

    def sup_norm(self) -> float:
        return float(np.abs(self.symbol).max())

    def is_real(self, tol: float = 1e-12) -> bool:
        return float(np.abs(self.symbol.imag).max()) <= tol * max(1.0, self.sup_norm())

    # -- Fourier side ----------------------------------------------------
    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = np.fft.fftn(self.symbol) / self.lattice.n_modes
        return self._coeffs

    def bandwidth(self, tol: float = 1e-12) -> int:
        """Largest |mode|_inf carrying a non-negligible coefficient."""
        c = np.abs(self.coeffs.ravel())
        live = c > tol * max(c.max(), 1e-300)
        if not live.any():
            return 0
        return int(self.lattice.inf_norms[live].max())

    def key(self) -> str:
        """Content hash used to identify elements up to exact equality."""
        import hashlib
        return hashlib.sha256(
            np.ascontiguousarray(self.symbol).tobytes()).hexdigest()[:16]

    # -- operators -------------------------------------------------------
    def matrix(self, spinor_dim: int = 1) -> MatrixOperator:
        """Multiplication operator on the mode lattice (tensor identity)."""
        lat = self.lattice
        c = self.coeffs.ravel()
        live = np.flatnonzero(np.abs(c) > 1e-15 * max(1.0, np.abs(c).max()))
        if len(live) == 0:
            A = sp.csr_matrix((lat.n_modes, lat.n_modes), dtype=complex)
        elif len(live) <= _SHIFT_NNZ_CUTOFF:
            rows, cols, vals = [], [], []
            base = np.arange(lat.n_modes)
            for i in live:
                m = lat.reps[i]
                rows.append(lat.flat_index(lat.reps + m))
                cols.append(base)
                vals.append(np.full(lat.n_modes, c[i]))
            A = sp.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(lat.n_modes, lat.n_modes))
        else:
            # dense route: conjugate the diagonal symbol by the DFT
            n = lat.n_modes
            F = _dft_matrix(lat)
            A = sp.csr_matrix(F.conj().T @ (self.symbol.ravel()[:, None] * F))
        if spinor_dim > 1:
            A = sp.kron(A, sp.identity(spinor_dim, format="csr"), format="csr")
        return MatrixOperator(A)


def _dft_matrix(lat: ModeLattice) -> np.ndarray:
    """Unitary DFT from mode space (fft layout) to the spatial grid."""
    M, p = lat.M, lat.p_axes
    F1 = np.exp(2j * np.pi * np.outer(np.arange(M), lat.axis_reps) / M)
    F1 /= np.sqrt(M)
    F = F1
    for _ in range(p - 1):
        F = np.kron(F, F1)
    return F
