"""
Lattice core: configuration encoding, tensor-product vectors and the sparse
kernels shared by every other service.

Bit order: the occupation number of site L- is the most significant bit of
a configuration index, so that left-to-right Kronecker factors line up with
configuration indices. Basis vector (1, 0) is an empty site, (0, 1) an
occupied one.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from functools import reduce
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.stats import poisson

from app.core.config import settings
from app.core.exceptions import (
    DimensionMismatchError,
    NumericalError,
    ParameterValidationError,
    ResourceCapError,
)
from app.core.resources import (
    dense_vector_estimate,
    eigenproblem_estimate,
    ensure_memory,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Sequence[float]]


@dataclass(frozen=True)
class Lattice:
    """The integer interval [l_minus, l_plus] with at least two sites."""
    l_minus: int
    l_plus: int

    def __post_init__(self):
        if self.l_plus - self.l_minus + 1 < 2:
            raise ParameterValidationError(
                f"Lattice [{self.l_minus}, {self.l_plus}] has fewer than 2 sites",
                field_name="lattice",
            )

    @classmethod
    def of_length(cls, length: int, l_minus: int = 1) -> "Lattice":
        return cls(l_minus, l_minus + length - 1)

    @property
    def length(self) -> int:
        return self.l_plus - self.l_minus + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.l_minus, self.l_plus + 1)

    @property
    def n_configs(self) -> int:
        return 1 << self.length

    def contains(self, k: int) -> bool:
        return self.l_minus <= k <= self.l_plus

    def bit_shift(self, k: int) -> int:
        """Shift of the bit carrying site k."""
        return self.l_plus - k


@dataclass(frozen=True)
class TwoVector:
    """A local two-component vector; for a density vector c0 = 1 - rho, c1 = rho."""
    c0: float
    c1: float

    @classmethod
    def from_density(cls, rho: float) -> "TwoVector":
        if not 0.0 <= rho <= 1.0:
            raise ParameterValidationError(
                f"Density {rho} outside [0, 1]", field_name="rho"
            )
        return cls(1.0 - rho, rho)

    @classmethod
    def from_fugacity(cls, z: float) -> "TwoVector":
        """Normalized density vector (1, z) / (1 + z)."""
        return cls(1.0 / (1.0 + z), z / (1.0 + z))

    @property
    def density(self) -> float:
        return self.c1 / (self.c0 + self.c1)

    @property
    def fugacity(self) -> float:
        if self.c0 == 0.0:
            raise ParameterValidationError("Fugacity undefined for a full site", field_name="c0")
        return self.c1 / self.c0

    def as_array(self) -> np.ndarray:
        return np.array([self.c0, self.c1], dtype=float)

    def is_density_vector(self, tol: float = 1e-12) -> bool:
        return abs(self.c0 + self.c1 - 1.0) <= tol and -tol <= self.c1 <= 1.0 + tol


class GeneratorConvention(str, Enum):
    """Intensity matrices have zero row sums; Hamiltonians H = -W^T zero column sums."""
    INTENSITY = "intensity"
    HAMILTONIAN = "hamiltonian"


@dataclass(frozen=True)
class SparseGenerator:
    """
    A sparse Markov generator in CSR storage.

    Duplicate entries are summed when the matrix is converted to CSR, so
    builders may emit one triplet per local transition.
    """
    matrix: sp.csr_matrix
    convention: GeneratorConvention = GeneratorConvention.INTENSITY

    @classmethod
    def from_triplets(
        cls,
        rows: np.ndarray,
        cols: np.ndarray,
        values: np.ndarray,
        dim: int,
        convention: GeneratorConvention = GeneratorConvention.INTENSITY,
    ) -> "SparseGenerator":
        matrix = sp.coo_matrix((values, (rows, cols)), shape=(dim, dim)).tocsr()
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        return cls(matrix, convention)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def invariant_residual(self) -> float:
        """Largest row sum (intensity) or column sum (Hamiltonian) in magnitude."""
        axis = 1 if self.convention == GeneratorConvention.INTENSITY else 0
        sums = np.asarray(self.matrix.sum(axis=axis)).ravel()
        return float(np.max(np.abs(sums))) if sums.size else 0.0

    def validate(self, tol: float = 1e-13) -> "SparseGenerator":
        """
        Check the zero-sum invariant and the sign of off-diagonal entries.

        The tolerance is relative to the largest diagonal magnitude.

        Raises:
            NumericalError: If an invariant fails
        """
        scale = max(1.0, self.exit_rate_bound())
        residual = self.invariant_residual()
        if residual > tol * scale:
            raise NumericalError(
                f"{self.convention.value} generator violates its zero-sum invariant "
                f"(residual {residual:.3e})",
                operation="SparseGenerator.validate",
                details={"residual": residual},
            )
        off = self.matrix - sp.diags(self.matrix.diagonal())
        sign = 1.0 if self.convention == GeneratorConvention.INTENSITY else -1.0
        if off.nnz and float((sign * off).min()) < -tol * scale:
            raise NumericalError(
                f"{self.convention.value} generator has off-diagonal entries of the wrong sign",
                operation="SparseGenerator.validate",
            )
        return self

    def exit_rate_bound(self) -> float:
        """Largest diagonal magnitude, the uniformization rate."""
        diagonal = self.matrix.diagonal()
        return float(np.max(np.abs(diagonal))) if diagonal.size else 0.0

    def evolution_operator(self) -> sp.csr_matrix:
        """The matrix A with d mu/dt = A mu: W^T for intensity, -H for Hamiltonian."""
        if self.convention == GeneratorConvention.INTENSITY:
            return self.matrix.T.tocsr()
        return (-self.matrix).tocsr()

    def to_hamiltonian(self) -> "SparseGenerator":
        if self.convention == GeneratorConvention.HAMILTONIAN:
            return self
        return SparseGenerator((-self.matrix.T).tocsr(), GeneratorConvention.HAMILTONIAN)

    def to_intensity(self) -> "SparseGenerator":
        if self.convention == GeneratorConvention.INTENSITY:
            return self
        return SparseGenerator((-self.matrix.T).tocsr(), GeneratorConvention.INTENSITY)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def config_index(bits: Sequence[int]) -> int:
    """
    Index of a configuration given its occupation numbers in site order.

    Raises:
        ParameterValidationError: If an occupation number is not 0 or 1
    """
    index = 0
    for eta in bits:
        if eta not in (0, 1):
            raise ParameterValidationError(
                f"Occupation number {eta} is not 0 or 1", field_name="bits"
            )
        index = (index << 1) | int(eta)
    return index


def index_config(i: int, length: int) -> Tuple[int, ...]:
    """
    Occupation numbers (site order L- .. L+) of configuration index i.

    Raises:
        ParameterValidationError: If i is outside 0 .. 2^L - 1
    """
    if not 0 <= i < (1 << length):
        raise ParameterValidationError(
            f"Configuration index {i} outside [0, {(1 << length) - 1}]",
            field_name="index",
        )
    return tuple((i >> (length - 1 - j)) & 1 for j in range(length))


def occupation_table(lat: Lattice) -> np.ndarray:
    """Occupation numbers of all 2^L configurations, shape (2^L, L), site order."""
    ensure_memory(dense_vector_estimate(lat.n_configs * lat.length))
    indices = np.arange(lat.n_configs, dtype=np.int64)
    shifts = np.arange(lat.length - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def kron_vector(factors: Sequence[Union[TwoVector, ArrayLike]]) -> np.ndarray:
    """
    Kronecker product of local two-vectors, left factor at site L-.

    Raises:
        ParameterValidationError: If the factor list is empty
    """
    if len(factors) == 0:
        raise ParameterValidationError("kron_vector needs at least one factor", field_name="factors")
    ensure_memory(dense_vector_estimate(1 << len(factors)))
    arrays = [f.as_array() if isinstance(f, TwoVector) else np.asarray(f, dtype=float) for f in factors]
    return reduce(np.kron, arrays)


def _check_vector(dim: int, v: np.ndarray) -> None:
    if v.shape[0] != dim:
        raise DimensionMismatchError(
            f"Vector of length {v.shape[0]} does not match generator dimension {dim}",
            expected=dim,
            actual=int(v.shape[0]),
        )


def sparse_matvec(
    G: SparseGenerator,
    v: ArrayLike,
    left: bool = False,
    threads: Optional[int] = None,
) -> np.ndarray:
    """
    Exact sparse product G v, or v^T G when left is set.

    Rows are split into contiguous blocks processed by a thread pool when
    more than one thread is configured; blocks are stitched back in order.

    Raises:
        DimensionMismatchError: If v has the wrong length
    """
    v = np.asarray(v)
    _check_vector(G.dim, v)
    matrix = G.matrix.T.tocsr() if left else G.matrix
    threads = threads or settings.THREADS

    if threads <= 1 or G.dim < 2 * threads:
        return matrix @ v

    bounds = np.linspace(0, G.dim, threads + 1, dtype=int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        blocks = list(pool.map(lambda lo_hi: matrix[lo_hi[0]:lo_hi[1]] @ v, zip(bounds[:-1], bounds[1:])))
    return np.concatenate(blocks)


def uniformization_terms(rate: float, t: float, tol: float) -> np.ndarray:
    """Poisson weights e^{-rate t} (rate t)^n / n! up to the tail bound tol."""
    mean = rate * t
    n_max = int(poisson.isf(tol, mean)) + 1
    return poisson.pmf(np.arange(n_max + 1), mean)


def expm_action(
    G: SparseGenerator,
    v: ArrayLike,
    t: float,
    tol: Optional[float] = None,
) -> np.ndarray:
    """
    Evolve a measure (or a block of measures as columns) by exp(W^T t).

    Uses uniformization: with rate = max |diag|, P = I + A / rate is
    stochastic in the column sense and exp(A t) = sum_n Pois(n; rate t) P^n.
    The series is truncated once the neglected Poisson tail is below tol, so
    the L1 error is at most tol times the L1 mass of v.

    Args:
        G: Generator in either convention
        v: Vector of length G.dim, or matrix with G.dim rows
        t: Time, t >= 0
        tol: Truncation tolerance, defaults to settings.EXPM_TOL

    Returns:
        The evolved vector(s)

    Raises:
        ParameterValidationError: If t < 0 or tol <= 0
        NumericalError: If v contains non-finite entries
    """
    tol = settings.EXPM_TOL if tol is None else tol
    if t < 0:
        raise ParameterValidationError(f"Negative evolution time {t}", field_name="t")
    if tol <= 0:
        raise ParameterValidationError(f"Non-positive tolerance {tol}", field_name="tol")

    v = np.asarray(v, dtype=float)
    _check_vector(G.dim, v)
    if not np.all(np.isfinite(v)):
        raise NumericalError("Initial vector has non-finite entries", operation="expm_action")

    rate = G.exit_rate_bound()
    if t == 0 or rate == 0:
        return v.copy()

    A = G.evolution_operator()
    P = sp.identity(G.dim, format="csr") + A / rate
    weights = uniformization_terms(rate, t, tol)
    logger.debug(f"Uniformization with rate*t = {rate * t:.3f} and {len(weights)} terms")

    term = v.copy()
    result = weights[0] * term
    for weight in weights[1:]:
        term = P @ term
        result += weight * term

    if not np.all(np.isfinite(result)):
        raise NumericalError("Uniformization produced non-finite values", operation="expm_action")
    return result


def dense_eigs(
    M: Union[np.ndarray, SparseGenerator],
    vectors: bool = False,
    cap: Optional[int] = None,
):
    """
    Eigenvalues of a small real matrix, sorted by real part then imaginary part.

    Args:
        M: Dense square matrix or a sparse generator
        vectors: Also return the right eigenvectors as columns
        cap: Dimension cap, defaults to settings.DENSE_EIG_CAP

    Returns:
        eigenvalues, or (eigenvalues, eigenvectors)

    Raises:
        ResourceCapError: If the dimension exceeds the cap
        NumericalError: If LAPACK does not converge
    """
    cap = settings.DENSE_EIG_CAP if cap is None else cap
    dense = M.toarray() if isinstance(M, SparseGenerator) else np.asarray(M)
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
        raise DimensionMismatchError(
            "dense_eigs needs a square matrix",
            expected=dense.shape[0],
            actual=dense.shape[-1],
        )
    dim = dense.shape[0]
    if dim > cap:
        raise ResourceCapError(
            f"Dense eigenproblem of dimension {dim} exceeds DENSE_EIG_CAP = {cap}",
            resource="dense_eigenproblem",
            requested=float(dim),
            limit=float(cap),
        )
    ensure_memory(eigenproblem_estimate(dim))

    try:
        if vectors:
            values, vecs = scipy.linalg.eig(dense)
        else:
            values = scipy.linalg.eigvals(dense)
    except scipy.linalg.LinAlgError as e:
        raise NumericalError(f"Eigensolver did not converge: {e}", operation="dense_eigs")

    order = np.lexsort((values.imag, values.real))
    if vectors:
        return values[order], vecs[:, order]
    return values[order]


def stationary_distribution(G: SparseGenerator) -> np.ndarray:
    """
    Normalized null vector of the evolution operator by a dense SVD.

    Raises:
        NumericalError: If the null space is not one-dimensional
    """
    if G.dim > settings.DENSE_EIG_CAP:
        raise ResourceCapError(
            f"Null-space computation of dimension {G.dim} exceeds DENSE_EIG_CAP",
            resource="dense_eigenproblem",
            requested=float(G.dim),
            limit=float(settings.DENSE_EIG_CAP),
        )
    A = G.evolution_operator().toarray()
    basis = scipy.linalg.null_space(A, rcond=1e-10)
    if basis.shape[1] != 1:
        raise NumericalError(
            f"Expected a one-dimensional null space, found dimension {basis.shape[1]}",
            operation="stationary_distribution",
            details={"null_space_dim": int(basis.shape[1])},
        )
    vector = basis[:, 0] / basis[:, 0].sum()
    vector = np.clip(vector, 0.0, None)
    return vector / vector.sum()


def total_variation(p: ArrayLike, q: ArrayLike) -> float:
    """Total-variation distance between two probability vectors."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    _check_vector(p.shape[0], q)
    return 0.5 * float(np.abs(p - q).sum())


def check_probability_vector(v: ArrayLike, tol: float = 1e-12) -> List[str]:
    """Problems that prevent v from being a probability vector (empty when valid)."""
    v = np.asarray(v, dtype=float)
    problems = []
    if np.any(v < -tol):
        problems.append(f"negative entry {float(v.min()):.3e}")
    if abs(float(v.sum()) - 1.0) > tol:
        problems.append(f"mass {float(v.sum()):.15f} differs from 1")
    return problems
