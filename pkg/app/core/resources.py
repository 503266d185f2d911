"""
Resource guards for dense and sparse allocations.

Every operator or vector whose size grows like 2^L or C(L, N) is checked
here before allocation, against both the configured memory cap and the
memory the host actually has available.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import psutil

from app.core.config import settings
from app.core.exceptions import ResourceCapError

logger = logging.getLogger(__name__)

FLOAT_BYTES = 8
COMPLEX_BYTES = 16
# CSR stores one value and one column index per nonzero
CSR_ENTRY_BYTES = 12


class ResourceType(str, Enum):
    """Kinds of guarded allocations."""
    DENSE_VECTOR = "dense_vector"
    DENSE_MATRIX = "dense_matrix"
    SPARSE_GENERATOR = "sparse_generator"
    DENSE_EIGENPROBLEM = "dense_eigenproblem"
    LATTICE_SITES = "lattice_sites"


@dataclass
class MemoryEstimate:
    """Estimated footprint of a planned allocation."""
    resource: ResourceType
    n_bytes: int

    @property
    def megabytes(self) -> float:
        return self.n_bytes / (1024 * 1024)


def available_memory_bytes() -> int:
    """Memory currently available on the host."""
    return int(psutil.virtual_memory().available)


def ensure_memory(estimate: MemoryEstimate, cap_mb: Optional[int] = None) -> None:
    """
    Raise if an allocation would exceed the configured cap or the host memory.

    Args:
        estimate: Planned allocation
        cap_mb: Override for settings.MEMORY_CAP_MB

    Raises:
        ResourceCapError: If the allocation does not fit
    """
    cap_mb = cap_mb if cap_mb is not None else settings.MEMORY_CAP_MB
    cap_bytes = cap_mb * 1024 * 1024

    if estimate.n_bytes > cap_bytes:
        raise ResourceCapError(
            f"{estimate.resource.value} needs {estimate.megabytes:.1f} MB, above the "
            f"{cap_mb} MB cap; reduce L or raise MEMORY_CAP_MB",
            resource=estimate.resource.value,
            requested=estimate.megabytes,
            limit=float(cap_mb),
        )

    available = available_memory_bytes()
    if estimate.n_bytes > available:
        raise ResourceCapError(
            f"{estimate.resource.value} needs {estimate.megabytes:.1f} MB but only "
            f"{available / (1024 * 1024):.1f} MB are available; reduce L",
            resource=estimate.resource.value,
            requested=estimate.megabytes,
            limit=available / (1024 * 1024),
        )

    logger.debug(
        f"Allocation of {estimate.megabytes:.3f} MB for {estimate.resource.value} accepted"
    )


def ensure_sites(n_sites: int, limit: int, what: str) -> None:
    """Raise if a lattice is longer than the site limit of an operation."""
    if n_sites > limit:
        raise ResourceCapError(
            f"{what} is limited to L <= {limit} sites, got L = {n_sites}; "
            f"reduce L or raise the corresponding setting",
            resource=ResourceType.LATTICE_SITES.value,
            requested=float(n_sites),
            limit=float(limit),
        )


def dense_vector_estimate(dim: int) -> MemoryEstimate:
    return MemoryEstimate(ResourceType.DENSE_VECTOR, dim * FLOAT_BYTES)


def dense_matrix_estimate(rows: int, cols: int, complex_valued: bool = False) -> MemoryEstimate:
    width = COMPLEX_BYTES if complex_valued else FLOAT_BYTES
    return MemoryEstimate(ResourceType.DENSE_MATRIX, rows * cols * width)


def sparse_generator_estimate(dim: int, nnz_per_row: int) -> MemoryEstimate:
    return MemoryEstimate(
        ResourceType.SPARSE_GENERATOR,
        dim * nnz_per_row * CSR_ENTRY_BYTES + (dim + 1) * 8,
    )


def eigenproblem_estimate(dim: int) -> MemoryEstimate:
    # input matrix, eigenvector matrix and LAPACK workspace
    return MemoryEstimate(ResourceType.DENSE_EIGENPROBLEM, 3 * dim * dim * COMPLEX_BYTES)
