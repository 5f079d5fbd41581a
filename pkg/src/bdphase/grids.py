"""Spatial grid plumbing: uniform cells, zero-flux stencils, mollification.

The domain is a uniform 1-d or 2-d cell-centered grid with zero-flux
boundaries.  The Laplacian uses the natural variational (flux-divergence)
form: interior rows are the standard second-order stencil and boundary
rows drop the missing link, which makes the stencil the exact negative
gradient of the discrete gradient energy.  This exactness is what lets
the phase update dissipate the same discrete free energy the diagnostics
measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.ndimage
import scipy.sparse

from .errors import DomainError, KernelWidthError


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centered grid with zero-flux boundaries."""

    shape: tuple
    h: float

    def __post_init__(self):
        shape = tuple(int(s) for s in self.shape)
        object.__setattr__(self, "shape", shape)
        if len(shape) not in (1, 2):
            raise DomainError("grid must be 1-d or 2-d")
        if any(s < 3 for s in shape):
            raise DomainError("grid needs at least 3 cells per axis")
        if not self.h > 0.0:
            raise DomainError("grid spacing h must be positive")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def volume(self) -> float:
        return self.n_cells * self.cell_volume


def laplacian(field: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Zero-flux Laplacian in flux-divergence form.

    Equals the standard 3-point (5-point in 2-d) stencil at interior
    cells; boundary rows contain only the interior link, which is the
    exact variational counterpart of the link-sum gradient energy.
    """
    field = np.asarray(field, dtype=float)
    if field.shape != grid.shape:
        raise DomainError(f"field shape {field.shape} != grid shape {grid.shape}")
    out = np.zeros_like(field)
    inv_h2 = 1.0 / (grid.h * grid.h)
    for axis in range(grid.dim):
        d = np.diff(field, axis=axis)
        pad = [(0, 0)] * grid.dim
        pad[axis] = (1, 0)
        lead = np.pad(d, pad, mode="constant")
        pad[axis] = (0, 1)
        trail = np.pad(d, pad, mode="constant")
        out += (trail - lead) * inv_h2
    return out


def laplacian_matrix(grid: GridSpec) -> scipy.sparse.csr_matrix:
    """Sparse matrix of :func:`laplacian` acting on flattened fields."""

    def lap1d(m):
        main = np.full(m, -2.0)
        main[0] = main[-1] = -1.0
        off = np.ones(m - 1)
        return scipy.sparse.diags([off, main, off], offsets=[-1, 0, 1], format="csr")

    inv_h2 = 1.0 / (grid.h * grid.h)
    if grid.dim == 1:
        return (lap1d(grid.shape[0]) * inv_h2).tocsr()
    lx, ly = (lap1d(m) for m in grid.shape)
    ix = scipy.sparse.eye(grid.shape[0], format="csr")
    iy = scipy.sparse.eye(grid.shape[1], format="csr")
    return ((scipy.sparse.kron(lx, iy) + scipy.sparse.kron(ix, ly)) * inv_h2).tocsr()


def gradient_squared_integral(field: np.ndarray, grid: GridSpec) -> float:
    """Discrete integral of |grad field|^2 over the domain.

    Sums squared forward differences over interior links times the cell
    volume; zero-flux boundaries contribute nothing.  The Laplacian above
    is the exact negative gradient of (1/2) times this quantity.
    """
    field = np.asarray(field, dtype=float)
    total = 0.0
    for axis in range(grid.dim):
        d = np.diff(field, axis=axis) / grid.h
        total += float(np.sum(d * d))
    return total * grid.cell_volume


@dataclass(frozen=True)
class MollifierKernel:
    """Normalized compact-support smoothing kernel on the grid.

    The per-axis profile is the quartic bump (1 - r^2)^2 on |r| < 1 with
    r = offset/eps, sampled at cell centers; multi-dimensional smoothing
    applies the same 1-d weights separably along each axis.  ``density``
    holds kernel values scaled so that sum(density) * h == 1, the
    discrete analogue of unit integral.
    """

    eps: float
    h: float
    density: np.ndarray

    @classmethod
    def quartic(cls, eps: float, h: float) -> "MollifierKernel":
        if not eps >= 0.0:
            raise DomainError("mollifier width eps must be non-negative")
        if not h > 0.0:
            raise DomainError("grid spacing h must be positive")
        if eps == 0.0:
            return cls(eps=0.0, h=h, density=np.array([1.0 / h]))
        m = int(np.floor(eps / h))
        r = np.arange(-m, m + 1) * (h / eps)
        w = np.maximum(1.0 - r * r, 0.0) ** 2
        w /= w.sum()
        return cls(eps=float(eps), h=float(h), density=w / h)

    @property
    def weights(self) -> np.ndarray:
        """Convolution weights (density times h); they sum to one."""
        return self.density * self.h

    @property
    def half_width(self) -> int:
        return (self.density.size - 1) // 2


def mollify(zfield: np.ndarray, kernel: MollifierKernel, grid: GridSpec) -> np.ndarray:
    """Smooth a cluster field (or any per-cell field) over space.

    Convolves each cluster-size component with the kernel along every
    spatial axis, reflecting at the zero-flux boundaries.  Constants pass
    through unchanged up to round-off and the per-component total over
    the domain is conserved exactly in exact arithmetic.
    """
    zfield = np.asarray(zfield, dtype=float)
    spatial = zfield.shape[: grid.dim]
    if spatial != grid.shape:
        raise DomainError(f"field spatial shape {spatial} != grid shape {grid.shape}")
    w = kernel.weights
    if w.size == 1:
        return zfield.copy()
    if any(w.size > s for s in grid.shape):
        raise KernelWidthError(
            f"mollifier spans {w.size} cells but the grid has only {min(grid.shape)}")
    out = zfield
    for axis in range(grid.dim):
        out = scipy.ndimage.correlate1d(out, w, axis=axis, mode="reflect")
    return out
