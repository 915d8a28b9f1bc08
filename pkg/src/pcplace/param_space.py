"""Parameter-space geometry: boxes, point sets, weighted norms and anisotropy.

The iteration-count surrogate measures distances in parameter space with
weighted l2 norms.  The weight matrices are assembled per problem family
(diagonal for an affine coefficient expansion, rank-one for a parameterized
boundary) and also drive the per-dimension correlation lengths of the
surrogate kernel: the more a dimension matters, the shorter its length.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ParamBox",
    "ParamSet",
    "WeightMatrix",
    "AnisotropyProfile",
    "weighted_norm",
    "affine_weight_matrix",
    "shape_mode_norms",
    "anisotropy_profile",
]

# Relative eigenvalue floor used for the positive-semidefiniteness check.
# An eigenvalue floor (rather than Cholesky) tolerates the rank-one weight
# matrices of the shape family.
_PSD_FLOOR = 1e-10


@dataclass(frozen=True)
class ParamBox:
    """Axis-aligned closed box prod_i [lo_i, hi_i] in R^N."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("box bounds must be 1-d arrays of equal length")
        if lo.size < 1:
            raise ValueError("box needs at least one dimension")
        if not np.all(lo < hi):
            raise ValueError("every interval must satisfy lo < hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def symmetric_unit(cls, dims: int) -> "ParamBox":
        """[-1, 1]^dims, the domain of both built-in problem families."""
        return cls(-np.ones(dims), np.ones(dims))

    @property
    def dims(self) -> int:
        return self.lo.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= self.lo - tol) & (pts <= self.hi + tol), axis=1)

    def clip(self, point: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(point, dtype=float), self.lo, self.hi)


@dataclass(frozen=True)
class ParamSet:
    """Finite ordered collection of points in a box, with stable indices.

    Indices survive subsetting, so points evaluated during surrogate
    training keep their identity when the remainder is handed to the
    placement stage.
    """

    box: ParamBox
    points: np.ndarray
    indices: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[1] != self.box.dims:
            raise ValueError("point dimension does not match box")
        if not np.all(self.box.contains(pts)):
            raise ValueError("every point must lie inside the box")
        idx = self.indices
        if idx is None:
            idx = np.arange(pts.shape[0])
        idx = np.asarray(idx, dtype=int)
        if idx.shape != (pts.shape[0],) or len(np.unique(idx)) != idx.size:
            raise ValueError("indices must be unique and match the point count")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, keep: np.ndarray) -> "ParamSet":
        """Subset by positions, preserving the original indices."""
        keep = np.asarray(keep)
        return ParamSet(self.box, self.points[keep], self.indices[keep])

    def without_indices(self, consumed) -> "ParamSet":
        """Drop the points whose stable index is in ``consumed``."""
        mask = ~np.isin(self.indices, np.asarray(list(consumed), dtype=int))
        return self.subset(np.flatnonzero(mask))


@dataclass(frozen=True)
class WeightMatrix:
    """Symmetric positive-semidefinite weight for a parameter-space norm."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.entries, dtype=float))
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("weight matrix must be square")
        scale = np.linalg.norm(m)
        if scale > 0 and np.max(np.abs(m - m.T)) > 1e-12 * scale:
            raise ValueError("weight matrix must be symmetric")
        m = 0.5 * (m + m.T)
        if scale > 0:
            eigs = np.linalg.eigvalsh(m)
            if eigs.min() < -_PSD_FLOOR * scale:
                raise ValueError(
                    f"weight matrix is not positive semidefinite "
                    f"(min eigenvalue {eigs.min():.3e})"
                )
        object.__setattr__(self, "entries", m)

    @classmethod
    def zero(cls, dims: int) -> "WeightMatrix":
        return cls(np.zeros((dims, dims)))

    @property
    def dims(self) -> int:
        return self.entries.shape[0]

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries)

    def normalized(self) -> "WeightMatrix":
        """Scale to unit maximum diagonal (no-op on the zero matrix)."""
        peak = self.diagonal.max() if self.dims else 0.0
        if peak <= 0:
            return self
        return WeightMatrix(self.entries / peak)


@dataclass(frozen=True)
class AnisotropyProfile:
    """Per-dimension importance weights and kernel correlation lengths.

    corr_lengths[i] = domain_diameter * max_j gamma[j] / gamma[i], so the
    most important dimension gets the diameter of the computational domain
    as its length and less important dimensions get longer ones.
    """

    gamma: np.ndarray
    corr_lengths: np.ndarray
    domain_diameter: float

    def __post_init__(self):
        g = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        l = np.atleast_1d(np.asarray(self.corr_lengths, dtype=float))
        if self.domain_diameter <= 0:
            raise ValueError("domain diameter must be positive")
        if np.any(g <= 0) or np.any(l <= 0):
            raise ValueError("gamma and correlation lengths must be positive")
        expected = self.domain_diameter * g.max() / g
        if not np.allclose(l, expected, rtol=1e-10):
            raise ValueError("correlation lengths inconsistent with gamma")
        if l.min() < self.domain_diameter * (1 - 1e-12):
            raise ValueError("correlation lengths cannot undercut the domain diameter")
        object.__setattr__(self, "gamma", g)
        object.__setattr__(self, "corr_lengths", l)

    @property
    def dims(self) -> int:
        return self.gamma.size


def weighted_norm(delta: np.ndarray, weight: WeightMatrix) -> float:
    """sqrt(delta^T M delta) for a positive-semidefinite weight M."""
    d = np.asarray(delta, dtype=float)
    if d.ndim != 1 or d.size != weight.dims:
        raise ValueError("delta dimension does not match the weight matrix")
    q = float(d @ weight.entries @ d)
    scale = float(np.linalg.norm(weight.entries)) * float(d @ d)
    if q < -_PSD_FLOOR * max(scale, 1.0):
        raise ValueError("negative quadratic form: weight matrix is not PSD")
    return np.sqrt(max(q, 0.0))


def batch_weighted_norm(deltas: np.ndarray, weight: WeightMatrix) -> np.ndarray:
    """Vectorized ``weighted_norm`` over rows of ``deltas``."""
    d = np.atleast_2d(np.asarray(deltas, dtype=float))
    if d.shape[1] != weight.dims:
        raise ValueError("delta dimension does not match the weight matrix")
    q = np.einsum("ij,jk,ik->i", d, weight.entries, d)
    return np.sqrt(np.maximum(q, 0.0))


def affine_weight_matrix(eta: np.ndarray) -> WeightMatrix:
    """Diagonal weight diag(eta_i^2) for an affine coefficient expansion.

    The mollifier-dependent proportionality constant is absorbed by the
    prior-mean hyperparameters, so only the squared amplitudes remain.
    """
    e = np.atleast_1d(np.asarray(eta, dtype=float))
    if np.any(e <= 0):
        raise ValueError("amplitudes must be positive")
    return WeightMatrix(np.diag(e**2))


def shape_mode_norms(
    theta_amp: float, alpha_decay: float, grad_chi_inf: float, n_dims: int
) -> np.ndarray:
    """W^{1,inf} bounds of the boundary-displacement modes.

    Mode 1 is the constant radial inflation; even/odd modes j >= 2 are the
    Fourier sine/cosine pair with algebraic decay ``alpha_decay``:

        j = 1      : 2 * amp * |grad chi|_inf
        j even     : ((j+2)/2)^-alpha * amp * (1 + |grad chi|_inf + j/2)
        j odd, > 1 : ((j+1)/2)^-alpha * amp * (1 + |grad chi|_inf + (j-1)/2)
    """
    if theta_amp <= 0 or grad_chi_inf <= 0:
        raise ValueError("amplitude and gradient bound must be positive")
    if alpha_decay <= 1:
        raise ValueError("decay exponent must exceed 1")
    if n_dims < 1:
        raise ValueError("need at least one mode")
    j = np.arange(1, n_dims + 1, dtype=float)
    even = j % 2 == 0
    out = np.where(
        even,
        ((j + 2) / 2) ** (-alpha_decay) * theta_amp * (1 + grad_chi_inf + j / 2),
        ((j + 1) / 2) ** (-alpha_decay) * theta_amp * (1 + grad_chi_inf + (j - 1) / 2),
    )
    out[0] = 2.0 * theta_amp * grad_chi_inf
    return out


def anisotropy_profile(
    b_weight: WeightMatrix,
    d_weight: WeightMatrix,
    c1: float,
    c2: float,
    domain_diameter: float,
) -> AnisotropyProfile:
    """Importance weights gamma_j = c1*sqrt(D_jj) + c2*sqrt(B_jj) and lengths.

    A dimension with gamma_j = 0 has no influence on the operator and must
    be dropped by the caller; an infinite correlation length is not a
    usable stand-in.
    """
    if b_weight.dims != d_weight.dims:
        raise ValueError("weight matrices must share a dimension")
    if c1 < 0 or c2 < 0 or c1 + c2 <= 0:
        raise ValueError("coefficients must be nonnegative with positive sum")
    gamma = c1 * np.sqrt(d_weight.diagonal) + c2 * np.sqrt(b_weight.diagonal)
    if np.any(gamma <= 0):
        dead = np.flatnonzero(gamma <= 0).tolist()
        raise ValueError(f"dimensions {dead} carry no weight; drop them first")
    lengths = domain_diameter * gamma.max() / gamma
    return AnisotropyProfile(gamma, lengths, domain_diameter)
