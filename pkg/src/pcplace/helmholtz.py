"""2D Helmholtz scattering benchmarks on an annulus, discretized with P1.

Two parameterized families of complex symmetric systems are provided:

* ``affine``: unit annulus with a piecewise (angular-sector) refractive
  index, affine in the parameters and mollified to 1 near the outer
  boundary;
* ``shape``: a star-shaped scatterer whose boundary radius is a Fourier
  expansion in the parameters; the problem is pulled back onto the
  reference annulus, turning boundary variation into smoothly varying
  matrix-valued diffusion and scalar refraction coefficients.

The outer boundary carries a first-order absorbing (Robin) condition and a
plane-wave excitation; the scatterer is sound-soft (homogeneous Dirichlet).
Meshes are structured polar grids refined as h ~ k0^(-3/2) against the
pollution effect.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.special import zeta

from .param_space import (
    AnisotropyProfile,
    WeightMatrix,
    affine_weight_matrix,
    anisotropy_profile,
    shape_mode_norms,
)

__all__ = [
    "DegenerateMapError",
    "HelmholtzConfig",
    "AnnulusMesh",
    "ProblemFamily",
    "build_annulus_mesh",
    "mollifier",
    "mollifier_radial",
    "affine_refractive_index",
    "boundary_mode",
    "boundary_radius",
    "max_safe_amplitude",
    "domain_map",
    "pullback_coefficients",
    "assemble",
    "assemble_operator",
    "incident_rhs",
    "apply_sound_soft",
    "affine_family",
    "shape_family",
    "save_mesh",
]


class DegenerateMapError(ValueError):
    """The domain map lost invertibility at a quadrature point."""


@dataclass(frozen=True)
class HelmholtzConfig:
    """Geometry, wavenumber and solver settings for the benchmarks."""

    k0: float
    r_in: float = 0.25
    r_out: float = 1.0
    r_mol: float = 0.9
    incident_direction: tuple[float, float] = (1.0, 0.0)
    incident_amplitude: float = 1.0
    tol: float = 1e-5
    mesh_constant: float = 2.5
    mesh_size: float | None = None
    max_iter: int | None = None

    def __post_init__(self):
        if self.k0 <= 0:
            raise ValueError("wavenumber must be positive")
        if not (0 < self.r_in < self.r_mol < self.r_out):
            raise ValueError("radii must satisfy 0 < r_in < r_mol < r_out")
        if not 0 < self.tol < 1:
            raise ValueError("GMRES tolerance must lie in (0, 1)")
        d = np.asarray(self.incident_direction, dtype=float)
        if d.shape != (2,) or not np.isclose(np.linalg.norm(d), 1.0):
            raise ValueError("incident direction must be a 2D unit vector")

    @property
    def h(self) -> float:
        """Target mesh size, explicit or the anti-pollution rule."""
        if self.mesh_size is not None:
            return self.mesh_size
        return self.mesh_constant * self.k0 ** (-1.5)

    @property
    def grad_mollifier_bound(self) -> float:
        """Sup-norm of the mollifier gradient, 1 / (r_mol - r_in)."""
        return 1.0 / (self.r_mol - self.r_in)


@dataclass
class AnnulusMesh:
    """Structured polar triangulation of the reference annulus.

    Precomputed element geometry (areas, P1 gradients, quadrature points,
    outer-edge data) is carried along so repeated assembly over parameter
    values touches only coefficient evaluation.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    inner_boundary: np.ndarray
    outer_boundary: np.ndarray
    h: float
    n_r: int
    n_theta: int
    # element geometry
    areas: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]
    grads: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]
    quad_points: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]
    outer_edges: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]


# P1 basis values at the three edge-midpoint quadrature nodes (rows:
# midpoints of edges 01, 12, 20; columns: vertices), weights 1/3 each.
_QUAD_PHI = np.array(
    [
        [0.5, 0.5, 0.0],
        [0.0, 0.5, 0.5],
        [0.5, 0.0, 0.5],
    ]
)


def build_annulus_mesh(cfg: HelmholtzConfig) -> AnnulusMesh:
    """Triangulate the annulus with max edge length <= 1.5 h."""
    h = cfg.h
    span = cfg.r_out - cfg.r_in
    if h > span:
        raise ValueError(f"mesh size h={h:.3g} too coarse for the annulus")
    n_r = int(np.ceil(span / h)) + 1
    n_theta = max(int(np.ceil(2 * np.pi * cfg.r_out / h)), 8)

    radii = np.linspace(cfg.r_in, cfg.r_out, n_r)
    thetas = 2 * np.pi * np.arange(n_theta) / n_theta
    rr, tt = np.meshgrid(radii, thetas, indexing="ij")
    nodes = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])

    def nid(ir, it):
        return ir * n_theta + np.mod(it, n_theta)

    ir = np.repeat(np.arange(n_r - 1), n_theta)
    it = np.tile(np.arange(n_theta), n_r - 1)
    a = nid(ir, it)
    b = nid(ir, it + 1)
    c = nid(ir + 1, it + 1)
    d = nid(ir + 1, it)
    # split each quad along the a-c diagonal, counterclockwise corners
    triangles = np.vstack([np.column_stack([a, d, c]), np.column_stack([a, c, b])])

    p = nodes[triangles]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    det2 = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det2 <= 0):
        raise RuntimeError("negatively oriented element in structured mesh")
    areas = 0.5 * det2

    # P1 gradients: rotate opposite edges by 90 degrees over twice the area.
    grads = np.empty((triangles.shape[0], 3, 2))
    for i, (j, k) in enumerate(((1, 2), (2, 0), (0, 1))):
        edge = p[:, k] - p[:, j]
        grads[:, i, 0] = -edge[:, 1] / det2
        grads[:, i, 1] = edge[:, 0] / det2

    quad_points = np.stack(
        [
            0.5 * (p[:, 0] + p[:, 1]),
            0.5 * (p[:, 1] + p[:, 2]),
            0.5 * (p[:, 2] + p[:, 0]),
        ],
        axis=1,
    )

    outer_ring = (n_r - 1) * n_theta + np.arange(n_theta)
    outer_edges = np.column_stack([outer_ring, np.roll(outer_ring, -1)])

    return AnnulusMesh(
        nodes=nodes,
        triangles=triangles,
        inner_boundary=np.arange(n_theta),
        outer_boundary=outer_ring,
        h=h,
        n_r=n_r,
        n_theta=n_theta,
        areas=areas,
        grads=grads,
        quad_points=quad_points,
        outer_edges=outer_edges,
    )


def mollifier_radial(r, cfg: HelmholtzConfig):
    """Radial cutoff: 1 at the scatterer, 0 from r_mol outward, clamped."""
    raw = (np.asarray(r, dtype=float) - cfg.r_mol) / (cfg.r_in - cfg.r_mol)
    return np.clip(raw, 0.0, 1.0)


def mollifier(points, cfg: HelmholtzConfig):
    """Mollifier evaluated at 2D points (last axis of length 2)."""
    r = np.linalg.norm(np.asarray(points, dtype=float), axis=-1)
    return mollifier_radial(r, cfg)


def _mollifier_radial_deriv(r, cfg: HelmholtzConfig):
    active = (np.asarray(r) > cfg.r_in) & (np.asarray(r) < cfg.r_mol)
    return np.where(active, 1.0 / (cfg.r_in - cfg.r_mol), 0.0)


@dataclass(frozen=True)
class ProblemFamily:
    """A parameterized family of Helmholtz systems plus surrogate metadata.

    ``b_weight``/``d_weight`` bound the parameter sensitivity of the
    scalar and matrix coefficients (normalized to unit peak diagonal; the
    absolute scale is absorbed by the prior-mean hyperparameters), and
    ``profile`` carries the kernel correlation lengths derived from them.
    """

    kind: str
    n_dims: int
    b_weight: WeightMatrix
    d_weight: WeightMatrix
    profile: AnisotropyProfile
    eta: np.ndarray | None = None
    amplitude: float | None = None
    decay: float | None = None


def affine_family(eta, cfg: HelmholtzConfig) -> ProblemFamily:
    """Sector-wise affine refractive index with amplitudes ``eta``."""
    e = np.atleast_1d(np.asarray(eta, dtype=float))
    if np.any(e <= 0):
        raise ValueError("affine amplitudes must be positive")
    if e.max() >= 1.0:
        raise ValueError("amplitudes must stay below 1 to keep n positive")
    b = affine_weight_matrix(e).normalized()
    d = WeightMatrix.zero(e.size)
    profile = anisotropy_profile(b, d, 0.0, 1.0, 2.0 * cfg.r_out)
    return ProblemFamily(
        kind="affine",
        n_dims=e.size,
        b_weight=b,
        d_weight=d,
        profile=profile,
        eta=e,
    )


def max_safe_amplitude(decay: float, r_in: float = 0.25) -> float:
    """Largest mode amplitude keeping the boundary curve non-intersecting.

    The Fourier modes come in sine/cosine pairs with common algebraic
    decay, so the total displacement is bounded by
    amp * (1 + sqrt(2) * (zeta(decay) - 1)); the bound keeps it below the
    nominal radius.
    """
    if decay <= 1:
        raise ValueError("decay exponent must exceed 1 for a summable series")
    return r_in / (1.0 + np.sqrt(2.0) * (zeta(decay) - 1.0))


def shape_family(
    n_dims: int, amplitude: float, decay: float, cfg: HelmholtzConfig
) -> ProblemFamily:
    """Star-shaped scatterer with Fourier boundary modes, pulled back."""
    cap = max_safe_amplitude(decay, cfg.r_in)
    if not 0 < amplitude < cap:
        raise ValueError(
            f"amplitude {amplitude:.4g} must stay below {cap:.4g} "
            f"for decay {decay:g}"
        )
    w = shape_mode_norms(amplitude, decay, cfg.grad_mollifier_bound, n_dims)
    b = WeightMatrix(np.outer(w, w)).normalized()
    profile = anisotropy_profile(b, b, 1.0, 1.0, 2.0 * cfg.r_out)
    return ProblemFamily(
        kind="shape",
        n_dims=n_dims,
        b_weight=b,
        d_weight=b,
        profile=profile,
        amplitude=amplitude,
        decay=decay,
    )


def _angles(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    return np.mod(np.arctan2(pts[..., 1], pts[..., 0]), 2.0 * np.pi)


def affine_refractive_index(y, points, family: ProblemFamily, cfg: HelmholtzConfig):
    """n(y, x) = 1 + indicator-sector * mollifier * eta_i * (y_i - 1)/2."""
    if family.kind != "affine":
        raise ValueError("refractive index applies to the affine family")
    y = np.asarray(y, dtype=float)
    pts = np.asarray(points, dtype=float)
    theta = _angles(pts)
    n_dims = family.n_dims
    sector = np.minimum(
        (theta * n_dims / (2.0 * np.pi)).astype(int), n_dims - 1
    )
    chi = mollifier(pts, cfg)
    bump = family.eta[sector] * (y[sector] - 1.0) / 2.0
    return 1.0 + chi * bump


def _mode_tables(theta, n_dims: int, amplitude: float, decay: float):
    """Values and theta-derivatives of the boundary modes at ``theta``.

    Mode 1 is constant; even modes are sines, odd modes (from 3) cosines,
    with frequencies growing with the index and algebraically decaying
    amplitudes.
    """
    th = np.asarray(theta, dtype=float)
    j = np.arange(1, n_dims + 1)
    vals = np.empty(th.shape + (n_dims,))
    derivs = np.empty_like(vals)
    for col, jj in enumerate(j):
        if jj == 1:
            vals[..., col] = amplitude
            derivs[..., col] = 0.0
        elif jj % 2 == 0:
            coef = amplitude * ((jj + 2) / 2.0) ** (-decay)
            freq = jj / 2.0
            vals[..., col] = coef * np.sin(freq * th)
            derivs[..., col] = coef * freq * np.cos(freq * th)
        else:
            coef = amplitude * ((jj + 1) / 2.0) ** (-decay)
            freq = (jj - 1) / 2.0
            vals[..., col] = coef * np.cos(freq * th)
            derivs[..., col] = -coef * freq * np.sin(freq * th)
    return vals, derivs


def boundary_mode(theta, j: int, family: ProblemFamily):
    """Single boundary Fourier mode (1-based index) of the shape family."""
    if family.kind != "shape":
        raise ValueError("boundary modes apply to the shape family")
    if not 1 <= j <= family.n_dims:
        raise ValueError("mode index out of range")
    vals, _ = _mode_tables(theta, family.n_dims, family.amplitude, family.decay)
    return vals[..., j - 1]


def boundary_radius(y, theta, family: ProblemFamily, cfg: HelmholtzConfig):
    """Parameterized scatterer radius r(y, theta)."""
    vals, _ = _mode_tables(theta, family.n_dims, family.amplitude, family.decay)
    return cfg.r_in + vals @ np.asarray(y, dtype=float)


def domain_map(y, points, family: ProblemFamily, cfg: HelmholtzConfig):
    """Radial displacement map and its analytic Jacobian.

    Phi(y, x) = x + chi(|x|) * s(theta) * x/|x| with s the parameter
    combination of the boundary modes; the displacement dies at r_mol so
    the outer boundary stays fixed.  Returns (Phi, Jacobian) with shapes
    (..., 2) and (..., 2, 2).
    """
    if family.kind != "shape":
        raise ValueError("domain map applies to the shape family")
    y = np.asarray(y, dtype=float)
    pts = np.asarray(points, dtype=float)
    r = np.linalg.norm(pts, axis=-1)
    if np.any(r == 0):
        raise ValueError("domain map is undefined at the origin")
    theta = _angles(pts)
    vals, derivs = _mode_tables(theta, family.n_dims, family.amplitude, family.decay)
    s = vals @ y
    s_prime = derivs @ y
    chi = mollifier_radial(r, cfg)
    chi_prime = _mollifier_radial_deriv(r, cfg)

    e_r = pts / r[..., None]
    e_t = np.stack([-e_r[..., 1], e_r[..., 0]], axis=-1)
    phi = pts + (chi * s)[..., None] * e_r

    rr = np.einsum("...i,...j->...ij", e_r, e_r)
    rt = np.einsum("...i,...j->...ij", e_r, e_t)
    tt = np.einsum("...i,...j->...ij", e_t, e_t)
    eye = np.broadcast_to(np.eye(2), rr.shape)
    jac = (
        eye
        + (chi_prime * s)[..., None, None] * rr
        + (chi * s_prime / r)[..., None, None] * rt
        + (chi * s / r)[..., None, None] * tt
    )
    return phi, jac


def pullback_coefficients(y, points, family: ProblemFamily, cfg: HelmholtzConfig):
    """Diffusion matrix and refraction scalar of the pulled-back problem.

    A = J^-1 J^-T det(J) and n = det(J) with J the domain-map Jacobian;
    A is symmetric positive definite wherever the map is orientation
    preserving.
    """
    _, jac = domain_map(y, points, family, cfg)
    det = jac[..., 0, 0] * jac[..., 1, 1] - jac[..., 0, 1] * jac[..., 1, 0]
    if np.any(det <= 1e-12):
        raise DegenerateMapError(
            f"domain map degenerates (min det {np.min(det):.3e})"
        )
    inv = np.empty_like(jac)
    inv[..., 0, 0] = jac[..., 1, 1]
    inv[..., 1, 1] = jac[..., 0, 0]
    inv[..., 0, 1] = -jac[..., 0, 1]
    inv[..., 1, 0] = -jac[..., 1, 0]
    inv /= det[..., None, None]
    a = np.einsum("...ik,...jk->...ij", inv, inv) * det[..., None, None]
    return a, det


def _coefficients_at(y, points, family: ProblemFamily, cfg: HelmholtzConfig):
    """(A, n) at arbitrary points for either family; A may be None for I."""
    if family.kind == "affine":
        return None, affine_refractive_index(y, points, family, cfg)
    return pullback_coefficients(y, points, family, cfg)


def assemble_operator(
    y, family: ProblemFamily, mesh: AnnulusMesh, cfg: HelmholtzConfig
) -> sp.csr_matrix:
    """Stiffness - k0^2 Mass - i k0 BoundaryMass, no essential conditions."""
    y = np.asarray(y, dtype=float)
    if y.shape != (family.n_dims,):
        raise ValueError("parameter dimension does not match the family")
    qp = mesh.quad_points  # (m, 3, 2)
    w = mesh.areas / 3.0
    a_coef, n_coef = _coefficients_at(y, qp.reshape(-1, 2), family, cfg)
    n_coef = n_coef.reshape(qp.shape[0], 3)

    # mass: sum_q w * n_q * phi_q phi_q^T
    phi_outer = np.einsum("qi,qj->qij", _QUAD_PHI, _QUAD_PHI)
    me = np.einsum("tq,qij->tij", w[:, None] * n_coef, phi_outer)

    # stiffness: gradients are constant per element, the coefficient is not
    if a_coef is None:
        ke = np.einsum("tik,tjk->tij", mesh.grads, mesh.grads) * mesh.areas[:, None, None]
    else:
        a_sum = a_coef.reshape(qp.shape[0], 3, 2, 2).sum(axis=1)
        flux = np.einsum("tqr,tjr->tjq", a_sum, mesh.grads)
        ke = np.einsum("tiq,tjq->tij", mesh.grads, flux) * w[:, None, None]

    vals = (ke - cfg.k0**2 * me).astype(np.complex128)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_nodes
    system = sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n)).tocsr()

    # Robin boundary mass on the outer polygon, exact for P1
    pa = mesh.nodes[mesh.outer_edges[:, 0]]
    pb = mesh.nodes[mesh.outer_edges[:, 1]]
    lengths = np.linalg.norm(pb - pa, axis=1)
    block = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    b_vals = -1j * cfg.k0 * lengths[:, None, None] * block
    b_rows = np.repeat(mesh.outer_edges, 2, axis=1).ravel()
    b_cols = np.tile(mesh.outer_edges, (1, 2)).ravel()
    boundary = sp.coo_matrix((b_vals.ravel(), (b_rows, b_cols)), shape=(n, n)).tocsr()
    return (system + boundary).tocsr()


def incident_rhs(mesh: AnnulusMesh, cfg: HelmholtzConfig) -> np.ndarray:
    """Plane-wave excitation integral over the outer boundary.

    Assembles int_Gamma (d_normal - i k0) u_in * phi with
    u_in = amp * exp(i k0 d.x), using 2-point Gauss per polygon edge.
    """
    rhs = np.zeros(mesh.n_nodes, dtype=np.complex128)
    if cfg.incident_amplitude == 0.0:
        return rhs
    d = np.asarray(cfg.incident_direction, dtype=float)
    pa = mesh.nodes[mesh.outer_edges[:, 0]]
    pb = mesh.nodes[mesh.outer_edges[:, 1]]
    tangent = pb - pa
    lengths = np.linalg.norm(tangent, axis=1)
    normal = np.column_stack([tangent[:, 1], -tangent[:, 0]]) / lengths[:, None]

    gauss = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
    for xi in gauss:
        x_q = pa + xi * tangent
        u_in = cfg.incident_amplitude * np.exp(1j * cfg.k0 * (x_q @ d))
        data = 1j * cfg.k0 * ((normal @ d) - 1.0) * u_in
        w_q = 0.5 * lengths
        np.add.at(rhs, mesh.outer_edges[:, 0], w_q * data * (1.0 - xi))
        np.add.at(rhs, mesh.outer_edges[:, 1], w_q * data * xi)
    return rhs


def apply_sound_soft(
    system: sp.csr_matrix,
    rhs: np.ndarray,
    mesh: AnnulusMesh,
    values: np.ndarray | float = 0.0,
) -> tuple[sp.csr_matrix, np.ndarray]:
    """Impose Dirichlet data on the scatterer by row/column elimination."""
    nodes = mesh.inner_boundary
    n = mesh.n_nodes
    vals = np.broadcast_to(np.asarray(values, dtype=np.complex128), nodes.shape)
    lift = np.zeros(n, dtype=np.complex128)
    lift[nodes] = vals
    rhs = rhs - system @ lift
    keep = np.ones(n)
    keep[nodes] = 0.0
    proj = sp.diags(keep)
    system = proj @ system @ proj + sp.diags(1.0 - keep)
    rhs = keep * rhs
    rhs[nodes] = vals
    return system.tocsr(), rhs


def assemble(
    y, family: ProblemFamily, mesh: AnnulusMesh, cfg: HelmholtzConfig
) -> tuple[sp.csr_matrix, np.ndarray]:
    """Full scattering system at parameter y: operator, excitation, BC."""
    system = assemble_operator(y, family, mesh, cfg)
    rhs = incident_rhs(mesh, cfg)
    return apply_sound_soft(system, rhs, mesh, values=0.0)


def save_mesh(path, mesh: AnnulusMesh) -> None:
    """Plain-text node/element export for external visualization."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"nodes {mesh.n_nodes}\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"triangles {mesh.n_triangles}\n")
        for a, b, c in mesh.triangles:
            fh.write(f"{a} {b} {c}\n")
        fh.write(f"inner {' '.join(map(str, mesh.inner_boundary))}\n")
        fh.write(f"outer {' '.join(map(str, mesh.outer_boundary))}\n")
