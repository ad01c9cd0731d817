"""Fourier discretization of Sobolev spaces and trace operators.

Functions on a box ``[-L, L]^k`` are expanded in the orthonormal exponentials
``e_n(x) = (2L)^{-k/2} exp(i xi_n . x)``.  The Fourier transform is unitary,
``F u(xi) = (2 pi)^{-k/2} int exp(-i xi . x) u(x) dx``.

Traces ``i^* (int D_g T_g dg) i_*`` on affine submanifolds are assembled in
the dual space: with ``xi = P eta + Q zeta`` split into tangential and
transverse frequencies,

    (A u)^(eta) = (2 pi)^{-nu} sum_g w_g int sigma_g(xi) exp(i xi.(x0 - b_g))
                  exp(-i (R_g^T xi).x0) u^(P^T R_g^T xi) d zeta.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (DomainError, PreconditionError, SingularityError,
                     SobolevIndexError, UnsupportedScenarioError)
from .geometry import GroupAction, Submanifold

AFFINE_ACTIONS = ("planar-rotation", "planar-translation", "axial-rotation-3d",
                  "rotation-translation-3d", "screw-3d", "so3-rotations")


def _sinc(x):
    return np.sinc(np.asarray(x) / np.pi)


@dataclass(frozen=True)
class FourierGrid:
    """Tensor grid of frequencies on the box ``[-L, L]^dim``.

    With ``offset`` the axis frequencies are ``(j + 1/2) pi / L`` for
    ``j = -N/2 .. N/2 - 1`` (``N`` modes, zero excluded); otherwise they are
    ``j pi / L`` for ``j = -N/2 .. N/2`` (``N + 1`` modes).
    """

    dim: int
    modes: int
    half_width: float = np.pi
    offset: bool = True

    def __post_init__(self):
        if self.modes < 2 or self.modes % 2:
            raise DomainError("modes per axis must be even and at least 2")
        if self.dim < 1 or self.half_width <= 0:
            raise DomainError("invalid grid dimension or box size")

    @property
    def spacing(self) -> float:
        return np.pi / self.half_width

    @property
    def axis_freqs(self) -> np.ndarray:
        h = self.modes // 2
        j = np.arange(-h, h) + 0.5 if self.offset else np.arange(-h, h + 1).astype(float)
        return j * self.spacing

    @property
    def n_axis(self) -> int:
        return len(self.axis_freqs)

    @property
    def size(self) -> int:
        return self.n_axis ** self.dim

    @property
    def freqs(self) -> np.ndarray:
        """All frequencies, shape ``(size, dim)``, last axis varying fastest."""
        ax = self.axis_freqs
        mesh = np.meshgrid(*([ax] * self.dim), indexing="ij")
        return np.stack(mesh, -1).reshape(-1, self.dim)

    @property
    def band(self) -> float:
        return float(np.max(np.abs(self.axis_freqs)))

    def sample_points(self, per_axis: int | None = None) -> np.ndarray:
        m = per_axis or 2 * self.n_axis
        x = -self.half_width + 2 * self.half_width * np.arange(m) / m
        return np.stack(np.meshgrid(*([x] * self.dim), indexing="ij"), -1).reshape(-1, self.dim)

    def synthesis_matrix(self, points: np.ndarray) -> np.ndarray:
        """Values of the basis functions at ``points``; shape ``(n_pts, size)``."""
        norm = (2 * self.half_width) ** (-self.dim / 2)
        return norm * np.exp(1j * np.asarray(points) @ self.freqs.T)

    def to_samples(self, coeffs, per_axis: int | None = None) -> np.ndarray:
        return self.synthesis_matrix(self.sample_points(per_axis)) @ coeffs

    def from_samples(self, values, per_axis: int | None = None) -> np.ndarray:
        m = per_axis or 2 * self.n_axis
        if m < self.n_axis:
            raise DomainError("need at least one sample per mode")
        pts = self.sample_points(m)
        cell = (2 * self.half_width / m) ** self.dim
        return cell * (self.synthesis_matrix(pts).conj().T @ np.asarray(values))

    def weights(self, s: float) -> np.ndarray:
        """Sobolev weights ``(1 + |xi|^2)^{s/2}``."""
        return (1.0 + np.sum(self.freqs ** 2, axis=1)) ** (s / 2)


@dataclass(frozen=True)
class SobolevVector:
    """Coefficients on a set of frequencies with a Sobolev index.

    ``freqs`` defaults to the grid frequencies; shifts by rotations move the
    frequencies off the grid, in which case they are carried explicitly.
    """

    grid: FourierGrid
    coeffs: np.ndarray
    s: float
    freqs: np.ndarray | None = None

    def __post_init__(self):
        f = self.grid.freqs if self.freqs is None else np.asarray(self.freqs, float)
        object.__setattr__(self, "freqs", f)
        c = np.asarray(self.coeffs, complex)
        if c.shape != (len(f),):
            raise DomainError("coefficient count does not match the frequency set")
        object.__setattr__(self, "coeffs", c)

    @property
    def on_grid(self) -> bool:
        return np.array_equal(self.freqs, self.grid.freqs)

    def norm(self, s: float | None = None) -> float:
        s = self.s if s is None else s
        w = (1.0 + np.sum(self.freqs ** 2, axis=1)) ** s
        return float(np.sqrt(np.sum(w * np.abs(self.coeffs) ** 2)))

    def evaluate(self, points) -> np.ndarray:
        norm = (2 * self.grid.half_width) ** (-self.grid.dim / 2)
        return norm * np.exp(1j * np.asarray(points) @ self.freqs.T) @ self.coeffs

    def __add__(self, other: "SobolevVector") -> "SobolevVector":
        if not np.array_equal(self.freqs, other.freqs):
            raise DomainError("frequency sets differ")
        return SobolevVector(self.grid, self.coeffs + other.coeffs, min(self.s, other.s), self.freqs)

    def scale(self, c: complex) -> "SobolevVector":
        return SobolevVector(self.grid, c * self.coeffs, self.s, self.freqs)


def plane_wave(grid: FourierGrid, xi0, s: float = 0.0) -> SobolevVector:
    """``exp(i xi0 . x)`` as a single coefficient on the frequency ``xi0``."""
    xi0 = np.atleast_2d(np.asarray(xi0, float))
    return SobolevVector(grid, np.array([(2 * grid.half_width) ** (grid.dim / 2)]), s, xi0)


def random_vector(grid: FourierGrid, rng: np.random.Generator, s: float = 0.0) -> SobolevVector:
    c = rng.normal(size=grid.size) + 1j * rng.normal(size=grid.size)
    return SobolevVector(grid, c, s)


@dataclass(frozen=True)
class DiscreteOperator:
    """Dense matrix between coefficient spaces with Sobolev bookkeeping."""

    matrix: np.ndarray
    source: FourierGrid
    source_s: float
    target: FourierGrid
    target_s: float
    order: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.matrix.shape != (self.target.size, self.source.size):
            raise DomainError("matrix shape does not match grid sizes")

    def apply(self, u: SobolevVector) -> SobolevVector:
        if not u.on_grid or u.grid != self.source:
            raise DomainError("input must live on the source grid")
        return SobolevVector(self.target, self.matrix @ u.coeffs, u.s - self.order)

    def weighted_matrix(self, source_s: float | None = None, target_s: float | None = None) -> np.ndarray:
        """Matrix of the operator between the weighted l2 spaces ``H^s -> H^t``."""
        s = self.source_s if source_s is None else source_s
        t = self.target_s if target_s is None else target_s
        return self.target.weights(t)[:, None] * self.matrix / self.source.weights(s)[None, :]

    def sobolev_norm(self, source_s: float | None = None, target_s: float | None = None) -> float:
        return float(np.linalg.norm(self.weighted_matrix(source_s, target_s), 2))

    def scaled(self, c: float) -> "DiscreteOperator":
        return DiscreteOperator(c * self.matrix, self.source, self.source_s, self.target,
                                self.target_s, self.order, dict(self.meta))


# ---------------------------------------------------------------------------
# boundary and coboundary
# ---------------------------------------------------------------------------


def _require_affine(sub: Submanifold):
    if sub.kind != "affine":
        raise UnsupportedScenarioError("operator assembly needs an affine submanifold")


def restriction_matrix(freqs: np.ndarray, ambient: FourierGrid, sub: Submanifold,
                       sub_grid: FourierGrid) -> np.ndarray:
    """Map ambient coefficients on ``freqs`` to submanifold grid coefficients."""
    _require_affine(sub)
    if sub_grid.dim != sub.dim or ambient.dim != sub.ambient_dim:
        raise DomainError("grid dimensions do not match the submanifold")
    basis = sub.data["basis"]                       # (k, n)
    tang = freqs @ basis.T                          # (F, k)
    phase = np.exp(1j * freqs @ sub.data["origin"])
    ls = sub_grid.half_width
    pre = (2 * ls) ** (sub.dim / 2) * (2 * ambient.half_width) ** (-ambient.dim / 2)
    out = np.ones((sub_grid.size, len(freqs)), complex)
    for j in range(sub.dim):
        out *= _sinc(ls * (tang[None, :, j] - sub_grid.freqs[:, None, j]))
    return pre * out * phase[None, :]


def restrict(u: SobolevVector, sub: Submanifold, sub_grid: FourierGrid,
             guard: float = 0.0) -> SobolevVector:
    """Restriction to the affine submanifold, re-expanded on ``sub_grid``."""
    nu = sub.codim
    if u.s <= nu / 2 - guard:
        raise SobolevIndexError(f"restriction needs s > {nu / 2 - guard}")
    r = restriction_matrix(u.freqs, u.grid, sub, sub_grid)
    return SobolevVector(sub_grid, r @ u.coeffs, u.s - nu / 2)


def embed(v: SobolevVector, sub: Submanifold, ambient: FourierGrid) -> SobolevVector:
    """Coboundary: exact discrete adjoint of :func:`restrict` on the grids."""
    if not v.on_grid:
        raise DomainError("input must live on the submanifold grid")
    r = restriction_matrix(ambient.freqs, ambient, sub, v.grid)
    return SobolevVector(ambient, r.conj().T @ v.coeffs, v.s - sub.codim / 2)


def inner(u: SobolevVector, v: SobolevVector) -> complex:
    if not np.array_equal(u.freqs, v.freqs):
        raise DomainError("frequency sets differ")
    return complex(np.vdot(v.coeffs, u.coeffs))


# ---------------------------------------------------------------------------
# shifts and symbols
# ---------------------------------------------------------------------------


def shift_apply(action: GroupAction, g, u: SobolevVector) -> SobolevVector:
    """``(T_g u)(x) = u(g^{-1} x)``: frequencies rotate, translations add a phase."""
    r, b = action.affine(g)
    if r.shape[0] != u.grid.dim:
        raise DomainError("action and grid dimensions differ")
    new = u.freqs @ r.T
    phase = np.exp(-1j * new @ b)
    return SobolevVector(u.grid, u.coeffs * phase, u.s, new)


def psdo_apply(symbol: Callable[[np.ndarray], np.ndarray], u: SobolevVector, order: float) -> SobolevVector:
    """Constant-coefficient operator: multiply coefficients by ``symbol(xi)``."""
    vals = np.asarray(symbol(u.freqs), complex)
    if not np.all(np.isfinite(vals)):
        raise SingularityError("symbol is not finite on a frequency node")
    return SobolevVector(u.grid, vals * u.coeffs, u.s - order, u.freqs)


def inverse_laplacian_symbol(xi):
    """Symbol of the inverse Laplacian, ``|xi|^{-2}``."""
    with np.errstate(divide="ignore"):
        return 1.0 / np.sum(np.asarray(xi) ** 2, axis=-1)


def bessel_symbol(t: float):
    def sym(xi):
        return (1.0 + np.sum(np.asarray(xi) ** 2, axis=-1)) ** (t / 2)
    return sym


@dataclass(frozen=True)
class GOperatorSpec:
    """``D = int D_g T_g dg`` with constant-coefficient symbols ``sigma_g``.

    ``symbol(g, xi)`` returns ``sigma_g(xi)`` vectorized over the leading axes
    of ``xi``.
    """

    action: GroupAction
    symbol: Callable[[np.ndarray, np.ndarray], np.ndarray]
    order: float
    name: str = "custom"

    def continuity_defect(self, probe=None) -> float:
        """Largest relative jump of ``sigma_g`` between neighbouring nodes."""
        if probe is None:
            probe = np.array([[0.7, -0.4, 1.3][: self.action.ambient_dim]])
        vals = np.array([np.abs(self.symbol(g, probe)).max() for g in self.action.nodes])
        if len(vals) < 2:
            return 0.0
        scale = max(np.abs(vals).max(), 1e-300)
        return float(np.abs(np.diff(vals)).max() / scale)


def laplacian_inverse_spec(action: GroupAction) -> GOperatorSpec:
    return GOperatorSpec(action, lambda g, xi: inverse_laplacian_symbol(xi), -2.0, "inverse-laplacian")


def identity_spec(action: GroupAction) -> GOperatorSpec:
    return GOperatorSpec(action, lambda g, xi: np.ones(np.shape(xi)[:-1]), 0.0, "identity")


def zero_spec(action: GroupAction) -> GOperatorSpec:
    return GOperatorSpec(action, lambda g, xi: np.zeros(np.shape(xi)[:-1]), 0.0, "zero")


def trivial_action(dim: int) -> GroupAction:
    """One-element group (rotation by the zero angle)."""
    kind = {2: "planar-rotation", 3: "axial-rotation-3d"}[dim]
    return GroupAction(kind, dim, np.zeros((1, 1)), np.ones(1))


# ---------------------------------------------------------------------------
# trace assembly
# ---------------------------------------------------------------------------


def transverse_rule(cut: float, n_inner: int, n_tail: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on the real line.

    Composite Gauss-Legendre on ``[-cut, cut]`` with unit-length panels plus,
    if ``n_tail > 0``, each tail ``|zeta| > cut`` mapped by ``zeta = cut / t``.
    """
    panels = max(1, int(np.ceil(2 * cut)))
    x, w = np.polynomial.legendre.leggauss(n_inner)
    edges = np.linspace(-cut, cut, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    if n_tail > 0:
        xt, wt = np.polynomial.legendre.leggauss(n_tail)
        t = 0.5 * (xt + 1.0)
        zt = cut / t
        wz = 0.5 * wt * cut / t ** 2
        nodes = np.concatenate([-zt[::-1], nodes, zt])
        weights = np.concatenate([wz[::-1], weights, wz])
    return nodes, weights


def assemble_trace(spec: GOperatorSpec, sub: Submanifold, grid: FourierGrid, s: float = -0.5,
                   cut: float | None = None, n_inner: int = 4, n_tail: int = 24,
                   chunk: int = 64) -> DiscreteOperator:
    """Matrix of ``i^* (int D_g T_g dg) i_*`` on the coefficients of ``grid``.

    The transverse frequency integral uses :func:`transverse_rule` with
    ``cut`` defaulting to the grid band plus four.
    """
    _require_affine(sub)
    act = spec.action
    if act.kind not in AFFINE_ACTIONS or act.ambient_dim != sub.ambient_dim:
        raise UnsupportedScenarioError("action is not a linear isometric action on this space")
    if grid.dim != sub.dim:
        raise DomainError("grid dimension must equal the submanifold dimension")
    nu = sub.codim
    k = sub.dim
    p_mat = sub.data["basis"].T                     # (n, k)
    q_mat = sub.data["normals"].T                   # (n, nu)
    x0 = sub.data["origin"]
    cut = grid.band + 4 if cut is None else cut
    z1, w1 = transverse_rule(cut, n_inner, n_tail)
    if nu == 1:
        zeta = z1[:, None]
        wz = w1
    else:
        mesh = np.meshgrid(*([z1] * nu), indexing="ij")
        zeta = np.stack(mesh, -1).reshape(-1, nu)
        wz = np.prod(np.meshgrid(*([w1] * nu), indexing="ij"), axis=0).ravel()
    eta_ax = grid.axis_freqs
    na = grid.n_axis
    lh = grid.half_width
    etas = grid.freqs
    out = np.zeros((grid.size, grid.size), complex)
    aff = [act.affine(g) for g in act.nodes]
    for start in range(0, grid.size, chunk):
        eta = etas[start:start + chunk]                                   # (m, k)
        xi = eta @ p_mat.T                                                # (m, n)
        xi = xi[:, None, :] + zeta @ q_mat.T                              # (m, q, n)
        acc = np.zeros((len(eta),) + (na,) * k, complex)
        for (r, b), g, wg in zip(aff, act.nodes, act.weights):
            sig = np.asarray(spec.symbol(g, xi), complex)
            if not np.all(np.isfinite(sig)):
                raise SingularityError("symbol is not finite on a quadrature node")
            rt_xi = xi @ r                                                # R^T xi
            ph = np.exp(1j * (xi @ (x0 - b) - rt_xi @ x0))
            c = wg * wz[None, :] * sig * ph                               # (m, q)
            tang = rt_xi @ p_mat                                          # (m, q, k)
            fac = [_sinc(lh * (tang[..., j, None] - eta_ax)) for j in range(k)]  # (m, q, na)
            if k == 1:
                acc += np.einsum("mq,mqa->ma", c, fac[0])
            elif k == 2:
                acc += np.matmul((c[..., None] * fac[0]).transpose(0, 2, 1), fac[1])
            else:
                raise UnsupportedScenarioError("submanifold dimension above two")
        out[start:start + chunk] = acc.reshape(len(eta), -1)
    out *= (2 * np.pi) ** (-nu)
    return DiscreteOperator(out, grid, s, grid, s - spec.order - nu, spec.order + nu,
                            {"spec": spec.name, "cut": cut, "n_inner": n_inner, "n_tail": n_tail})


def apply_trace_dual(spec: GOperatorSpec, sub: Submanifold, fhat: Callable[[np.ndarray], np.ndarray],
                     eta, cut: float = 40.0, n_inner: int = 8, n_tail: int = 32) -> np.ndarray:
    """Dual-space trace applied to a Fourier transform ``fhat`` given as a callable.

    ``fhat`` takes tangential frequencies of shape ``(..., k)``; the result is
    the transform of the trace at the tangential frequencies ``eta``.
    """
    _require_affine(sub)
    act = spec.action
    if act.kind not in AFFINE_ACTIONS or act.ambient_dim != sub.ambient_dim:
        raise UnsupportedScenarioError("action is not a linear isometric action on this space")
    if sub.codim != 1:
        raise UnsupportedScenarioError("matrix-free application implemented for codimension one")
    eta = np.atleast_2d(np.asarray(eta, float))
    p_mat = sub.data["basis"].T
    q_mat = sub.data["normals"].T
    x0 = sub.data["origin"]
    z, wz = transverse_rule(cut, n_inner, n_tail)
    xi = (eta @ p_mat.T)[:, None, :] + z[None, :, None] * q_mat[:, 0]
    out = np.zeros(len(eta), complex)
    for g, wg in zip(act.nodes, act.weights):
        r, b = act.affine(g)
        sig = np.asarray(spec.symbol(g, xi), complex)
        rt_xi = xi @ r
        ph = np.exp(1j * (xi @ (x0 - b) - rt_xi @ x0))
        out += wg * ((sig * ph * fhat(rt_xi @ p_mat)) @ wz)
    return out / (2 * np.pi)


def example2_setup(alpha: float = np.pi / 4, n_nodes: int = 64):
    """Rotations about OZ and the plane ``-x sin a + z cos a = 0``."""
    from .geometry import affine_subspace, axial_rotation_3d
    e1 = np.array([np.cos(alpha), 0.0, np.sin(alpha)])
    e2 = np.array([0.0, 1.0, 0.0])
    act = axial_rotation_3d(n_nodes=n_nodes)
    return laplacian_inverse_spec(act), affine_subspace(np.zeros(3), [e1, e2])


# ---------------------------------------------------------------------------
# transverse integration bound
# ---------------------------------------------------------------------------


def _window_transform(tau, eps):
    """``int_{-eps}^{eps} exp(-i tau t) dt / (2 eps)``."""
    return _sinc(eps * np.asarray(tau))


@dataclass
class BoundTable:
    modes: list
    improved: list
    naive: list
    improved_index: float
    naive_index: float

    def variation(self, which: str = "improved") -> float:
        v = np.array(getattr(self, which))
        return float(v.max() / v.min() - 1.0) if v.min() > 0 else float("inf")

    def growth(self, which: str = "naive") -> list:
        v = np.array(getattr(self, which))
        return (v[1:] / v[:-1]).tolist() if len(v) > 1 else []


def transverse_bound_check(symbol: Callable[[np.ndarray], np.ndarray], sub: Submanifold,
                           generator, s: float, d: float, modes=(32, 64, 128),
                           window: float = 1.0, half_width: float = np.pi,
                           point=None, tol: float = 1e-9) -> BoundTable:
    """Norm ratios of ``u -> int_{|t|<window} D T_{exp(t h)} i_* u dt`` for a shift subgroup.

    The subgroup acts by translations along ``generator`` (the vector ``h``);
    a rotation subgroup is handled through its generator at ``point``.  For
    each refinement the ambient band equals the grid band and the ratio is
    the exact multiplier norm

        sup_eta (1+|eta|^2)^{-s} (2 pi)^{-nu} int |sigma|^2 |m|^2 (1+|xi|^2)^{t} d zeta

    evaluated at ``t = s - d - (nu-1)/2`` and at ``t = s - d - nu``.
    """
    _require_affine(sub)
    h = np.asarray(generator, float)
    q_mat = sub.data["normals"].T
    p_mat = sub.data["basis"].T
    if np.max(np.abs(h @ q_mat)) <= tol:
        raise PreconditionError("generator is tangent to the submanifold")
    nu = sub.codim
    if nu != 1:
        raise UnsupportedScenarioError("transverse bound check implemented for codimension one")
    imp_idx = s - d - (nu - 1) / 2
    naive_idx = s - d - nu
    imp, nai = [], []
    for n in modes:
        grid = FourierGrid(sub.dim, n, half_width, offset=True)
        band = grid.band
        zq, zw = transverse_rule(band, 16)
        eta = grid.freqs
        xi = (eta @ p_mat.T)[:, None, :] + zq[None, :, None] * q_mat[:, 0]
        amp = np.abs(np.asarray(symbol(xi))) ** 2 * np.abs(_window_transform(xi @ h, window)) ** 2
        base = (1 + np.sum(eta ** 2, axis=1)) ** (-s)
        r2 = []
        for t in (imp_idx, naive_idx):
            integ = (amp * (1 + np.sum(xi ** 2, axis=-1)) ** t) @ zw
            r2.append(np.max(base * integ) * (2 * np.pi) ** (-nu))
        imp.append(float(np.sqrt(r2[0])))
        nai.append(float(np.sqrt(r2[1])))
    return BoundTable(list(modes), imp, nai, imp_idx, naive_idx)
