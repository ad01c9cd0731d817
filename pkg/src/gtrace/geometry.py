"""Group actions on Euclidean space, submanifolds and localization sets.

The module answers three questions for a pair (action, submanifold):

* which points of X have orbits contained in X (the set ``X_G``),
* which points have orbits tangent to X (the set ``X~_G``),
* whether the Haar volume of group elements that move a shrinking
  neighbourhood of ``X~_G \\ X_G`` back onto X tends to zero.

Actions are restricted to a handful of parametrized families of rigid
motions; every action is affine, ``g.x = R(g) x + b(g)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import DomainError, PreconditionError

ACTION_KINDS = (
    "planar-rotation",
    "planar-translation",
    "axial-rotation-3d",
    "rotation-translation-3d",
    "screw-3d",
    "so3-rotations",
)

SUBMANIFOLD_KINDS = ("affine", "circle", "sphere", "rounded-rectangle")

CLOSED_FORM_TOL = 1e-9
SAMPLED_TOL = 1e-6


def _rot2(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def _rodrigues(axis, theta):
    a = np.asarray(axis, float)
    a = a / np.linalg.norm(a)
    k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
    return np.eye(3) + np.sin(theta) * k + (1 - np.cos(theta)) * (k @ k)


def _euler_zyz(alpha, beta, gamma):
    ez = np.array([0.0, 0.0, 1.0])
    ey = np.array([0.0, 1.0, 0.0])
    return _rodrigues(ez, alpha) @ _rodrigues(ey, beta) @ _rodrigues(ez, gamma)


def _zyz_from_matrix(r):
    beta = np.arccos(np.clip(r[2, 2], -1.0, 1.0))
    if np.sin(beta) > 1e-12:
        alpha = np.arctan2(r[1, 2], r[0, 2])
        gamma = np.arctan2(r[2, 1], -r[2, 0])
    else:
        # gimbal lock: only alpha + gamma (or alpha - gamma) is determined
        alpha = np.arctan2(r[1, 0], r[0, 0]) if r[2, 2] > 0 else np.arctan2(-r[1, 0], -r[0, 0])
        gamma = 0.0
    return np.array([alpha, beta, gamma])


# ---------------------------------------------------------------------------
# group actions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GroupAction:
    """A parametrized group of rigid motions with a Haar quadrature.

    ``nodes`` has shape ``(n_nodes, param_dim)`` and ``weights`` sums to one.
    Non-compact factors (translations) are normalized over the window
    ``[-span, span]``.
    """

    kind: str
    ambient_dim: int
    nodes: np.ndarray
    weights: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(3))
    direction: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    span: float = 4.0

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise DomainError(f"unknown action kind {self.kind!r}")
        w = np.asarray(self.weights)
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError("Haar weights must be positive and sum to one")

    @property
    def param_dim(self) -> int:
        return self.nodes.shape[1]

    def affine(self, g) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(R, b)`` with ``g.x = R @ x + b``."""
        g = np.atleast_1d(np.asarray(g, float))
        c = self.center[: self.ambient_dim]
        if self.kind == "planar-rotation":
            r = _rot2(g[0])
            return r, c - r @ c
        if self.kind == "planar-translation":
            return np.eye(2), g[0] * self.direction[:2]
        if self.kind == "axial-rotation-3d":
            r = _rodrigues(self.direction, g[0])
            return r, c - r @ c
        if self.kind == "rotation-translation-3d":
            r = _rodrigues(self.direction, g[0])
            a = self.direction / np.linalg.norm(self.direction)
            return r, c - r @ c + g[1] * a
        if self.kind == "screw-3d":
            cp, sp = np.cos(g[0]), np.sin(g[0])
            r = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
            return r, np.array([0.0, g[0], 0.0])
        # so3-rotations
        r = _euler_zyz(*g[:3])
        return r, np.zeros(3)

    def act(self, g, x) -> np.ndarray:
        r, b = self.affine(g)
        return np.asarray(x, float) @ r.T + b

    def act_many(self, gs, x) -> np.ndarray:
        """Apply every parameter row of ``gs`` to the points ``x``.

        Returns an array of shape ``(len(gs),) + x.shape``.
        """
        x = np.asarray(x, float)
        rs, bs = zip(*(self.affine(g) for g in np.atleast_2d(gs)))
        rs = np.stack(rs)
        bs = np.stack(bs)
        flat = x.reshape(-1, self.ambient_dim)
        out = np.einsum("gij,pj->gpi", rs, flat) + bs[:, None, :]
        return out.reshape((len(rs),) + x.shape)

    def compose(self, g, h) -> np.ndarray:
        """Parameters of the product ``g h`` (apply h first)."""
        g = np.atleast_1d(np.asarray(g, float))
        h = np.atleast_1d(np.asarray(h, float))
        if self.kind == "so3-rotations":
            return _zyz_from_matrix(_euler_zyz(*g) @ _euler_zyz(*h))
        if self.kind == "rotation-translation-3d":
            return np.array([g[0] + h[0], g[1] + h[1]])
        return g + h

    def generators(self, x) -> np.ndarray:
        """Infinitesimal generator fields at ``x``; shape ``(n_gen,) + x.shape``."""
        x = np.asarray(x, float)
        c = self.center[: self.ambient_dim]
        if self.kind == "planar-rotation":
            q = x - c
            return np.stack([np.stack([-q[..., 1], q[..., 0]], axis=-1)])
        if self.kind == "planar-translation":
            return np.broadcast_to(self.direction[:2], x.shape)[None].copy()
        a = self.direction / np.linalg.norm(self.direction)
        if self.kind == "axial-rotation-3d":
            return np.cross(a, x - c)[None]
        if self.kind == "rotation-translation-3d":
            return np.stack([np.cross(a, x - c), np.broadcast_to(a, x.shape)])
        if self.kind == "screw-3d":
            return np.stack(
                [np.stack([x[..., 2], np.ones(x.shape[:-1]), -x[..., 0]], axis=-1)]
            )
        return np.stack([np.cross(e, x) for e in np.eye(3)])

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` parameters distributed by the normalized Haar measure."""
        two_pi = 2 * np.pi
        if self.kind in ("planar-rotation", "axial-rotation-3d", "screw-3d"):
            return rng.uniform(0.0, two_pi, size)[:, None]
        if self.kind == "planar-translation":
            return rng.uniform(-self.span, self.span, size)[:, None]
        if self.kind == "rotation-translation-3d":
            return np.column_stack(
                [rng.uniform(0.0, two_pi, size), rng.uniform(-self.span, self.span, size)]
            )
        alpha = rng.uniform(0.0, two_pi, size)
        beta = np.arccos(rng.uniform(-1.0, 1.0, size))
        gamma = rng.uniform(0.0, two_pi, size)
        return np.column_stack([alpha, beta, gamma])


def _circle_rule(n):
    return 2 * np.pi * np.arange(n) / n, np.full(n, 1.0 / n)


def _window_rule(n, span):
    # midpoint rule keeps all weights equal and positive
    t = -span + (np.arange(n) + 0.5) * (2 * span / n)
    return t, np.full(n, 1.0 / n)


def planar_rotation(center=(0.0, 0.0), n_nodes: int = 64) -> GroupAction:
    th, w = _circle_rule(n_nodes)
    c = np.zeros(3)
    c[:2] = center
    return GroupAction("planar-rotation", 2, th[:, None], w, center=c)


def planar_translation(direction=(1.0, 0.0), span: float = 4.0, n_nodes: int = 64) -> GroupAction:
    d = np.zeros(3)
    d[:2] = np.asarray(direction, float) / np.linalg.norm(direction)
    t, w = _window_rule(n_nodes, span)
    return GroupAction("planar-translation", 2, t[:, None], w, direction=d, span=span)


def axial_rotation_3d(axis_point=(0.0, 0.0, 0.0), axis=(0.0, 0.0, 1.0), n_nodes: int = 64) -> GroupAction:
    th, w = _circle_rule(n_nodes)
    a = np.asarray(axis, float)
    return GroupAction(
        "axial-rotation-3d", 3, th[:, None], w,
        center=np.asarray(axis_point, float), direction=a / np.linalg.norm(a),
    )


def rotation_translation_3d(axis=(0.0, 0.0, 1.0), span: float = 4.0,
                            n_rot: int = 32, n_shift: int = 32) -> GroupAction:
    th, wt = _circle_rule(n_rot)
    s, ws = _window_rule(n_shift, span)
    tt, ss = np.meshgrid(th, s, indexing="ij")
    nodes = np.column_stack([tt.ravel(), ss.ravel()])
    a = np.asarray(axis, float)
    return GroupAction(
        "rotation-translation-3d", 3, nodes, np.outer(wt, ws).ravel(),
        direction=a / np.linalg.norm(a), span=span,
    )


def screw_3d(n_nodes: int = 64) -> GroupAction:
    th, w = _circle_rule(n_nodes)
    return GroupAction("screw-3d", 3, th[:, None], w)


def so3_rotations(n_alpha: int = 16, n_beta: int = 8, n_gamma: int = 16) -> GroupAction:
    """Product rule in ZYZ Euler angles; Gauss-Legendre in cos(beta)."""
    a, wa = _circle_rule(n_alpha)
    x, wx = np.polynomial.legendre.leggauss(n_beta)
    b = np.arccos(x)
    wb = wx / 2.0
    c, wc = _circle_rule(n_gamma)
    aa, bb, cc = np.meshgrid(a, b, c, indexing="ij")
    w = np.einsum("i,j,k->ijk", wa, wb, wc).ravel()
    return GroupAction("so3-rotations", 3, np.column_stack([aa.ravel(), bb.ravel(), cc.ravel()]), w / w.sum())


# ---------------------------------------------------------------------------
# submanifolds
# ---------------------------------------------------------------------------


def _orthonormal_complement(basis: np.ndarray) -> np.ndarray:
    n = basis.shape[1]
    q, _ = np.linalg.qr(np.vstack([basis, np.eye(n)]).T)
    return q[:, basis.shape[0]: n].T


@dataclass(frozen=True, eq=False)
class Submanifold:
    """An embedded curve or surface with a chart on a parameter box.

    ``domain`` lists ``(lo, hi)`` per chart parameter; ``periodic`` marks
    parameters that wrap around.  Charts of curves are unit speed except the
    circle chart, whose speed is the radius.
    """

    kind: str
    ambient_dim: int
    dim: int
    domain: tuple
    periodic: tuple
    data: dict

    def __post_init__(self):
        if self.kind not in SUBMANIFOLD_KINDS:
            raise DomainError(f"unknown submanifold kind {self.kind!r}")
        if self.codim < 1:
            raise DomainError("codimension must be at least one")

    @property
    def codim(self) -> int:
        return self.ambient_dim - self.dim

    @property
    def is_closed_form(self) -> bool:
        return True

    # chart -----------------------------------------------------------------
    def chart(self, p) -> np.ndarray:
        p = np.asarray(p, float)
        d = self.data
        if self.kind == "affine":
            return d["origin"] + p @ d["basis"]
        if self.kind == "circle":
            th = p[..., 0]
            return d["center"] + d["radius"] * (
                np.cos(th)[..., None] * d["e1"] + np.sin(th)[..., None] * d["e2"]
            )
        if self.kind == "sphere":
            th, ph = p[..., 0], p[..., 1]
            unit = np.stack(
                [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1
            )
            return d["center"] + d["radius"] * unit
        return self._rr_eval(p[..., 0])[0]

    def tangent_frame(self, p) -> np.ndarray:
        """Orthonormal tangent vectors, shape ``p.shape[:-1] + (dim, n)``."""
        p = np.asarray(p, float)
        d = self.data
        if self.kind == "affine":
            return np.broadcast_to(d["basis"], p.shape[:-1] + d["basis"].shape).copy()
        if self.kind == "circle":
            th = p[..., 0]
            t = -np.sin(th)[..., None] * d["e1"] + np.cos(th)[..., None] * d["e2"]
            return t[..., None, :]
        if self.kind == "sphere":
            th, ph = p[..., 0], p[..., 1]
            e_th = np.stack([np.cos(th) * np.cos(ph), np.cos(th) * np.sin(ph), -np.sin(th)], -1)
            e_ph = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], -1)
            return np.stack([e_th, e_ph], axis=-2)
        return self._rr_eval(p[..., 0])[1][..., None, :]

    def normal_frame(self, x) -> np.ndarray:
        """Orthonormal normal vectors at the ambient point ``x`` (on or near X).

        Shape ``x.shape[:-1] + (codim, n)``; the frame varies continuously
        along the submanifold.
        """
        x = np.asarray(x, float)
        d = self.data
        if self.kind == "affine":
            return np.broadcast_to(d["normals"], x.shape[:-1] + d["normals"].shape).copy()
        if self.kind == "sphere":
            q = x - d["center"]
            return (q / np.linalg.norm(q, axis=-1, keepdims=True))[..., None, :]
        if self.kind == "circle":
            q = x - d["center"]
            p1 = q @ d["e1"]
            p2 = q @ d["e2"]
            rad = np.arctan2(p2, p1)
            radial = np.cos(rad)[..., None] * d["e1"] + np.sin(rad)[..., None] * d["e2"]
            if self.ambient_dim == 2:
                return radial[..., None, :]
            binormal = np.broadcast_to(np.cross(d["e1"], d["e2"]), radial.shape)
            return np.stack([radial, binormal], axis=-2)
        return self._rr_gradient(x)[..., None, :]

    def distance(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        d = self.data
        if self.kind == "affine":
            q = x - d["origin"]
            return np.linalg.norm(q @ d["normals"].T, axis=-1)
        if self.kind == "circle" and self.ambient_dim == 3:
            q = x - d["center"]
            p1, p2 = q @ d["e1"], q @ d["e2"]
            h = q @ np.cross(d["e1"], d["e2"])
            return np.hypot(np.hypot(p1, p2) - d["radius"], h)
        return np.abs(self.signed_distance(x))

    def signed_distance(self, x) -> np.ndarray:
        """Signed distance for hypersurfaces (codimension one)."""
        if self.codim != 1:
            raise DomainError("signed distance needs codimension one")
        x = np.asarray(x, float)
        d = self.data
        if self.kind == "affine":
            return (x - d["origin"]) @ d["normals"][0]
        if self.kind in ("circle", "sphere"):
            return np.linalg.norm(x - d["center"], axis=-1) - d["radius"]
        return self._rr_sdf(x)

    # rounded rectangle ----------------------------------------------------------
    def _rr_pieces(self):
        a, b, r = self.data["a"], self.data["b"], self.data["r"]
        ea, eb = a - r, b - r
        arc = np.pi * r / 2
        # (kind, length, start point / arc center, direction / start angle)
        return [
            ("seg", 2 * eb, np.array([a, -eb]), np.array([0.0, 1.0])),
            ("arc", arc, np.array([ea, eb]), 0.0),
            ("seg", 2 * ea, np.array([ea, b]), np.array([-1.0, 0.0])),
            ("arc", arc, np.array([-ea, eb]), np.pi / 2),
            ("seg", 2 * eb, np.array([-a, eb]), np.array([0.0, -1.0])),
            ("arc", arc, np.array([-ea, -eb]), np.pi),
            ("seg", 2 * ea, np.array([-ea, -b]), np.array([1.0, 0.0])),
            ("arc", arc, np.array([ea, -eb]), 3 * np.pi / 2),
        ]

    def _rr_eval(self, s):
        s = np.asarray(s, float)
        pieces = self._rr_pieces()
        total = sum(p[1] for p in pieces)
        s = np.mod(s, total)
        pts = np.zeros(s.shape + (2,))
        tan = np.zeros(s.shape + (2,))
        r = self.data["r"]
        start = 0.0
        for i, (kind, length, anchor, extra) in enumerate(pieces):
            last = i == len(pieces) - 1
            mask = (s >= start) & ((s < start + length) | last)
            loc = s[mask] - start
            if kind == "seg":
                pts[mask] = anchor + loc[:, None] * extra
                tan[mask] = extra
            else:
                ang = extra + loc / r
                pts[mask] = anchor + r * np.stack([np.cos(ang), np.sin(ang)], -1)
                tan[mask] = np.stack([-np.sin(ang), np.cos(ang)], -1)
            start += length
        return pts, tan

    def _rr_sdf(self, x):
        a, b, r = self.data["a"], self.data["b"], self.data["r"]
        q = np.abs(x) - np.array([a - r, b - r])
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside - r

    def _rr_gradient(self, x):
        a, b, r = self.data["a"], self.data["b"], self.data["r"]
        sgn = np.where(x >= 0, 1.0, -1.0)
        q = np.abs(x) - np.array([a - r, b - r])
        qp = np.maximum(q, 0.0)
        nrm = np.linalg.norm(qp, axis=-1, keepdims=True)
        corner = qp / np.where(nrm > 0, nrm, 1.0)
        edge = np.where((q[..., :1] >= q[..., 1:]), np.array([1.0, 0.0]), np.array([0.0, 1.0]))
        g = np.where(nrm > 0, corner, edge)
        return g * sgn

    def perimeter(self) -> float:
        return float(sum(p[1] for p in self._rr_pieces()))


def affine_subspace(origin, basis) -> Submanifold:
    basis = np.atleast_2d(np.asarray(basis, float))
    q, _ = np.linalg.qr(basis.T)
    basis = q.T
    origin = np.asarray(origin, float)
    n = origin.size
    normals = _orthonormal_complement(basis)
    k = basis.shape[0]
    return Submanifold(
        "affine", n, k, tuple((-4.0, 4.0) for _ in range(k)), (False,) * k,
        {"origin": origin, "basis": basis, "normals": normals},
    )


def circle(center, radius: float = 1.0, plane=None) -> Submanifold:
    center = np.asarray(center, float)
    n = center.size
    if plane is None:
        e1, e2 = np.eye(n)[0], np.eye(n)[1]
    else:
        e1, e2 = (np.asarray(v, float) for v in plane)
        e1 = e1 / np.linalg.norm(e1)
        e2 = e2 - (e2 @ e1) * e1
        e2 = e2 / np.linalg.norm(e2)
    return Submanifold(
        "circle", n, 1, ((0.0, 2 * np.pi),), (True,),
        {"center": center, "radius": float(radius), "e1": e1, "e2": e2},
    )


def sphere(center=(0.0, 0.0, 0.0), radius: float = 1.0) -> Submanifold:
    # polar parameter kept off the coordinate poles where the chart degenerates
    return Submanifold(
        "sphere", 3, 2, ((0.05, np.pi - 0.05), (0.0, 2 * np.pi)), (False, True),
        {"center": np.asarray(center, float), "radius": float(radius)},
    )


def rounded_rectangle(a: float = 2.0, b: float = 1.0, r: float = 0.5) -> Submanifold:
    if not (0 < r <= min(a, b)):
        raise DomainError("corner radius must lie in (0, min(a, b)]")
    sub = Submanifold("rounded-rectangle", 2, 1, ((0.0, 1.0),), (True,), {"a": a, "b": b, "r": r})
    per = sub.perimeter()
    return Submanifold("rounded-rectangle", 2, 1, ((0.0, per),), (True,), {"a": a, "b": b, "r": r})


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

IN_XG = "in-X_G"
TANGENT_ONLY = "in-X~_G-only"
NEITHER = "neither"


def tangency_defect(action: GroupAction, sub: Submanifold, x) -> np.ndarray:
    """Normal components of all generator fields at ``x``.

    Shape ``x.shape[:-1] + (n_gen * codim,)``; zero exactly on ``X~_G``.
    """
    x = np.asarray(x, float)
    gens = action.generators(x)                      # (G, ..., n)
    normals = sub.normal_frame(x)                    # (..., nu, n)
    comps = np.einsum("g...n,...kn->...gk", gens, normals)
    return comps.reshape(x.shape[:-1] + (-1,))


def orbit_excursion(action: GroupAction, sub: Submanifold, x) -> np.ndarray:
    """Max over quadrature nodes of ``dist(g.x, X)``."""
    x = np.asarray(x, float)
    moved = action.act_many(action.nodes, x)
    return sub.distance(moved).max(axis=0)


def classify_point(action: GroupAction, sub: Submanifold, x, tol: float = CLOSED_FORM_TOL) -> str:
    """Classify a point of X as ``in-X_G``, ``in-X~_G-only`` or ``neither``."""
    x = np.asarray(x, float)
    if tol < 0:
        raise DomainError("tolerance must be non-negative")
    if sub.distance(x) > tol:
        raise DomainError("point does not lie on the submanifold")
    if orbit_excursion(action, sub, x) <= tol:
        return IN_XG
    if np.max(np.abs(tangency_defect(action, sub, x))) <= tol:
        return TANGENT_ONLY
    return NEITHER


def _zeros_on_line(fun: Callable, lo: float, hi: float, n: int, tol: float, periodic: bool):
    """Points of ``[lo, hi]`` where every component of ``fun`` vanishes.

    Returns ``(isolated, runs)``: parameter values of isolated zeros and a
    list of ``(t_start, t_end)`` for runs of grid nodes where ``fun`` is
    identically small.
    """
    t = np.linspace(lo, hi, n + 1) if periodic else np.linspace(lo, hi, n)
    if periodic:
        t = t[:-1]
    vals = fun(t)
    amp = np.max(np.abs(vals), axis=-1)
    small = amp <= tol

    def maxabs(s):
        return float(np.max(np.abs(fun(np.array([s])))))

    found = []
    m = len(t)
    pairs = range(m) if periodic else range(m - 1)
    for i in pairs:
        j = (i + 1) % m
        if small[i] or small[j]:
            continue
        a, b = t[i], t[j] if j > i else t[j] + (hi - lo)
        for c in range(vals.shape[1]):
            if vals[i, c] * vals[j, c] < 0:
                root = optimize.brentq(lambda s: fun(np.array([s]))[0, c], a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
                if maxabs(root) <= tol:
                    found.append(root)
                break
    # touching zeros: interior local minima of the amplitude without a sign change
    for i in range(m):
        if not periodic and (i == 0 or i == m - 1):
            continue
        ip, im = (i + 1) % m, (i - 1) % m
        if small[i] or small[ip] or small[im]:
            continue
        strict = amp[i] < amp[im] or amp[i] < amp[ip]
        if strict and amp[i] <= amp[im] and amp[i] <= amp[ip]:
            a = t[im] if im < i else t[im] - (hi - lo)
            b = t[ip] if ip > i else t[ip] + (hi - lo)
            res = optimize.minimize_scalar(maxabs, bounds=(a, b), method="bounded",
                                           options={"xatol": 1e-14})
            if res.fun <= tol:
                found.append(res.x)
    if periodic:
        found = [lo + np.mod(s - lo, hi - lo) for s in found]
    def edge(inside, outside):
        # bisect the boundary of the small set between two grid nodes
        for _ in range(60):
            mid = 0.5 * (inside + outside)
            if maxabs(mid) <= tol:
                inside = mid
            else:
                outside = mid
        return inside

    runs = []
    i = 0
    while i < m:
        if small[i]:
            j = i
            while j + 1 < m and small[j + 1]:
                j += 1
            a, b = t[i], t[j]
            if i > 0 or not periodic:
                a = edge(t[i], t[i - 1]) if i > 0 else a
            if j < m - 1:
                b = edge(t[j], t[j + 1])
            if i == j:
                found.append(t[i])
            else:
                runs.append((a, b))
            i = j + 1
        else:
            i += 1
    return np.array(sorted(found)), runs


def _dedupe(points: np.ndarray, tol: float) -> np.ndarray:
    kept: list[np.ndarray] = []
    for p in points:
        if all(np.linalg.norm(p - q) > tol for q in kept):
            kept.append(p)
    return np.array(kept).reshape(-1, points.shape[-1] if points.size else 0)


def describe_point_set(points: np.ndarray, tol: float = 1e-6) -> dict:
    """Fit a simple geometric descriptor to a finite sample of a set."""
    points = np.asarray(points, float)
    if points.size == 0:
        return {"type": "empty"}
    pts = _dedupe(points, tol)
    if len(pts) == 1:
        return {"type": "point", "points": pts.tolist()}
    centre = pts.mean(axis=0)
    _, sv, vt = np.linalg.svd(pts - centre)
    scale = max(np.max(np.linalg.norm(pts - centre, axis=1)), 1.0)
    resid_line = sv[1:].max() / np.sqrt(len(pts)) if len(sv) > 1 else 0.0
    if len(pts) >= 3 and resid_line <= tol * scale:
        return {"type": "line", "point": centre.tolist(), "direction": vt[0].tolist(),
                "count": int(len(pts))}
    if len(pts) >= 4 and pts.shape[1] >= 2:
        planar = pts.shape[1] == 2 or sv[2] / np.sqrt(len(pts)) <= tol * scale
        if planar:
            e1, e2 = vt[0], vt[1]
            uv = np.column_stack([(pts - centre) @ e1, (pts - centre) @ e2])
            # algebraic circle fit
            a = np.column_stack([uv, np.ones(len(uv))])
            rhs = (uv ** 2).sum(axis=1)
            sol, *_ = np.linalg.lstsq(a, rhs, rcond=None)
            cu, cv = sol[0] / 2, sol[1] / 2
            rad = np.sqrt(sol[2] + cu ** 2 + cv ** 2)
            resid = np.abs(np.hypot(uv[:, 0] - cu, uv[:, 1] - cv) - rad).max()
            if resid <= tol * scale:
                ctr = centre + cu * e1 + cv * e2
                normal = np.cross(e1, e2) if pts.shape[1] == 3 else None
                out = {"type": "circle", "center": ctr.tolist(), "radius": float(rad),
                       "count": int(len(pts))}
                if normal is not None:
                    out["normal"] = normal.tolist()
                return out
    if len(pts) <= 8:
        return {"type": "points", "points": pts.tolist()}
    return {"type": "curve", "count": int(len(pts))}


@dataclass
class LocalizationReport:
    """Classified samples plus descriptors of ``X_G`` and ``X~_G``."""

    scenario: str
    points: np.ndarray
    labels: list
    x_g: dict
    x_tilde_g: dict
    condition1_volumes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "x_g": self.x_g,
            "x_tilde_g": self.x_tilde_g,
            "samples": [
                {"point": [float(v) for v in p], "label": lab}
                for p, lab in zip(self.points, self.labels)
            ],
            "condition1_volumes": [
                {"eps": e, "volume": v, "stderr": s} for e, v, s in self.condition1_volumes
            ],
        }


def _describe_runs(sub: Submanifold, runs, pts_fn, whole: bool, tol: float):
    if whole:
        return {"type": "whole", "kind": sub.kind}
    segs = []
    for a, b in runs:
        if abs(b - a) < 1e-12:
            continue
        pa, pb = pts_fn(a), pts_fn(b)
        segs.append({"start": pa.tolist(), "end": pb.tolist()})
    return segs


def localization_sets(action: GroupAction, sub: Submanifold, resolution: int = 201,
                      tol: float | None = None) -> tuple[dict, dict, np.ndarray, list]:
    """Compute descriptors of ``X_G`` and ``X~_G`` by scanning the chart.

    Zeros of the tangency defect are located along chart coordinate lines
    (sign changes refined by bracketing, touching zeros by bounded
    minimisation); containment of orbits is then checked on the zeros.
    """
    if tol is None:
        tol = CLOSED_FORM_TOL
    samples: list[np.ndarray] = []
    runs_amb: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    whole = False

    def line_fun(fixed, axis):
        def f(s):
            p = np.empty((len(s), sub.dim))
            p[:] = fixed
            p[:, axis] = s
            return tangency_defect(action, sub, sub.chart(p))
        return f

    if sub.dim == 1:
        lo, hi = sub.domain[0]
        f = line_fun(np.zeros(1), 0)
        iso, runs = _zeros_on_line(f, lo, hi, resolution, tol, sub.periodic[0])
        samples.extend(sub.chart(iso[:, None]) if len(iso) else [])
        for a, b in runs:
            ts = np.linspace(a, b, max(2, int(round((b - a) / ((hi - lo) / resolution))) + 1))
            runs_amb.append((sub.chart(np.array([[a]]))[0], sub.chart(np.array([[b]]))[0],
                             sub.chart(ts[:, None])))
        if len(runs) == 1 and runs[0][1] - runs[0][0] >= (hi - lo) * (1 - 1.5 / resolution):
            whole = True
    else:
        coarse = max(21, resolution // 4) | 1
        for axis in range(sub.dim):
            other = 1 - axis
            olo, ohi = sub.domain[other]
            fixed_vals = np.linspace(olo, ohi, coarse + (1 if sub.periodic[other] else 0))
            if sub.periodic[other]:
                fixed_vals = fixed_vals[:-1]
            lo, hi = sub.domain[axis]
            for fv in fixed_vals:
                fixed = np.zeros(sub.dim)
                fixed[other] = fv
                f = line_fun(fixed, axis)
                iso, runs = _zeros_on_line(f, lo, hi, resolution, tol, sub.periodic[axis])
                for s in iso:
                    p = fixed.copy()
                    p[axis] = s
                    samples.append(sub.chart(p[None])[0])
                for a, b in runs:
                    ts = np.linspace(a, b, 9)
                    p = np.tile(fixed, (len(ts), 1))
                    p[:, axis] = ts
                    samples.extend(sub.chart(p))
        # identically vanishing defect means every point is a tangency point
        grid = [np.linspace(lo, hi, 15) for lo, hi in sub.domain]
        mesh = np.stack(np.meshgrid(*grid, indexing="ij"), -1).reshape(-1, sub.dim)
        if np.max(np.abs(tangency_defect(action, sub, sub.chart(mesh)))) <= tol:
            whole = True

    iso_pts = np.array(samples).reshape(-1, sub.ambient_dim)
    run_pts = [r[2] for r in runs_amb]
    all_tangent = np.vstack([iso_pts] + run_pts) if run_pts else iso_pts

    # X_G candidates are the tangency points (X_G is contained in X~_G)
    contained = np.zeros(len(all_tangent), bool)
    if len(all_tangent):
        contained = orbit_excursion(action, sub, all_tangent) <= tol

    if sub.dim == 1:
        if whole:
            xt = {"type": "whole", "kind": sub.kind}
        elif runs_amb:
            segs = [{"start": a.tolist(), "end": b.tolist()} for a, b, _ in runs_amb]
            xt = {"type": "segments", "segments": segs}
            if len(iso_pts):
                xt["points"] = _dedupe(iso_pts, SAMPLED_TOL).tolist()
        else:
            xt = describe_point_set(iso_pts)
    else:
        xt = {"type": "whole", "kind": sub.kind} if whole else describe_point_set(all_tangent)

    if whole and contained.all() and len(all_tangent):
        xg = {"type": "whole", "kind": sub.kind}
    else:
        xg = describe_point_set(all_tangent[contained]) if contained.any() else {"type": "empty"}
    return xg, xt, all_tangent, contained.tolist()


# ---------------------------------------------------------------------------
# Condition 1
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ZSet:
    """A closed subset of X given as boxes in chart-parameter space.

    ``boxes`` is a sequence of ``(lo, hi)`` pairs of parameter vectors; a box
    with ``lo == hi`` in a coordinate is degenerate in that direction.
    """

    boxes: tuple

    @property
    def empty(self) -> bool:
        return len(self.boxes) == 0


@dataclass
class Condition1Result:
    eps: float
    volume: float
    stderr: float
    vacuous: bool = False


def _chart_speed(sub: Submanifold, axis: int) -> float:
    if sub.kind in ("circle", "sphere"):
        return sub.data["radius"]
    return 1.0


def neighbourhood_samples(sub: Submanifold, z: ZSet, eps: float, per_dim: int = 257) -> np.ndarray:
    """Sample the eps-neighbourhood ``U_eps`` of ``Z`` inside X (chart boxes)."""
    pts = []
    for lo, hi in z.boxes:
        lo = np.atleast_1d(np.asarray(lo, float))
        hi = np.atleast_1d(np.asarray(hi, float))
        axes = []
        for k in range(sub.dim):
            dlo, dhi = sub.domain[k]
            full = sub.periodic[k] and hi[k] - lo[k] >= dhi - dlo - 1e-12
            if full:
                axes.append(np.linspace(dlo, dhi, per_dim, endpoint=False))
            else:
                pad = eps / _chart_speed(sub, k)
                axes.append(np.linspace(lo[k] - pad, hi[k] + pad, per_dim))
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, sub.dim)
        pts.append(sub.chart(mesh))
    return np.vstack(pts)


def condition1_volume(action: GroupAction, sub: Submanifold, z: ZSet, eps: float,
                      samples: int = 10_000, seed: int | np.random.SeedSequence = 0,
                      tol: float = CLOSED_FORM_TOL, per_dim: int | None = None,
                      chunk: int = 500) -> Condition1Result:
    """Monte Carlo estimate of the Haar volume of ``G_eps``.

    ``g`` belongs to ``G_eps`` when the moved neighbourhood ``g U_eps`` meets
    X.  For hypersurfaces a sign change of the signed distance over the
    sampled neighbourhood detects a crossing; otherwise the minimum distance
    is thresholded.
    """
    if samples <= 0:
        raise DomainError("samples must be positive")
    if eps <= 0:
        raise DomainError("eps must be positive")
    if z.empty:
        return Condition1Result(eps, 0.0, 0.0, vacuous=True)
    if per_dim is None:
        per_dim = 257 if sub.dim == 1 else 33
    u = neighbourhood_samples(sub, z, eps, per_dim)
    rng = np.random.default_rng(seed)
    gs = action.sample(rng, samples)
    hits = np.zeros(samples, bool)
    spacing = 2 * eps / (per_dim - 1)
    for start in range(0, samples, chunk):
        moved = action.act_many(gs[start:start + chunk], u)
        if sub.codim == 1:
            sd = sub.signed_distance(moved)
            hit = (sd.min(axis=1) <= 0) & (sd.max(axis=1) >= 0)
            hit |= np.abs(sd).min(axis=1) <= tol
        else:
            hit = sub.distance(moved).min(axis=1) <= max(tol, spacing)
        hits[start:start + chunk] = hit
    v = hits.mean()
    return Condition1Result(eps, float(v), float(np.sqrt(max(v * (1 - v), 0.0) / samples)))


def condition1_sweep(action: GroupAction, sub: Submanifold, z: ZSet, eps_values: Sequence[float],
                     samples: int = 10_000, seed: int = 0) -> list[Condition1Result]:
    """Run :func:`condition1_volume` over decreasing eps with split seeds."""
    eps_values = list(eps_values)
    if any(b >= a for a, b in zip(eps_values, eps_values[1:])):
        raise DomainError("eps values must be strictly decreasing")
    children = np.random.SeedSequence(seed).spawn(len(eps_values))
    return [condition1_volume(action, sub, z, e, samples, s) for e, s in zip(eps_values, children)]


def fit_condition1(results: Sequence[Condition1Result]) -> dict:
    """Least-squares fit ``vol ~ a + b eps`` and decay exponent of ``vol``."""
    eps = np.array([r.eps for r in results])
    vol = np.array([r.volume for r in results])
    a = np.column_stack([np.ones_like(eps), eps])
    (lim, slope), *_ = np.linalg.lstsq(a, vol, rcond=None)
    pos = vol > 0
    expo = float("nan")
    if pos.sum() >= 2:
        expo = float(np.polyfit(np.log(eps[pos]), np.log(vol[pos]), 1)[0])
    return {"limit": float(lim), "slope": float(slope), "exponent": expo}


def monotone_within_noise(results: Sequence[Condition1Result], sigmas: float = 3.0) -> bool:
    for big, small in zip(results, results[1:]):
        band = sigmas * np.hypot(big.stderr, small.stderr)
        if small.volume > big.volume + band:
            return False
    return True


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------

TILT = np.pi / 5


@dataclass(frozen=True)
class Scenario:
    id: str
    description: str
    action: GroupAction
    sub: Submanifold
    expected_x_g: dict
    expected_x_tilde_g: dict
    z: ZSet | None = None


def _scenarios() -> dict[str, Callable[[], Scenario]]:
    ca, sa = np.cos(TILT), np.sin(TILT)

    def rot_line_through():
        d = np.array([np.cos(0.3), np.sin(0.3)])
        return Scenario(
            "rotation-line-through-origin", "plane rotations, line through the centre",
            planar_rotation(), affine_subspace([0.0, 0.0], [d]),
            {"type": "point", "points": [[0.0, 0.0]]}, {"type": "point", "points": [[0.0, 0.0]]},
        )

    def rot_line_offset():
        return Scenario(
            "rotation-line-offset", "plane rotations, line at distance one from the centre",
            planar_rotation(), affine_subspace([0.0, 1.0], [[1.0, 0.0]]),
            {"type": "empty"}, {"type": "point", "points": [[0.0, 1.0]]},
            ZSet((((0.0,), (0.0,)),)),
        )

    def translation_circle():
        sub = circle([0.0, 0.0], 1.0)
        return Scenario(
            "translation-circle", "plane translations, unit circle",
            planar_translation(), sub,
            {"type": "empty"}, {"type": "points", "points": [[0.0, 1.0], [0.0, -1.0]]},
            ZSet((((np.pi / 2,), (np.pi / 2,)), ((3 * np.pi / 2,), (3 * np.pi / 2,)))),
        )

    def rounded_rect():
        sub = rounded_rectangle(2.0, 1.0, 0.5)
        pieces = sub._rr_pieces()
        s0 = pieces[0][1] + pieces[1][1]
        top = (s0, s0 + pieces[2][1])
        return Scenario(
            "rounded-rectangle-translation", "plane translations, curve with horizontal segments",
            planar_translation(), sub,
            {"type": "empty"},
            {"type": "segments", "segments": [
                {"start": [1.5, 1.0], "end": [-1.5, 1.0]},
                {"start": [-1.5, -1.0], "end": [1.5, -1.0]}]},
            ZSet((((top[0],), (top[1],)),)),
        )

    def axial_line():
        d = np.array([np.sin(TILT), 0.0, np.cos(TILT)])
        return Scenario(
            "axial-rotation-line", "rotations about OZ, line through the axis at an angle",
            axial_rotation_3d(), affine_subspace([0.0, 0.0, 0.0], [d]),
            {"type": "point", "points": [[0.0, 0.0, 0.0]]},
            {"type": "point", "points": [[0.0, 0.0, 0.0]]},
        )

    def tangent_circle():
        sub = circle([1.0, 0.0, 0.0], 1.0, plane=([1.0, 0.0, 0.0], [0.0, 0.0, 1.0]))
        return Scenario(
            "axial-rotation-tangent-circle", "rotations about OZ, circle touching the axis",
            axial_rotation_3d(), sub,
            {"type": "point", "points": [[0.0, 0.0, 0.0]]},
            {"type": "point", "points": [[0.0, 0.0, 0.0]]},
        )

    def tilted_plane():
        e1 = np.array([ca, 0.0, sa])
        e2 = np.array([0.0, 1.0, 0.0])
        return Scenario(
            "axial-rotation-tilted-plane", "rotations about OZ, plane tilted by alpha",
            axial_rotation_3d(), affine_subspace([0.0, 0.0, 0.0], [e1, e2]),
            {"type": "point", "points": [[0.0, 0.0, 0.0]]},
            {"type": "line", "point": [0.0, 0.0, 0.0], "direction": e1.tolist()},
        )

    def sphere_rt():
        return Scenario(
            "rotation-translation-sphere", "rotations about and shifts along OZ, unit sphere",
            rotation_translation_3d(), sphere(),
            {"type": "empty"},
            {"type": "circle", "center": [0.0, 0.0, 0.0], "radius": 1.0, "normal": [0.0, 0.0, 1.0]},
            ZSet((((np.pi / 2, 0.0), (np.pi / 2, 2 * np.pi)),)),
        )

    def so3_line():
        d = np.array([1.0, 2.0, 2.0]) / 3.0
        return Scenario(
            "so3-line", "all rotations about the origin, line through the origin",
            so3_rotations(), affine_subspace([0.0, 0.0, 0.0], [d]),
            {"type": "point", "points": [[0.0, 0.0, 0.0]]},
            {"type": "point", "points": [[0.0, 0.0, 0.0]]},
        )

    def screw_plane():
        return Scenario(
            "screw-plane", "screw motions about OY, plane z = 0",
            screw_3d(), affine_subspace([0.0, 0.0, 0.0], [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
            {"type": "line", "point": [0.0, 0.0, 0.0], "direction": [0.0, 1.0, 0.0]},
            {"type": "line", "point": [0.0, 0.0, 0.0], "direction": [0.0, 1.0, 0.0]},
        )

    def invariant_circle():
        return Scenario(
            "invariant-circle", "plane rotations, circle centred at the rotation centre",
            planar_rotation(), circle([0.0, 0.0], 1.0),
            {"type": "whole", "kind": "circle"}, {"type": "whole", "kind": "circle"},
            ZSet(()),
        )

    return {
        "rotation-line-through-origin": rot_line_through,
        "rotation-line-offset": rot_line_offset,
        "translation-circle": translation_circle,
        "rounded-rectangle-translation": rounded_rect,
        "axial-rotation-line": axial_line,
        "axial-rotation-tangent-circle": tangent_circle,
        "axial-rotation-tilted-plane": tilted_plane,
        "rotation-translation-sphere": sphere_rt,
        "so3-line": so3_line,
        "screw-plane": screw_plane,
        "invariant-circle": invariant_circle,
    }


_SCENARIOS = _scenarios()
SCENARIO_IDS = tuple(_SCENARIOS)
# the geometric catalogue proper; the last three entries are extra checks
CATALOG_IDS = SCENARIO_IDS[:9]

ALIASES = {
    "tilted-plane": "axial-rotation-tilted-plane",
    "tangent-circle": "axial-rotation-tangent-circle",
    "sphere": "rotation-translation-sphere",
    "line-offset": "rotation-line-offset",
    "line-through-origin": "rotation-line-through-origin",
}


def get_scenario(scenario_id: str) -> Scenario:
    key = ALIASES.get(scenario_id, scenario_id)
    if key not in _SCENARIOS:
        raise DomainError(f"unknown scenario {scenario_id!r}")
    return _SCENARIOS[key]()


def descriptors_match(found: dict, expected: dict, tol: float = 1e-6) -> bool:
    """Compare two set descriptors up to ordering and line orientation."""
    if found.get("type") != expected.get("type"):
        return False
    kind = expected["type"]
    if kind in ("empty",):
        return True
    if kind == "whole":
        return found.get("kind") == expected.get("kind")
    if kind in ("point", "points"):
        a = np.array(found["points"], float)
        b = np.array(expected["points"], float)
        if a.shape != b.shape:
            return False
        return all(np.min(np.linalg.norm(a - q, axis=1)) <= tol for q in b)
    if kind == "line":
        d = np.array(expected["direction"], float)
        d /= np.linalg.norm(d)
        e = np.array(found["direction"], float)
        par = abs(abs(d @ e) - 1.0) <= tol
        off = np.array(found["point"]) - np.array(expected["point"])
        return par and np.linalg.norm(off - (off @ d) * d) <= tol
    if kind == "circle":
        ok = np.linalg.norm(np.array(found["center"]) - np.array(expected["center"])) <= tol
        ok &= abs(found["radius"] - expected["radius"]) <= tol
        if "normal" in expected:
            ok &= abs(abs(np.dot(found["normal"], expected["normal"])) - 1.0) <= tol
        return bool(ok)
    if kind == "segments":
        fs = found["segments"]
        es = expected["segments"]
        if len(fs) != len(es):
            return False
        for e in es:
            ends = {tuple(np.round(e["start"], 6)), tuple(np.round(e["end"], 6))}
            hit = False
            for f in fs:
                pair = [np.array(f["start"]), np.array(f["end"])]
                ex = [np.array(v) for v in ends]
                if (np.linalg.norm(pair[0] - ex[0]) <= tol and np.linalg.norm(pair[1] - ex[1]) <= tol) or \
                   (np.linalg.norm(pair[0] - ex[1]) <= tol and np.linalg.norm(pair[1] - ex[0]) <= tol):
                    hit = True
            if not hit:
                return False
        return True
    return found == expected


def catalog_report(scenario_id: str, resolution: int = 201, sample_points: int = 9) -> LocalizationReport:
    """Classify chart samples and tangency points of one catalogue scenario."""
    sc = get_scenario(scenario_id)
    xg, xt, tangent_pts, _ = localization_sets(sc.action, sc.sub, resolution)
    grid = [np.linspace(lo, hi, sample_points, endpoint=not per)
            for (lo, hi), per in zip(sc.sub.domain, sc.sub.periodic)]
    mesh = np.stack(np.meshgrid(*grid, indexing="ij"), -1).reshape(-1, sc.sub.dim)
    pts = np.vstack([sc.sub.chart(mesh), _dedupe(tangent_pts, SAMPLED_TOL)[:32]]) \
        if len(tangent_pts) else sc.sub.chart(mesh)
    labels = [classify_point(sc.action, sc.sub, p) for p in pts]
    return LocalizationReport(sc.id, pts, labels, xg, xt)
