"""k-integrable kernels K(x, y) = f(x)^T g(y) / (x - y) and their dressing algebra.

Conditioning on points v keeps the integrable form: the Palm kernel has
data (f_v, g_v) obtained from (f, g) by a rational matrix R(z) with simple
poles at v, f_v = R^{-1} f and g_v^T = g^T R.  This module evaluates these
objects on a real grid and checks the algebraic identities between them.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import IntegrableConstraintError, NearSingularPalm
from .ground import INTERVAL, GroundSpace, as_configuration, as_marking
from .conditioning import palm_singular
from .kernels import Kernel, OPEKernel, airy

CONSTRAINT_TOL = 1e-12
PALM_TOL = 1e-10
FD_REL_STEP = 1e-5
MAX_SPACING_RATIO = 4.0


@dataclass(frozen=True, eq=False)
class IntegrableKernel:
    """Data (f, g) of a k-integrable kernel on the nodes of ``space``.

    ``f`` and ``g`` have shape (k, n).  ``df`` and ``dg`` hold x-derivatives
    when known; ``funcs`` optionally maps an array x to ``(f, g, df, dg)`` so
    the diagonal limit can be taken off-grid.
    """

    space: GroundSpace
    f: np.ndarray
    g: np.ndarray
    df: np.ndarray | None = None
    dg: np.ndarray | None = None
    funcs: Callable | None = None

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.f, dtype=complex))
        g = np.atleast_2d(np.asarray(self.g, dtype=complex))
        if f.shape != g.shape or f.shape[1] != self.space.n:
            raise ValueError("f and g must both have shape (k, n)")
        scale = np.linalg.norm(f, axis=0) * np.linalg.norm(g, axis=0)
        resid = np.abs(np.sum(f * g, axis=0))
        if np.any(resid > CONSTRAINT_TOL * np.maximum(scale, 1.0)):
            raise IntegrableConstraintError(f"f^T g = {resid.max():.3e} on the nodes")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)
        for name in ("df", "dg"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.atleast_2d(np.asarray(val, dtype=complex)))

    @property
    def k(self) -> int:
        return self.f.shape[0]

    @property
    def nodes(self) -> np.ndarray:
        return self.space.nodes

    def derivatives(self) -> tuple[np.ndarray, np.ndarray]:
        """(df, dg) on the nodes: supplied, from ``funcs`` by central differences, or node differences."""
        if self.df is not None and self.dg is not None:
            return self.df, self.dg
        x = self.nodes
        if self.funcs is not None:
            h = FD_REL_STEP * np.maximum(1.0, np.abs(x))
            fp, gp = self.funcs(x + h)[:2]
            fm, gm = self.funcs(x - h)[:2]
            return (np.asarray(fp) - np.asarray(fm)) / (2 * h), (np.asarray(gp) - np.asarray(gm)) / (2 * h)
        return _node_derivative(x, self.f), _node_derivative(x, self.g)

    def matrix(self) -> np.ndarray:
        return _assemble(self.nodes, self.f, self.g, self.derivatives()[0])

    def kernel(self, imag_tol: float = 1e-12) -> Kernel:
        """Kernel object; real when the imaginary residue is at roundoff level."""
        m = self.matrix()
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        if m.size and np.max(np.abs(m.imag)) <= imag_tol * scale:
            m = m.real
        herm = bool(m.size == 0 or np.max(np.abs(m - m.conj().T)) <= 1e-12 * scale)
        if herm:
            m = 0.5 * (m + m.conj().T)
        return Kernel(self.space, m, hermitian=herm)

    def to_dict(self) -> dict:
        def pairs(a):
            return None if a is None else [[[float(z.real), float(z.imag)] for z in row] for row in a]
        from .ground import space_to_dict
        return {"k": self.k, "f": pairs(self.f), "g": pairs(self.g),
                "df": pairs(self.df), "dg": pairs(self.dg), "space": space_to_dict(self.space)}


def _node_derivative(x: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Three-point derivative on a non-uniform grid (second order in the spacing)."""
    n = x.size
    if n < 3:
        raise ValueError("need at least 3 nodes for finite-difference derivatives")
    h = np.diff(x)
    ratio = h[1:] / h[:-1]
    if np.any(ratio > MAX_SPACING_RATIO) or np.any(ratio < 1.0 / MAX_SPACING_RATIO):
        raise ValueError("nodes too irregular for finite-difference derivatives; supply derivatives")
    out = np.empty_like(a)
    h0, h1 = h[:-1], h[1:]
    out[:, 1:-1] = (-h1 / (h0 * (h0 + h1)) * a[:, :-2]
                    + (h1 - h0) / (h0 * h1) * a[:, 1:-1]
                    + h0 / (h1 * (h0 + h1)) * a[:, 2:])
    a0, a1 = h[0], h[1]
    out[:, 0] = (-(2 * a0 + a1) / (a0 * (a0 + a1)) * a[:, 0] + (a0 + a1) / (a0 * a1) * a[:, 1]
                 - a0 / (a1 * (a0 + a1)) * a[:, 2])
    b0, b1 = h[-1], h[-2]
    out[:, -1] = ((2 * b0 + b1) / (b0 * (b0 + b1)) * a[:, -1] - (b0 + b1) / (b0 * b1) * a[:, -2]
                  + b0 / (b1 * (b0 + b1)) * a[:, -3])
    return out


def _assemble(x: np.ndarray, f: np.ndarray, g: np.ndarray, df: np.ndarray) -> np.ndarray:
    """f(x)^T g(y) / (x - y) with diagonal f'(x)^T g(x)."""
    num = f.T @ g
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, 1.0)
    m = num / d
    np.fill_diagonal(m, np.sum(df * g, axis=0))
    return m


def integrable_eval(ik: IntegrableKernel, i, j) -> complex:
    """K(x_i, x_j) for node indices i, j."""
    x = ik.nodes
    if i == j:
        df = ik.derivatives()[0]
        return complex(df[:, i] @ ik.g[:, i])
    return complex(ik.f[:, i] @ ik.g[:, j] / (x[i] - x[j]))


# -- constructors -------------------------------------------------------------------

def _sine_funcs(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(1j * np.pi * x)
    f = np.stack([e, 1.0 / e]) / (2j * np.pi)
    g = np.stack([1.0 / e, -e])
    df = np.stack([1j * np.pi * f[0], -1j * np.pi * f[1]])
    dg = np.stack([-1j * np.pi * g[0], 1j * np.pi * g[1]])
    return f, g, df, dg


def sine_integrable(space: GroundSpace) -> IntegrableKernel:
    """Sine kernel with f = (e^{i pi x}, e^{-i pi x}) / (2 pi i), g = (e^{-i pi y}, -e^{i pi y})."""
    if space.domain != INTERVAL:
        raise ValueError("sine_integrable needs a real-interval space")
    return IntegrableKernel(space, *_sine_funcs(space.nodes), funcs=_sine_funcs)


def _airy_funcs(x):
    x = np.asarray(x, dtype=float)
    ai, aip = airy(x, strict=False)
    return (np.stack([ai, aip]), np.stack([aip, -ai]),
            np.stack([aip, x * ai]), np.stack([x * ai, -aip]))


def airy_integrable(space: GroundSpace) -> IntegrableKernel:
    """Airy kernel with f = (Ai, Ai'), g = (Ai', -Ai)."""
    if space.domain != INTERVAL:
        raise ValueError("airy_integrable needs a real-interval space")
    airy(space.nodes)  # range check
    return IntegrableKernel(space, *_airy_funcs(space.nodes), funcs=_airy_funcs)


def cd_integrable(ope: OPEKernel) -> IntegrableKernel:
    """Christoffel-Darboux form f = gamma (p_N, -p_{N-1}), g = (p_{N-1}, p_N).

    Lives on the kernel's space (nodes with positive mass, measure w mu).
    """
    N, gam = ope.N, ope.gamma

    def funcs(x):
        p, dp = ope.eval_polys(x, derivative=True)
        f = gam * np.stack([p[N], -p[N - 1]])
        g = np.stack([p[N - 1], p[N]])
        df = gam * np.stack([dp[N], -dp[N - 1]])
        dg = np.stack([dp[N - 1], dp[N]])
        return f, g, df, dg

    return IntegrableKernel(ope.kernel.space, *funcs(ope.kernel.space.nodes), funcs=funcs)


# -- Palm update ----------------------------------------------------------------------

def _kvv(ik: IntegrableKernel, v) -> np.ndarray:
    m = ik.matrix()
    return m[np.ix_(v, v)]


def palm_update(ik: IntegrableKernel, v) -> IntegrableKernel:
    """Integrable data (f_v, g_v) of the reduced Palm kernel at the nodes v.

    f_v(x) = f(x) - K(x, v) K(v, v)^{-1} f(v),  g_v(y) = g(y) - g(v) K(v, v)^{-1} K(v, y).
    Derivatives are propagated analytically; f_v and g_v vanish at v.
    """
    v = list(as_configuration(v, ik.space.n))
    if not v:
        return ik
    x = ik.nodes
    df, dg = ik.derivatives()
    m = _assemble(x, ik.f, ik.g, df)
    kvv = m[np.ix_(v, v)]
    if palm_singular(m, v, weights=ik.space.weights):
        raise NearSingularPalm(f"K(v, v) is numerically singular for v = {v}")
    fv_pts, gv_pts, xv = ik.f[:, v], ik.g[:, v], x[v]
    A = np.linalg.solve(kvv, fv_pts.T)          # K(v,v)^{-1} f(v)^T, (|v|, k)
    B = np.linalg.solve(kvv.T, gv_pts.T).T      # g(v) K(v,v)^{-1}, (k, |v|)
    f_new = ik.f - (m[:, v] @ A).T
    g_new = ik.g - B @ m[v, :]

    # d/dx K(x, v) and d/dy K(v, y) away from the poles
    d = x[:, None] - xv[None, :]
    safe = np.where(d == 0, 1.0, d)
    dkx = (df.T @ gv_pts) / safe - (ik.f.T @ gv_pts) / safe ** 2
    dky = -(fv_pts.T @ dg) / safe.T + (fv_pts.T @ ik.g) / safe.T ** 2
    dkx[d == 0] = 0.0
    dky[d.T == 0] = 0.0
    df_new = df - (dkx @ A).T
    dg_new = dg - B @ dky
    f_new[:, v] = 0.0
    g_new[:, v] = 0.0

    funcs = None
    if ik.funcs is not None:
        base = ik.funcs

        def palm_funcs(y, base=base, A=A, B=B, fv=fv_pts, gv=gv_pts, xv=xv):
            y = np.asarray(y, dtype=float)
            f, g = base(y)[:2]
            dd = y[:, None] - xv[None, :]
            kx = (np.asarray(f).T @ gv) / dd
            ky = (fv.T @ np.asarray(g)) / (-dd.T)
            return f - (kx @ A).T, g - B @ ky, None, None

        funcs = palm_funcs

    return IntegrableKernel(ik.space, f_new, g_new, df_new, dg_new, funcs)


# -- dressing matrices ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RationalDressing:
    """R(z) = prod_j (I + R_j / (z - v_j)) with nilpotent residues R_j.

    ``fv``, ``gv`` and ``kvv`` are f(v), g(v) (shape (k, |v|)) and K(v, v)
    for the closed form I + (f(v) / (z - v)) K(v, v)^{-T} g(v)^T.
    """

    poles: tuple
    points: np.ndarray
    residues: tuple
    fv: np.ndarray
    gv: np.ndarray
    kvv: np.ndarray
    k: int

    def _check(self, z):
        if np.any(np.isclose(z, self.points, rtol=0, atol=0)):
            raise ValueError("R(z) evaluated at a pole")

    def product(self, z) -> np.ndarray:
        self._check(z)
        out = np.eye(self.k, dtype=complex)
        for vj, Rj in zip(self.points, self.residues):
            out = out @ (np.eye(self.k) + Rj / (z - vj))
        return out

    def closed(self, z) -> np.ndarray:
        self._check(z)
        if not self.poles:
            return np.eye(self.k, dtype=complex)
        left = self.fv / (z - self.points)[None, :]
        return np.eye(self.k) + left @ np.linalg.solve(self.kvv.T, self.gv.T)

    def inverse(self, z) -> np.ndarray:
        """R(z)^{-1} = I - f(v) K(v, v)^{-T} (g(v) / (z - v))^T."""
        self._check(z)
        if not self.poles:
            return np.eye(self.k, dtype=complex)
        right = (self.gv / (z - self.points)[None, :]).T
        return np.eye(self.k) - self.fv @ np.linalg.solve(self.kvv.T, right)


def dressing(ik: IntegrableKernel, v) -> RationalDressing:
    """Build R(z) for the ordered points v (sorted order), residues defined inductively."""
    v = list(as_configuration(v, ik.space.n))
    residues = []
    cur = ik
    for vj in v:
        kjj = integrable_eval(cur, vj, vj)
        if not abs(kjj) > PALM_TOL * max(1.0, float(np.max(np.abs(cur.matrix())))):
            raise NearSingularPalm(f"K(v, v) vanishes at node {vj}")
        residues.append(np.outer(cur.f[:, vj], cur.g[:, vj]) / kjj)
        cur = palm_update(cur, [vj])
    kvv = _kvv(ik, v) if v else np.zeros((0, 0))
    if v and palm_singular(ik.matrix(), v, weights=ik.space.weights):
        raise NearSingularPalm("K(v, v) is numerically singular")
    return RationalDressing(tuple(v), ik.nodes[v], tuple(residues), ik.f[:, v], ik.g[:, v], kvv, ik.k)


def dressing_matrix(ik: IntegrableKernel, v, z, form: str = "closed"):
    """R(z) as the ordered product, the closed form, or both (``form="both"``)."""
    r = dressing(ik, v)
    if form == "closed":
        return r.closed(z)
    if form == "product":
        return r.product(z)
    if form == "both":
        return r.product(z), r.closed(z)
    raise ValueError(f"unknown form {form!r}")


def jump_matrix(ik: IntegrableKernel, theta, v, i: int, route: str = "direct") -> np.ndarray:
    """J_Y(x_i) = I - 2 pi i theta(x_i) f_v(x_i) g_v(x_i)^T.

    ``route="conjugated"`` evaluates R(x)^{-1} (I - 2 pi i theta f g^T) R(x)
    instead (undefined at the poles).
    """
    th = as_marking(theta, ik.space)
    I = np.eye(ik.k)
    if route == "direct":
        ikv = palm_update(ik, v)
        return I - 2j * np.pi * th[i] * np.outer(ikv.f[:, i], ikv.g[:, i])
    if route == "conjugated":
        r = dressing(ik, v)
        x = ik.nodes[i]
        inner = I - 2j * np.pi * th[i] * np.outer(ik.f[:, i], ik.g[:, i])
        return r.inverse(x) @ inner @ r.product(x)
    raise ValueError(f"unknown route {route!r}")


def jump_residuals(ik: IntegrableKernel, theta, v) -> dict:
    """Max deviations over the nodes outside v: conjugation identity and det J_Y = 1."""
    th = as_marking(theta, ik.space)
    v = list(as_configuration(v, ik.space.n))
    ikv = palm_update(ik, v)
    r = dressing(ik, v)
    I = np.eye(ik.k)
    conj, dets = 0.0, 0.0
    for i in range(ik.space.n):
        if i in v:
            continue
        x = ik.nodes[i]
        jy = I - 2j * np.pi * th[i] * np.outer(ikv.f[:, i], ikv.g[:, i])
        inner = I - 2j * np.pi * th[i] * np.outer(ik.f[:, i], ik.g[:, i])
        other = r.inverse(x) @ inner @ r.closed(x)
        scale = max(1.0, float(np.max(np.abs(jy))))
        conj = max(conj, float(np.max(np.abs(jy - other))) / scale)
        dets = max(dets, abs(np.linalg.det(jy) - 1.0))
    return {"conjugation": conj, "det": dets}


def dressed_kernel(ik: IntegrableKernel, v, Y, dY=None) -> Kernel:
    """g_v(y)^T Y(y)^{-1} Y(x) f_v(x) / (x - y) on the nodes.

    ``Y`` is an array of shape (n, k, k) or a single k x k matrix (constant
    dressing, derivative 0).  ``dY`` gives the x-derivative of Y for the
    diagonal limit; if omitted Y must be constant across the nodes.
    """
    ikv = palm_update(ik, v)
    n, k = ik.space.n, ik.k
    Y = np.asarray(Y, dtype=complex)
    if Y.ndim == 2:
        Y = np.broadcast_to(Y, (n, k, k))
    if Y.shape != (n, k, k):
        raise ValueError("Y must have shape (k, k) or (n, k, k)")
    dets = np.linalg.det(Y)
    if np.any(np.abs(dets) < 1e-14):
        raise ValueError("singular Y value")
    if dY is None:
        if np.any(Y != Y[:1]):
            raise ValueError("dY is required for non-constant Y")
        dY = np.zeros_like(Y)
    dY = np.broadcast_to(np.asarray(dY, dtype=complex), (n, k, k))
    df, _ = ikv.derivatives()
    F = np.einsum("nab,bn->an", Y, ikv.f)
    dF = np.einsum("nab,bn->an", Y, df) + np.einsum("nab,bn->an", dY, ikv.f)
    G = np.linalg.solve(np.transpose(Y, (0, 2, 1)), ikv.g.T[:, :, None])[:, :, 0].T
    m = _assemble(ik.nodes, F, G, dF)
    ref = ikv.kernel()
    if not np.iscomplexobj(ref.matrix):
        scale = max(1.0, float(np.max(np.abs(m))))
        if np.max(np.abs(m.imag)) <= 1e-12 * scale:
            m = m.real
    return Kernel(ik.space, m, hermitian=False)
