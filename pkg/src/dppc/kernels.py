"""Correlation kernels on quadrature grids and kernel-level functionals.

A :class:`Kernel` pairs a node matrix ``M[i, j] = K(x_i, x_j)`` with the
ground space that carries the reference measure.  The integral operator acts
as ``(K f)_i = sum_j M[i, j] w_j f_j`` so products of operators are
``A @ diag(w) @ B`` and spectral questions are asked of the symmetrized
matrix ``W^{1/2} M W^{1/2}``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .errors import DomainError, GramBreakdown
from .ground import CIRCLE, INTERVAL, GroundSpace, restrict, space_from_dict, space_to_dict

AIRY_RANGE = (-15.0, 8.0)


def hadamard_bound(a: np.ndarray) -> float:
    """Product of row norms, an upper bound for |det a|."""
    if a.size == 0:
        return 1.0
    return float(np.prod(np.linalg.norm(a, axis=1)))


class Kernel:
    """Correlation kernel sampled at the nodes of a ground space.

    Parameters
    ----------
    space : GroundSpace
        Carries the reference measure through its weights.
    matrix : (n, n) array
        Entry ``(i, j)`` is ``K(x_i, x_j)``.
    hermitian : bool
        Checked to 1e-12 (relative to the largest entry) when set.
    claimed_projection : bool
        Informational flag; see :func:`projection_defect`.
    """

    def __init__(self, space: GroundSpace, matrix, hermitian: bool = False,
                 claimed_projection: bool = False):
        m = np.array(matrix)
        if not np.iscomplexobj(m):
            m = m.astype(float)
        if m.shape != (space.n, space.n):
            raise ValueError(f"matrix shape {m.shape} does not match {space.n} nodes")
        if hermitian:
            scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
            if m.size and np.max(np.abs(m - m.conj().T)) > 1e-12 * scale:
                raise ValueError("matrix flagged hermitian is not hermitian")
        m.setflags(write=False)
        self.space = space
        self.matrix = m
        self.hermitian = bool(hermitian)
        self.claimed_projection = bool(claimed_projection)

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def weights(self) -> np.ndarray:
        return self.space.weights

    def operator(self) -> np.ndarray:
        """Matrix of the operator acting on node values, ``M W``."""
        return self.matrix * self.weights[None, :]

    def symmetrized(self) -> np.ndarray:
        """``W^{1/2} M W^{1/2}``; hermitian whenever the kernel is."""
        s = np.sqrt(self.weights)
        out = s[:, None] * self.matrix * s[None, :]
        if self.hermitian:
            out = 0.5 * (out + out.conj().T)
        return out

    def apply(self, f) -> np.ndarray:
        f = self.space.evaluate(f)
        return self.matrix @ (self.weights * f)

    def eigenvalues(self) -> np.ndarray:
        """Spectrum of the operator (sorted increasingly when hermitian)."""
        if self.hermitian:
            return np.linalg.eigvalsh(self.symmetrized())
        return np.linalg.eigvals(self.symmetrized())

    def trace(self) -> float:
        return complex(np.sum(np.diag(self.matrix) * self.weights)).real

    def restrict(self, predicate) -> tuple["Kernel", np.ndarray]:
        sub, idx = restrict(self.space, predicate)
        return Kernel(sub, self.matrix[np.ix_(idx, idx)], self.hermitian), idx

    def with_matrix(self, matrix, hermitian=None) -> "Kernel":
        h = self.hermitian if hermitian is None else hermitian
        return Kernel(self.space, matrix, h)

    def to_dict(self) -> dict:
        m = self.matrix
        if np.iscomplexobj(m):
            mat = [[[float(z.real), float(z.imag)] for z in row] for row in m]
        else:
            mat = [[float(z) for z in row] for row in m]
        return {
            "space": space_to_dict(self.space),
            "matrix": mat,
            "complex": bool(np.iscomplexobj(m)),
            "flags": {"hermitian": self.hermitian, "claimed_projection": self.claimed_projection},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Kernel":
        space = space_from_dict(d["space"])
        m = np.array(d["matrix"], dtype=float)
        if d.get("complex"):
            m = m[..., 0] + 1j * m[..., 1]
        flags = d.get("flags", {})
        return cls(space, m, flags.get("hermitian", False), flags.get("claimed_projection", False))

    @classmethod
    def from_json(cls, text: str) -> "Kernel":
        return cls.from_dict(json.loads(text))

    def __repr__(self) -> str:
        kind = "complex" if np.iscomplexobj(self.matrix) else "real"
        return f"Kernel(n={self.n}, {kind}, hermitian={self.hermitian}, domain={self.space.domain!r})"


def _need(space: GroundSpace, domain: str, who: str):
    if space.domain != domain:
        raise DomainError(f"{who} needs a {domain} space, got {space.domain}")


# -- concrete kernels ------------------------------------------------------------

def sine_kernel(space: GroundSpace) -> Kernel:
    """sin(pi(x-y)) / (pi(x-y)) with unit diagonal."""
    _need(space, INTERVAL, "sine_kernel")
    x = space.nodes
    return Kernel(space, np.sinc(x[:, None] - x[None, :]), hermitian=True)


def airy(x, strict: bool = True):
    """Ai and Ai' at x.

    Values come from ``scipy.special.airy`` (AMOS routines), whose absolute
    error on [-15, 8] is below 2e-14.  With ``strict`` the range is enforced.
    """
    x = np.asarray(x, dtype=float)
    if strict and x.size and (x.min() < AIRY_RANGE[0] or x.max() > AIRY_RANGE[1]):
        raise DomainError(f"Airy evaluation is certified on {AIRY_RANGE} only")
    ai, aip, _, _ = special.airy(x)
    return ai, aip


def airy_kernel(space: GroundSpace, strict: bool = True) -> Kernel:
    """(Ai(x)Ai'(y) - Ai(y)Ai'(x)) / (x - y), diagonal Ai'(x)^2 - x Ai(x)^2."""
    _need(space, INTERVAL, "airy_kernel")
    x = space.nodes
    ai, aip = airy(x, strict)
    num = ai[:, None] * aip[None, :] - aip[:, None] * ai[None, :]
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, 1.0)
    m = num / d
    np.fill_diagonal(m, aip ** 2 - x * ai ** 2)
    m = 0.5 * (m + m.T)
    return Kernel(space, m, hermitian=True)


def cue_kernel(N: int, space: GroundSpace) -> Kernel:
    """(1/2pi) sin(N(t-s)/2) / sin((t-s)/2) on the circle, diagonal N/2pi."""
    _need(space, CIRCLE, "cue_kernel")
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    t = space.nodes
    return Kernel(space, cue_formula(N, t[:, None] - t[None, :]), hermitian=True)


def cue_formula(N: int, d, norm: float = 2.0 * np.pi) -> np.ndarray:
    """sin(N d/2) / sin(d/2) / norm at angle differences d.

    For even N this is 2pi-antiperiodic, so the value depends on the
    representative of d; any fixed choice gives a conjugate kernel.
    """
    d = np.asarray(d, dtype=float)
    den = np.sin(0.5 * d)
    small = np.abs(den) < 1e-14
    # at d = 2 pi k the limit is N (-1)^{k (N-1)}
    k = np.rint(d / (2.0 * np.pi))
    lim = N * np.where((k * (N - 1)) % 2 == 0, 1.0, -1.0)
    m = np.where(small, lim, np.sin(0.5 * N * d) / np.where(small, 1.0, den))
    return m / norm


# -- orthogonal polynomial ensembles ---------------------------------------------

@dataclass(frozen=True, eq=False)
class OPEKernel:
    """Christoffel-Darboux kernel of a discrete orthogonal polynomial family.

    ``kernel`` lives on the nodes where ``w(x_i) w_i > 0`` (``index_map``
    gives their parent indices) and is taken with respect to ``w mu``.
    Orthonormal polynomials satisfy
    ``x p_j = b[j+1] p_{j+1} + a[j] p_j + b[j] p_{j-1}`` with leading
    coefficients ``kappa[j]``; ``gamma = kappa[N-1] / kappa[N] = b[N]``.
    """

    kernel: Kernel
    index_map: np.ndarray
    parent: GroundSpace
    weight: np.ndarray
    N: int
    a: np.ndarray
    b: np.ndarray
    kappa: np.ndarray
    gamma: float

    def eval_polys(self, x, derivative: bool = False):
        """p_0..p_N at points x, shape (N+1, len(x)); derivatives on request."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        p = np.zeros((self.N + 1, x.size))
        dp = np.zeros_like(p)
        p[0] = self.kappa[0]
        for j in range(self.N):
            prev = p[j - 1] if j else 0.0
            dprev = dp[j - 1] if j else 0.0
            bj = self.b[j] if j else 0.0
            p[j + 1] = ((x - self.a[j]) * p[j] - bj * prev) / self.b[j + 1]
            dp[j + 1] = (p[j] + (x - self.a[j]) * dp[j] - bj * dprev) / self.b[j + 1]
        return (p, dp) if derivative else p

    def sum_form(self, x, y=None) -> np.ndarray:
        """sum_{j<N} p_j(x) p_j(y) on arbitrary points."""
        px = self.eval_polys(x)[: self.N]
        py = px if y is None else self.eval_polys(y)[: self.N]
        return px.T @ py

    def cd_form(self, x, y=None) -> np.ndarray:
        """Christoffel-Darboux closed form, diagonal by its derivative limit."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        y = x if y is None else np.atleast_1d(np.asarray(y, dtype=float))
        px, dpx = self.eval_polys(x, derivative=True)
        py = self.eval_polys(y)
        N = self.N
        num = px[N][:, None] * py[N - 1][None, :] - px[N - 1][:, None] * py[N][None, :]
        d = x[:, None] - y[None, :]
        same = d == 0
        out = self.gamma * num / np.where(same, 1.0, d)
        diag = self.gamma * (dpx[N] * px[N - 1] - dpx[N - 1] * px[N])
        return np.where(same, diag[:, None] * np.ones_like(d), out)

    def full_grid(self, form: str = "sum") -> np.ndarray:
        """Kernel evaluated on every parent node (including zero-weight ones)."""
        x = self.parent.nodes
        return self.sum_form(x) if form == "sum" else self.cd_form(x)


def _lanczos(x: np.ndarray, mass: np.ndarray, nsteps: int):
    """Discrete Stieltjes procedure as Lanczos on diag(x), fully reorthogonalized."""
    q = np.sqrt(mass)
    q = q / np.linalg.norm(q)
    Q = np.zeros((nsteps + 1, x.size))
    Q[0] = q
    a = np.zeros(nsteps + 1)
    b = np.zeros(nsteps + 1)
    for j in range(nsteps):
        r = x * Q[j]
        a[j] = Q[j] @ r
        r = r - a[j] * Q[j] - (b[j] * Q[j - 1] if j else 0.0)
        for _ in range(2):
            r -= Q[: j + 1].T @ (Q[: j + 1] @ r)
        b[j + 1] = np.linalg.norm(r)
        if b[j + 1] <= 1e-13 * max(1.0, np.max(np.abs(x))):
            raise GramBreakdown(f"orthogonal polynomial recurrence broke down at degree {j + 1}")
        Q[j + 1] = r / b[j + 1]
    a[nsteps] = Q[nsteps] @ (x * Q[nsteps])
    return a, b


def ope_kernel(weight, N: int, space: GroundSpace) -> OPEKernel:
    """Orthogonal polynomial ensemble kernel for ``weight`` on a real grid.

    Builds p_0..p_N orthonormal for the discrete measure with masses
    ``weight(x_i) w_i`` and returns ``K_N(x, y) = sum_{j<N} p_j(x) p_j(y)``
    with respect to ``weight * mu``.
    """
    if space.domain == CIRCLE:
        raise DomainError("use circle_ope_kernel on the unit circle")
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    N = int(N)
    wv = np.asarray(space.evaluate(weight), dtype=float)
    if np.any(wv < 0) or not np.all(np.isfinite(wv)):
        raise ValueError("weight must be finite and non-negative")
    mass = wv * space.weights
    idx = np.flatnonzero(mass > 0)
    if idx.size < N + 1:
        raise GramBreakdown(f"{idx.size} nodes carry mass, need at least {N + 1}")
    x = space.nodes[idx]
    a, b = _lanczos(x, mass[idx], N)
    kappa = np.empty(N + 1)
    kappa[0] = 1.0 / np.sqrt(mass[idx].sum())
    for j in range(N):
        kappa[j + 1] = kappa[j] / b[j + 1]
    sub = GroundSpace(x, mass[idx], space.domain, space.bounds)
    tmp = OPEKernel(None, idx, space, wv, N, a, b, kappa, float(b[N]))
    m = tmp.sum_form(x)
    m = 0.5 * (m + m.T)
    k = Kernel(sub, m, hermitian=True, claimed_projection=True)
    return OPEKernel(k, idx, space, wv, N, a, b, kappa, float(b[N]))


@dataclass(frozen=True, eq=False)
class CircleOPEKernel:
    """Kernel sum_{j<N} phi_j(z) conj(phi_j(zeta)) for orthonormal polynomials on the circle.

    ``coef[:, j]`` holds the monomial coefficients of phi_j.
    """

    kernel: Kernel
    index_map: np.ndarray
    parent: GroundSpace
    weight: np.ndarray
    N: int
    coef: np.ndarray

    def eval_polys(self, t) -> np.ndarray:
        z = np.exp(1j * np.atleast_1d(np.asarray(t, dtype=float)))
        v = z[:, None] ** np.arange(self.N)[None, :]
        return (v @ self.coef).T

    def sum_form(self, t, s=None) -> np.ndarray:
        pt = self.eval_polys(t)
        ps = pt if s is None else self.eval_polys(s)
        return pt.T @ ps.conj()


def circle_ope_kernel(weight, N: int, space: GroundSpace) -> CircleOPEKernel:
    """Orthonormal polynomials on the unit circle by Gram-Schmidt on 1, z, ..., z^{N-1}.

    Gram-Schmidt is done as a Householder QR of the mass-scaled Vandermonde
    matrix, which is well conditioned for nearly uniform circle grids.
    """
    _need(space, CIRCLE, "circle_ope_kernel")
    if int(N) != N or N < 1:
        raise ValueError("N must be a positive integer")
    N = int(N)
    wv = np.asarray(space.evaluate(weight), dtype=float)
    if np.any(wv < 0) or not np.all(np.isfinite(wv)):
        raise ValueError("weight must be finite and non-negative")
    mass = wv * space.weights
    idx = np.flatnonzero(mass > 0)
    if idx.size < N:
        raise GramBreakdown(f"{idx.size} nodes carry mass, need at least {N}")
    z = np.exp(1j * space.nodes[idx])
    V = z[:, None] ** np.arange(N)[None, :]
    _, R = np.linalg.qr(np.sqrt(mass[idx])[:, None] * V)
    d = np.diag(R)
    if np.min(np.abs(d)) < 1e-12 * np.max(np.abs(d)):
        raise GramBreakdown("circle Gram matrix is numerically singular")
    # make leading coefficients positive
    R = (np.conj(d) / np.abs(d))[:, None] * R
    coef = linalg.solve_triangular(R, np.eye(N), lower=False)
    sub = GroundSpace(space.nodes[idx], mass[idx], space.domain, space.bounds)
    tmp = CircleOPEKernel(None, idx, space, wv, N, coef)
    m = tmp.sum_form(space.nodes[idx])
    m = 0.5 * (m + m.conj().T)
    k = Kernel(sub, m, hermitian=True, claimed_projection=True)
    return CircleOPEKernel(k, idx, space, wv, N, coef)


# -- functionals -----------------------------------------------------------------

def projection_defect(K: Kernel) -> float:
    """max |(K o K - K)(x_i, x_j)| with the mu-weighted product."""
    if K.n == 0:
        return 0.0
    m = K.matrix
    return float(np.max(np.abs((m * K.weights[None, :]) @ m - m)))


def correlation(K: Kernel, config) -> complex | float:
    """det K(x_i, x_j) over the configuration; 1 for the empty one."""
    idx = np.asarray(list(config), dtype=int)
    if idx.size == 0:
        return 1.0
    val = np.linalg.det(K.matrix[np.ix_(idx, idx)])
    if K.hermitian:
        return float(np.real(val))
    return val


def linear_statistic_moments(K: Kernel, f) -> tuple[float, float]:
    """Mean and variance of sum_x f(x) over a DPP with hermitian kernel K."""
    if not K.hermitian:
        raise ValueError("linear_statistic_moments needs a hermitian kernel")
    f = np.asarray(K.space.evaluate(f), dtype=float)
    w = K.weights
    d = np.real(np.diag(K.matrix))
    mean = float(np.sum(f * d * w))
    fw = f * w
    var = float(np.sum(f ** 2 * d * w) - fw @ (np.abs(K.matrix) ** 2) @ fw)
    return mean, var


def random_hermitian_kernel(space: GroundSpace, rng, eigenvalues=None,
                            complex_: bool = True) -> Kernel:
    """Hermitian kernel with prescribed operator spectrum (uniform on [0,1] by default).

    Built as ``W^{-1/2} Q diag(lam) Q^* W^{-1/2}`` with Q Haar distributed.
    """
    n = space.n
    if eigenvalues is None:
        eigenvalues = rng.uniform(0.0, 1.0, n)
    lam = np.asarray(eigenvalues, dtype=float)
    if complex_:
        z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    else:
        z = rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))[None, :]
    s = 1.0 / np.sqrt(space.weights)
    m = s[:, None] * ((q * lam[None, :]) @ q.conj().T) * s[None, :]
    m = 0.5 * (m + m.conj().T)
    is_proj = bool(np.all((lam == 0) | (lam == 1)))
    return Kernel(space, m, hermitian=True, claimed_projection=is_proj)
