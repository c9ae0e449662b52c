"""Palm kernels, conditioning on observed marks, and Fredholm-determinant functionals.

Throughout, ``theta`` is the per-node probability that a point receives mark 1
(is observed).  For a kernel K on (Lambda, mu) and an observation v of the
mark-1 points, the unobserved points form a DPP with kernel

    L = K_v (1 - M_theta K_v)^{-1}

with respect to mu_0 = (1 - theta) mu; its symmetrized version
sqrt(1 - theta) L sqrt(1 - theta) is the same process with respect to mu.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import (MomentsNotConverged, NearSingularPalm, SingularResolvent,
                     ZeroProbabilityStratum)
from .ground import CIRCLE, GroundSpace, as_configuration, as_marking
from .kernels import Kernel, hadamard_bound, projection_defect

PALM_TOL = 1e-10
RESOLVENT_TOL = 1e-12
STRATUM_TOL = 1e-14
HANKEL_COND_MAX = 1e12


def _values(K: Kernel, phi) -> np.ndarray:
    v = np.asarray(K.space.evaluate(phi))
    if np.iscomplexobj(v):
        return v
    return v.astype(float)


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


# -- Palm kernels ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PalmContext:
    """Reduced Palm kernel ``kernel`` of ``base`` at the points ``points``."""

    base: Kernel
    points: tuple
    det_vv: float
    kernel: Kernel


def palm_singular(m: np.ndarray, v, tol: float = PALM_TOL, weights=None) -> bool:
    """K(v, v) is numerically singular.

    Either the reciprocal condition number of W^{1/2} K(v, v) W^{1/2} is below
    ``tol`` or some density K(v_j, v_j) w_j is below ``tol`` times the largest
    one.  A plain determinant threshold is not used: det K(v, v) of many
    repelling points is legitimately tiny.
    """
    w = np.ones(m.shape[0]) if weights is None else np.asarray(weights)
    s = np.sqrt(w)
    dens = np.abs(np.diag(m)) * w
    if not np.min(dens[list(v)]) > tol * float(np.max(dens)):
        return True
    kvv = s[v][:, None] * m[np.ix_(v, v)] * s[v][None, :]
    sv = np.linalg.svd(kvv, compute_uv=False)
    return not sv[-1] > tol * sv[0]


def palm_matrix(m: np.ndarray, v, tol: float = PALM_TOL, weights=None) -> tuple[np.ndarray, complex]:
    """K - K[:, v] K[v, v]^{-1} K[v, :] on raw matrices; rows/columns at v set to 0."""
    v = list(v)
    if not v:
        return np.array(m, copy=True), 1.0
    kvv = m[np.ix_(v, v)]
    det = np.linalg.det(kvv)
    if palm_singular(m, v, tol, weights):
        raise NearSingularPalm(f"K(v, v) is numerically singular (det {det:.3e}) for v = {v}")
    out = m - m[:, v] @ np.linalg.solve(kvv, m[v, :])
    out[v, :] = 0.0
    out[:, v] = 0.0
    return out, det


def palm_kernel(K: Kernel, v) -> PalmContext:
    """Reduced Palm kernel ``K_v(x, y) = K(x, y) - K(x, v) K(v, v)^{-1} K(v, y)``.

    Raises NearSingularPalm when K(v, v) is numerically singular (see
    :func:`palm_singular`).
    """
    v = as_configuration(v, K.n)
    m, det = palm_matrix(K.matrix, v, weights=K.weights)
    if K.hermitian:
        m = _hermitize(m)
        det = float(np.real(det))
    return PalmContext(K, v, det, Kernel(K.space, m, K.hermitian))


# -- resolvents and determinants ---------------------------------------------------

def _resolvent(m: np.ndarray, rho_w: np.ndarray, tol: float = RESOLVENT_TOL):
    """For D = diag(rho_w) >= 0 return (K (1 - D K)^{-1}, det(1 - D^{1/2} K D^{1/2}))."""
    s = np.sqrt(rho_w)
    a = np.eye(m.shape[0]) - s[:, None] * m * s[None, :]
    det = np.linalg.det(a) if a.size else 1.0
    if not abs(det) > tol * hadamard_bound(a):
        raise SingularResolvent(f"det(1 - M K M) = {det:.3e} is numerically zero")
    ks = m * s[None, :]
    sk = s[:, None] * m
    return m + ks @ np.linalg.solve(a, sk), det


def fredholm_det(K: Kernel, phi) -> float | complex:
    """det(1 - M_sqrt(phi) K M_sqrt(phi)) as a finite determinant.

    With phi >= 0 the square root is placed symmetrically; otherwise
    det(1 - K M_phi) is used (same value, no square root needed).
    """
    phi = _values(K, phi)
    w = K.weights
    if np.iscomplexobj(phi) or np.any(phi < 0):
        val = np.linalg.det(np.eye(K.n) - K.matrix * (phi * w)[None, :])
    else:
        s = np.sqrt(phi * w)
        a = np.eye(K.n) - s[:, None] * K.matrix * s[None, :]
        if K.hermitian:
            a = _hermitize(a)
        val = np.linalg.det(a)
    if K.n == 0:
        return 1.0
    if K.hermitian and not np.iscomplexobj(phi):
        return float(np.real(val))
    return val


def log_fredholm_det(K: Kernel, phi) -> float:
    """log |det(1 - M_sqrt(phi) K M_sqrt(phi))| via a stable LU."""
    phi = _values(K, phi)
    a = np.eye(K.n) - K.matrix * (phi * K.weights)[None, :]
    sign, logdet = np.linalg.slogdet(a)
    if sign == 0:
        raise SingularResolvent("Fredholm determinant vanishes")
    return float(logdet)


# -- conditional kernels -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConditionalKernel:
    """Kernel of the unobserved points given the observation ``points``.

    Attributes
    ----------
    kernel : Kernel
        L restricted to the nodes with theta < 1, on the measure (1 - theta) mu.
    index_map : array
        Parent indices of the nodes of ``kernel``.
    full : array
        L on every node (rows at theta = 1 nodes are kept for functionals).
    symmetrized : Kernel or None
        sqrt(1 - theta) L sqrt(1 - theta) on the original space, hermitian
        when K is.
    resolvent_det : float
        det(1 - M_sqrt(theta) K_v M_sqrt(theta)), the Fredholm determinant L_v[theta].
    projection_defect : float or None
        Defect of the conditional operator when K is a projection.
    """

    kernel: Kernel
    index_map: np.ndarray
    full: np.ndarray
    marking: np.ndarray
    points: tuple
    palm: PalmContext
    symmetrized: Kernel | None
    resolvent_det: float | complex
    projection_defect: float | None

    @property
    def space(self) -> GroundSpace:
        return self.palm.base.space

    def trace(self) -> float:
        return self.kernel.trace()


def conditional_kernel(K: Kernel, theta, v=(), check_projection: bool | None = None) -> ConditionalKernel:
    """Kernel of xi_0 given xi_1 = v for the theta-marked DPP with kernel K.

    Parameters
    ----------
    K : Kernel
    theta : marking (callable, scalar or node values in [0, 1])
    v : configuration of observed node indices
    check_projection : bool, optional
        Compute the projection defect of the conditional operator.  By default
        this is done when K is flagged as a projection.
    """
    th = as_marking(theta, K.space)
    ctx = palm_kernel(K, v)
    w = K.weights
    L, det = _resolvent(ctx.kernel.matrix, th * w)
    if K.hermitian:
        L = _hermitize(L)
        det = float(np.real(det))
    keep = np.flatnonzero(th < 1.0)
    sub = GroundSpace(K.space.nodes[keep], ((1.0 - th) * w)[keep], K.space.domain, K.space.bounds)
    kernel = Kernel(sub, L[np.ix_(keep, keep)], K.hermitian)
    sym = None
    if K.hermitian:
        r = np.sqrt(1.0 - th)
        sym = Kernel(K.space, _hermitize(r[:, None] * L * r[None, :]), hermitian=True)
    if check_projection is None:
        check_projection = K.claimed_projection
    defect = projection_defect(kernel) if check_projection else None
    return ConditionalKernel(kernel, keep, L, th, ctx.points, ctx, sym, det, defect)


def avg_mult_functional(K: Kernel, theta, v, phi0, route: str = "ratio"):
    """Conditional average multiplicative functional E[prod_{xi_0} (1 - phi0) | xi_1 = v].

    ``route="ratio"`` evaluates L_v[1 - (1 - theta)(1 - phi0)] / L_v[theta] on
    the Palm kernel, ``route="kernel"`` the Fredholm determinant of the
    conditional kernel, ``route="both"`` returns the pair.
    """
    th = as_marking(theta, K.space)
    phi0 = _values(K, phi0)
    out = {}
    if route in ("ratio", "both"):
        Kv = palm_kernel(K, v).kernel
        den = fredholm_det(Kv, th)
        a = np.eye(K.n) - np.sqrt(th * K.weights)[:, None] * Kv.matrix * np.sqrt(th * K.weights)[None, :]
        if not abs(den) > RESOLVENT_TOL * hadamard_bound(a):
            raise SingularResolvent("L_v[theta] is numerically zero")
        out["ratio"] = fredholm_det(Kv, 1.0 - (1.0 - th) * (1.0 - phi0)) / den
    if route in ("kernel", "both"):
        ck = conditional_kernel(K, th, v, check_projection=False)
        out["kernel"] = fredholm_det(ck.kernel, phi0[ck.index_map])
    if route == "both":
        return out["ratio"], out["kernel"]
    if route not in out:
        raise ValueError(f"unknown route {route!r}")
    return out[route]


# -- Janossy densities ------------------------------------------------------------------

def janossy_density(K: Kernel, rho, x=()) -> float | complex:
    """Janossy density of the rho-thinned process at x, against prod rho(x_i) mu(dx_i).

    Closed form det(1 - M_sqrt(rho) K M_sqrt(rho)) * det[K (1 - M_rho K)^{-1}](x).
    The empty configuration gives the probability that the thinned process is
    empty.
    """
    rho = np.asarray(K.space.evaluate(rho), dtype=float)
    x = as_configuration(x, K.n)
    J, det = _resolvent(K.matrix, rho * K.weights)
    val = det
    if x:
        val = det * np.linalg.det(J[np.ix_(x, x)])
    if K.hermitian:
        return float(np.real(val))
    return val


def mark1_count_distribution(K: Kernel, theta) -> np.ndarray:
    """P(xi_1(Lambda) = m) for m = 0..n.

    The generating function E z^{xi_1} = det(1 - (1 - z) M_theta K) factors
    over the eigenvalues of the symmetrized thinned kernel.
    """
    th = as_marking(theta, K.space)
    s = np.sqrt(th * K.weights)
    a = s[:, None] * K.matrix * s[None, :]
    lam = np.linalg.eigvalsh(_hermitize(a)) if K.hermitian else np.linalg.eigvals(a)
    coef = np.array([1.0 + 0j])
    for l in lam:
        coef = np.convolve(coef, np.array([1.0 - l, l]))
    if K.hermitian:
        coef = coef.real
    return coef


@dataclass(frozen=True, eq=False)
class ObservationDensity:
    """Density of xi_1 given xi_1(Lambda) = m against prod theta(v_i) mu(dv_i)."""

    K: Kernel
    theta: np.ndarray
    m: int
    prob_m: float

    def __call__(self, v) -> float:
        v = as_configuration(v, self.K.n)
        if len(v) != self.m:
            raise ValueError(f"expected {self.m} observed points, got {len(v)}")
        if self.m == 0:
            return 1.0
        j = janossy_density(self.K, self.theta, v)
        return float(np.real(j)) / (math.factorial(self.m) * self.prob_m)

    def total_mass(self) -> float:
        """Quadrature integral over ordered m-tuples (diagonal tuples contribute 0)."""
        tw = self.theta * self.K.weights
        total = 0.0
        for c in combinations(np.flatnonzero(tw > 0), self.m):
            total += self(c) * float(np.prod(tw[list(c)]))
        return total * math.factorial(self.m)


def observation_density(K: Kernel, theta, m: int) -> ObservationDensity:
    """The law of the mark-1 points given that there are exactly m of them."""
    th = as_marking(theta, K.space)
    pm = mark1_count_distribution(K, th)
    p = float(np.real(pm[m])) if m < pm.size else 0.0
    if not p > STRATUM_TOL:
        raise ZeroProbabilityStratum(f"P(xi_1(Lambda) = {m}) = {p:.3e}")
    return ObservationDensity(K, th, int(m), p)


def conditional_correlation(K: Kernel, theta, v, x, route: str = "janossy"):
    """Correlation function of xi_0 given xi_1 = v, against (1 - theta) mu.

    ``route="janossy"`` uses j_1(x + v) / j_1(v), ``route="kernel"`` the
    determinant of the conditional kernel, ``route="both"`` returns the pair.
    """
    th = as_marking(theta, K.space)
    v = as_configuration(v, K.n)
    x = as_configuration(x, K.n)
    out = {}
    if route in ("janossy", "both"):
        if set(x) & set(v):
            out["janossy"] = 0.0
        else:
            out["janossy"] = janossy_density(K, th, tuple(x) + tuple(v)) / janossy_density(K, th, v)
    if route in ("kernel", "both"):
        ck = conditional_kernel(K, th, v, check_projection=False)
        val = np.linalg.det(ck.full[np.ix_(x, x)]) if x else 1.0
        out["kernel"] = float(np.real(val)) if K.hermitian else val
    if route == "both":
        return out["janossy"], out["kernel"]
    if route not in out:
        raise ValueError(f"unknown route {route!r}")
    return out[route]


# -- Hankel / Toeplitz marginals -------------------------------------------------------------

def _scaled_cond(h: np.ndarray) -> float:
    d = np.sqrt(np.abs(np.diag(h)))
    if np.any(d == 0):
        return np.inf
    return float(np.linalg.cond(h / d[:, None] / d[None, :]))


def hankel_det(moments_fn, m: int) -> float:
    """det(f_{j+k})_{j,k<m} from a function returning f_0..f_{2m-2}."""
    if m == 0:
        return 1.0
    f = moments_fn(2 * m - 1)
    h = f[np.add.outer(np.arange(m), np.arange(m))]
    if m > 1 and _scaled_cond(h) > HANKEL_COND_MAX:
        raise MomentsNotConverged("Hankel moment matrix is too ill-conditioned")
    return float(np.linalg.det(h))


def toeplitz_det(moments_fn, m: int) -> float:
    """det(g_{j-k})_{j,k<m} from a function returning g_ell for |ell| < m."""
    if m == 0:
        return 1.0
    g = moments_fn(m)  # dict-like: index ell -> g_ell
    idx = np.subtract.outer(np.arange(m), np.arange(m))
    t = np.vectorize(lambda l: g[l], otypes=[complex])(idx)
    if m > 1 and _scaled_cond(t) > HANKEL_COND_MAX:
        raise MomentsNotConverged("Toeplitz moment matrix is too ill-conditioned")
    return float(np.real(np.linalg.det(t)))


def _mark0_parts(ope, theta):
    space = ope.parent
    th = as_marking(theta, space)
    return space, th, np.asarray(ope.weight, dtype=float)


def marginal_mark0_density(ope, theta, m: int, u) -> float:
    """Unnormalized density of the mark-0 points given exactly m mark-1 points.

    For an N-point OPE with n = N - m mark-0 points at nodes ``u``:
    real line   |Delta(u)|^2 H_m(theta w prod (. - u_j)^2) prod (1 - theta(u_j)) w(u_j),
    unit circle |Delta(e^{iu})|^2 T_m(theta w prod |. - e^{iu_j}|^2) prod (1 - theta(u_j)) w(u_j),
    against prod mu(du_j).  Moments are quadrature sums over the ground nodes.
    """
    space, th, wv = _mark0_parts(ope, theta)
    N = ope.N
    n = N - int(m)
    if m < 0 or n <= 0:
        raise ValueError(f"need 0 <= m < N, got m={m}, N={N}")
    u = list(u)
    if len(u) != n:
        raise ValueError(f"expected {n} mark-0 points, got {len(u)}")
    if len(set(u)) < n:
        return 0.0
    mu = space.weights
    base = th * wv * mu
    if space.domain == CIRCLE:
        z = np.exp(1j * space.nodes)
        zu = z[u]
        vdm = np.prod(np.abs(np.subtract.outer(zu, zu))[np.triu_indices(n, 1)]) ** 2
        f = base * np.prod(np.abs(z[:, None] - zu[None, :]) ** 2, axis=1)

        def moments(mm):
            return {l: np.sum(np.exp(-1j * l * space.nodes) * f) / (2 * np.pi) for l in range(-mm + 1, mm)}
        det = toeplitz_det(moments, int(m))
    else:
        x = space.nodes
        xu = x[u]
        vdm = np.prod(np.subtract.outer(xu, xu)[np.triu_indices(n, 1)]) ** 2
        f = base * np.prod((x[:, None] - xu[None, :]) ** 2, axis=1)
        scale = max(1.0, float(np.max(np.abs(x))))
        # moments of the rescaled variable keep the Hankel matrix balanced
        y = x / scale

        def moments(k):
            return np.array([np.sum(y ** l * f) for l in range(k)])
        det = hankel_det(moments, int(m)) * scale ** (m * (m - 1))
    return float(vdm * det * np.prod((1.0 - th[u]) * wv[u]))


def marginal_mark0_normalization(ope, theta, m: int, method: str = "auto",
                                 samples: int = 20000, seed: int = 0) -> tuple[float, float]:
    """Z' = integral of the unnormalized mark-0 density over ordered n-tuples.

    Exhaustive over node subsets when n <= 3 (standard error 0), Monte Carlo
    with nodes drawn proportionally to mu otherwise.  Returns (Z', stderr).
    """
    space = ope.parent
    n = ope.N - int(m)
    mu = space.weights
    if method == "auto":
        method = "exact" if n <= 3 else "mc"
    if method == "exact":
        total = 0.0
        for c in combinations(range(space.n), n):
            total += marginal_mark0_density(ope, theta, m, c) * float(np.prod(mu[list(c)]))
        return total * math.factorial(n), 0.0
    from .sampler import philox_uniforms
    mass = mu.sum()
    cdf = np.cumsum(mu) / mass
    uni = philox_uniforms(seed, 2, 0, samples * n).reshape(samples, n)
    idx = np.minimum(np.searchsorted(cdf, uni, side="right"), space.n - 1)
    vals = np.array([marginal_mark0_density(ope, theta, m, row) for row in idx]) * mass ** n
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(samples))


def marginal_mark0_probability(ope, theta, m: int, u, Z: float | None = None) -> float:
    """Probability that the mark-0 points are exactly the node set u (finite grids)."""
    if Z is None:
        Z, _ = marginal_mark0_normalization(ope, theta, m, method="exact")
    mu = ope.parent.weights
    n = len(u)
    return math.factorial(n) * marginal_mark0_density(ope, theta, m, u) * float(np.prod(mu[list(u)])) / Z


# -- Jacobi identity -------------------------------------------------------------------

def jacobi_logderiv(K: Kernel, theta_family, t: float, dt: float = 1e-4) -> tuple[float, float]:
    """Both sides of d/dt log L[theta_t] = -int d_t theta_t(x) L_t(x, x) dmu(x).

    ``theta_family`` maps t to a marking.  The left side is a central
    difference of log Fredholm determinants, the right side uses the
    conditional kernel L_t = K (1 - M_theta_t K)^{-1} and the same stencil
    for d_t theta_t.
    """
    def th(s):
        return as_marking(theta_family(s), K.space)

    lhs = (log_fredholm_det(K, th(t + dt)) - log_fredholm_det(K, th(t - dt))) / (2 * dt)
    dth = (th(t + dt) - th(t - dt)) / (2 * dt)
    L, _ = _resolvent(K.matrix, th(t) * K.weights)
    rhs = -float(np.real(np.sum(dth * np.diag(L) * K.weights)))
    return float(lhs), rhs
