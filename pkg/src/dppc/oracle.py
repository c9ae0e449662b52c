"""Exhaustive reference implementation on tiny finite ground sets.

A :class:`TabulatedProcess` stores P(xi = S) for every subset S of the nodes,
indexed by bitmask (bit i set iff node i is in S).  Everything else (marking,
conditioning, correlations, moments) is computed by exact enumeration.
"""
from __future__ import annotations

import json
from itertools import combinations

import numpy as np

from .errors import NotAValidDPP, ZeroProbabilityObservation
from .ground import GroundSpace, as_configuration, as_marking, space_from_dict, space_to_dict
from .kernels import Kernel

MAX_NODES = 15
MAX_MARKED_NODES = 12
CLIP_TOL = 1e-10
ZERO_OBS_TOL = 1e-15


def mask_of(config) -> int:
    m = 0
    for i in config:
        m |= 1 << int(i)
    return m


def members(mask: int) -> tuple[int, ...]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def _popcounts(n: int) -> np.ndarray:
    masks = np.arange(1 << n)
    return np.array([bin(m).count("1") for m in masks])


def _superset_sum(a: np.ndarray, n: int, factor=None) -> np.ndarray:
    """out[B] = sum_{S >= B} a[S] prod_{i in S \\ B} factor[i]."""
    a = np.array(a, copy=True)
    masks = np.arange(1 << n)
    for i in range(n):
        bit = 1 << i
        lo = masks[(masks & bit) == 0]
        f = 1.0 if factor is None else factor[i]
        a[lo] += f * a[lo | bit]
    return a


def _superset_mobius(a: np.ndarray, n: int) -> np.ndarray:
    """Inverse of the plain superset sum: out[S] = sum_{T >= S} (-1)^{|T \\ S|} a[T]."""
    a = np.array(a, copy=True)
    masks = np.arange(1 << n)
    for i in range(n):
        bit = 1 << i
        lo = masks[(masks & bit) == 0]
        a[lo] -= a[lo | bit]
    return a


def _check_size(n: int, cap: int = MAX_NODES):
    if n > cap:
        raise ValueError(f"exhaustive enumeration is capped at {cap} nodes, got {n}")


class TabulatedProcess:
    """Probability table over all subsets of a finite ground space."""

    def __init__(self, space: GroundSpace, prob):
        _check_size(space.n)
        p = np.asarray(prob, dtype=float)
        if p.shape != (1 << space.n,):
            raise ValueError("table must have one entry per subset")
        if np.any(p < 0):
            raise ValueError("negative probability in table")
        if abs(p.sum() - 1.0) > 1e-12 * max(1, p.size) ** 0.5 + 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}")
        p.setflags(write=False)
        self.space = space
        self.prob = p

    @property
    def n(self) -> int:
        return self.space.n

    def __getitem__(self, config) -> float:
        return float(self.prob[mask_of(config)])

    def inclusion(self) -> np.ndarray:
        """P(xi contains S) for every mask S."""
        return _superset_sum(self.prob, self.n)

    def correlation(self, config, measure=None) -> float:
        """rho(S) = P(xi contains S) / prod_S mu against ``measure`` (default the space weights)."""
        config = as_configuration(config, self.n)
        w = self.space.weights if measure is None else np.asarray(measure, dtype=float)
        inc = float(self.inclusion()[mask_of(config)])
        return inc / float(np.prod(w[list(config)])) if config else inc

    def count_law(self) -> np.ndarray:
        """P(xi(Lambda) = k) for k = 0..n."""
        return np.bincount(_popcounts(self.n), weights=self.prob, minlength=self.n + 1)

    def expectation(self, fn) -> float:
        """E fn(config) by enumeration; fn receives a tuple of node indices."""
        return float(sum(p * fn(members(s)) for s, p in enumerate(self.prob) if p > 0))

    def to_dict(self) -> dict:
        width = max(1, (self.n + 3) // 4)
        return {
            "space": space_to_dict(self.space),
            "prob": {format(s, f"0{width}x"): float(p) for s, p in enumerate(self.prob)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "TabulatedProcess":
        space = space_from_dict(d["space"])
        p = np.zeros(1 << space.n)
        for k, v in d["prob"].items():
            p[int(k, 16)] = v
        return cls(space, p)

    def __repr__(self) -> str:
        return f"TabulatedProcess(n={self.n})"


def _finalize(space: GroundSpace, p: np.ndarray) -> TabulatedProcess:
    if np.min(p) < -CLIP_TOL:
        raise NotAValidDPP(f"subset probability {np.min(p):.3e} is negative")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > 1e-8:
        raise NotAValidDPP(f"subset probabilities sum to {total!r}")
    return TabulatedProcess(space, p / total)


def weighted_correlations(K: Kernel) -> np.ndarray:
    """c(T) = det K(T) prod_T w for every mask T."""
    n = K.n
    _check_size(n)
    c = np.empty(1 << n, dtype=complex if np.iscomplexobj(K.matrix) else float)
    c[0] = 1.0
    w = K.weights
    for s in range(1, 1 << n):
        idx = list(members(s))
        c[s] = np.linalg.det(K.matrix[np.ix_(idx, idx)]) * np.prod(w[idx])
    return c


def principal_minors(m: np.ndarray) -> np.ndarray:
    """det m(T) for every mask T, batched by subset size."""
    n = m.shape[0]
    _check_size(n)
    out = np.empty(1 << n, dtype=m.dtype)
    out[0] = 1.0
    for k in range(1, n + 1):
        combos = np.array(list(combinations(range(n), k)), dtype=int)
        masks = np.sum(1 << combos, axis=1)
        out[masks] = np.linalg.det(m[combos[:, :, None], combos[:, None, :]])
    return out


def from_kernel(K: Kernel, method: str = "mobius") -> TabulatedProcess:
    """Tabulate the DPP with kernel K.

    ``method="mobius"`` inverts the weighted correlations by inclusion-exclusion,
    P(S) = sum_{T >= S} (-1)^{|T \\ S|} det K(T) prod_T w.
    ``method="direct"`` uses P(S) = |det(A - I_{S^c})| with A = W^{1/2} K W^{1/2}.
    """
    n = K.n
    _check_size(n)
    if method == "mobius":
        p = _superset_mobius(weighted_correlations(K), n)
        if np.iscomplexobj(p):
            if np.max(np.abs(p.imag)) > 1e-9:
                raise NotAValidDPP("complex subset probabilities")
            p = p.real
        return _finalize(K.space, p)
    if method == "direct":
        s = np.sqrt(K.weights)
        a = s[:, None] * K.matrix * s[None, :]
        p = np.empty(1 << n)
        for S in range(1 << n):
            d = np.array([0.0 if (S >> i) & 1 else 1.0 for i in range(n)])
            val = np.linalg.det(a - np.diag(d))
            p[S] = abs(val)
        return _finalize(K.space, p)
    raise ValueError(f"unknown method {method!r}")


def poisson_tabulated(intensity, space: GroundSpace) -> TabulatedProcess:
    """Independent occupancy with p_i = rho_i w_i / (1 + rho_i w_i)."""
    _check_size(space.n)
    rho = np.asarray(space.evaluate(intensity), dtype=float)
    if np.any(rho < 0) or not np.all(np.isfinite(rho)):
        raise ValueError("intensity must be finite and non-negative")
    p = rho * space.weights / (1.0 + rho * space.weights)
    if np.any(p >= 1.0):
        raise ValueError("intensity too large for the grid")
    return bernoulli_tabulated(p, space)


def bernoulli_tabulated(p, space: GroundSpace) -> TabulatedProcess:
    """Independent occupancy with probabilities p_i."""
    p = np.asarray(p, dtype=float)
    table = np.ones(1 << space.n)
    masks = np.arange(1 << space.n)
    for i in range(space.n):
        table *= np.where(masks & (1 << i), p[i], 1.0 - p[i])
    return TabulatedProcess(space, table)


class MarkedProcess:
    """Exact joint law of (xi_0, xi_1) after independent theta-marking."""

    def __init__(self, tp: TabulatedProcess, theta):
        self.tp = tp
        self.theta = as_marking(theta, tp.space)

    @property
    def n(self) -> int:
        return self.tp.n

    def joint(self, zeros, ones) -> float:
        a, b = mask_of(zeros), mask_of(ones)
        if a & b:
            return 0.0
        th = self.theta
        return (self.tp.prob[a | b] * np.prod(th[list(members(b))])
                * np.prod(1.0 - th[list(members(a))]))

    def _law(self, mark: int) -> np.ndarray:
        th = self.theta if mark == 1 else 1.0 - self.theta
        out = _superset_sum(self.tp.prob, self.n, 1.0 - th)
        masks = np.arange(1 << self.n)
        for i in range(self.n):
            out = out * np.where(masks & (1 << i), th[i], 1.0)
        return out

    def ones_law(self) -> np.ndarray:
        """P(xi_1 = B) for every mask B."""
        return self._law(1)

    def zeros_law(self) -> np.ndarray:
        """P(xi_0 = A) for every mask A."""
        return self._law(0)

    def table(self) -> dict:
        """Every (A, B) pair with its probability, keyed by (mask A, mask B)."""
        _check_size(self.n, MAX_MARKED_NODES)
        out = {}
        for s, p in enumerate(self.tp.prob):
            sub = s
            while True:
                b = sub
                a = s ^ b
                out[(a, b)] = self.joint(members(a), members(b)) if p > 0 else 0.0
                if sub == 0:
                    break
                sub = (sub - 1) & s
        return out


def mark_exact(tp: TabulatedProcess, theta) -> MarkedProcess:
    return MarkedProcess(tp, theta)


def condition_exact(marked: MarkedProcess, v) -> TabulatedProcess:
    """Law of xi_0 given xi_1 = v, as a table on the same space."""
    n = marked.n
    v = as_configuration(v, n)
    vm = mask_of(v)
    th = marked.theta
    pv = float(marked.ones_law()[vm])
    if not pv > ZERO_OBS_TOL:
        raise ZeroProbabilityObservation(f"P(xi_1 = {v}) = {pv:.3e}")
    masks = np.arange(1 << n)
    free = (masks & vm) == 0
    table = np.where(free, marked.tp.prob[masks | vm], 0.0) * np.prod(th[list(v)])
    for i in range(n):
        table = table * np.where(masks & (1 << i), 1.0 - th[i], 1.0)
    return TabulatedProcess(marked.tp.space, table / table.sum())


def moments_exact(tp: TabulatedProcess, f=None, order: int | None = None):
    """Mean and variance of sum_{x in xi} f(x), plus factorial moments of xi(Lambda).

    Returns ``(mean, variance, factorial)`` with ``factorial[k] = E[xi(xi-1)...(xi-k+1)]``
    for k = 0..order (default n).
    """
    n = tp.n
    fv = np.ones(n) if f is None else np.asarray(tp.space.evaluate(f), dtype=float)
    masks = np.arange(1 << n)
    bits = ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    stat = bits @ fv
    mean = float(tp.prob @ stat)
    var = float(tp.prob @ (stat - mean) ** 2)
    counts = bits.sum(axis=1)
    order = n if order is None else order
    fact = [float(tp.prob @ np.prod(counts[:, None] - np.arange(k)[None, :], axis=1)) if k else 1.0
            for k in range(order + 1)]
    return mean, var, np.array(fact)


def janossy_series(K: Kernel, rho, x=()) -> float:
    """Alternating-series Janossy density, summed exhaustively over the finite space.

    j(x) = sum_{Y disjoint from x} (-1)^{|Y|} det K(x + Y) prod_Y rho w.
    Slow and cancellation prone; used only as a reference value.
    """
    n = K.n
    _check_size(n)
    rho = np.asarray(K.space.evaluate(rho), dtype=float)
    x = as_configuration(x, n)
    rw = rho * K.weights
    xm = mask_of(x)
    total = 0.0
    for y in range(1 << n):
        if y & xm:
            continue
        ym = members(y)
        idx = list(x) + list(ym)
        d = np.linalg.det(K.matrix[np.ix_(idx, idx)]) if idx else 1.0
        total += (-1) ** len(ym) * d * float(np.prod(rw[list(ym)]))
    return float(np.real(total))


def exact_conditional_correlation(tp: TabulatedProcess, theta, v, x) -> float:
    """Correlation of xi_0 given xi_1 = v, against (1 - theta) mu, by enumeration."""
    marked = mark_exact(tp, theta)
    cond = condition_exact(marked, v)
    th = marked.theta
    x = as_configuration(x, tp.n)
    if not x:
        return 1.0
    inc = float(cond.inclusion()[mask_of(x)])
    return inc / float(np.prod(((1.0 - th) * tp.space.weights)[list(x)]))
