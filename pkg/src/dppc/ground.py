"""Ground spaces, configurations and markings.

A ground space is a finite set of nodes with positive weights; it stands for
a measure space (Lambda, mu) either exactly (finite sets) or as a quadrature
rule (intervals, the unit circle).  Every integral operator in the package is
discretized against these weights, ``(K f)_i = sum_j K[i, j] w_j f_j``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError

FINITE = "finite-set"
INTERVAL = "real-interval"
CIRCLE = "unit-circle"
DOMAINS = (FINITE, INTERVAL, CIRCLE)

SCHEMES = {
    "gauss-legendre": INTERVAL,
    "trapezoid-circle": CIRCLE,
    "uniform-finite": FINITE,
}


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GroundSpace:
    """Nodes and positive quadrature weights.

    ``bounds`` is ``(a, b)`` for a real interval, ``(0, 2*pi)`` for the circle
    (nodes are angles) and ``None`` for a finite set.
    """

    nodes: np.ndarray
    weights: np.ndarray
    domain: str = FINITE
    bounds: tuple[float, float] | None = None

    def __post_init__(self):
        nodes = _frozen(self.nodes)
        weights = _frozen(self.weights)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise ValueError("nodes and weights must be 1-d arrays of equal length")
        if self.domain not in DOMAINS:
            raise DomainError(f"unknown domain tag {self.domain!r}")
        if np.any(~np.isfinite(weights)) or np.any(weights <= 0):
            raise ValueError("weights must be strictly positive")
        if nodes.size > 1 and np.any(np.diff(nodes) <= 0):
            raise ValueError("nodes must be distinct and sorted increasingly")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        if self.bounds is not None:
            object.__setattr__(self, "bounds", (float(self.bounds[0]), float(self.bounds[1])))

    def __len__(self) -> int:
        return self.nodes.size

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def points(self) -> np.ndarray:
        """Node positions as points of the plane: angles become e^{it}."""
        if self.domain == CIRCLE:
            return np.exp(1j * self.nodes)
        return self.nodes

    def integrate(self, f) -> complex | float:
        """Quadrature sum of f (callable on nodes or array of values)."""
        values = f(self.nodes) if callable(f) else np.asarray(f)
        return np.sum(values * self.weights)

    def with_weights(self, weights) -> "GroundSpace":
        return GroundSpace(self.nodes, weights, self.domain, self.bounds)

    def evaluate(self, f) -> np.ndarray:
        """Turn a callable or a scalar or an array into node values."""
        if callable(f):
            out = np.asarray(f(self.nodes))
        else:
            out = np.asarray(f)
        if out.ndim == 0:
            out = np.full(self.n, out.item())
        if out.shape != (self.n,):
            raise ValueError(f"expected {self.n} node values, got shape {out.shape}")
        return out

    def to_json(self) -> str:
        return json.dumps(space_to_dict(self))

    def __repr__(self) -> str:
        return f"GroundSpace(domain={self.domain!r}, n={self.n}, bounds={self.bounds})"


def space_to_dict(space: GroundSpace) -> dict:
    # json writes floats with repr(), which round-trips doubles exactly
    return {
        "domain": space.domain,
        "bounds": list(space.bounds) if space.bounds is not None else None,
        "nodes": [float(x) for x in space.nodes],
        "weights": [float(x) for x in space.weights],
    }


def space_from_dict(d: dict) -> GroundSpace:
    bounds = d.get("bounds")
    return GroundSpace(
        np.array(d["nodes"], dtype=float),
        np.array(d["weights"], dtype=float),
        d.get("domain", FINITE),
        tuple(bounds) if bounds is not None else None,
    )


def space_from_json(text: str) -> GroundSpace:
    return space_from_dict(json.loads(text))


def discretize(domain: str, n: int, scheme: str | None = None,
               bounds: tuple[float, float] = (-1.0, 1.0)) -> GroundSpace:
    """Quadrature discretization of a domain.

    Parameters
    ----------
    domain : {"real-interval", "unit-circle", "finite-set"}
    n : int
        Number of nodes.
    scheme : {"gauss-legendre", "trapezoid-circle", "uniform-finite"}, optional
        Defaults to the natural scheme of the domain.
    bounds : (a, b)
        Interval end points; ignored for the other domains.

    Gauss-Legendre with n nodes is exact for polynomials of degree <= 2n-1;
    the circle trapezoid rule has weights 2*pi/n at angles 2*pi*k/n and is exact
    for trigonometric polynomials of degree < n.  The uniform finite scheme
    is the set {0, ..., n-1} with unit weights.
    """
    if scheme is None:
        scheme = {v: k for k, v in SCHEMES.items()}.get(domain)
    if scheme not in SCHEMES:
        raise DomainError(f"unknown scheme {scheme!r}")
    if SCHEMES[scheme] != domain:
        raise DomainError(f"scheme {scheme!r} does not apply to domain {domain!r}")
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    n = int(n)

    if scheme == "gauss-legendre":
        a, b = float(bounds[0]), float(bounds[1])
        if not b > a:
            raise ValueError("interval bounds must satisfy a < b")
        x, w = np.polynomial.legendre.leggauss(n)
        half = 0.5 * (b - a)
        return GroundSpace(half * x + 0.5 * (a + b), half * w, INTERVAL, (a, b))
    if scheme == "trapezoid-circle":
        t = 2.0 * np.pi * np.arange(n) / n
        return GroundSpace(t, np.full(n, 2.0 * np.pi / n), CIRCLE, (0.0, 2.0 * np.pi))
    return GroundSpace(np.arange(n, dtype=float), np.ones(n), FINITE)


def finite_space(nodes: Sequence[float] | int, weights=None) -> GroundSpace:
    """A finite ground set; ``nodes`` may be a count."""
    if np.isscalar(nodes):
        nodes = np.arange(int(nodes), dtype=float)
    nodes = np.asarray(nodes, dtype=float)
    if weights is None:
        weights = np.ones(nodes.size)
    return GroundSpace(nodes, weights, FINITE)


def restrict(space: GroundSpace, predicate) -> tuple[GroundSpace | None, np.ndarray]:
    """Sub-space on the nodes selected by ``predicate``.

    ``predicate`` is either a callable evaluated on the node array (angles
    for the circle) or a boolean mask.  Returns ``(subspace, index_map)``
    where ``index_map[k]`` is the parent index of the k-th retained node.  An
    empty selection gives an empty space.
    """
    if callable(predicate):
        mask = np.asarray(predicate(space.nodes), dtype=bool)
    else:
        mask = np.asarray(predicate, dtype=bool)
    if mask.shape != (space.n,):
        raise ValueError("predicate must select over all nodes")
    idx = np.flatnonzero(mask)
    sub = GroundSpace(space.nodes[idx], space.weights[idx], space.domain, space.bounds)
    return sub, idx


# -- configurations and markings ------------------------------------------------

Configuration = tuple


def as_configuration(indices: Iterable[int], n: int | None = None) -> tuple[int, ...]:
    """Validate a simple configuration and return it sorted.

    Raises ValueError on repeated or out-of-range indices.
    """
    idx = [int(i) for i in indices]
    if len(set(idx)) != len(idx):
        raise ValueError(f"configuration has repeated points: {idx}")
    if n is not None and any(i < 0 or i >= n for i in idx):
        raise ValueError(f"configuration index out of range for {n} nodes: {idx}")
    return tuple(sorted(idx))


def as_marking(theta, space: GroundSpace) -> np.ndarray:
    """Node values of a marking function, checked to lie in [0, 1]."""
    t = np.asarray(space.evaluate(theta), dtype=float)
    if np.any(t < 0) or np.any(t > 1) or np.any(~np.isfinite(t)):
        raise ValueError("marking values must lie in [0, 1]")
    t = t.copy()
    t.setflags(write=False)
    return t


@dataclass(frozen=True)
class MarkedConfiguration:
    """A configuration split into unobserved (mark 0) and observed (mark 1) points."""

    zeros: tuple[int, ...] = ()
    ones: tuple[int, ...] = ()

    def __post_init__(self):
        zeros = as_configuration(self.zeros)
        ones = as_configuration(self.ones)
        if set(zeros) & set(ones):
            raise ValueError("mark-0 and mark-1 points must be disjoint")
        object.__setattr__(self, "zeros", zeros)
        object.__setattr__(self, "ones", ones)

    @property
    def ground(self) -> tuple[int, ...]:
        return tuple(sorted(self.zeros + self.ones))


def thinned_weights(space: GroundSpace, theta, mark: int) -> np.ndarray:
    """Weights of mu_b^theta: theta*w for mark 1, (1 - theta)*w for mark 0."""
    t = as_marking(theta, space)
    if mark == 1:
        return t * space.weights
    if mark == 0:
        return (1.0 - t) * space.weights
    raise ValueError("mark must be 0 or 1")
