"""Exact sampling of hermitian DPPs on a grid, marking, and Monte Carlo estimators.

Randomness comes from the counter-based Philox4x64 generator keyed by
``(seed, purpose)``.  Sample ``i`` of a batch reads the fixed word range
``[i W, (i + 1) W)`` of its stream, so any sample can be regenerated on its
own and the batch does not depend on how the work is chunked.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import EigenvalueOutOfRange
from .ground import MarkedConfiguration, as_marking
from .kernels import Kernel

DPP_STREAM = 0
MARK_STREAM = 1
MOMENT_STREAM = 2
EIG_CLIP = 1e-8
CHUNK_BYTES = 64 * 2 ** 20


def philox_uniforms(seed: int, purpose: int, start: int, count: int) -> np.ndarray:
    """Uniform doubles in [0, 1) from words [start, start + count) of the (seed, purpose) stream."""
    bg = np.random.Philox(key=np.array([seed & (2 ** 64 - 1), purpose], dtype=np.uint64))
    bg.advance(start // 4)
    skip = start % 4
    raw = bg.random_raw(count + skip)[skip:]
    return (raw >> np.uint64(11)).astype(float) * 2.0 ** -53


def _words(n: int) -> int:
    return -(-n // 4) * 4


def _sample_uniforms(seed, purpose, first, count, width) -> np.ndarray:
    return philox_uniforms(seed, purpose, first * width, count * width).reshape(count, width)


@dataclass
class SampleBatch:
    """Configurations (node index tuples, or marked pairs) with their provenance."""

    configurations: list
    seed: int
    count: int
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.configurations)

    @property
    def marked(self) -> bool:
        return bool(self.configurations) and isinstance(self.configurations[0], MarkedConfiguration)

    def counts(self) -> np.ndarray:
        if self.marked:
            return np.array([len(c.zeros) + len(c.ones) for c in self.configurations])
        return np.array([len(c) for c in self.configurations])

    def header(self) -> dict:
        return {"seed": int(self.seed), "count": int(self.count), "params": self.params}

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# " + json.dumps(self.header(), sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        if self.marked:
            w.writerow(["index", "zeros", "ones"])
            for i, c in enumerate(self.configurations):
                w.writerow([i, " ".join(map(str, c.zeros)), " ".join(map(str, c.ones))])
        else:
            w.writerow(["index", "points"])
            for i, c in enumerate(self.configurations):
                w.writerow([i, " ".join(map(str, c))])
        return buf.getvalue()

    def to_json(self) -> str:
        if self.marked:
            data = [{"zeros": list(c.zeros), "ones": list(c.ones)} for c in self.configurations]
        else:
            data = [list(c) for c in self.configurations]
        return json.dumps({"header": self.header(), "configurations": data}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SampleBatch":
        d = json.loads(text)
        confs = d["configurations"]
        if confs and isinstance(confs[0], dict):
            confs = [MarkedConfiguration(tuple(c["zeros"]), tuple(c["ones"])) for c in confs]
        else:
            confs = [tuple(c) for c in confs]
        h = d["header"]
        return cls(confs, h["seed"], h["count"], h.get("params", {}))


def spectrum(K: Kernel) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of W^{1/2} K W^{1/2}, eigenvalues clipped to [0, 1] within the window."""
    if not K.hermitian:
        raise ValueError("spectral sampling needs a hermitian kernel")
    lam, vec = np.linalg.eigh(K.symmetrized())
    if lam.size and (lam.min() < -EIG_CLIP or lam.max() > 1 + EIG_CLIP):
        raise EigenvalueOutOfRange(f"eigenvalues span [{lam.min():.3e}, {lam.max():.3e}]")
    return np.clip(lam, 0.0, 1.0), vec


def _projection_samples(V: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Sample projection DPPs for a stack of orthonormal bases V (B, n, k).

    u has shape (B, k): one uniform per point.  Returns indices (B, k).
    """
    B, n, k = V.shape
    out = np.empty((B, k), dtype=int)
    rows = np.arange(B)
    for s in range(k):
        r = k - s
        p = np.sum(np.abs(V) ** 2, axis=2)
        cdf = np.cumsum(p, axis=1)
        j = np.argmax(cdf > (u[:, s] * cdf[:, -1])[:, None], axis=1)
        out[:, s] = j
        if r == 1:
            break
        vj = V[rows, j, :]                          # (B, r)
        c = np.argmax(np.abs(vj), axis=1)
        pivot = V[rows, :, c]                       # (B, n)
        scale = vj / vj[rows, c][:, None]           # (B, r)
        V = V - pivot[:, :, None] * scale[:, None, :]
        cols = np.arange(r - 1)[None, :]
        cols = cols + (cols >= c[:, None])
        V = np.take_along_axis(V, np.broadcast_to(cols[:, None, :], (B, n, r - 1)), axis=2)
        V, _ = np.linalg.qr(V)
    return out


def sample_dpp(K: Kernel, seed: int, count: int, eig=None) -> SampleBatch:
    """Exact samples of the DPP with hermitian kernel K by the spectral algorithm.

    Eigenvectors of W^{1/2} K W^{1/2} are kept independently with probability
    equal to their eigenvalue; the resulting projection DPP is sampled point
    by point from its conditional intensities.
    """
    lam, vec = spectrum(K) if eig is None else eig
    n = K.n
    width = _words(2 * n)
    confs: list = [None] * count
    if n == 0:
        return SampleBatch([()] * count, seed, count, {"algorithm": "spectral", "nodes": 0})
    itemsize = 16 if np.iscomplexobj(vec) else 8
    start = 0
    while start < count:
        stop = min(count, start + max(1, CHUNK_BYTES // max(1, n * n * itemsize)))
        u = _sample_uniforms(seed, DPP_STREAM, start, stop - start, width)
        chosen = u[:, :n] < lam[None, :]
        ks = chosen.sum(axis=1)
        for k in np.unique(ks):
            members_ = np.flatnonzero(ks == k)
            if k == 0:
                for b in members_:
                    confs[start + b] = ()
                continue
            V = np.stack([vec[:, chosen[b]] for b in members_])
            idx = _projection_samples(V, u[members_, n:n + k])
            for b, row in zip(members_, idx):
                confs[start + b] = tuple(sorted(int(i) for i in row))
        start = stop
    return SampleBatch(confs, seed, count, {"algorithm": "spectral", "nodes": n})


def mark_sample(batch: SampleBatch, theta, seed: int, space=None) -> SampleBatch:
    """Independently give each point mark 1 with probability theta(x).

    ``theta`` is an array of node values, a constant, or anything
    ``as_marking`` accepts when ``space`` is given.  Node i of sample j uses word i of the j-th
    block of the marking stream.
    """
    if space is not None:
        th = as_marking(theta, space)
    else:
        th = np.asarray(theta, dtype=float)
        if th.ndim == 0:
            th = np.full(int(batch.params["nodes"]), float(th))
        if np.any(th < 0) or np.any(th > 1):
            raise ValueError("marking values must lie in [0, 1]")
    width = _words(th.size)
    u = _sample_uniforms(seed, MARK_STREAM, 0, len(batch), width)
    out = []
    for j, c in enumerate(batch.configurations):
        ones = tuple(i for i in c if u[j, i] < th[i])
        zeros = tuple(i for i in c if not u[j, i] < th[i])
        out.append(MarkedConfiguration(zeros, ones))
    params = dict(batch.params, mark_seed=int(seed))
    return SampleBatch(out, batch.seed, batch.count, params)


def sample_conditional(K: Kernel, theta, v, seed: int, count: int) -> SampleBatch:
    """Samples of the unobserved points given xi_1 = v, from the symmetrized conditional kernel."""
    from .conditioning import conditional_kernel
    ck = conditional_kernel(K, theta, v, check_projection=False)
    if ck.symmetrized is None:
        raise ValueError("conditional sampling needs a hermitian kernel")
    batch = sample_dpp(ck.symmetrized, seed, count)
    batch.params.update({"observed": list(ck.points)})
    return batch


def jackknife(values: np.ndarray) -> tuple[float, float]:
    """Mean and leave-one-out jackknife standard error."""
    x = np.asarray(values, dtype=float)
    n = x.size
    if n == 0:
        raise ValueError("empty batch")
    mean = float(x.mean())
    if n == 1:
        return mean, float("nan")
    loo = (x.sum() - x) / (n - 1)
    return mean, float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def statistic_values(batch: SampleBatch, statistic: str, f=None) -> np.ndarray:
    """Per-sample values of ``count``, ``linear`` (sum f) or ``multiplicative`` (prod 1 - f)."""
    confs = batch.configurations
    if batch.marked:
        confs = [c.ground for c in confs]
    if statistic == "count":
        return np.array([len(c) for c in confs], dtype=float)
    fv = np.asarray(f)
    if statistic == "linear":
        return np.array([float(np.sum(fv[list(c)])) for c in confs])
    if statistic == "multiplicative":
        return np.array([float(np.prod(1.0 - fv[list(c)])) for c in confs])
    raise ValueError(f"unknown statistic {statistic!r}")


def estimate(batch: SampleBatch, statistic: str = "count", f=None) -> tuple[float, float]:
    """Monte Carlo mean of a statistic with its jackknife standard error."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    return jackknife(statistic_values(batch, statistic, f))


def subset_frequencies(batch: SampleBatch, n: int) -> np.ndarray:
    """Counts of each subset (by bitmask) in a batch over n nodes."""
    masks = np.array([sum(1 << i for i in c) for c in batch.configurations], dtype=np.int64)
    return np.bincount(masks, minlength=1 << n)
