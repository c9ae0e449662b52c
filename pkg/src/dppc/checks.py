"""Small verification runs behind the CLI verbs condition, fredholm, sample,
integrable-check and oracle-check.

Same contract as :mod:`dppc.experiments`: each ``run_*`` takes a validated
config dict and returns ``(summary, rows)``.
"""
from __future__ import annotations

import numpy as np

from .conditioning import (conditional_kernel, fredholm_det, mark1_count_distribution,
                           palm_matrix)
from .errors import DPPError
from .experiments import _assert, build_kernel, build_marking, build_space, eval_expression
from .ground import finite_space
from .integrable import (cd_integrable, dressed_kernel, dressing, jump_residuals,
                         palm_update, sine_integrable)
from .kernels import linear_statistic_moments, ope_kernel, random_hermitian_kernel
from .oracle import (MAX_MARKED_NODES, condition_exact, from_kernel, mark_exact, members,
                     principal_minors)
from .sampler import estimate, mark_sample, sample_dpp


def _observed_indices(cfg: dict, space) -> list[int]:
    if "observed" in cfg:
        return sorted(set(int(i) for i in cfg["observed"]))
    x = space.nodes
    return sorted(set(int(np.argmin(np.abs(x - p))) for p in cfg.get("observed_points", [])))


# -- oracle comparison -------------------------------------------------------------------

def conditional_correlation_gap(K, theta, v_mask: int, tp=None) -> tuple[float, float]:
    """Worst gap between kernel-route and enumerated conditional correlations.

    Returns (relative gap with floor 1, absolute gap) over every finite
    configuration of unobserved nodes.
    """
    n = K.n
    tp = from_kernel(K) if tp is None else tp
    v = members(v_mask)
    ck = conditional_kernel(K, theta, v, check_projection=False)
    exact_inc = condition_exact(mark_exact(tp, theta), v).inclusion()
    ref_w = (1.0 - theta) * K.weights
    masks = np.arange(1 << n)
    bits = (masks[:, None] >> np.arange(n)[None, :]) & 1
    denom = np.prod(np.where(bits == 1, ref_w[None, :], 1.0), axis=1)
    allowed = ((masks & v_mask) == 0) & np.all((bits == 0) | (ref_w[None, :] > 0), axis=1)
    exact = np.where(allowed, exact_inc / np.where(denom > 0, denom, 1.0), 0.0)
    route = np.real(principal_minors(ck.full))
    diff = np.abs(route - exact)[allowed]
    rel = diff / np.maximum(1.0, np.abs(exact[allowed]))
    return float(rel.max()), float(diff.max())


def run_oracle_check(cfg: dict):
    """Random hermitian kernels on tiny grids: kernel route vs exhaustive enumeration."""
    rng = np.random.default_rng(cfg["seed"])
    lo, hi = cfg["weight_range"]
    rows = []
    worst_rel = worst_abs = 0.0
    for k in range(cfg["kernels"]):
        n = int(rng.integers(cfg["min_nodes"], cfg["max_nodes"] + 1))
        space = finite_space(n, rng.uniform(lo, hi, n))
        K = random_hermitian_kernel(space, rng, complex_=bool(rng.integers(2)))
        theta = rng.uniform(0.0, cfg["theta_max"], n)
        tp = from_kernel(K)
        law = mark_exact(tp, theta).ones_law()
        for vm in np.flatnonzero(law > cfg["min_probability"]):
            row = {"kernel": k, "nodes": n, "observed": " ".join(map(str, members(int(vm)))),
                   "probability": float(law[vm]), "error": ""}
            try:
                rel, ab = conditional_correlation_gap(K, theta, int(vm), tp)
                row.update(relative_gap=rel, absolute_gap=ab)
                worst_rel, worst_abs = max(worst_rel, rel), max(worst_abs, ab)
            except DPPError as exc:
                row["error"] = f"{type(exc).__name__}: {exc}"
            rows.append(row)
    failed = sum(1 for r in rows if r["error"])
    tol = cfg["tolerance"]
    summary = {
        "kernels": cfg["kernels"],
        "observations": len(rows),
        "failed_observations": failed,
        "max_relative_gap": worst_rel,
        "max_absolute_gap": worst_abs,
        "assertions": {
            "correlations": _assert(worst_rel, tol, worst_rel <= tol),
            "no_failures": _assert(failed, 0, failed == 0),
        },
    }
    return summary, rows


# -- single conditioning -------------------------------------------------------------------

def run_condition(cfg: dict):
    """Conditional kernel for one observation; optional enumeration cross-check on tiny grids."""
    space = build_space(cfg["space"])
    K = build_kernel(cfg["kernel"], space)
    theta = build_marking(cfg["marking"], space)
    v = _observed_indices(cfg, space)
    ck = conditional_kernel(K, theta, v, check_projection=False)
    diag = np.real(np.diag(ck.full))
    rows = [{"index": i, "x": float(x), "theta": float(theta[i]),
             "palm_intensity": float(np.real(ck.palm.kernel.matrix[i, i])),
             "conditional_intensity": float(diag[i]) if theta[i] < 1 else 0.0}
            for i, x in enumerate(space.nodes)]
    count_law = mark1_count_distribution(K, theta)
    trace = float(np.real(np.sum(diag * (1.0 - theta) * K.weights)))
    summary = {
        "observed": list(ck.points),
        "observed_x": [float(space.nodes[i]) for i in ck.points],
        "resolvent_det": float(np.real(ck.resolvent_det)),
        "conditional_trace": trace,
        "unconditioned_trace": float(K.trace()),
        "probability_of_count": float(np.real(count_law[len(v)])) if len(v) < count_law.size else 0.0,
        "assertions": {},
    }
    if cfg.get("oracle", True) and space.n <= MAX_MARKED_NODES and K.hermitian:
        vm = sum(1 << i for i in v)
        rel, ab = conditional_correlation_gap(K, theta, vm)
        summary["oracle_relative_gap"] = rel
        summary["assertions"]["oracle"] = _assert(rel, cfg["tolerance"], rel <= cfg["tolerance"])
    return summary, rows


# -- Fredholm determinant stability ---------------------------------------------------------

def run_fredholm(cfg: dict):
    """det(1 - sqrt(phi) K sqrt(phi)) over a ladder of node counts."""
    rows = []
    for n in cfg["ladder"]:
        spec = dict(cfg["space"], n=n)
        space = build_space(spec)
        K = build_kernel(cfg["kernel"], space)
        phi = build_marking(cfg["phi"], space)
        rows.append({"nodes": n, "det": float(np.real(fredholm_det(K, phi)))})
    dets = [r["det"] for r in rows]
    gaps = [abs(a - b) / max(abs(b), np.finfo(float).tiny) for a, b in zip(dets, dets[1:])]
    for r, g in zip(rows[1:], gaps):
        r["relative_change"] = g
    tol = 10.0 ** -cfg["significant_digits"]
    worst = max(gaps) if gaps else 0.0
    summary = {"dets": dets, "relative_changes": gaps,
               "assertions": {"stability": _assert(worst, tol, worst <= tol)}}
    return summary, rows


# -- sampling -------------------------------------------------------------------------------

def run_sample(cfg: dict):
    """Exact samples, optionally marked; checks the mean count against the trace."""
    space = build_space(cfg["space"])
    K = build_kernel(cfg["kernel"], space)
    batch = sample_dpp(K, cfg["seed"], cfg["count"])
    if "marking" in cfg:
        batch = mark_sample(batch, build_marking(cfg["marking"], space), cfg["seed"])
    mean, se = estimate(batch, "count")
    expected, var = linear_statistic_moments(K, np.ones(space.n))
    z = abs(mean - expected) / se if se > 0 else (0.0 if mean == expected else np.inf)
    k = cfg["z_max"]
    summary = {"count": cfg["count"], "mean_points": mean, "stderr": se,
               "expected_points": expected, "expected_variance": var,
               "assertions": {"mean_count": _assert(float(z), k, z <= k)}}
    return summary, batch


# -- integrable dressing suite ------------------------------------------------------------

def _integrable_from_cfg(cfg: dict):
    space = build_space(cfg["space"])
    kind = cfg["kernel"]
    if isinstance(kind, str) and kind == "sine":
        return sine_integrable(space)
    spec = kind if isinstance(kind, dict) else {"type": kind.split(":")[0], "N": int(kind.split(":")[1])}
    if spec["type"] != "cd":
        raise ValueError(f"integrable-check supports sine and cd kernels, got {spec['type']!r}")
    w = eval_expression(spec.get("weight", "exp(-x**2)"), space.nodes)
    return cd_integrable(ope_kernel(w, spec["N"], space))


def _constraint(f, g) -> float:
    """max_x |f(x)^T g(x)| / (|f(x)| |g(x)|), floored at scale 1."""
    scale = np.maximum(1.0, np.linalg.norm(f, axis=0) * np.linalg.norm(g, axis=0))
    return float(np.max(np.abs(np.sum(f * g, axis=0)) / scale))


def integrable_residuals(ik, v, theta, probes) -> dict:
    """Every identity of the dressing suite for one observation v."""
    scale = max(1.0, float(np.max(np.abs(ik.matrix()))))
    ikv = palm_update(ik, v)
    out = {"constraint": _constraint(ik.f, ik.g), "palm_constraint": _constraint(ikv.f, ikv.g)}
    r = dressing(ik, v)
    out["nilpotent"] = max((float(np.max(np.abs(R @ R))) / max(1.0, float(np.max(np.abs(R)))) ** 2
                            for R in r.residues), default=0.0)
    out["det_R"] = max(float(abs(np.linalg.det(r.closed(z)) - 1.0)) for z in probes)
    out["product_vs_closed"] = max(float(np.max(np.abs(r.product(z) - r.closed(z)))) for z in probes)
    ref, _ = palm_matrix(ik.matrix(), v, weights=ik.space.weights)
    out["palm_update_vs_matrix"] = float(np.max(np.abs(ikv.matrix() - ref))) / scale
    out["jump_conjugation"] = jump_residuals(ik, theta, v)["conjugation"]
    dk = dressed_kernel(ik, v, np.eye(ik.k))
    ref = ikv.matrix()
    if not np.iscomplexobj(dk.matrix):
        ref = ref.real
    out["dressed_identity_exact"] = bool(np.array_equal(dk.matrix, ref))
    return out


def run_integrable_check(cfg: dict):
    ik = _integrable_from_cfg(cfg)
    theta = build_marking(cfg["marking"], ik.space)
    x = ik.nodes
    probes = [complex(z) for z in np.linspace(x.min(), x.max(), 5)[1:-1] + 0.25j]
    probes += [complex(x.mean() + 1e-3), complex(x.max() + 1.0)]
    tols = cfg["tolerances"]
    rows = []
    worst: dict = {}
    for v in cfg["observed"]:
        row = {"observed": " ".join(map(str, v)), "error": ""}
        try:
            res = integrable_residuals(ik, list(v), theta, probes)
            row.update(res)
            for key, val in res.items():
                if key == "dressed_identity_exact":
                    worst[key] = worst.get(key, True) and val
                else:
                    worst[key] = max(worst.get(key, 0.0), val)
        except DPPError as exc:
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    assertions = {key: _assert(worst.get(key, np.inf), tol, worst.get(key, np.inf) <= tol)
                  for key, tol in tols.items()}
    ok = worst.get("dressed_identity_exact", False)
    assertions["dressed_identity_exact"] = _assert(ok, True, ok)
    failed = sum(1 for r in rows if r["error"])
    assertions["no_failures"] = _assert(failed, 0, failed == 0)
    summary = {"k": ik.k, "nodes": ik.space.n, "worst": worst, "assertions": assertions}
    return summary, rows
