"""Rescaled CUE kernel against the sine kernel on a window of the real line."""
from dppc import cli, experiments

cfg = cli.resolve_config("scaling", {})
summary, _ = experiments.run_scaling_limit(cfg)
for N, e in zip(cfg["ladder"], summary["errors"]):
    print(f"N={N:4d}  sup error {e:.3e}")
print("doubling ratios:", ", ".join(f"{r:.3f}" for r in summary["ratios"]))
print(f"fitted order: {summary['fitted_order']:.2f}")
