"""d/dt log det(1 - theta_t K) against the trace formula along a marking path."""
from dppc import cli, experiments

cfg = cli.resolve_config("jacobi", {})
summary, rows = experiments.run_jacobi(cfg)
for r in rows[::4]:
    print({k: round(v, 10) if isinstance(v, float) else v for k, v in r.items()})
print(f"max |lhs - rhs| = {summary['max_abs_diff']:.2e}")
