"""Thinning the Gaussian ensemble turns it into an ensemble with a quartic potential."""
from dppc import cli, experiments

for N in (2, 4, 8):
    cfg = cli.resolve_config("gue-deform", {"N": N})
    summary, _ = experiments.run_gue_deformation(cfg)
    worst = max(a["value"] for a in summary["assertions"].values())
    print(f"N={N:2d}  max deviation from the exp(-N V) OPE kernel: {worst:.2e}")
