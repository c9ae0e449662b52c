"""``dppc <verb> --config cfg.json --out dir/``

Each verb validates its config against ``schemas/<verb>.json`` (filling in
defaults), runs, and writes ``<verb>.csv`` plus ``summary.json`` into the
output directory.  The summary echoes the resolved config and the library
version; there are no timestamps, so identical configs give identical files.
Exit status is 0 iff every assertion in the summary passes, 1 if one fails
and 2 for invalid configs or numerical errors that abort the run.
"""
from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from importlib import resources

import jsonschema
import numpy as np

from . import __version__
from .errors import DPPError

log = logging.getLogger("dppc")


def _runner(verb: str):
    from . import checks, experiments
    return {
        "rigidity": experiments.run_rigidity,
        "gue-deform": experiments.run_gue_deformation,
        "scaling": experiments.run_scaling_limit,
        "jacobi": experiments.run_jacobi,
        "condition": checks.run_condition,
        "fredholm": checks.run_fredholm,
        "sample": checks.run_sample,
        "integrable-check": checks.run_integrable_check,
        "oracle-check": checks.run_oracle_check,
    }[verb]


VERBS = ("rigidity", "gue-deform", "scaling", "jacobi", "condition", "fredholm", "sample",
         "integrable-check", "oracle-check")


def load_schema(verb: str) -> dict:
    text = resources.files("dppc").joinpath("schemas", f"{verb}.json").read_text()
    return json.loads(text)


def _with_defaults(cls):
    # jsonschema's documented recipe for filling defaults during validation
    validate_props = cls.VALIDATORS["properties"]

    def set_defaults(validator, properties, instance, schema):
        if isinstance(instance, dict):
            for name, sub in properties.items():
                if "default" in sub and name not in instance:
                    instance[name] = copy.deepcopy(sub["default"])
        yield from validate_props(validator, properties, instance, schema)

    return jsonschema.validators.extend(cls, {"properties": set_defaults})


_Validator = _with_defaults(jsonschema.Draft202012Validator)


def resolve_config(verb: str, config: dict) -> dict:
    """Validate ``config`` for ``verb`` and return a copy with defaults filled in."""
    cfg = copy.deepcopy(config)
    _Validator(load_schema(verb)).validate(cfg)
    return cfg


def _plain(obj):
    """JSON-safe copy: numpy scalars and arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, complex):
        return [_plain(obj.real), _plain(obj.imag)]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def rows_to_csv(rows: list[dict]) -> str:
    fields: list[str] = []
    for r in rows:
        fields += [k for k in r if k not in fields]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in _plain(r).items()})
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def all_pass(summary: dict) -> bool:
    return all(a["pass"] for a in summary.get("assertions", {}).values())


def run(verb: str, config: dict, out_dir: str | None = None) -> dict:
    """Run one verb; returns the report (and writes files when ``out_dir`` is given)."""
    cfg = resolve_config(verb, config)
    summary, data = _runner(verb)(cfg)
    report = _plain({"verb": verb, "version": __version__, "config": cfg,
                     "summary": summary, "pass": all_pass(summary)})
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        text = data.to_csv() if hasattr(data, "to_csv") else rows_to_csv(data)
        write_atomic(os.path.join(out_dir, f"{verb}.csv"), text)
        write_atomic(os.path.join(out_dir, "summary.json"),
                     json.dumps(report, indent=2, sort_keys=True) + "\n")
        log.info("wrote %s", out_dir)
    return report


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dppc", description=__doc__.splitlines()[0])
    parser.add_argument("verb", choices=VERBS)
    parser.add_argument("--config", help="JSON config file (defaults are used when omitted)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=f"dppc {__version__}")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    config = {}
    if args.config:
        with open(args.config) as fh:
            config = json.load(fh)
    try:
        report = run(args.verb, config, args.out)
    except jsonschema.ValidationError as exc:
        print(f"dppc: invalid config: {exc.message}", file=sys.stderr)
        return 2
    except (DPPError, ValueError) as exc:
        print(f"dppc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    for name, a in report["summary"].get("assertions", {}).items():
        status = "PASS" if a["pass"] else "FAIL"
        print(f"{status} {name}: value={a['value']} threshold={a['threshold']}")
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
