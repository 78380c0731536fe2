"""Command-line interface.

Exit codes: 0 on success, 2 when the data fail the admissibility checks,
1 on solver or other internal errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .experiments import (
    ExperimentConfig,
    StageError,
    admissibility_report,
    bundled_configs,
    compute_errors,
    forward_data,
    run_experiment,
)
from .frames import AdmissibilityError
from .grid import load_field_csv, save_field_csv

EXIT_OK, EXIT_INTERNAL, EXIT_ADMISSIBILITY = 0, 1, 2

_PIPELINE_OF = {"anisotropy": "anisotropy", "det-theta": "theta", "det-coupled": "coupled",
                "full": "full"}

log = logging.getLogger("anisopd")


def _load_config(args, pipeline: str | None = None) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if pipeline is not None:
        changes["pipeline"] = pipeline
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.grid is not None:
        changes["n"] = args.grid
    if args.out is not None:
        changes["out"] = args.out
    return cfg.replace(**changes) if changes else cfg


def _summary(report) -> str:
    lines = []
    for name, e in report.errors.items():
        ei = report.errors_interior[name]
        lines.append(
            f"{name:>22s}  L2 {e['rel_l2']:.4%}  Linf {e['rel_linf']:.4%}"
            f"  | interior L2 {ei['rel_l2']:.4%}  Linf {ei['rel_linf']:.4%}"
            f"  masked {report.masked[name]}"
        )
    return "\n".join(lines)


def cmd_run(args) -> int:
    cfg = _load_config(args, _PIPELINE_OF[args.command])
    report = run_experiment(cfg)
    print(_summary(report))
    if cfg.out:
        print(f"outputs written to {cfg.out}")
    ok = all(v.get("ok", True) for v in report.admissibility.values())
    if not ok:
        print("admissibility checks failed; see report", file=sys.stderr)
        return EXIT_ADMISSIBILITY
    return EXIT_OK


def cmd_forward(args) -> int:
    cfg = _load_config(args)
    c, us, H = forward_data(cfg)
    out = Path(cfg.out or "forward_out")
    H.save(out / "power_densities")
    for k, u in enumerate(us):
        save_field_csv(out / f"u{k + 1}.csv", u)
    for name, f in (("detsqrt", c.detsqrt), ("xi", c.xi), ("zeta", c.zeta)):
        save_field_csv(out / f"{name}.csv", f)
    print(f"{len(us)} solutions and power densities written to {out}")
    return EXIT_OK


def cmd_admissibility(args) -> int:
    cfg = _load_config(args)
    rep = admissibility_report(cfg)
    print(json.dumps(rep, indent=2, sort_keys=True))
    if cfg.out:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        (Path(cfg.out) / "admissibility.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if rep["ok"] else EXIT_ADMISSIBILITY


def cmd_errors(args) -> int:
    rec, truth = load_field_csv(args.rec), load_field_csv(args.truth)
    mask = load_field_csv(args.mask) != 0 if args.mask else np.isnan(rec)
    l2, linf = compute_errors(rec, truth, mask)
    print(json.dumps({"rel_l2": l2, "rel_linf": linf, "masked": int(mask.sum())}, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anisopd", description="Anisotropic power-density tomography experiments."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config path or bundled config name")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the noise seed")
        p.add_argument("--grid", type=int, help="override the grid size n")

    helps = {
        "forward": "solve the forward problem and export power densities",
        "anisotropy": "reconstruct (xi, zeta)",
        "det-theta": "reconstruct the determinant through the frame angle",
        "det-coupled": "reconstruct the determinant through the coupled system",
        "full": "reconstruct the anisotropy, then the determinant with it",
        "admissibility": "check positivity and non-vanishing conditions",
    }
    for name, text in helps.items():
        common(sub.add_parser(name, help=text))
    p = sub.add_parser("errors", help="relative errors between two field CSVs")
    p.add_argument("--rec", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--mask", help="CSV with nonzero entries at masked nodes (default: NaN in rec)")
    sub.add_parser("configs", help="list bundled configs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    handlers = {"forward": cmd_forward, "admissibility": cmd_admissibility, "errors": cmd_errors}
    try:
        if args.command == "configs":
            print("\n".join(bundled_configs()))
            return EXIT_OK
        return handlers.get(args.command, cmd_run)(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY if isinstance(exc.cause, AdmissibilityError) else EXIT_INTERNAL
    except AdmissibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY
    except Exception as exc:  # noqa: BLE001 - report and map to the internal-error code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
