"""Command-line front end: ``swm simulate|fit|select|evaluate|export-heatmap``.

Exit status is 0 on success, 1 on a numerical or convergence failure and
2 on invalid input.  ``SWM_LOG`` (error, warn, info, debug) sets verbosity.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .covglasso import PenaltySpec
from .em import FitConfig, fit_em
from .errors import DimMismatch, NotPositiveDefinite, NumericalFailure, SparseWishartError, ValidationError
from .metrics import adjusted_rand_index, f1_support, frobenius_distance, match_clusters
from .select import SelectionGrid, auto_lambda_grid, grid_search
from .simulate import SimSpec, sample_mixture

logger = logging.getLogger("sparsewishart")

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}

SIM_KEYS = {"preset", "n", "p", "K", "tau", "dofs", "sigma_specs", "seed", "layout"}


def _setup_logging() -> None:
    level = LOG_LEVELS.get(os.environ.get("SWM_LOG", "warn").strip().lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _read_json(path) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"{path}: no such file") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    return obj


def sim_spec_from_dict(obj: dict, seed: int | None = None) -> tuple[SimSpec, str]:
    unknown = sorted(set(obj) - SIM_KEYS)
    if unknown:
        raise ValidationError(f"unknown simulation keys: {', '.join(unknown)}")
    layout = obj.get("layout", "per-matrix")
    if obj.get("preset") == "replica":
        base = SimSpec.replica_design(seed=int(obj.get("seed", 0)), n=int(obj.get("n", 200)), p=int(obj.get("p", 25)))
        fields = {k: obj[k] for k in ("K", "tau", "dofs", "sigma_specs") if k in obj}
        for k, v in fields.items():
            setattr(base, k, v)
        spec = base
    elif "preset" in obj:
        raise ValidationError(f"unknown preset {obj['preset']!r}")
    else:
        missing = [k for k in ("n", "p", "K", "tau", "dofs", "sigma_specs") if k not in obj]
        if missing:
            raise ValidationError(f"simulation spec is missing: {', '.join(missing)}")
        try:
            spec = SimSpec(
                n=int(obj["n"]), p=int(obj["p"]), K=int(obj["K"]),
                tau=list(obj["tau"]), dofs=[float(v) for v in obj["dofs"]],
                sigma_specs=list(obj["sigma_specs"]), seed=int(obj.get("seed", 0)),
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"malformed simulation spec: {exc}") from exc
    if seed is not None:
        spec.seed = int(seed)
    spec.validate()
    return spec, layout


def cmd_simulate(args) -> int:
    if not args.config:
        raise ValidationError("simulate needs --config <spec.json>")
    if not args.out:
        raise ValidationError("simulate needs --out <dir>")
    spec, layout = sim_spec_from_dict(_read_json(args.config), args.seed)
    data, labels, params = sample_mixture(spec)
    out = io.save_dataset(data, args.out, layout)
    spec_record = {
        "n": spec.n, "p": spec.p, "K": spec.K, "tau": list(map(float, spec.tau)),
        "dofs": list(map(float, spec.dofs)), "sigma_specs": spec.sigma_specs, "seed": spec.seed,
    }
    io.write_truth(out / "truth.json", labels, params, spec.seed, spec_record)
    logger.info("wrote %d matrices to %s", data.n, out)
    return 0


def _fit_config(cfg: dict) -> FitConfig:
    return FitConfig(epsilon=cfg["epsilon"], max_iter=cfg["max_iter"], restarts=cfg["restarts"], seed=cfg["seed"])


def _load_run(args, overrides: dict):
    if not args.data:
        raise ValidationError(f"{args.command} needs --data <dir>")
    cfg = io.load_config(args.config, overrides)
    data = io.load_dataset(args.data)
    base = Path(args.config).parent if args.config else None
    weights, pid = io.resolve_penalty(cfg["penalty"], data.p, base)
    return cfg, data, weights, pid


def cmd_fit(args) -> int:
    overrides = {
        "seed": args.seed, "restarts": args.restarts, "penalty": args.penalty,
        "k_grid": None if args.k is None else [args.k],
        "lambda_grid": None if args.lam is None else [args.lam],
    }
    cfg, data, weights, pid = _load_run(args, overrides)
    if len(cfg["k_grid"]) != 1:
        raise ValidationError("fit needs exactly one K (use --k or a one-element k_grid)")
    lam_grid = cfg["lambda_grid"]
    if isinstance(lam_grid, tuple) or len(lam_grid) != 1:
        raise ValidationError("fit needs exactly one lambda (use --lambda)")
    K, lam = cfg["k_grid"][0], lam_grid[0]
    fit = fit_em(data, K, PenaltySpec(lam, weights, pid), _fit_config(cfg))
    if not fit.converged:
        logger.warning("EM stopped after %d iterations without converging", fit.n_iter)
    _emit_json(io.fit_to_json(fit, data), args.out)
    return 0


def cmd_select(args) -> int:
    overrides = {
        "seed": args.seed, "restarts": args.restarts, "penalty": args.penalty, "workers": args.workers,
        "k_grid": args.k_grid, "lambda_grid": args.lambda_grid,
    }
    cfg, data, weights, pid = _load_run(args, overrides)
    lam_grid = cfg["lambda_grid"]
    if isinstance(lam_grid, tuple):
        lam_grid = auto_lambda_grid(data, cfg["k_grid"], weights, lam_grid[1])
    grid = SelectionGrid(cfg["k_grid"], lam_grid, pid)
    table = grid_search(data, grid, weights, _fit_config(cfg), workers=cfg["workers"])
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    io.write_table_csv(out / "selection.csv", table)
    io.write_fit(out / "best_fit.json", table.best_fit, data)
    best = table.best_row
    print(f"best K={best.K} lambda={best.lam:.6g} bic={best.bic:.6f}")
    return 0


def evaluate(truth_path, fit_path, include_diagonal: bool = False) -> dict:
    labels, true_params, _ = io.read_truth(truth_path)
    fit = io.read_fit(fit_path)
    if fit.params.p != true_params.p:
        raise DimMismatch(f"truth has p={true_params.p}, fit has p={fit.params.p}")
    est = fit.labels
    if est.shape != labels.shape:
        raise DimMismatch(f"truth has n={labels.size}, fit has n={est.size}")
    K = max(fit.params.K, true_params.K)
    perm = match_clusters(est, labels, K)
    components = []
    for k in range(fit.params.K):
        t = int(perm[k])
        if t >= true_params.K:
            continue
        f1, counts = f1_support(true_params.sigmas[t], fit.params.sigmas[k], include_diagonal)
        components.append({
            "estimated": k + 1,
            "true": t + 1,
            "frobenius": frobenius_distance(true_params.sigmas[t], fit.params.sigmas[k]),
            "f1": f1,
            "tp": counts.tp, "fp": counts.fp, "fn": counts.fn, "tn": counts.tn,
        })
    return {
        "ari": adjusted_rand_index(est, labels),
        "permutation": [int(x) + 1 for x in perm],
        "include_diagonal": include_diagonal,
        "components": components,
    }


def cmd_evaluate(args) -> int:
    metrics = evaluate(args.truth, args.fit, args.include_diagonal_f1)
    if args.out and args.out.endswith(".csv"):
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["estimated", "true", "frobenius", "f1", "ari"])
            for c in metrics["components"]:
                w.writerow([c["estimated"], c["true"], io.fmt(c["frobenius"]), io.fmt(c["f1"]), io.fmt(metrics["ari"])])
    else:
        _emit_json(metrics, args.out)
    return 0


def heatmap_rows(sigma: np.ndarray):
    p = sigma.shape[0]
    for i in range(p):
        for j in range(p):
            yield i + 1, j + 1, sigma[i, j], bool(sigma[i, j] == 0)


def cmd_export_heatmap(args) -> int:
    fit = io.read_fit(args.fit)
    k = args.k if args.k is not None else 1
    if not 1 <= k <= fit.params.K:
        raise ValidationError(f"component {k} out of range 1..{fit.params.K}")
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["row", "col", "value", "is_zero"])
        for i, j, v, z in heatmap_rows(fit.params.sigmas[k - 1]):
            w.writerow([i, j, io.fmt(v), str(z).lower()])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _emit_json(obj, out) -> None:
    text = json.dumps(obj, indent=2) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swm", description="Sparse Wishart mixture clustering")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, data=True):
        if data:
            p.add_argument("--data", help="dataset directory (manifest.json + CSVs)")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out", help="output path")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("simulate", help="draw a synthetic dataset")
    common(p, data=False)
    p.set_defaults(func=cmd_simulate)

    for name, func in (("fit", cmd_fit), ("select", cmd_select)):
        p = sub.add_parser(name)
        common(p)
        p.add_argument("--penalty", help="allones | prior:<csv> | explicit:<csv>")
        p.add_argument("--restarts", type=int)
        if name == "fit":
            p.add_argument("--k", type=int)
            p.add_argument("--lambda", dest="lam", type=float)
        else:
            p.add_argument("--k-grid", help="comma-separated K values")
            p.add_argument("--lambda-grid", help="comma-separated values or auto:<length>")
            p.add_argument("--workers", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate")
    p.add_argument("truth", help="truth.json written by simulate")
    p.add_argument("fit", help="fit result JSON")
    p.add_argument("--out")
    p.add_argument("--include-diagonal-f1", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export-heatmap")
    p.add_argument("fit", help="fit result JSON")
    p.add_argument("--k", type=int, help="1-based component index (default 1)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_heatmap)
    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, NotPositiveDefinite) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, SparseWishartError) as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
