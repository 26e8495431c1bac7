"""File formats: dataset directories, truth sidecars, fit results, run configs.

Matrices are CSV with 17 significant digits so floats round-trip exactly;
everything else is JSON.  Component labels are written 1-based.
"""
from __future__ import annotations

import csv
import json
import os
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .em import Dataset, FitResult, MixtureParams, Responsibilities
from .errors import DimMismatch, ValidationError

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
STACKED = "stacked.csv"


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_matrix_csv(path, m: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        for row in np.asarray(m):
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    m = np.array(rows, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimMismatch(f"{path}: expected a square matrix, got shape {m.shape}")
    return m


def save_dataset(data: Dataset, out_dir, layout: str = "per-matrix") -> Path:
    """Write ``manifest.json`` plus either one CSV per matrix or ``stacked.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if layout == "per-matrix":
        for mid, m in zip(data.ids, data.matrices):
            write_matrix_csv(out / f"{mid}.csv", m)
    elif layout == "stacked":
        iu = np.triu_indices(data.p)
        with open(out / STACKED, "w", newline="") as fh:
            fh.write("id,row_index,col_index,value\n")
            for mid, m in zip(data.ids, data.matrices):
                for r, c in zip(*iu):
                    fh.write(f"{mid},{r},{c},{fmt(m[r, c])}\n")
    else:
        raise ValidationError(f"unknown dataset layout {layout!r}")
    manifest = {
        "format_version": FORMAT_VERSION,
        "n": data.n,
        "p": data.p,
        "ids": list(data.ids),
        "jittered": [bool(x) for x in data.jittered],
        "layout": layout,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2) + "\n")
    return out


def load_dataset(data_dir) -> Dataset:
    root = Path(data_dir)
    try:
        manifest = json.loads((root / MANIFEST).read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"{root} has no {MANIFEST}") from exc
    n, p, ids = int(manifest["n"]), int(manifest["p"]), list(manifest["ids"])
    if len(ids) != n:
        raise ValidationError(f"manifest lists {len(ids)} ids but n={n}")
    layout = manifest.get("layout", "per-matrix")
    mats = []
    if layout == "per-matrix":
        for mid in ids:
            m = read_matrix_csv(root / f"{mid}.csv")
            if m.shape != (p, p):
                raise DimMismatch(f"{mid}.csv has shape {m.shape}, manifest says p={p}")
            mats.append(m)
    elif layout == "stacked":
        store = {mid: np.full((p, p), np.nan) for mid in ids}
        with open(root / STACKED, newline="") as fh:
            for rec in csv.DictReader(fh):
                r, c, v = int(rec["row_index"]), int(rec["col_index"]), float(rec["value"])
                m = store[rec["id"]]
                m[r, c] = v
                m[c, r] = v
        for mid in ids:
            if np.isnan(store[mid]).any():
                raise ValidationError(f"stacked payload is missing entries for {mid}")
            mats.append(store[mid])
    else:
        raise ValidationError(f"unknown dataset layout {layout!r}")
    data = Dataset.from_matrices(mats, ids)
    # the manifest records jitter applied upstream; keep whichever is set
    data.jittered = data.jittered | np.asarray(manifest.get("jittered", [False] * n), dtype=bool)
    return data


def params_to_json(params: MixtureParams) -> dict:
    return {
        "K": params.K,
        "p": params.p,
        "tau": [float(t) for t in params.tau],
        "dofs": [float(v) for v in params.dofs],
        "sigmas": [[[float(x) for x in row] for row in s] for s in params.sigmas],
    }


def params_from_json(obj: dict) -> MixtureParams:
    return MixtureParams(np.array(obj["tau"]), np.array(obj["sigmas"]), np.array(obj["dofs"]))


def write_truth(path, labels, params: MixtureParams, seed: int, spec: dict | None = None) -> None:
    obj = {
        "format_version": FORMAT_VERSION,
        "seed": int(seed),
        "n": int(len(labels)),
        "labels": [int(x) + 1 for x in labels],
        **params_to_json(params),
    }
    if spec is not None:
        obj["spec"] = spec
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


def read_truth(path):
    obj = json.loads(Path(path).read_text())
    labels = np.array(obj["labels"], dtype=np.int64) - 1
    return labels, params_from_json(obj), obj


def fit_to_json(fit: FitResult, data: Dataset | None = None, timestamp: bool = True) -> dict:
    obj = {
        "format_version": FORMAT_VERSION,
        "params": params_to_json(fit.params),
        "labels": [int(x) + 1 for x in fit.labels],
        "responsibilities": [[float(v) for v in row] for row in fit.resp.z],
        "pen_loglik_trace": [float(v) for v in fit.pen_loglik_trace],
        "loglik": float(fit.loglik),
        "d0": int(fit.d0),
        "bic": float(fit.bic),
        "n_iter": int(fit.n_iter),
        "converged": bool(fit.converged),
        "seed": int(fit.seed),
        "lambda": float(fit.lam),
        "penalty_id": fit.penalty_id,
        "retried": bool(fit.retried),
    }
    if data is not None:
        obj["ids"] = list(data.ids)
        obj["jittered"] = [bool(x) for x in data.jittered]
    if timestamp:
        obj["timestamp"] = datetime.now(timezone.utc).isoformat()
    return obj


def write_fit(path, fit: FitResult, data: Dataset | None = None) -> None:
    Path(path).write_text(json.dumps(fit_to_json(fit, data), indent=2) + "\n")


def read_fit(path) -> FitResult:
    obj = json.loads(Path(path).read_text())
    params = params_from_json(obj["params"])
    return FitResult(
        params=params,
        resp=Responsibilities(np.array(obj["responsibilities"], dtype=float)),
        pen_loglik_trace=list(obj["pen_loglik_trace"]),
        loglik=float(obj["loglik"]),
        d0=int(obj["d0"]),
        bic=float(obj["bic"]),
        n_iter=int(obj["n_iter"]),
        converged=bool(obj["converged"]),
        seed=int(obj["seed"]),
        lam=float(obj["lambda"]),
        penalty_id=str(obj["penalty_id"]),
        retried=bool(obj.get("retried", False)),
    )


def write_table_csv(path, table) -> None:
    from .select import TABLE_COLUMNS

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TABLE_COLUMNS)
        for row in table.rows:
            rec = row.as_record()
            w.writerow([
                rec["K"], fmt(rec["lambda"]), fmt(rec["bic"]), fmt(rec["loglik"]),
                rec["d0"], str(rec["converged"]).lower(), rec["n_iter"],
            ])


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

CONFIG_DEFAULTS = {
    "k_grid": [1, 2, 3],
    "lambda_grid": "auto:100",
    "penalty": "allones",
    "epsilon": 1e-6,
    "max_iter": 500,
    "restarts": 0,
    "seed": 0,
    "workers": 1,
}


def parse_lambda_grid(value):
    """A list of numbers, a comma-separated string, or ``"auto:L"``."""
    if isinstance(value, str):
        value = value.strip()
        if value.startswith("auto"):
            _, _, length = value.partition(":")
            try:
                L = int(length) if length else 100
            except ValueError as exc:
                raise ValidationError(f"bad lambda grid {value!r}") from exc
            if L < 1:
                raise ValidationError("auto lambda grid length must be positive")
            return ("auto", L)
        try:
            value = [float(x) for x in value.split(",") if x.strip()]
        except ValueError as exc:
            raise ValidationError(f"bad lambda grid {value!r}") from exc
    try:
        vals = [float(x) for x in value]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad lambda grid {value!r}") from exc
    if not vals or any(not v >= 0 for v in vals):
        raise ValidationError("lambda grid must be non-empty and nonnegative")
    return sorted(vals)


def parse_k_grid(value) -> list:
    if isinstance(value, str):
        value = [x for x in value.split(",") if x.strip()]
    try:
        ks = sorted({int(x) for x in value})
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad K grid {value!r}") from exc
    if not ks or ks[0] < 1:
        raise ValidationError("K grid must hold positive integers")
    return ks


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Merge defaults, a JSON config file and CLI overrides; reject unknown keys."""
    cfg = dict(CONFIG_DEFAULTS)
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(user, dict):
            raise ValidationError(f"{path}: config must be a JSON object")
        unknown = sorted(set(user) - set(CONFIG_DEFAULTS))
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        cfg.update(user)
    for key, val in (overrides or {}).items():
        if val is not None:
            cfg[key] = val
    cfg["k_grid"] = parse_k_grid(cfg["k_grid"])
    cfg["lambda_grid"] = parse_lambda_grid(cfg["lambda_grid"])
    for key, kind in (("epsilon", float), ("max_iter", int), ("restarts", int), ("seed", int), ("workers", int)):
        try:
            cfg[key] = kind(cfg[key])
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"config field {key!r} must be {kind.__name__}") from exc
    if cfg["epsilon"] <= 0 or cfg["max_iter"] < 1 or cfg["restarts"] < 0 or cfg["workers"] < 1:
        raise ValidationError("epsilon, max_iter, restarts and workers are out of range")
    if not isinstance(cfg["penalty"], str):
        raise ValidationError("penalty must be a string")
    return cfg


def resolve_penalty(choice: str, p: int, base_dir=None):
    """Return ``(weights, penalty_id)`` for ``allones``, ``prior:<csv>`` or
    ``explicit:<csv>``."""
    from .covglasso import build_penalty_allones, build_penalty_from_prior

    kind, _, target = choice.partition(":")
    if kind == "allones" and not target:
        return build_penalty_allones(p), "allones"
    if kind in ("prior", "explicit") and target:
        path = Path(target)
        if base_dir is not None and not path.is_absolute() and not path.exists():
            path = Path(base_dir) / path
        m = read_matrix_csv(path)
        if m.shape != (p, p):
            raise DimMismatch(f"penalty matrix {path} has shape {m.shape}, data p={p}")
        if kind == "prior":
            return build_penalty_from_prior(m), f"prior:{os.path.basename(target)}"
        if np.any(m < 0) or not np.allclose(m, m.T):
            raise ValidationError("explicit penalty matrix must be symmetric and nonnegative")
        return 0.5 * (m + m.T), f"explicit:{os.path.basename(target)}"
    raise ValidationError(f"unknown penalty {choice!r}")
