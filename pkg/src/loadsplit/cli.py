"""Command-line pipeline: prepare, rank, fit, disaggregate, nowcast, synth, report.

Every command reads one TOML config; ``--out``, ``--seed`` and ``--threads``
override the matching keys.  Relative paths in the config are resolved
against the config file's directory.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import platform
import sys
import time as _time
from datetime import date
from pathlib import Path

import joblib
import matplotlib
import numpy as np
import scipy
import sklearn
import tomli

from . import __version__, plots
from .constraints import ConstraintSet, build_A, build_B, build_Y, month_index, read_asc, read_msi
from .curves import (CalendarConfig, CurveMatrix, DayType, Season, adjust_losses, build_curves,
                     complete_years, ingest_load, read_holidays)
from .ensemble import build_ensemble, profile_report, run_ensemble, sector_series
from .estimator import resolve_alpha
from .exceptions import ConfigError, LoadSplitError, MissingMonth
from .io import read_matrix, read_table, write_json, write_matrix, write_table
from .nowcast import ProjectionConfig, monthly_consumption, one_year_lag, project_ensemble, residuals, score
from .rank import pca_reconstruction, scree, write_scree_csv
from .solver import FactorPair, SolverConfig, diagnostics
from .synth import DEFAULT_MAPPINGS, SynthSpec, generate, italy_like, write_dataset

logger = logging.getLogger("loadsplit")

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "out": "out",
    "data": {
        "load": None,
        "asc": None,
        "msi": None,
        "holidays": None,
        "gap_policy": "interpolate",
        "p": 24,
        "loss_adjustment": "scale_asc",
        "whole_years": True,
    },
    "model": {
        "K": 5,
        "scree_threshold": 0.97,
        "alpha": 3e-10,
        "beta": 1.0,
        "mapping": None,
    },
    "solver": {"max_iters": 5000, "rel_tol": 1e-8, "eps_floor": 1e-12},
    "ensemble": {"N": 100, "cluster": "threshold", "threshold": 0.01},
    "nowcast": {"load": None, "msi": None, "max_iters": 2000},
}
PATH_KEYS = {("data", "load"), ("data", "asc"), ("data", "msi"), ("data", "holidays"),
             ("nowcast", "load"), ("nowcast", "msi")}


# -- configuration ------------------------------------------------------------


def _merge(base: dict, update: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        name = f"{where}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {name!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {name!r} must be a table")
            out[key] = _merge(base[key], value, name + ".")
        else:
            out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the TOML file, then command-line overrides."""
    cfg = copy.deepcopy(DEFAULTS)
    root = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            with open(path, "rb") as fh:
                user = tomli.load(fh)
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        cfg = _merge(cfg, user)
        root = path.resolve().parent
    for section, key in PATH_KEYS:
        if cfg[section][key] is not None:
            cfg[section][key] = str((root / cfg[section][key]).resolve())
    cfg["out"] = str((root / cfg["out"]).resolve())
    # command-line values are relative to the working directory
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = str(Path(value).resolve()) if key == "out" else value
    _check_config(cfg)
    return cfg


def _check_config(cfg: dict) -> None:
    m = cfg["model"]
    if not (m["K"] == "auto" or (isinstance(m["K"], int) and m["K"] >= 1)):
        raise ConfigError(f"model.K must be a positive integer or 'auto', got {m['K']!r}")
    if not 0 < m["scree_threshold"] < 1:
        raise ConfigError("model.scree_threshold must lie in (0, 1)")
    if not (m["alpha"] == "balanced" or (isinstance(m["alpha"], (int, float)) and m["alpha"] >= 0)):
        raise ConfigError(f"model.alpha must be non-negative or 'balanced', got {m['alpha']!r}")
    if not isinstance(m["beta"], (int, float)) or m["beta"] < 0:
        raise ConfigError("model.beta must be non-negative")
    if m["mapping"] is not None:
        if not isinstance(m["mapping"], dict) or not all(isinstance(v, list) for v in m["mapping"].values()):
            raise ConfigError("model.mapping must map sector names to lists of source indices")
    e = cfg["ensemble"]
    if not isinstance(e["N"], int) or e["N"] < 1:
        raise ConfigError("ensemble.N must be a positive integer")
    if e["cluster"] not in ("threshold", "auto_gap"):
        raise ConfigError(f"ensemble.cluster must be 'threshold' or 'auto_gap', got {e['cluster']!r}")
    s = cfg["solver"]
    if s["max_iters"] < 1 or s["rel_tol"] <= 0 or s["eps_floor"] <= 0:
        raise ConfigError("solver.max_iters, rel_tol and eps_floor must be positive")
    if cfg["data"]["p"] not in (24, 25):
        raise ConfigError("data.p must be 24 or 25")
    if cfg["data"]["gap_policy"] not in ("reject", "interpolate"):
        raise ConfigError("data.gap_policy must be 'reject' or 'interpolate'")
    if cfg["data"]["loss_adjustment"] not in ("scale_asc", "none"):
        raise ConfigError("data.loss_adjustment must be 'scale_asc' or 'none'")
    if not isinstance(cfg["threads"], int) or cfg["threads"] == 0:
        raise ConfigError("threads must be a non-zero integer")


def _require(cfg: dict, *keys) -> list[str]:
    paths = []
    for section, key in keys:
        value = cfg[section][key]
        if value is None:
            raise ConfigError(f"config key {section}.{key} is required for this command")
        if not Path(value).exists():
            raise ConfigError(f"{section}.{key}: file {value} does not exist")
        paths.append(value)
    return paths


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _mapping(cfg: dict, K: int) -> dict:
    mapping = cfg["model"]["mapping"]
    if mapping is None:
        if K not in DEFAULT_MAPPINGS:
            raise ConfigError(f"no default source mapping for K={K}; set model.mapping")
        return DEFAULT_MAPPINGS[K]
    n_sources = sum(len(v) for v in mapping.values())
    if n_sources != K:
        raise ConfigError(f"model.mapping assigns {n_sources} sources but K={K}")
    return mapping


def _update_manifest(out: Path, cfg: dict, command: str, info: dict) -> None:
    path = out / "manifest.json"
    manifest = json.loads(path.read_text(encoding="utf-8")) if path.exists() else {}
    manifest["config"] = cfg
    manifest["config_hash"] = config_hash(cfg)
    manifest["versions"] = {
        "loadsplit": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "scikit-learn": sklearn.__version__,
        "joblib": joblib.__version__,
        "matplotlib": matplotlib.__version__,
    }
    manifest.setdefault("commands", {})[command] = info
    write_json(path, manifest)


# -- prepare ------------------------------------------------------------------


def _calendar(cfg) -> CalendarConfig:
    h = cfg["data"]["holidays"]
    return read_holidays(h) if h is not None else CalendarConfig(frozenset())


def _curves_from_file(cfg, path) -> tuple[CurveMatrix, dict]:
    records = ingest_load(path, cfg["data"]["gap_policy"])
    curves = build_curves(records, _calendar(cfg), cfg["data"]["p"])
    info = {
        "hours": len(records),
        "repaired_hours": sum(r.repaired for r in records),
        "dst_days": sorted({r.timestamp.date().isoformat() for r in records if r.dst}),
    }
    return curves, info


def _write_calendar(path, curves: CurveMatrix) -> None:
    write_table(path, ["date", "day_type", "season", "month", "energy_mwh"], [
        (d.isoformat(), t.value, s.value, f"{d.year:04d}-{d.month:02d}", float(e))
        for d, t, s, e in zip(curves.dates, curves.day_types, curves.seasons, curves.E)
    ])


def _read_calendar(path) -> CurveMatrix:
    rows = read_table(path)
    return CurveMatrix(
        X=np.empty((len(rows), 0)),
        E=np.array([float(r["energy_mwh"]) for r in rows]),
        dates=[date.fromisoformat(r["date"]) for r in rows],
        day_types=[DayType(r["day_type"]) for r in rows],
        seasons=[Season(r["season"]) for r in rows],
    )


def cmd_prepare(cfg: dict) -> dict:
    load, asc_path, msi_path = _require(cfg, ("data", "load"), ("data", "asc"), ("data", "msi"))
    out = Path(cfg["out"]) / "prepare"
    curves, info = _curves_from_file(cfg, load)
    years = complete_years(curves.dates) if cfg["data"]["whole_years"] else curves.years()

    K = cfg["model"]["K"]
    if K == "auto":
        K = scree(curves.X, cfg["model"]["scree_threshold"]).suggested_K
        logger.info("scree suggests K=%d", K)
    mapping = _mapping(cfg, K)
    sectors = list(mapping)
    A = build_A(mapping, K)

    months, _ = month_index(curves.dates)
    B = build_B(curves.E, curves.dates)
    asc = read_asc(asc_path, sectors, years)
    w = adjust_losses(curves.E, asc, cfg["data"]["loss_adjustment"], years=years, asc_years=years)
    msi = read_msi(msi_path, sectors, months)
    totals = B.sum(axis=1)
    Y = build_Y(msi, w, totals)

    write_matrix(out / "X.csv", curves.X, rows=[d.isoformat() for d in curves.dates],
                 columns=[f"h{h:02d}" for h in range(curves.p)])
    write_matrix(out / "B.csv", B, rows=months, columns=[d.isoformat() for d in curves.dates])
    write_matrix(out / "A.csv", A, rows=[f"source{k}" for k in range(K)], columns=sectors)
    write_matrix(out / "Y.csv", Y, rows=months, columns=sectors)
    write_table(out / "sector_totals.csv", ["sector", "asc_mwh", "adjusted_mwh"],
                [(s, float(asc[:, j].sum()), float(w[j])) for j, s in enumerate(sectors)])
    _write_calendar(out / "calendar.csv", curves)
    report = {
        "n_days": curves.n,
        "p": curves.p,
        "K": K,
        "m": len(months),
        "g": len(sectors),
        "sectors": sectors,
        "mapping": {s: list(v) for s, v in mapping.items()},
        "years": years,
        "first_day": curves.dates[0].isoformat(),
        "last_day": curves.dates[-1].isoformat(),
        **info,
        "Y_row_rel_error": float(np.max(np.abs(Y.sum(axis=1) - totals) / totals)),
        "Y_col_rel_error": float(np.max(np.abs(Y.sum(axis=0) - w) / w)),
    }
    write_json(out / "report.json", report)
    return report


def _prepared(cfg: dict) -> dict:
    """Prepared artifacts, running ``prepare`` first when they are missing."""
    out = Path(cfg["out"]) / "prepare"
    if not (out / "report.json").exists():
        cmd_prepare(cfg)
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    cal = _read_calendar(out / "calendar.csv")
    X, _ = read_matrix(out / "X.csv")
    cal.X = X
    return {
        "report": report,
        "curves": cal,
        "B": read_matrix(out / "B.csv")[0],
        "A": read_matrix(out / "A.csv")[0],
        "Y": read_matrix(out / "Y.csv")[0],
    }


def _constraints(prep: dict):
    K, p = prep["report"]["K"], prep["report"]["p"]
    return ConstraintSet.with_unit_sources(K, p, prep["B"], prep["A"], prep["Y"])


# -- rank ---------------------------------------------------------------------


def cmd_rank(cfg: dict) -> dict:
    out = Path(cfg["out"]) / "rank"
    out.mkdir(parents=True, exist_ok=True)
    if cfg["data"]["load"] is not None and not (Path(cfg["out"]) / "prepare" / "X.csv").exists():
        load = _require(cfg, ("data", "load"))[0]
        X = _curves_from_file(cfg, load)[0].X
    else:
        X = _prepared(cfg)["curves"].X
    res = scree(X, cfg["model"]["scree_threshold"])
    write_scree_csv(out / "scree.csv", res)
    plots.scree_plot(res, out / "scree.svg")
    info = {"threshold": cfg["model"]["scree_threshold"], "suggested_d": res.suggested_d,
            "suggested_K": res.suggested_K}
    write_json(out / "rank.json", info)
    return info


# -- fit ----------------------------------------------------------------------


def _solver_config(cfg: dict, X, constraints) -> SolverConfig:
    s = cfg["solver"]
    return SolverConfig(
        alpha=resolve_alpha(cfg["model"]["alpha"], X, constraints),
        beta=float(cfg["model"]["beta"]),
        max_iters=int(s["max_iters"]),
        rel_tol=float(s["rel_tol"]),
        eps_floor=float(s["eps_floor"]),
        seed=int(cfg["seed"]),
    )


def cmd_fit(cfg: dict) -> dict:
    prep = _prepared(cfg)
    X = prep["curves"].X
    K = prep["report"]["K"]
    cons = _constraints(prep)
    scfg = _solver_config(cfg, X, cons)
    base = int(cfg["seed"])
    N = int(cfg["ensemble"]["N"])
    t0 = _time.perf_counter()
    losses, results = run_ensemble(X, cons, scfg, N, base, n_components=K, n_jobs=cfg["threads"])
    elapsed = _time.perf_counter() - t0
    ens = build_ensemble(losses, results, prep["A"], cfg["ensemble"]["cluster"], cfg["ensemble"]["threshold"])

    out = Path(cfg["out"])
    for res in results:
        if res is None:
            continue
        d = out / "solutions" / str(res.seed)
        write_matrix(d / "C.csv", res.factors.C, columns=[f"source{k}" for k in range(K)])
        write_matrix(d / "S.csv", res.factors.S, rows=[f"source{k}" for k in range(K)])
    retained = set(ens.retained.tolist())
    rows = []
    for i, res in enumerate(results):
        seed = base + i
        if res is None:
            rows.append((seed, "nan", "nan", "nan", "nan", 0, "false", "false", "failed"))
            continue
        fit_, pc, ps = res.loss_terms
        rows.append((seed, float(res.loss), float(fit_), float(pc), float(ps), res.iters,
                     str(res.converged).lower(), str(i in retained).lower(), "ok"))
    ens_dir = out / "ensemble"
    write_table(ens_dir / "losses.csv", ["seed", "loss", "fit", "penalty_monthly", "penalty_sources",
                                         "iters", "converged", "retained", "status"], rows)
    write_table(ens_dir / "alignment.csv", ["seed"] + [f"slot{k}" for k in range(K)],
                [(r.seed, *perm.tolist()) for r, perm in zip(ens.solutions, ens.alignment)])
    medoid_seed = ens.solutions[ens.medoid_index].seed
    write_matrix(ens_dir / "medoid_S.csv", ens.medoid_S, rows=[f"source{k}" for k in range(K)],
                 seed=medoid_seed)
    diag = [r.diagnostics for r in ens.solutions]
    info = {
        "alpha": scfg.alpha,
        "beta": scfg.beta,
        "seeds": [base, base + N - 1],
        "n_runs": N,
        "n_retained": len(ens.solutions),
        "failed_seeds": [base + i for i in ens.failed],
        "threshold": ens.threshold,
        "medoid_seed": medoid_seed,
        "seconds": elapsed,
        "max_monthly_rel_error": max(d.get("monthly_rel_error", 0.0) for d in diag),
        "max_source_rowsum_dev": max(d["max_source_rowsum_dev"] for d in diag),
        "max_concentration_rowsum_dev": max(d["max_concentration_rowsum_dev"] for d in diag),
    }
    write_json(ens_dir / "fit.json", info)
    return info


def _ensemble(cfg: dict) -> tuple[list[FactorPair], int]:
    """Retained, aligned solutions and the medoid position, as written by ``fit``."""
    out = Path(cfg["out"])
    path = out / "ensemble" / "alignment.csv"
    if not path.exists():
        raise ConfigError(f"{path} is missing; run 'fit' first")
    medoid_seed = read_matrix(out / "ensemble" / "medoid_S.csv")[1]["seed"]
    factors, medoid = [], 0
    for row in read_table(path):
        seed = int(row["seed"])
        perm = np.array([int(v) for k, v in row.items() if k.startswith("slot")])
        d = out / "solutions" / str(seed)
        f = FactorPair(read_matrix(d / "C.csv")[0], read_matrix(d / "S.csv")[0]).permuted(perm)
        if seed == medoid_seed:
            medoid = len(factors)
        factors.append(f)
    return factors, medoid


# -- disaggregate -------------------------------------------------------------


def cmd_disaggregate(cfg: dict) -> dict:
    prep = _prepared(cfg)
    curves = prep["curves"]
    sectors = prep["report"]["sectors"]
    factors, _ = _ensemble(cfg)
    series = sector_series(factors, curves.E, prep["A"], curves.dates, sectors)
    out = Path(cfg["out"]) / "ensemble"
    stamps = series[0].timestamps
    rows = []
    for t, ts in enumerate(stamps):
        text = ts.isoformat(timespec="minutes")
        for s in series:
            rows.append((text, s.sector, float(s.hourly_mean[t]), float(s.q025[t]), float(s.q975[t])))
    write_table(out / "sector_hourly.csv", ["timestamp", "sector", "mean_mw", "q025_mw", "q975_mw"], rows)
    write_table(out / "sector_daily.csv", ["date", "sector", "mean_mwh"], [
        (d.isoformat(), s.sector, float(s.daily_energy_mean[i]))
        for i, d in enumerate(curves.dates) for s in series
    ])
    profiles = profile_report(factors, curves, prep["A"])
    write_table(out / "profiles.csv", ["day_type", "season", "sector", "hour", "share"], [
        (dt, se, sectors[j], h, float(prof[j, h]))
        for (dt, se), prof in profiles.items() for j in range(len(sectors)) for h in range(prof.shape[1])
    ])
    return {"n_solutions": len(factors), "hours": len(stamps), "sectors": sectors}


# -- nowcast ------------------------------------------------------------------


def cmd_nowcast(cfg: dict, load_path=None) -> dict:
    if load_path is not None:
        cfg = copy.deepcopy(cfg)
        cfg["nowcast"]["load"] = str(Path(load_path).resolve())
    load = _require(cfg, ("nowcast", "load"))[0]
    prep = _prepared(cfg)
    sectors = prep["report"]["sectors"]
    factors, _ = _ensemble(cfg)
    curves, _ = _curves_from_file(cfg, load)
    pcfg = ProjectionConfig(max_iters=int(cfg["nowcast"]["max_iters"]), rel_tol=float(cfg["solver"]["rel_tol"]),
                            eps_floor=float(cfg["solver"]["eps_floor"]))
    C0s = project_ensemble(curves.X, [f.S for f in factors], pcfg, seed=int(cfg["seed"]), n_jobs=cfg["threads"])
    estimates = monthly_consumption(C0s, curves.E, prep["A"], curves.dates, sectors)
    out = Path(cfg["out"]) / "nowcast"
    write_table(out / "monthly_sectors.csv", ["sector", "month", "mean_mwh", "q025", "q975"],
                [(e.sector, e.month, e.energy, e.q025, e.q975) for e in estimates])
    res = np.mean([residuals(curves.X, C0, f.S) for C0, f in zip(C0s, factors)], axis=0)
    write_table(out / "residuals.csv", ["date", "residual"],
                [(d.isoformat(), float(r)) for d, r in zip(curves.dates, res)])
    info = {"n_days": curves.n, "n_solutions": len(factors), "correlations": None}
    msi_path = cfg["nowcast"]["msi"]
    corr_path = out / "correlations.csv"
    if msi_path is None:
        if corr_path.exists():
            corr_path.unlink()
        print("no indicators configured (nowcast.msi); correlations.csv not written", file=sys.stderr)
        return info
    msi_path = _require(cfg, ("nowcast", "msi"))[0]
    months = sorted({e.month for e in estimates})
    indicators = read_msi(msi_path, sectors, months)
    lookup = {}
    for row in read_table(msi_path):
        lookup[(row["sector"], row["month"])] = float(row["value"])
    try:
        lagged = one_year_lag(lookup, months, sectors)
    except MissingMonth as exc:
        raise MissingMonth(f"{msi_path}: {exc}") from exc
    table = score(estimates, indicators, lagged, sectors)
    write_table(corr_path, ["sector", "bss_r", "naive_r"], [(r["sector"], r["bss_r"], r["naive_r"]) for r in table])
    info["correlations"] = table
    return info


# -- report -------------------------------------------------------------------


def cmd_report(cfg: dict) -> dict:
    prep = _prepared(cfg)
    curves = prep["curves"]
    sectors = prep["report"]["sectors"]
    mapping = prep["report"]["mapping"]
    factors, medoid = _ensemble(cfg)
    out = Path(cfg["out"]) / "report"
    out.mkdir(parents=True, exist_ok=True)
    owner = {k: s for s, ks in mapping.items() for k in ks}
    names = [f"{owner[k]} ({k})" for k in range(prep["report"]["K"])]
    plots.sources_plot([f.S for f in factors], medoid, out / "sources.svg", names)

    rows = read_table(Path(cfg["out"]) / "ensemble" / "losses.csv")
    losses = np.array([float(r["loss"]) for r in rows])
    retained = [i for i, r in enumerate(rows) if r["retained"] == "true"]
    plots.loss_scatter(losses, retained, out / "loss_scatter.svg")

    series = sector_series(factors, curves.E, prep["A"], curves.dates, sectors)
    plots.weekly_plot(series, out / "weekly.svg")

    X = curves.X
    K = prep["report"]["K"]
    res = scree(X, cfg["model"]["scree_threshold"])
    plots.scree_plot(res, out / "scree.svg")
    med = factors[medoid]
    cons = _constraints(prep)
    diag = diagnostics(med, cons)
    lcnmf = float(np.linalg.norm(X - med.C @ med.S))
    pca = float(np.linalg.norm(X - pca_reconstruction(X, K - 1)))
    write_table(out / "fit_quality.csv", ["method", "frobenius_residual"],
                [("lcnmf_medoid", lcnmf), (f"pca_rank_{K - 1}", pca)])
    write_table(out / "compliance.csv", ["metric", "value"], sorted((k, float(v)) for k, v in diag.items()))
    return {"lcnmf_residual": lcnmf, "pca_residual": pca, **diag}


# -- synth --------------------------------------------------------------------


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return json.dumps(str(v))


def write_config(path, cfg: dict) -> None:
    """Write a nested dict of scalars, lists and tables as TOML."""
    lines = []

    def table(prefix, d):
        scalars = {k: v for k, v in d.items() if not isinstance(v, dict) and v is not None}
        if prefix:
            lines.append(f"\n[{prefix}]")
        lines.extend(f"{k} = {_toml_value(v)}" for k, v in scalars.items())
        for k, v in d.items():
            if isinstance(v, dict):
                table(f"{prefix}.{k}" if prefix else k, v)

    table("", cfg)
    Path(path).write_text("\n".join(lines).lstrip("\n") + "\n", encoding="utf-8")


def cmd_synth(cfg: dict, args) -> dict:
    out = Path(cfg["out"])
    seed = int(cfg["seed"])
    kw = {k: v for k, v in {
        "n_days": args.days, "n_sources": args.sources, "noise": args.noise, "msi_noise": args.msi_noise,
        "drift": args.drift, "start": date.fromisoformat(args.start) if args.start else None,
    }.items() if v is not None}
    if args.preset == "italy":
        spec = italy_like(seed, **kw)
    else:
        spec = SynthSpec(**{"n_days": 180, "n_sources": 3, "seed": seed, **kw})
    ds = generate(spec)
    paths = write_dataset(ds, out, test_days=args.test_days)
    n_train = ds.curves.n - args.test_days
    whole = all(
        sum(1 for d in ds.curves.dates[:n_train] if d.year == y) == (date(y + 1, 1, 1) - date(y, 1, 1)).days
        for y in {d.year for d in ds.curves.dates[:n_train]}
    )
    # the lag baseline needs indicators a year before the first test month
    first_test = ds.curves.dates[n_train] if args.test_days else None
    has_lag = first_test is not None and date(first_test.year - 1, first_test.month, 1) >= \
        date(spec.start.year, spec.start.month, 1)
    run_cfg = {
        "seed": seed,
        "threads": cfg["threads"],
        "out": "run",
        "data": {"load": "load.csv", "asc": "asc.csv", "msi": "msi.csv", "holidays": "holidays.csv",
                 "whole_years": whole},
        "model": {"K": spec.n_sources, "alpha": "balanced", "beta": 1.0,
                  "mapping": {s: list(v) for s, v in ds.truth.mapping.items()}},
        "solver": {"max_iters": 20000},
        "ensemble": {"N": 20, "cluster": "auto_gap"},
        "nowcast": {"load": "load_test.csv" if args.test_days else None,
                    "msi": "msi.csv" if has_lag else None},
    }
    write_config(out / "config.toml", run_cfg)
    return {"days": ds.curves.n, "sources": spec.n_sources, "files": sorted(str(p) for p in paths.values())}


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, help="base seed (overrides the config)")
    common.add_argument("--threads", type=int, help="parallel jobs, -1 for all cores")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="loadsplit", description=__doc__.splitlines()[0], parents=[common])
    parser.add_argument("--version", action="version", version=f"loadsplit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("prepare", parents=[common], help="build curves and constraint matrices")
    sub.add_parser("rank", parents=[common], help="PCA scree and suggested number of sources")
    sub.add_parser("fit", parents=[common], help="run the LCNMF ensemble")
    sub.add_parser("disaggregate", parents=[common], help="hourly sector loads and profiles")
    p = sub.add_parser("nowcast", parents=[common], help="project new days on the fitted sources")
    p.add_argument("--load", help="load CSV of the new period (overrides nowcast.load)")
    sub.add_parser("report", parents=[common], help="figures and fit-quality tables")
    p = sub.add_parser("synth", parents=[common], help="write a synthetic dataset and a config for it")
    p.add_argument("--preset", choices=["planted", "italy"], default="planted")
    p.add_argument("--days", type=int)
    p.add_argument("--sources", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--msi-noise", type=float)
    p.add_argument("--drift", type=float)
    p.add_argument("--start", help="first day, YYYY-MM-DD")
    p.add_argument("--test-days", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, {"out": args.out, "seed": args.seed, "threads": args.threads})
        t0 = _time.perf_counter()
        if args.command == "prepare":
            info = cmd_prepare(cfg)
        elif args.command == "rank":
            info = cmd_rank(cfg)
        elif args.command == "fit":
            info = cmd_fit(cfg)
        elif args.command == "disaggregate":
            info = cmd_disaggregate(cfg)
        elif args.command == "nowcast":
            info = cmd_nowcast(cfg, args.load)
        elif args.command == "report":
            info = cmd_report(cfg)
        else:
            info = cmd_synth(cfg, args)
        if args.command != "synth":
            _update_manifest(Path(cfg["out"]), cfg, args.command,
                             {"seconds": _time.perf_counter() - t0, "finished": _time.time(), "result": info})
    except LoadSplitError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return exc.exit_code
    print(json.dumps(info, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
