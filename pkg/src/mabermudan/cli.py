"""Command-line front end.

Subcommands
-----------
``price``  run one engine on one contract and append a result row.
``table``  run a named sweep (``bs_t02``, ``bs_t10``, ``cs_t02``, ``cs_t10``,
           ``rb_t02``, ``rb_t10``) at ``smoke``, ``desk`` or ``full`` scale.
``bench``  fit a GPR-GHQ (or LS) policy and evaluate it forward on fresh paths.

Options may also come from a flat ``key = value`` file given with
``--config``; command-line flags override file entries. Exit codes: 0 on
success, 2 for usage errors, 3 for engine failures.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from . import bench as bench_mod
from .engine_bc import price_bc
from .engine_gprghq import GprGhqConfig
from .engine_gprghq import price as price_gprghq
from .engine_ls import LsConfig, price_ls
from .errors import DomainError, EngineError, NumericalError, ResourceGuardError
from .models import BlackScholesParams, ClewlowStricklandParams, RoughBergomiParams
from .results import PriceResult
from .state import OptionSpec

SCHEMA_VERSION = 1
COLUMNS = ("model", "engine", "M", "N", "T", "price", "ci_radius", "runtime_s",
           "P", "Q", "deg", "J", "seed", "schema_version")
EXIT_OK, EXIT_USAGE, EXIT_ENGINE = 0, 2, 3
MODELS = ("bs", "cs", "rbergomi")
ENGINES = ("gprghq", "ls", "bc", "benchmark")
SCALES = ("smoke", "desk", "full")

# key -> (type, default); None default means "engine/model specific"
KEYS: dict[str, tuple[type, Any]] = {
    "model": (str, None), "engine": (str, None),
    "M": (int, None), "N": (int, None), "T": (float, None),
    "S0": (float, 100.0), "r": (float, 0.05), "sigma": (float, None),
    "F": (float, 100.0), "alpha": (float, 5.0),
    "H": (float, None), "eta": (float, 1.9), "rho": (float, -0.9), "xi0": (float, 0.09),
    "P": (int, None), "Q": (int, None), "deg": (int, 2), "J": (int, 3), "seed": (int, 0),
    "mc_paths": (int, 2_000_000), "hyper_subset": (int, 500),
    "bench_paths": (int, 200_000), "target_ci": (float, None), "policy": (str, "gprghq"),
    "out": (str, None), "format": (str, "csv"), "threads": (int, None),
}


class UsageError(Exception):
    pass


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def merge_settings(file_values: dict[str, str], flags: dict[str, Any]) -> dict[str, Any]:
    """Typed settings: defaults, then file entries, then explicit flags."""
    merged: dict[str, Any] = {k: d for k, (_, d) in KEYS.items()}
    for key, raw in file_values.items():
        typ = KEYS[key][0]
        try:
            merged[key] = typ(float(raw)) if typ is int else typ(raw)
        except ValueError as exc:
            raise UsageError(f"bad value for {key}: {raw!r}") from exc
    for key, value in flags.items():
        if value is not None:
            merged[key] = value
    return merged


@dataclass
class RunConfig:
    model: str
    engine: str
    option: OptionSpec
    params: Any
    gprghq: GprGhqConfig
    ls: LsConfig
    bench_paths: int
    target_ci: float | None = None
    policy: str = "gprghq"
    out: str | None = None
    fmt: str = "csv"
    threads: int = 1
    extra: dict[str, Any] = field(default_factory=dict)


def build_model(s: dict[str, Any]):
    m = s["model"]
    if m == "bs":
        return BlackScholesParams(spot0=s["S0"], rate=s["r"],
                                  vol=0.3 if s["sigma"] is None else s["sigma"])
    if m == "cs":
        return ClewlowStricklandParams.flat(s["F"], rate=s["r"], mean_rev=s["alpha"],
                                            vol=0.5 if s["sigma"] is None else s["sigma"])
    if s["H"] is None:
        raise UsageError("rbergomi requires an explicit --H")
    return RoughBergomiParams(spot0=s["S0"], rate=s["r"], hurst=s["H"], eta=s["eta"],
                              rho=s["rho"], xi0=s["xi0"])


def build_run_config(s: dict[str, Any], engine_required: bool = True) -> RunConfig:
    missing = [k for k in ("model", "M", "N", "T") if s[k] is None]
    if engine_required and s["engine"] is None:
        missing.append("engine")
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k for k in missing))
    if s["model"] not in MODELS:
        raise UsageError(f"unknown model {s['model']!r}")
    if s["engine"] is not None and s["engine"] not in ENGINES:
        raise UsageError(f"unknown engine {s['engine']!r}")
    if s["engine"] == "bc" and s["model"] != "bs":
        raise UsageError("engine bc requires model bs")
    if s["format"] not in ("csv", "json"):
        raise UsageError("format must be csv or json")
    if s["policy"] not in ("gprghq", "ls"):
        raise UsageError("policy must be gprghq or ls")
    for k in ("P", "Q", "J", "mc_paths", "bench_paths", "threads"):
        if s[k] is not None and s[k] <= 0 and not (k == "J" and s[k] == 0):
            raise UsageError(f"--{k} must be positive")
    try:
        option = OptionSpec(maturity=s["T"], n_dates=s["N"], window=s["M"])
        params = build_model(s)
        hyper = s["hyper_subset"] if s["hyper_subset"] and s["hyper_subset"] > 0 else None
        # P is the training-set size for gprghq and the path count for ls; it
        # only applies to the engine that runs
        engine = s["engine"]
        fits_ls = engine == "ls" or (engine == "benchmark" and s["policy"] == "ls")
        gcfg = GprGhqConfig(n_train=(None if fits_ls else s["P"]) or 1000,
                            quad_order=s["Q"] or 16, rb_memory=s["J"],
                            mc_final_paths=s["mc_paths"], seed=s["seed"], hyper_subset=hyper,
                            threads=s["threads"] or 1)
        lcfg = LsConfig(n_paths=(s["P"] if fits_ls else None) or 100_000, degree=s["deg"],
                        rb_memory=s["J"], seed=s["seed"], threads=s["threads"] or 1)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc
    return RunConfig(s["model"], s["engine"], option, params, gcfg, lcfg, s["bench_paths"],
                     s["target_ci"], s["policy"], s["out"], s["format"], s["threads"] or 1)


BENCH_SEED_SALT = 0xB3AC


def run_engine(cfg: RunConfig) -> PriceResult:
    engine = cfg.engine
    if engine == "bc":
        return price_bc(cfg.option, cfg.params)
    if engine == "ls":
        return price_ls(cfg.option, cfg.params, cfg.ls)
    if engine == "gprghq":
        return price_gprghq(cfg.option, cfg.params, cfg.gprghq)
    return run_benchmark(cfg)


def run_benchmark(cfg: RunConfig) -> PriceResult:
    """Fit a policy, then evaluate it forward on independent paths."""
    if cfg.policy == "ls":
        fitted = price_ls(cfg.option, cfg.params, cfg.ls)
    else:
        fitted = price_gprghq(cfg.option, cfg.params, cfg.gprghq)
    seed = cfg.gprghq.seed ^ BENCH_SEED_SALT
    n_paths = cfg.bench_paths
    if cfg.target_ci is not None:
        pilot = bench_mod.evaluate_policy(fitted.surrogate, cfg.option, cfg.params,
                                          bench_mod.MIN_PILOT, seed + 1, cfg.threads)
        n_paths = max(2, bench_mod.paths_for_ci(cfg.target_ci, pilot))
    res = bench_mod.evaluate_policy(fitted.surrogate, cfg.option, cfg.params, n_paths,
                                    seed, cfg.threads)
    res.runtime_s += fitted.runtime_s
    res.config.update(policy=cfg.policy)
    return res


def result_row(cfg: RunConfig, res: PriceResult, timing: bool = True) -> dict[str, Any]:
    engine = cfg.engine
    gp = engine == "gprghq" or (engine == "benchmark" and cfg.policy == "gprghq")
    uses_ls = engine == "ls" or (engine == "benchmark" and cfg.policy == "ls")
    rb = cfg.model == "rbergomi"
    return {
        "model": cfg.model, "engine": engine, "M": cfg.option.window, "N": cfg.option.n_dates,
        "T": cfg.option.maturity, "price": res.price, "ci_radius": res.ci_radius,
        "runtime_s": res.runtime_s if timing else 0.0,
        "P": cfg.gprghq.n_train if gp else (cfg.ls.n_paths if uses_ls else res.n_paths),
        "Q": cfg.gprghq.quad_order if gp else "",
        "deg": cfg.ls.degree if uses_ls else "",
        "J": (cfg.gprghq.rb_memory if gp else cfg.ls.rb_memory) if rb and engine != "bc" else "",
        "seed": "" if engine == "bc" else cfg.gprghq.seed,
        "schema_version": SCHEMA_VERSION,
    }


def _csv_cell(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def format_rows(rows: list[dict[str, Any]], fmt: str, header: bool) -> str:
    if fmt == "json":
        return "".join(json.dumps(r) + "\n" for r in rows)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header:
        w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_csv_cell(r[c]) for c in COLUMNS])
    return buf.getvalue()


def emit(rows: list[dict[str, Any]], out: str | None, fmt: str) -> None:
    if out is None:
        sys.stdout.write(format_rows(rows, fmt, header=True))
        return
    path = Path(out)
    fresh = not path.exists() or path.stat().st_size == 0
    with path.open("a") as fh:
        fh.write(format_rows(rows, fmt, header=fresh))


# ---------------------------------------------------------------------------
# named sweeps

@dataclass(frozen=True)
class TableSpec:
    model: str
    maturity: float
    n_dates: int
    windows: dict[str, tuple[int, ...]]


TABLES = {
    "bs_t02": TableSpec("bs", 0.2, 50, {"smoke": (2, 3), "desk": (2, 3, 4, 5, 10, 20),
                                        "full": (2, 3, 4, 5, 6, 7, 8, 9, 10, 20, 30)}),
    "bs_t10": TableSpec("bs", 1.0, 250, {"smoke": (2, 3), "desk": (2, 10, 20),
                                         "full": (2, 10, 20, 30)}),
    "cs_t02": TableSpec("cs", 0.2, 50, {"smoke": (2, 3), "desk": (2, 10),
                                        "full": (2, 10, 20, 30)}),
    "cs_t10": TableSpec("cs", 1.0, 250, {"smoke": (2, 3), "desk": (2, 10),
                                         "full": (2, 10, 20, 30)}),
    "rb_t02": TableSpec("rbergomi", 0.2, 50, {"smoke": (2,), "desk": (2,),
                                              "full": (2, 10, 20, 30)}),
    "rb_t10": TableSpec("rbergomi", 1.0, 250, {"smoke": (2,), "desk": (2,),
                                               "full": (2, 10, 20, 30)}),
}
SMOKE_DATES = 10
# per-scale engine settings: P, Q (Q for BS M=2), rough-Bergomi Q, LS paths, final MC paths
SCALE_SETTINGS = {
    "smoke": dict(P=64, Q=8, Q_m2=16, Q_rb=4, ls_paths=4_000, mc_paths=4_000, bc_max=12),
    "desk": dict(P=1000, Q=16, Q_m2=64, Q_rb=8, ls_paths=100_000, mc_paths=2_000_000, bc_max=20),
    "full": dict(P=8000, Q=64, Q_m2=64, Q_rb=16, ls_paths=10_000_000, mc_paths=2_000_000,
                 bc_max=30),
}


def table_runs(table_id: str, scale: str, base: dict[str, Any]) -> list[RunConfig]:
    if table_id not in TABLES:
        raise UsageError(f"unknown table {table_id!r}; choose from {', '.join(TABLES)}")
    if scale not in SCALES:
        raise UsageError(f"unknown scale {scale!r}")
    spec = TABLES[table_id]
    st = SCALE_SETTINGS[scale]
    n_dates = SMOKE_DATES if scale == "smoke" else spec.n_dates
    runs = []
    for M in spec.windows[scale]:
        s = dict(base, model=spec.model, T=spec.maturity, N=n_dates, M=M,
                 mc_paths=st["mc_paths"])
        if spec.model == "bs" and M == 2:
            q = st["Q_m2"]
        else:
            q = st["Q_rb"] if spec.model == "rbergomi" else st["Q"]
        runs.append(build_run_config(dict(s, engine="gprghq", P=st["P"], Q=q)))
        runs.append(build_run_config(dict(s, engine="ls", P=st["ls_paths"])))
        if spec.model == "bs" and M <= st["bc_max"]:
            runs.append(build_run_config(dict(s, engine="bc")))
    return runs


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(p: argparse.ArgumentParser, with_option: bool = True) -> None:
    p.add_argument("--config", help="flat key = value settings file")
    if with_option:
        p.add_argument("--model", choices=MODELS)
        p.add_argument("--M", type=int, help="averaging window")
        p.add_argument("--N", type=int, help="number of time steps")
        p.add_argument("--T", type=float, help="maturity in years")
    for flag, typ in (("S0", float), ("r", float), ("sigma", float), ("F", float),
                      ("alpha", float), ("H", float), ("eta", float), ("rho", float),
                      ("xi0", float), ("P", int), ("Q", int), ("deg", int), ("J", int),
                      ("seed", int), ("threads", int)):
        p.add_argument(f"--{flag}", type=typ)
    p.add_argument("--mc-paths", dest="mc_paths", type=int)
    p.add_argument("--hyper-subset", dest="hyper_subset", type=int,
                   help="rows used in the likelihood search (0 = all)")
    p.add_argument("--out", help="result file (appended); stdout if omitted")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--no-timing", action="store_true",
                   help="write runtime_s as 0 so reruns are byte-identical")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mabermudan",
                                     description="Bermudan moving-average call pricing")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("price", help="price one contract with one engine")
    _add_common(p)
    p.add_argument("--engine", choices=ENGINES)
    p.add_argument("--bench-paths", dest="bench_paths", type=int)
    p.add_argument("--policy", choices=("gprghq", "ls"))

    t = sub.add_parser("table", help="run a named sweep")
    t.add_argument("table_id", choices=sorted(TABLES))
    t.add_argument("--scale", choices=SCALES, default="desk")
    _add_common(t, with_option=False)

    b = sub.add_parser("bench", help="forward evaluation of a fitted exercise policy")
    _add_common(b)
    b.add_argument("--bench-paths", dest="bench_paths", type=int)
    b.add_argument("--target-ci", dest="target_ci", type=float,
                   help="size the run for this 95%% radius after a pilot")
    b.add_argument("--policy", choices=("gprghq", "ls"))
    return parser


_NON_SETTINGS = {"command", "config", "no_timing", "table_id", "scale"}


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)  # exits with status 2 on malformed flags
    flags = {k: v for k, v in vars(args).items() if k not in _NON_SETTINGS}
    timing = not args.no_timing
    try:
        file_values = read_config_file(args.config) if args.config else {}
        settings = merge_settings(file_values, flags)
        if settings["threads"] is None:
            settings["threads"] = os.cpu_count() or 1
        if args.command == "table":
            if TABLES[args.table_id].model == "rbergomi" and settings["H"] is None:
                raise UsageError("rbergomi tables require an explicit --H")
            runs = table_runs(args.table_id, args.scale, settings)
        else:
            if args.command == "bench":
                settings["engine"] = "benchmark"
            runs = [build_run_config(settings)]
    except (UsageError, OSError) as exc:
        parser.print_usage(sys.stderr)
        print(f"mabermudan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    rows = []
    for cfg in runs:
        try:
            res = run_engine(cfg)
        except (EngineError, NumericalError, ResourceGuardError, DomainError, MemoryError) as exc:
            print(f"mabermudan: engine failure ({cfg.engine}, M={cfg.option.window}): {exc}",
                  file=sys.stderr)
            if rows:
                emit(rows, runs[0].out, runs[0].fmt)
            return EXIT_ENGINE
        rows.append(result_row(cfg, res, timing))
    emit(rows, runs[0].out, runs[0].fmt)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
