"""Run the desk-scale sweeps and append the rows to CSV files.

    python scripts/reproduce_desk_tables.py [--out-dir results] [--tables bs_t02 cs_t02]

The rough-Bergomi sweeps need a Hurst parameter (``--H``, default 0.07).
"""
import argparse
import pathlib
import sys
import time

from mabermudan.cli import TABLES, main


def parse_args(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--tables", nargs="+", default=["bs_t02", "cs_t02", "rb_t02"], choices=sorted(TABLES))
    ap.add_argument("--scale", default="desk", choices=["smoke", "desk", "full"])
    ap.add_argument("--H", default="0.07")
    ap.add_argument("--threads", default="1")
    return ap.parse_args(argv)


def run(args) -> int:
    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    status = 0
    for table in args.tables:
        out = out_dir / f"{table}_{args.scale}.csv"
        cmd = ["table", table, "--scale", args.scale, "--threads", args.threads, "--out", str(out)]
        if TABLES[table].model == "rbergomi":
            cmd += ["--H", args.H]
        t0 = time.perf_counter()
        code = main(cmd)
        print(f"{table}: exit {code}, {time.perf_counter() - t0:.0f}s -> {out}", flush=True)
        status = status or code
    return status


if __name__ == "__main__":
    sys.exit(run(parse_args()))
