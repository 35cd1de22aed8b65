"""Config-driven experiment runner.

Subcommands:

* ``oracle``  - tabulate oracle moments and conditional-expectation
  norms for the configured polynomials.
* ``sample``  - draw model samples at each scale and persist them in
  the binary tuple container.
* ``verify``  - run hypothesis reports 1-4 plus the collapse test for
  every configured polynomial; exit 0 iff all rows pass.
* ``cover``   - covering-number experiments on a sampled point cloud.
* ``all``     - everything above, in that order.

A run owns its output directory through a lock file.  The manifest is
written up front with status "incomplete" and finalized at the end;
report bodies (report.json and the CSVs) carry no timestamps, so two
runs with the same config and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .geometry import PointCloud, covering_number
from .models import sample_model
from .ncpoly import write_tuple
from .seeds import derive_seed
from .verify import (
    HypothesisReport,
    ReportRow,
    check_norm_bounds,
    collapse_test,
    concentration_report,
    convergence_report,
    external_averaging_report,
    rows_to_csv,
    sample_seed,
)


class LockError(RuntimeError):
    pass


class _RunDir:
    """Exclusive ownership of the output directory via a lock file."""

    def __init__(self, path):
        self.path = path
        self.lock = os.path.join(path, ".lock")

    def __enter__(self):
        os.makedirs(self.path, exist_ok=True)
        try:
            fd = os.open(self.lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise LockError(f"output dir {self.path} is locked by another run") from None
        os.close(fd)
        return self

    def __exit__(self, *exc):
        try:
            os.remove(self.lock)
        except FileNotFoundError:
            pass
        return False


def _write_json(path, obj):
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def _manifest(cfg, outdir, emitted, status, started, finished=None):
    return {
        "experiment": cfg.experiment,
        "config_hash": cfg.config_hash(),
        "code_version": __version__,
        "seed": cfg.seed,
        "status": status,
        "started_at": started,
        "finished_at": finished,
        "files": sorted(emitted),
    }


def run_oracle(cfg, outdir, emitted):
    oracle = cfg.build_oracle()
    moment_lines = ["poly,re,im"]
    norm_lines = ["poly,cond_exp_norm"]
    table = {}
    for src, p in cfg.polynomials:
        val = oracle.poly_moment(p)
        ce = oracle.cond_exp_norm(p, target=1) if oracle.amalgam is None else None
        moment_lines.append(f"{src},{val.real:.12g},{val.imag:.12g}")
        if ce is not None:
            norm_lines.append(f"{src},{ce:.12g}")
        table[src] = {
            "moment_re": val.real,
            "moment_im": val.imag,
            "cond_exp_norm": ce,
        }
    with open(os.path.join(outdir, "moments.csv"), "w") as f:
        f.write("\n".join(moment_lines) + "\n")
    emitted.append("moments.csv")
    if len(norm_lines) > 1:
        with open(os.path.join(outdir, "condexp.csv"), "w") as f:
            f.write("\n".join(norm_lines) + "\n")
        emitted.append("condexp.csv")
    return {"oracle": table}


def run_sample(cfg, outdir, emitted, max_dumps=8):
    sample_dir = os.path.join(outdir, "samples")
    os.makedirs(sample_dir, exist_ok=True)
    for k in cfg.k_list:
        for s in range(min(cfg.samples, max_dumps)):
            rng = np.random.default_rng(sample_seed(cfg.seed, k, s))
            mt = sample_model(cfg.model, k, rng)
            name = f"samples/k{k}_s{s:04d}.nct"
            write_tuple(mt, os.path.join(outdir, name))
            emitted.append(name)
    return {"samples": {"per_k": min(cfg.samples, max_dumps), "k_list": cfg.k_list}}


def run_verify(cfg, outdir, emitted, jobs=1):
    oracle = cfg.build_oracle()
    tol = cfg.tolerances
    k_last = cfg.k_list[-1]
    reports = []

    reports.append(
        check_norm_bounds(
            cfg.model,
            k_last,
            min(cfg.samples, 20),
            base_seed=cfg.seed,
            jobs=jobs,
            norm_tol=tol["norm_margin"],
        )
    )
    reports.append(
        convergence_report(
            cfg.model,
            cfg.polynomials,
            cfg.k_list,
            cfg.samples,
            base_seed=cfg.seed,
            oracle=oracle,
            tol_abs=tol["moment_abs"],
            jobs=jobs,
        )
    )
    if len(cfg.k_list) >= 3:
        nondeterministic = [
            (src, p)
            for src, p in cfg.polynomials
            if any(g.factor not in (0, 1) for g in p.generators())
        ]
        probe = nondeterministic[0] if nondeterministic else cfg.polynomials[0]
        reports.append(
            concentration_report(
                cfg.model,
                probe[1],
                cfg.k_list,
                max(cfg.samples, 50),
                base_seed=cfg.seed,
                eps_grid=tuple(tol["tail_eps_grid"]),
                slope_range=tuple(tol["slope_range"]),
                jobs=jobs,
            )
        )
    if oracle.amalgam is None:
        reports.append(
            external_averaging_report(
                cfg.model,
                cfg.polynomials,
                [k_last],
                cfg.samples,
                base_seed=cfg.seed,
                oracle=oracle,
                tol=tol["eap"],
                jobs=jobs,
            )
        )
        collapse_rows = []
        for src, p in cfg.polynomials:
            res = collapse_test(
                cfg.model,
                p,
                k_last,
                cfg.samples,
                base_seed=cfg.seed,
                oracle=oracle,
                tol=tol["collapse"],
                jobs=jobs,
            )
            collapse_rows.append(
                ReportRow(
                    hypothesis="collapse",
                    label=src,
                    k=k_last,
                    n=res.estimator.n,
                    estimate=res.estimator.value,
                    stderr=res.estimator.stderr,
                    oracle=res.oracle,
                    tol=tol["collapse"],
                    passed=res.consistent,
                    note=res.verdict,
                )
            )
        reports.append(
            HypothesisReport(
                hypothesis="collapse",
                rows=collapse_rows,
                metadata={"seed": cfg.seed, "samples": cfg.samples},
            )
        )

    all_rows = [r for rep in reports for r in rep.rows]
    with open(os.path.join(outdir, "report.csv"), "w") as f:
        f.write(rows_to_csv(all_rows))
    emitted.append("report.csv")
    payload = {"reports": [rep.to_jsonable() for rep in reports]}
    payload["all_passed"] = all(rep.passed for rep in reports)
    return payload


def run_cover(cfg, outdir, emitted, jobs=1):
    lines = ["n,F,eps,lower,upper,log_upper_over_n2"]
    results = []
    cloud_size = min(cfg.samples, 64)
    for k in cfg.k_list:
        points = []
        for s in range(cloud_size):
            rng = np.random.default_rng(sample_seed(cfg.seed, k, s))
            points.append(sample_model(cfg.model, k, rng))
        cloud = PointCloud(points)
        coords = points[0].generators()
        fdesc = "+".join(str(g) for g in coords)
        n = points[0].dim
        for eps in cfg.tolerances["cover_eps"]:
            lower, upper = covering_number(cloud, coords, eps)
            log_density = float(np.log(upper) / n**2)
            lines.append(f"{n},{fdesc},{eps:g},{lower},{upper},{log_density:.12g}")
            results.append(
                {
                    "n": n,
                    "F": fdesc,
                    "eps": eps,
                    "lower": lower,
                    "upper": upper,
                    "log_upper_over_n2": log_density,
                }
            )
    with open(os.path.join(outdir, "cover.csv"), "w") as f:
        f.write("\n".join(lines) + "\n")
    emitted.append("cover.csv")
    return {"cover": results}


def run(command, config_path, seed=None, out=None, jobs=None):
    """Execute one subcommand; returns the process exit code."""
    try:
        cfg = load_config(config_path)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return 2
    if seed is not None:
        cfg.seed = int(seed)
    outdir = out if out is not None else cfg.output_dir
    if jobs is None:
        jobs = int(os.environ.get("FREEBENCH_JOBS", "1"))

    emitted = []
    started = time.strftime("%Y-%m-%dT%H:%M:%S")
    try:
        with _RunDir(outdir):
            _write_json(
                os.path.join(outdir, "manifest.json"),
                _manifest(cfg, outdir, emitted, "incomplete", started),
            )
            payload = {"experiment": cfg.experiment, "seed": cfg.seed,
                       "config_hash": cfg.config_hash()}
            failed = False
            steps = {
                "oracle": [run_oracle],
                "sample": [run_sample],
                "verify": [run_verify],
                "cover": [run_cover],
                "all": [run_oracle, run_sample, run_verify, run_cover],
            }[command]
            for step in steps:
                if step in (run_verify, run_cover):
                    payload.update(step(cfg, outdir, emitted, jobs=jobs))
                else:
                    payload.update(step(cfg, outdir, emitted))
            if "all_passed" in payload:
                failed = not payload["all_passed"]
            _write_json(os.path.join(outdir, "report.json"), payload)
            emitted.append("report.json")
            _write_json(
                os.path.join(outdir, "manifest.json"),
                _manifest(
                    cfg,
                    outdir,
                    emitted,
                    "complete",
                    started,
                    time.strftime("%Y-%m-%dT%H:%M:%S"),
                ),
            )
            return 1 if failed else 0
    except LockError as e:
        print(f"lock error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 3


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="freebench",
        description="Random matrix workbench for free products.",
    )
    parser.add_argument(
        "command", choices=["oracle", "sample", "verify", "cover", "all"]
    )
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument("--seed", type=int, default=None, help="override the base seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument(
        "--jobs",
        type=int,
        default=None,
        help="sampling worker threads (default: env FREEBENCH_JOBS or 1)",
    )
    args = parser.parse_args(argv)
    return run(args.command, args.config, seed=args.seed, out=args.out, jobs=args.jobs)


if __name__ == "__main__":
    sys.exit(main())
