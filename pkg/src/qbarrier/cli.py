"""Command-line front end: synth, check, smt-export, simulate and reproduce.

Exit codes: 0 success (solved / all verified), 1 domain failure (unsolved,
falsified, unverified or unsafe), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import cases
from .certify import (DEFAULT_DELTA, DEFAULT_DEPTH, DEFAULT_MAX_BOXES, DEFAULT_SAMPLES, check_certificate, emit_smtlib,
                      obligations, simulate_safety, verdict_record)
from .hsos import ConfigurationError
from .qsystem import QSystem, SystemConfigError, system_from_dict
from .sampling import ThinRegionError
from .synth import BarrierCertificate, Hyperparams, NoCertificate, cleanup, synthesize

SCHEMA_JOB = "qbarrier.job/1"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("qbarrier")


class UsageError(Exception):
    pass


# -- job configuration ---------------------------------------------------------------------
@dataclass
class JobConfig:
    system: QSystem
    hyper: Hyperparams
    name: str = "job"
    budgets: dict = field(default_factory=dict)
    out: str | None = None
    seed: int = 0
    drop_tol: float = 1e-9
    round_digits: int | None = None


BUDGET_KEYS = {"samples", "depth", "delta", "max_boxes", "trajectories", "horizon"}


def load_job(path: str) -> JobConfig:
    """Read a job file; the system is inline, a file reference, or a case name."""
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"--config: file {path!r} does not exist")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    return job_from_dict(data, p.parent)


def job_from_dict(data: dict, base: Path = Path(".")) -> JobConfig:
    if not isinstance(data, dict):
        raise UsageError("job: must be an object")
    if data.get("schema") != SCHEMA_JOB:
        raise UsageError(f"schema: expected {SCHEMA_JOB!r}, got {data.get('schema')!r}")
    known = {"schema", "name", "system", "system_file", "case", "hyperparams", "budgets", "out", "seed", "cleanup"}
    extra = set(data) - known
    if extra:
        raise UsageError(f"job: unknown field(s) {sorted(extra)}")
    sources = [k for k in ("system", "system_file", "case") if k in data]
    if len(sources) != 1:
        raise UsageError("job: give exactly one of 'system', 'system_file' or 'case'")
    hyper_raw = data.get("hyperparams", {})
    try:
        if "case" in data:
            job = _case_job(data["case"])
            system = job.system
            hyper = Hyperparams.from_dict({**job.hyper.to_dict(), **hyper_raw})
        else:
            if "system_file" in data:
                ref = base / data["system_file"]
                if not ref.is_file():
                    raise UsageError(f"system_file: file {str(ref)!r} does not exist")
                sys_data = json.loads(ref.read_text())
            else:
                sys_data = data["system"]
            system = system_from_dict(sys_data)
            hyper = Hyperparams.from_dict(hyper_raw)
    except (ConfigurationError, SystemConfigError) as exc:
        raise UsageError(str(exc)) from None
    budgets = data.get("budgets", {})
    bad = set(budgets) - BUDGET_KEYS
    if bad:
        raise UsageError(f"budgets: unknown field(s) {sorted(bad)}")
    clean = data.get("cleanup", {})
    return JobConfig(system, hyper, str(data.get("name", data.get("case", "job"))), dict(budgets), data.get("out"),
                     int(data.get("seed", 0)), float(clean.get("drop_tol", 1e-9)), clean.get("round_digits"))


def _case_job(name: str) -> cases.Job:
    suite = name.split("/")[0]
    try:
        jobs = cases.suite_jobs(suite, allow_large=True)
    except ValueError as exc:
        raise UsageError(f"case: {exc}") from None
    for j in jobs:
        if j.name == name:
            return j
    raise UsageError(f"case: unknown job {name!r}; known: {', '.join(j.name for j in jobs)}")


def _budget(args, job: JobConfig | None, key: str, default):
    v = getattr(args, key, None)
    if v is not None:
        return v
    if job is not None and key in job.budgets:
        return job.budgets[key]
    return default


def _out_dir(args, job: JobConfig | None, default: str) -> Path:
    d = Path(args.out or (job.out if job and job.out else default))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _load_cert(path: str) -> BarrierCertificate:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"--cert: file {path!r} does not exist")
    try:
        return BarrierCertificate.loads(p.read_text())
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{path}: {exc}") from None


# -- reports ---------------------------------------------------------------------------------
COLUMNS = ["experiment", "qubits", "target", "expected", "status", "setup_s", "solve_s", "verdicts", "verify_s",
           "detail"]


def format_table(rows: list[dict], columns: list[str] = COLUMNS) -> str:
    cells = [[str(r.get(c, "")) for c in columns] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    line = lambda vals: "  ".join(v.ljust(w) for v, w in zip(vals, widths)).rstrip()
    out = [line(columns), line(["-" * w for w in widths])]
    out += [line(row) for row in cells]
    return "\n".join(out) + "\n"


def format_csv(rows: list[dict], columns: list[str] = COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def write_report(rows: list[dict], out: Path, stem: str, columns: list[str] = COLUMNS) -> str:
    text = format_table(rows, columns)
    (out / f"{stem}.txt").write_text(text)
    (out / f"{stem}.csv").write_text(format_csv(rows, columns))
    return text


def _verdict_summary(results) -> str:
    code = {"verified": "V", "falsified": "F", "unknown": "?"}
    return " ".join(f"{r.obligation.id}:{code[r.status]}" for r in results)


# -- pipeline ----------------------------------------------------------------------------------
def run_pipeline(system: QSystem, hyper: Hyperparams, name: str, out: Path | None, budgets: dict, seed: int,
                 check: bool = True, workers: int = 1, drop_tol: float = 1e-9, round_digits: int | None = None) -> dict:
    """synthesize -> cleanup -> check, returning one report row."""
    row = {"experiment": name, "qubits": system.n_qubits, "verdicts": "", "verify_s": "", "detail": ""}
    try:
        cert = synthesize(system, hyper)
    except NoCertificate as exc:
        row.update(status="unsolved", setup_s=_t(exc.stats.get("setup_time")), solve_s=_t(exc.stats.get("solve_time")),
                   detail=exc.reason)
        if out is not None:
            (out / f"{_slug(name)}.unsolved.json").write_text(json.dumps(
                {"status": "unsolved", "reason": exc.reason, "detail": exc.detail}, indent=1))
        return row
    except MemoryError:
        row.update(status="error", setup_s="", solve_s="", detail="out of memory")
        return row
    cert = cleanup(cert, drop_tol, round_digits)
    row.update(status="solved", setup_s=_t(cert.timestamps.get("setup_time")),
               solve_s=_t(cert.timestamps.get("solve_time")))
    if out is not None:
        (out / f"{_slug(name)}.cert.json").write_text(cert.dumps())
    if check:
        t0 = time.perf_counter()
        results = check_certificate(system, cert, samples=budgets.get("samples", DEFAULT_SAMPLES),
                                    delta=budgets.get("delta", DEFAULT_DELTA), depth=budgets.get("depth", DEFAULT_DEPTH),
                                    seed=seed, workers=workers, max_boxes=budgets.get("max_boxes", DEFAULT_MAX_BOXES))
        row["verify_s"] = _t(time.perf_counter() - t0)
        row["verdicts"] = _verdict_summary(results)
        if out is not None:
            (out / f"{_slug(name)}.check.json").write_text(
                json.dumps([verdict_record(r) for r in results], indent=1))
    return row


def _t(x) -> str:
    return "" if x is None else f"{x:.2f}"


def _slug(name: str) -> str:
    return name.replace("/", "_").replace(" ", "_").replace("=", "")


def _reproduce_job(args):
    job, out, budgets, seed, check = args
    row = run_pipeline(job.system, job.hyper, job.name, out, budgets, seed, check)
    row.update(experiment=job.name, target=f"|{job.target}>", expected=job.expected)
    return row


# -- commands -----------------------------------------------------------------------------------
def cmd_synth(args) -> int:
    job = load_job(args.config)
    out = _out_dir(args, job, "out")
    row = run_pipeline(job.system, job.hyper, job.name, out, job.budgets, _seed(args, job), check=False,
                       drop_tol=job.drop_tol, round_digits=job.round_digits)
    print(write_report([row], out, "synth"), end="")
    return EXIT_OK if row["status"] == "solved" else EXIT_FAIL


def _seed(args, job) -> int:
    return args.seed if args.seed is not None else (job.seed if job else 0)


def cmd_check(args) -> int:
    job = load_job(args.config)
    cert = _load_cert(args.cert)
    try:
        cert.check_matches(job.system)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    results = check_certificate(job.system, cert, samples=_budget(args, job, "samples", DEFAULT_SAMPLES),
                                delta=_budget(args, job, "delta", DEFAULT_DELTA),
                                depth=_budget(args, job, "depth", DEFAULT_DEPTH), seed=_seed(args, job),
                                workers=args.workers, max_boxes=_budget(args, job, "max_boxes", DEFAULT_MAX_BOXES))
    rows = [{"obligation": r.obligation.id, "status": r.status, "interval": str(r.interval),
             "sampling": str(r.sampling)} for r in results]
    cols = ["obligation", "status", "interval", "sampling"]
    text = format_table(rows, cols)
    if args.out:
        out = _out_dir(args, job, "out")
        write_report(rows, out, "check", cols)
        (out / "check.json").write_text(json.dumps([verdict_record(r) for r in results], indent=1))
    print(text, end="")
    return EXIT_OK if all(r.status == "verified" for r in results) else EXIT_FAIL


def cmd_smt_export(args) -> int:
    job = load_job(args.config)
    cert = _load_cert(args.cert)
    try:
        obs = obligations(job.system, cert)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args, job, "smt")
    paths = emit_smtlib(obs, out)
    for p in paths:
        print(p)
    return EXIT_OK


def cmd_simulate(args) -> int:
    job = load_job(args.config)
    try:
        rep = simulate_safety(job.system, _budget(args, job, "trajectories", 10_000),
                              _budget(args, job, "horizon", 100), _seed(args, job))
    except ThinRegionError as exc:
        raise UsageError(f"initial region: {exc}") from None
    cols = ["experiment", "trajectories", "horizon", "unsafe_entries", "min_unsafe_margin"]
    row = {"experiment": job.name, **rep, "min_unsafe_margin": f"{rep['min_unsafe_margin']:.6g}"}
    if args.out:
        write_report([row], _out_dir(args, job, "out"), "simulate", cols)
    print(format_table([row], cols), end="")
    return EXIT_OK if rep["unsafe_entries"] == 0 else EXIT_FAIL


def cmd_reproduce(args) -> int:
    try:
        jobs = cases.suite_jobs(args.suite, args.allow_large)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _out_dir(args, None, f"reproduce-{args.suite}")
    budgets = {k: v for k in ("samples", "depth", "delta", "max_boxes") if (v := getattr(args, k, None)) is not None}
    seed = args.seed or 0
    work = [(j, out, budgets, seed, not args.no_check) for j in jobs]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            rows = list(pool.map(_reproduce_job, work))
    else:
        rows = []
        for w in work:
            rows.append(_reproduce_job(w))
            log.info("%s: %s", rows[-1]["experiment"], rows[-1]["status"])
    print(write_report(rows, out, "report"), end="")
    return EXIT_OK if all(r["status"] == r["expected"] for r in rows) else EXIT_FAIL


# -- argument parsing ----------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qbarrier", description="Barrier certificates for quantum circuits.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True, cert=False):
        if config:
            p.add_argument("--config", required=True, metavar="PATH", help="job configuration (JSON)")
        if cert:
            p.add_argument("--cert", required=True, metavar="PATH", help="certificate file")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--seed", type=int)

    def budgets(p):
        p.add_argument("--samples", type=int)
        p.add_argument("--depth", type=int)
        p.add_argument("--delta", type=float)
        p.add_argument("--max-boxes", dest="max_boxes", type=int)
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("synth", help="synthesize a certificate")
    common(p)
    p.set_defaults(func=cmd_synth)
    p = sub.add_parser("check", help="check a certificate against a system")
    common(p, cert=True)
    budgets(p)
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("smt-export", help="write one SMT-LIB file per proof obligation")
    common(p, cert=True)
    p.set_defaults(func=cmd_smt_export)
    p = sub.add_parser("simulate", help="simulate random trajectories and count unsafe visits")
    common(p)
    p.add_argument("--trajectories", type=int)
    p.add_argument("--horizon", type=int)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("reproduce", help="run a case-study suite")
    p.add_argument("suite", choices=cases.SUITES + ("all",))
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--seed", type=int)
    p.add_argument("--allow-large", action="store_true", help="include the 3-qubit job")
    p.add_argument("--no-check", action="store_true", help="skip certificate checking")
    budgets(p)
    p.set_defaults(func=cmd_reproduce)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
