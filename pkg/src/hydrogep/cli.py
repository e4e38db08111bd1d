"""Command-line front end: generate, solve, evaluate, compare.

A run is described by one JSON (or TOML) config; flags override its entries.
Relative paths in a config file are taken relative to that file.  ``d1`` names
the bundled reference system and its scenario generator.

Exit codes: 0 success, 2 usage or input error, 3 solver failure,
4 non-convergence (``on_nonconvergence = "warn"`` turns it into a warning).
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

import click

from . import __version__
from .decomp import METHODS, MasterError, RecourseError, SolveOptions, solve
from .decomp.io import ArtifactError, read_solution, write_solution, write_trace
from .lp import LpError
from .model import ModelError, compile_compact, d1_spec, d1_system, load_system
from .model.instances import D1_SCENARIOS, D1_SEED
from .policy import policy_metrics, refit_ldr, simulate, write_metrics, write_quantiles
from .scenario import ScenarioSpec, generate, load_csv, save_csv

log = logging.getLogger("hydrogep")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_NONCONVERGED = 0, 2, 3, 4
BUILTIN = "d1"
DEFAULTS = {
    "system": BUILTIN,
    "scenarios": {"spec": BUILTIN, "n": D1_SCENARIOS, "seed": D1_SEED},
    "method": "abdmm",
    "eps": 1e-3,
    "max_iter": 200,
    "rho": None,
    "workers": 1,
    "output": "run",
    "oos": {"n": 200, "seed": 1},
    "record_time": True,
    "time_limit": None,
    "anticipative": False,
    "on_nonconvergence": "error",
}
# entries that never change results and stay out of the fingerprint
_NEUTRAL = ("workers", "output", "on_nonconvergence")


class Usage(click.ClickException):
    exit_code = EXIT_USAGE


class SolverFailure(click.ClickException):
    exit_code = EXIT_SOLVER


class NotConverged(click.ClickException):
    exit_code = EXIT_NONCONVERGED


# -- configuration ---------------------------------------------------------------


def _read_config(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise Usage(f"cannot read config {path}: {e.strerror}") from None
    try:
        if p.suffix == ".toml":
            try:
                import tomllib
            except ImportError:  # Python 3.10
                raise Usage("TOML configs need Python 3.11; use JSON") from None
            doc = tomllib.loads(text)
        else:
            doc = json.loads(text)
    except ValueError as e:
        raise Usage(f"config {path} is not valid: {e}") from None
    if not isinstance(doc, dict):
        raise Usage(f"config {path} must hold an object")
    unknown = set(doc) - set(DEFAULTS)
    if unknown:
        raise Usage(f"unknown config entries: {', '.join(sorted(unknown))}")
    base = p.resolve().parent

    def rel(v):
        return v if v == BUILTIN or os.path.isabs(v) else str(base / v)

    if isinstance(doc.get("system"), str):
        doc["system"] = rel(doc["system"])
    for key in ("scenarios", "oos"):
        src = doc.get(key)
        if isinstance(src, dict):
            for f in ("file", "spec"):
                if isinstance(src.get(f), str):
                    src[f] = rel(src[f])
    if isinstance(doc.get("output"), str):
        doc["output"] = rel(doc["output"])
    return doc


def resolve_config(path=None, **flags) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if path is not None:
        cfg.update(_read_config(path))
    for k, v in flags.items():
        if v is not None:
            cfg[k] = v
    if cfg["method"] not in METHODS:
        raise Usage(f"unknown method {cfg['method']!r}; choose one of {', '.join(METHODS)}")
    if cfg["rho"] is not None and cfg["method"] != "abdmm":
        raise Usage("rho applies to the abdmm method only")
    try:
        cfg["eps"] = float(cfg["eps"])
        cfg["max_iter"] = int(cfg["max_iter"])
        cfg["workers"] = int(cfg["workers"])
    except (TypeError, ValueError):
        raise Usage("eps, max_iter and workers must be numbers") from None
    if not cfg["eps"] > 0:
        raise Usage("eps must be positive")
    if cfg["max_iter"] < 1 or not 1 <= cfg["workers"] <= 64:
        raise Usage("max_iter must be at least 1 and workers between 1 and 64")
    if cfg["on_nonconvergence"] not in ("error", "warn"):
        raise Usage("on_nonconvergence must be 'error' or 'warn'")
    return cfg


def fingerprint(cfg: dict) -> str:
    doc = {k: v for k, v in cfg.items() if k not in _NEUTRAL}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def _load_system(ref):
    if ref == BUILTIN:
        return d1_system()
    try:
        return load_system(ref)
    except OSError as e:
        raise Usage(f"cannot read system {ref}: {e.strerror}") from None
    except (ValueError, KeyError) as e:
        raise Usage(f"invalid system file {ref}: {e}") from None


def _load_spec(ref) -> ScenarioSpec:
    if ref == BUILTIN:
        return d1_spec()
    try:
        with open(ref, encoding="utf-8") as fh:
            return ScenarioSpec.from_dict(json.load(fh))
    except OSError as e:
        raise Usage(f"cannot read generator spec {ref}: {e.strerror}") from None
    except (ValueError, TypeError) as e:
        raise Usage(f"invalid generator spec {ref}: {e}") from None


def _load_scenarios(src, system, what="scenarios"):
    if not isinstance(src, dict):
        raise Usage(f"{what} must be an object with 'file' or 'spec', 'n', 'seed'")
    try:
        if "file" in src:
            return load_csv(src["file"])
        if "spec" not in src:
            raise Usage(f"{what} needs a 'file' or a generator 'spec'")
        return generate(_load_spec(src["spec"]), system, int(src.get("n", 1)), int(src.get("seed", 0)))
    except OSError as e:
        raise Usage(f"cannot read {what} file: {e.strerror}") from None
    except ValueError as e:
        raise Usage(f"invalid {what}: {e}") from None


def _oos_source(cfg: dict) -> dict:
    oos = dict(cfg["oos"])
    if "file" not in oos and "spec" not in oos:
        spec = cfg["scenarios"].get("spec") if isinstance(cfg["scenarios"], dict) else None
        if spec is None:
            raise Usage("oos needs a 'file' or a 'spec' when the scenarios come from a file")
        oos["spec"] = spec
    return oos


def _header(cfg, system, scen, **extra) -> dict:
    src = cfg["scenarios"] if isinstance(cfg["scenarios"], dict) else {}
    return {"version": __version__, "config_fingerprint": fingerprint(cfg),
            "seed": src.get("seed", scen.seed if scen.seed is not None else ""),
            "system_fingerprint": system.fingerprint(), "scenario_fingerprint": scen.fingerprint(), **extra}


def _options(cfg: dict) -> SolveOptions:
    return SolveOptions(eps=cfg["eps"], max_iter=cfg["max_iter"], workers=cfg["workers"],
                        rho=1.0 if cfg["rho"] is None else float(cfg["rho"]),
                        record_time=bool(cfg["record_time"]), time_limit=cfg["time_limit"])


def _run(cm, method, opts):
    try:
        return solve(cm, method, opts)
    except (LpError, MasterError, RecourseError, RuntimeError) as e:
        raise SolverFailure(f"{method}: {e}") from None


def _compile(system, scen, anticipative=False):
    try:
        return compile_compact(system, scen, anticipative=anticipative)
    except (ModelError, ValueError) as e:
        raise Usage(f"model does not fit the data: {e}") from None


def _nonconvergence(cfg, what):
    msg = f"{what} did not reach the gap tolerance"
    if cfg["on_nonconvergence"] == "warn":
        click.echo(f"warning: {msg}", err=True)
        return
    raise NotConverged(msg)


def summary_text(report, cm, header) -> str:
    inv = cm.layout.inv
    built = [n for n, v in zip(cm.layout.unit_names, report.x[inv]) if v > 0.5] if report.x is not None else []
    lines = [
        f"method                {report.method}",
        f"termination           {report.termination}",
        f"iterations            {report.iterations}",
        f"time (s)              {report.seconds:.2f}",
        f"upper bound ($)       {report.objective:.6f}",
        f"lower bound ($)       {report.lb:.6f}",
        f"gap (%)               {100 * report.gap:.4f}",
        f"masters               {report.master_count}",
        f"built                 {', '.join(built) if built else '-'}",
    ]
    lines += [f"{k:<22}{v}" for k, v in header.items() if k != "method"]
    return "\n".join(lines) + "\n"


# -- commands --------------------------------------------------------------------


@click.group()
@click.version_option(__version__)
@click.option("-v", "--verbose", is_flag=True, help="Log solver progress.")
def main(verbose):
    """Stochastic hydrothermal expansion planning."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")


@main.command("generate")
@click.option("--config", "config", type=click.Path(), help="Run config (uses its scenarios entry).")
@click.option("--system", help="System JSON, or 'd1'.")
@click.option("--spec", help="Generator spec JSON, or 'd1'.")
@click.option("-n", "--count", type=int, help="Number of scenarios.")
@click.option("--seed", type=int, help="Generator seed.")
@click.option("-o", "--out", required=True, type=click.Path(), help="Scenario CSV to write.")
def cmd_generate(config, system, spec, count, seed, out):
    """Draw scenarios and write them as CSV."""
    cfg = resolve_config(config, system=system)
    src = dict(cfg["scenarios"]) if config else {}
    if spec is not None:
        src["spec"] = spec
    if "spec" not in src:
        raise Usage("a generator spec is required (--spec or the config's scenarios.spec)")
    if count is not None:
        src["n"] = count
    if seed is not None:
        src["seed"] = seed
    src.pop("file", None)
    if int(src.get("n", 0)) < 1:
        raise Usage("scenario count must be at least 1")
    sysd = _load_system(cfg["system"])
    scen = _load_scenarios(src, sysd)
    save_csv(scen, out)
    click.echo(f"{scen.count} scenarios written to {out}; fingerprint {scen.fingerprint()}")


_RUN_OPTIONS = [
    click.option("--config", "config", type=click.Path(), help="Run config (JSON or TOML)."),
    click.option("--system", help="System JSON, or 'd1'."),
    click.option("--scenarios", "scenarios_file", type=click.Path(), help="Scenario CSV (overrides the config)."),
    click.option("--method", help=f"One of {', '.join(METHODS)}."),
    click.option("--eps", type=float, help="Relative gap tolerance."),
    click.option("--max-iter", type=int, help="Iteration cap."),
    click.option("--rho", type=float, help="Consensus weight of the rule coefficients (abdmm)."),
    click.option("--workers", type=int, help="Worker threads."),
    click.option("-o", "--out", "output", type=click.Path(), help="Output directory."),
    click.option("--time/--no-time", "record_time", default=None, help="Record wall time in traces."),
    click.option("--warn-nonconvergence", is_flag=True, default=None, help="Exit 0 when the gap is not met."),
]


def run_options(fn):
    for opt in reversed(_RUN_OPTIONS):
        fn = opt(fn)
    return fn


def _flags(scenarios_file, warn_nonconvergence, **kw):
    if scenarios_file is not None:
        kw["scenarios"] = {"file": scenarios_file}
    if warn_nonconvergence:
        kw["on_nonconvergence"] = "warn"
    return kw


@main.command("solve")
@run_options
@click.option("--anticipative", is_flag=True, default=None, help="Drop the decision rule (relaxation).")
def cmd_solve(config, scenarios_file, warn_nonconvergence, **kw):
    """Solve one instance; writes trace.csv, solution.json and summary.txt."""
    cfg = resolve_config(config, **_flags(scenarios_file, warn_nonconvergence, **kw))
    sysd = _load_system(cfg["system"])
    scen = _load_scenarios(cfg["scenarios"], sysd)
    cm = _compile(sysd, scen, bool(cfg["anticipative"]))
    report = _run(cm, cfg["method"], _options(cfg))
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    header = _header(cfg, sysd, scen, method=cfg["method"], anticipative=bool(cfg["anticipative"]))
    write_trace(out / "trace.csv", report, header)
    if report.x is not None:
        write_solution(out / "solution.json", cm, report, header)
    text = summary_text(report, cm, header)
    (out / "summary.txt").write_text(text, encoding="utf-8")
    click.echo(text, nl=False)
    if not report.converged:
        _nonconvergence(cfg, cfg["method"])


@main.command("evaluate")
@run_options
@click.option("--solution", required=True, type=click.Path(), help="solution.json of the plan to evaluate.")
@click.option("--anticipative-solution", type=click.Path(),
              help="solution.json of the relaxation; its rule is refitted and VNAP reported.")
@click.option("--oos", "oos_file", type=click.Path(), help="Out-of-sample scenario CSV.")
def cmd_evaluate(config, scenarios_file, warn_nonconvergence, solution, anticipative_solution, oos_file, **kw):
    """Operate stored plans on unseen scenarios; writes metrics.json and price_quantiles.csv."""
    cfg = resolve_config(config, **_flags(scenarios_file, warn_nonconvergence, **kw))
    if oos_file is not None:
        cfg["oos"] = {"file": oos_file}
    sysd = _load_system(cfg["system"])
    scen_in = _load_scenarios(cfg["scenarios"], sysd)
    cm_in = _compile(sysd, scen_in)
    oos = _load_scenarios(_oos_source(cfg), sysd, "oos")
    cm_oos = _compile(sysd, oos)

    def load(path):
        if not Path(path).exists():
            raise Usage(f"solution file {path} does not exist")
        try:
            return read_solution(path, cm_in)
        except (ArtifactError, ValueError, KeyError) as e:
            raise Usage(f"{path}: {e}") from None

    sims, metrics = {}, {}
    try:
        doc = load(solution)
        sims["nonanticipative"] = simulate(sysd, doc["x"], oos, cfg["workers"], cm_oos)
        metrics["nonanticipative"] = policy_metrics(sims["nonanticipative"], doc["objective"])
        if anticipative_solution is not None:
            doc_a = load(anticipative_solution)
            x_a, _ = refit_ldr(cm_in, doc_a["x"][cm_in.layout.inv])
            sims["anticipative"] = simulate(sysd, x_a, oos, cfg["workers"], cm_oos)
            metrics["anticipative"] = policy_metrics(sims["anticipative"], doc_a["objective"])
    except (LpError, RecourseError, RuntimeError) as e:
        raise SolverFailure(str(e)) from None
    header = _header(cfg, sysd, scen_in, oos_fingerprint=oos.fingerprint(), oos_count=oos.count)
    if "anticipative" in metrics:
        vnap = float(sims["anticipative"].total - sims["nonanticipative"].total)
        header["vnap"] = vnap
        metrics = {k: m.__class__(**{**m.__dict__, "vnap": vnap}) for k, m in metrics.items()}
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(out / "metrics.json", metrics, header)
    write_quantiles(out / "price_quantiles.csv", sims, {"config_fingerprint": header["config_fingerprint"]})
    for name, m in metrics.items():
        click.echo(f"{name:<16} total {m.expected_total_cost:.6f}  regret {m.regret:.6f}  "
                   f"avg price {m.average_spot_price:.4f}  deficit prob {m.deficit_probability:.4f}")
    if "vnap" in header:
        click.echo(f"vnap {header['vnap']:.6f}")


@main.command("compare")
@run_options
@click.option("--methods", default=",".join(METHODS), show_default=True, help="Comma-separated methods.")
def cmd_compare(config, scenarios_file, warn_nonconvergence, methods, **kw):
    """Run several methods on one instance and tabulate iterations, time and objective."""
    chosen = [m.strip() for m in methods.split(",") if m.strip()]
    bad = [m for m in chosen if m not in METHODS]
    if not chosen or bad:
        raise Usage(f"unknown method(s) {', '.join(bad) or '(none)'}; choose from {', '.join(METHODS)}")
    flags = _flags(scenarios_file, warn_nonconvergence, **kw)
    rho = flags.pop("rho", None)
    cfg = resolve_config(config, **flags)
    if rho is not None:
        cfg["rho"] = rho
    sysd = _load_system(cfg["system"])
    scen = _load_scenarios(cfg["scenarios"], sysd)
    cm = _compile(sysd, scen)
    rows = []
    for m in chosen:
        r = _run(cm, m, _options(cfg))
        rows.append({"method": m, "iterations": r.iterations, "seconds": round(r.seconds, 3),
                     "objective": r.objective, "lower_bound": r.lb, "gap": r.gap, "converged": r.converged})
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_fingerprint={fingerprint(cfg)}\n")
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    click.echo(f"{'method':<8}{'iter':>6}{'seconds':>10}{'objective':>20}{'gap %':>10}  converged")
    for r in rows:
        flag = "yes" if r["converged"] else "NO"
        click.echo(f"{r['method']:<8}{r['iterations']:>6}{r['seconds']:>10.2f}{r['objective']:>20.4f}"
                   f"{100 * r['gap']:>10.4f}  {flag}")
    if not all(r["converged"] for r in rows):
        _nonconvergence(cfg, ", ".join(r["method"] for r in rows if not r["converged"]))


if __name__ == "__main__":
    sys.exit(main())
