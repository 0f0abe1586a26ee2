"""Command-line front end.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 usage or config error,
3 resource, precision or cache-integrity error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np

from . import __version__, cache, dirpoly, forms, lfunc, moments, stats
from .errors import DomainError, InvalidArgument, LabError, PrecisionError, ResourceLimit, ScheduleInfeasible, TableTooShort

EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_RESOURCE = 0, 1, 2, 3


class ConfigError(LabError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid config: " + "; ".join(problems))


def version_string() -> str:
    """git describe output when run from a checkout, else v<package version>."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"], cwd=here, capture_output=True, text=True, timeout=5
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"v{__version__}-{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


# ---------------------------------------------------------------------------
# config handling

def _jsonable(x):
    if dataclasses.is_dataclass(x) and not isinstance(x, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(x).items() if k != "samples"}
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, (np.floating,)):
        return _jsonable(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(items: list[str] | None) -> dict:
    out = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError([f"override {item!r} is not KEY=VALUE"])
        v = _parse_value(value)
        if not isinstance(v, (int, float)):
            raise ConfigError([f"override {key} must be numeric"])
        out[key.strip()] = float(v)
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"config: cannot read {path}: {exc.strerror}"]) from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"config: not valid JSON ({exc.msg} at line {exc.lineno})"]) from None
    if not isinstance(cfg, dict):
        raise ConfigError(["config: top level must be an object"])
    return cfg


def _plan(block: dict | None, seed: int | None, problems: list[str], where: str = "plan") -> stats.SamplePlan | None:
    if not isinstance(block, dict):
        problems.append(f"{where}: missing object")
        return None
    fields = {f.name for f in dataclasses.fields(stats.SamplePlan)}
    extra = set(block) - fields
    for k in sorted(extra):
        problems.append(f"{where}.{k}: unknown field")
    T = block.get("T")
    count = block.get("count")
    if not isinstance(T, (int, float)) or not T >= 100:
        problems.append(f"{where}.T: must be a number >= 100")
    if not isinstance(count, int) or isinstance(count, bool) or count < 2:
        problems.append(f"{where}.count: must be an integer >= 2")
    sigma = block.get("sigma", 0.5)
    if not isinstance(sigma, (int, float)) or not 0.5 <= sigma <= 1:
        problems.append(f"{where}.sigma: must lie in [1/2, 1]")
    mode = block.get("mode", "uniform_random")
    if mode not in ("uniform_random", "equispaced"):
        problems.append(f"{where}.mode: must be uniform_random or equispaced")
    sd = block.get("seed", 0) if seed is None else seed
    if not isinstance(sd, int) or not 0 <= sd < 2**64:
        problems.append(f"{where}.seed: must be an unsigned 64-bit integer")
    if problems:
        return None
    return stats.SamplePlan(float(T), count, sd, mode, float(sigma))


def _eval_cfg(block: dict | None, problems: list[str]) -> lfunc.EvalConfig:
    block = block or {}
    names = {f.name for f in dataclasses.fields(lfunc.EvalConfig)}
    for k in sorted(set(block) - names):
        problems.append(f"eval.{k}: unknown field")
    try:
        return lfunc.EvalConfig(**{k: v for k, v in block.items() if k in names})
    except (InvalidArgument, TypeError) as exc:
        problems.append(f"eval: {exc}")
        return lfunc.EvalConfig()


def _schedule(T: float, block: dict | None, overrides: dict, problems: list[str]):
    merged = dict(block or {})
    merged.update(overrides)
    try:
        return dirpoly.schedule(T, merged or None)
    except (InvalidArgument, ScheduleInfeasible) as exc:
        problems.append(f"schedule: {exc}")
        return None


def _form_ids(value, problems: list[str], where: str, minimum: int = 1) -> list[str]:
    ids = [value] if isinstance(value, str) else value
    if not isinstance(ids, list) or not all(isinstance(x, str) for x in ids):
        problems.append(f"{where}: must be a form id or list of form ids")
        return []
    for fid in ids:
        try:
            forms.describe(fid)
        except InvalidArgument:
            problems.append(f"{where}: unknown form {fid!r}")
    if len(ids) < minimum:
        problems.append(f"{where}: need at least {minimum} forms")
    return ids


def _load(form_id: str, t_max: float, sigma: float, cfg: lfunc.EvalConfig, extra: int = 0) -> forms.Form:
    desc = forms.describe(form_id)
    need = max(extra, 10)
    if t_max > 0:
        stub = forms.Form(desc, forms.CoefficientTable(form_id, 1, np.zeros(2), "", desc.degree))
        for sg in {sigma, 0.5}:
            need = max(need, lfunc.required_length(stub, t_max, sg, cfg), lfunc.required_length(stub, t_max / 2, sg, cfg))
    return forms.load_form(form_id, int(need))


# ---------------------------------------------------------------------------
# output

def _header(command: str, config: dict, seed, sched) -> dict:
    return {
        "command": command,
        "version": version_string(),
        "config": config,
        "seed": seed,
        "schedule": _jsonable(sched.as_dict()) if sched is not None else None,
    }


def write_report(out_dir: Path, name: str, report: dict) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.json"
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"
    path.write_text(text, encoding="utf-8")
    return path


def write_samples(out_dir: Path, name: str, t, values, excluded) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.csv"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "t", "value", "excluded"])
    ex = np.zeros(len(values), dtype=bool) if excluded is None else np.asarray(excluded, dtype=bool)
    for i, (tt, v, e) in enumerate(zip(t, values, ex)):
        w.writerow([i, repr(float(tt)), repr(float(v)), int(bool(e))])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _excluded_mask(n: int, excluded) -> np.ndarray:
    m = np.zeros(n, dtype=bool)
    m[list(excluded)] = True
    return m


# ---------------------------------------------------------------------------
# commands

def cmd_coeffs(args) -> int:
    try:
        desc = forms.describe(args.form)
    except InvalidArgument as exc:
        raise ConfigError([str(exc)]) from None
    if args.limit < 1:
        raise ConfigError(["limit: must be >= 1"])
    if args.path:
        path = Path(args.path)
    else:
        base = args.out or os.environ.get("SELBERG_LAB_CACHE") or "."
        path = cache.cache_path(base, args.form, args.limit)
    if path.exists():
        cache.read_table(path)  # raises CacheError on a bad checksum or version
        print(f"cache hit, verified: {path}")
        return EXIT_OK
    table = forms.build_table(args.form, args.limit)
    cache.write_table(path, table)
    print(f"wrote {path} ({table.limit} records, degree {desc.degree})")
    return EXIT_OK


def cmd_eval(args) -> int:
    problems = []
    for name in ("sigma", "t"):
        v = getattr(args, name)
        if not math.isfinite(v):
            problems.append(f"{name}: must be finite")
    if problems:
        raise ConfigError(problems)
    cfg = lfunc.EvalConfig()
    s = complex(args.sigma, args.t)
    desc = forms.describe(args.form)
    stub = forms.Form(desc, forms.CoefficientTable(args.form, 1, np.zeros(2), "", desc.degree))
    a, b = lfunc.afe_lengths(stub, s, cfg)
    form = forms.load_form(args.form, max(a, b, 10))
    val = lfunc.afe_eval(form, s, cfg)
    out = {
        "form": args.form,
        "s": s,
        "L": val.L,
        "log_abs_L": math.log(max(abs(val.L), lfunc.NEAR_ZERO_FLOOR)),
        "log_G": val.log_G,
        "Lambda": val.Lambda,
        "log_abs_Lambda": val.log_abs_Lambda,
        "terms": list(val.terms),
        "version": version_string(),
    }
    if desc.self_dual and 0 <= args.sigma <= 1:
        out["functional_equation_residual"] = lfunc.functional_equation_residual(form, s, cfg)
    if args.sigma > 1:
        d = lfunc.dirichlet_eval(forms.load_form(args.form, 10**6), s, 10**6)
        out["dirichlet_partial_sum"] = d
        out["dirichlet_rel_diff"] = abs(d - val.L) / max(abs(d), 1e-300)
    print(json.dumps(_jsonable(out), indent=2, sort_keys=True))
    return EXIT_OK


def _moment_rows(form, T, X, sigma0, pairs, methods, points, band, offdiag, oracle_rel, psi=None, label=None):
    rows, ok = [], True
    for k, l in pairs:
        entry = {"form": label or form.id, "k": k, "l": l}
        res = moments.bruteforce_mixed_moment(form, k, l, T, X, sigma0, psi=psi)
        S = res.detail["S"]
        entry["analytic_expansion"] = res.value
        entry["prediction"] = res.prediction
        entry["S"] = S
        if k == l:
            ratio = res.value.real / res.prediction.real if res.prediction.real else float("nan")
            entry["ratio"] = ratio
            entry["pass"] = bool(band[0] <= ratio <= band[1])
        else:
            scaled = abs(res.value) / T / S ** ((k + l) / 2)
            entry["offdiag_scaled"] = scaled
            entry["pass"] = bool(scaled <= offdiag)
        if "quadrature" in methods:
            q = moments.quadrature_mixed_moment(form, k, l, T, X, sigma0, points, psi=psi)
            rel = abs(q.value - res.value) / max(abs(res.value), 1e-300)
            entry["quadrature"] = q.value
            entry["quadrature_points"] = q.detail["points"]
            entry["oracle_rel_diff"] = rel
            entry["pass"] = entry["pass"] and bool(rel <= oracle_rel)
        ok = ok and entry["pass"]
        rows.append(entry)
    return rows, ok


def cmd_moments(args, config) -> int:
    problems = []
    ids = _form_ids(config.get("forms", "delta"), problems, "forms")
    T = config.get("T", 1e8)
    X = config.get("X", 50)
    sigma0 = config.get("sigma0", 0.5)
    for name, v in (("T", T), ("X", X), ("sigma0", sigma0)):
        if not isinstance(v, (int, float)) or isinstance(v, bool):
            problems.append(f"{name}: must be a number")
    pairs = config.get("pairs", [[k, l] for k in range(3) for l in range(3)])
    if not (isinstance(pairs, list) and all(isinstance(p, list) and len(p) == 2 for p in pairs)):
        problems.append("pairs: must be a list of [k, l]")
    methods = config.get("methods", ["analytic_expansion"])
    if not set(methods) <= {"analytic_expansion", "quadrature"}:
        problems.append("methods: allowed values are analytic_expansion, quadrature")
    th = {"band": [0.9, 1.1], "offdiag": 0.1, "oracle_rel": 1e-6, "gaussian_rel": 0.2, "odd": 0.05}
    th.update(config.get("thresholds", {}))
    joint = config.get("joint", [])
    if args.override:
        problems.append("--override applies to schedule-based commands (clt, consistency)")
    if problems:
        raise ConfigError(problems)
    points = int(config.get("points", 10**5))
    X = float(X)
    report = _header("moments", config, None, None)
    loaded = {fid: forms.load_form(fid, max(int(X), 10)) for fid in ids}
    rows_all, ok = [], True
    for fid in ids:
        rows, good = _moment_rows(loaded[fid], T, X, sigma0, pairs, methods, points, th["band"], th["offdiag"],
                                  th["oracle_rel"])
        rows_all += rows
        ok = ok and good
    for j in joint:
        f1, f2 = (forms.load_form(fid, max(int(X), 10)) for fid in j["forms"])
        a1, a2 = j["a"]
        psi = moments.joint_weights(f1, f2, a1, a2, X)
        rows, good = _moment_rows(f1, T, X, sigma0, pairs, ["analytic_expansion"], points, th["band"], th["offdiag"],
                                  th["oracle_rel"], psi=psi, label=f"{f1.id}+{f2.id} a=({a1},{a2})")
        rows_all += rows
        ok = ok and good
    shape = []
    if config.get("real_part_moments", True):
        for fid in ids:
            for k in (1, 2, 3, 4):
                r = moments.real_part_moment(loaded[fid], k, T, X, sigma0)
                if k % 2 == 0:
                    r["pass"] = bool(abs(r["normalized"] / r["gaussian"] - 1) <= th["gaussian_rel"])
                else:
                    r["pass"] = bool(abs(r["normalized"]) <= th["odd"])
                r["form"] = fid
                ok = ok and r["pass"]
                shape.append(r)
    report.update({"moments": rows_all, "real_part_moments": shape, "thresholds": th, "verdict": ok})
    out = Path(args.out)
    write_report(out, "moments", report)
    write_samples(out, "moments", [T] * len(rows_all),
                  [r["analytic_expansion"].real / T for r in rows_all], None)
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_clt(args, config) -> int:
    problems = []
    ids = _form_ids(config.get("form", "delta"), problems, "form")
    plan = _plan(config.get("plan"), args.seed, problems)
    ev = _eval_cfg(config.get("eval"), problems)
    overrides = parse_overrides(args.override)
    sched = None
    if plan is not None and (config.get("schedule") or overrides):
        sched = _schedule(plan.T, config.get("schedule"), overrides, problems)
    th = {"ks": 0.08, "mean": 0.15, "tail_V1": 0.05}
    th.update(config.get("thresholds", {}))
    if problems:
        raise ConfigError(problems)
    form = _load(ids[0], 2 * plan.T, plan.sigma, ev, int(sched.X) if sched and sched.X >= 2 else 0)
    rep, series = stats.clt_experiment(form, plan, sched, ev, args.workers)
    tail = rep.tail_frequencies["1"]
    checks = {
        "ks": rep.ks_statistic <= th["ks"],
        "mean": abs(rep.mean) <= th["mean"],
        "tail_V1": abs(tail - rep.gaussian_tails["1"]) <= th["tail_V1"],
    }
    ok = all(checks.values())
    report = _header("clt", config, plan.seed, sched)
    report.update({"form": form.id, "report": rep, "checks": checks, "thresholds": th, "verdict": ok})
    out = Path(args.out)
    write_report(out, "clt", report)
    write_samples(out, "clt", series.t_values, series.values, _excluded_mask(len(series.values), series.excluded))
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_independence(args, config) -> int:
    problems = []
    ids = _form_ids(config.get("forms"), problems, "forms", minimum=2)
    if len(set(ids)) != len(ids):
        problems.append("forms: must be distinct")
    plan = _plan(config.get("plan"), args.seed, problems)
    ev = _eval_cfg(config.get("eval"), problems)
    combos = config.get("combinations", [[1, 1], [1, -1]])
    th = {"correlation": 0.15, "additivity": 0.3}
    th.update(config.get("thresholds", {}))
    if args.override:
        problems.append("--override applies to schedule-based commands (clt, consistency)")
    if problems:
        raise ConfigError(problems)
    loaded = [_load(fid, 2 * plan.T, plan.sigma, ev) for fid in ids]
    cov, t, data = stats.joint_experiment(loaded, plan, None, ev, args.workers, th["correlation"], th["additivity"])
    combos_out = []
    for a1, a2 in combos:
        vals = a1 * data[:, 0] + a2 * data[:, 1]
        v = float(np.var(vals, ddof=1))
        combos_out.append({"a": [a1, a2], "variance": v,
                           "predicted_from_marginals": a1 * a1 * cov.covariance_matrix[0][0]
                           + a2 * a2 * cov.covariance_matrix[1][1]})
    report = _header("independence", config, plan.seed, None)
    report.update({"forms": ids, "report": cov, "combinations": combos_out, "verdict": cov.verdict})
    out = Path(args.out)
    write_report(out, "independence", report)
    for j, fid in enumerate(ids):
        write_samples(out, f"independence_{j}_{fid}", t, data[:, j], None)
    return EXIT_OK if cov.verdict else EXIT_VERDICT


CONSISTENCY_CHECKS = ("prop3", "mollifier", "prop4", "functional_equation", "lemma4", "prop1")


def cmd_consistency(args, config) -> int:
    problems = []
    ids = _form_ids(config.get("form", "delta"), problems, "form")
    plan = _plan(config.get("plan"), args.seed, problems)
    ev = _eval_cfg(config.get("eval"), problems)
    checks = config.get("checks", list(CONSISTENCY_CHECKS[:3]))
    bad = set(checks) - set(CONSISTENCY_CHECKS)
    if bad:
        problems.append(f"checks: unknown {sorted(bad)}")
    overrides = parse_overrides(args.override)
    sched = _schedule(plan.T, config.get("schedule"), overrides, problems) if plan else None
    th_fields = {f.name for f in dataclasses.fields(moments.Thresholds)}
    th_block = config.get("thresholds", {})
    for k in sorted(set(th_block) - th_fields - {"fe_residual", "damped_integral_rel"}):
        problems.append(f"thresholds.{k}: unknown field")
    if problems:
        raise ConfigError(problems)
    th = moments.Thresholds(**{k: v for k, v in th_block.items() if k in th_fields})
    fe_tol = th_block.get("fe_residual", 1e-4)
    l4_tol = th_block.get("damped_integral_rel", 1e-3)
    support = int(sched.X) if sched.X >= 2 else 0
    form = _load(ids[0], 2 * plan.T, sched.sigma0, ev, support)
    out = Path(args.out)
    report = _header("consistency", config, plan.seed, sched)
    results, ok = {}, True
    if "prop3" in checks:
        r = moments.prop3_residual_stats(form, sched, plan, th)
        results["prop3"] = r
        write_samples(out, "consistency_prop3", r.samples["t"], r.samples["value"], r.samples["excluded"])
    if "mollifier" in checks:
        r = moments.mollifier_consistency(form, sched, plan, th)
        results["mollifier"] = r
        write_samples(out, "consistency_mollifier", r.samples["t"], r.samples["value"], r.samples["excluded"])
    if "prop4" in checks:
        r = moments.prop4_mean_square(form, sched, plan, ev, th, args.workers)
        results["prop4"] = r
        write_samples(out, "consistency_prop4", r.samples["t"], r.samples["value"], r.samples["excluded"])
    points = [p for p in config.get("points", [])]
    if "functional_equation" in checks:
        ts = points or list(np.linspace(10, 1000, 50))
        fe_form = _load(ids[0], max(ts), 0.5, ev)
        res = [lfunc.functional_equation_residual(fe_form, complex(0.5, t), ev) for t in ts]
        results["functional_equation"] = {"t": ts, "residual": res, "max": max(res),
                                          "verdict": bool(max(res) <= fe_tol)}
    if "lemma4" in checks:
        ts = points or [12.0, 50.0, 137.0, 400.0, 950.0]
        l4_form = _load(ids[0], max(ts) + 10, 0.5, ev, ev.damped_terms)
        rows = []
        for t in ts:
            lhs, rhs = moments.lemma4_identity_check(l4_form, complex(0.5, t), ev)
            rows.append({"t": t, "lhs": lhs, "rhs": rhs, "rel_diff": abs(lhs - rhs) / abs(lhs)})
        results["lemma4"] = {"rows": rows, "verdict": all(r["rel_diff"] <= l4_tol for r in rows)}
    if "prop1" in checks:
        ts = points or [1000.0]
        p1_form = _load(ids[0], max(ts) + 2, 0.5, ev)
        rows = []
        for t in ts:
            sigma = 0.5 + 1 / math.log(t)
            lhs, rhs = moments.prop1_window_check(p1_form, sigma, t, ev)
            rows.append({"t": t, "sigma": sigma, "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs})
        results["prop1"] = {"rows": rows, "verdict": True}
    for v in results.values():
        ok = ok and bool(v.verdict if hasattr(v, "verdict") else v["verdict"])
    report.update({"form": form.id, "results": results, "verdict": ok})
    write_report(out, "consistency", report)
    return EXIT_OK if ok else EXIT_VERDICT


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="selberg-lab", description="L-function value-distribution experiments")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coeffs", help="build or verify a coefficient cache file")
    c.add_argument("form")
    c.add_argument("limit", type=int)
    c.add_argument("path", nargs="?", help="cache file (default: <--out or $SELBERG_LAB_CACHE>/<form>__<limit>.coef)")
    c.add_argument("--out", help="cache directory")

    e = sub.add_parser("eval", help="evaluate L(f, sigma + it)")
    e.add_argument("form")
    e.add_argument("--sigma", type=float, required=True)
    e.add_argument("--t", type=float, required=True)

    for name, text in (("moments", "prime-series moments"), ("clt", "log|L| distribution"),
                       ("independence", "joint distribution of several forms"),
                       ("consistency", "mollifier and analytic identity checks")):
        q = sub.add_parser(name, help=text)
        q.add_argument("--config", help="JSON config file")
        q.add_argument("--out", default="reports", help="output directory")
        q.add_argument("--workers", type=int, default=1)
        q.add_argument("--seed", type=int)
        q.add_argument("--override", action="append", metavar="KEY=VALUE", help="schedule override (repeatable)")
    return p


COMMANDS = {"moments": cmd_moments, "clt": cmd_clt, "independence": cmd_independence,
            "consistency": cmd_consistency}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.command == "coeffs":
            return cmd_coeffs(args)
        if args.command == "eval":
            return cmd_eval(args)
        if args.workers < 1:
            raise ConfigError(["workers: must be >= 1"])
        return COMMANDS[args.command](args, load_config(args.config))
    except ConfigError as exc:
        for prob in exc.problems:
            print(f"error: {prob}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidArgument, DomainError, ScheduleInfeasible) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ResourceLimit, PrecisionError, TableTooShort, cache.CacheError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
