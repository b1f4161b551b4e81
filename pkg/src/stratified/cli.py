"""Command-line entry point.

Usage examples::

    stratified group-info --config group.yaml
    stratified verify picone --out reports/
    stratified solve --config solve.yaml --out run/
    stratified suite --out reports/

Exit status is 0 when every check in scope passes, 1 when a check fails
and 2 when the configuration is invalid.
"""

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import acceptance
from . import corpus as C
from . import expressions as ex
from .errors import ConfigError, NoConvergence, StratifiedError
from .experiments import comparison_experiment, trivial_solution_experiment, uniqueness_experiment
from .gauge import calibrate_c_p, gauge_calibrate, reference_domains, weighted_flux
from .geometry import Box, QuadratureRule, divergence_sides, make_domain
from .groups import hoermander_rank, spec_from_config
from .identities import (
    AdmissibleNonlinearity,
    boundary_condition_residual,
    diaz_saa_gap,
    green_first_residual,
    green_second_residual,
    hardy_gap,
    horizontal_flux,
    picone_scan,
)
from .solver import Reaction, SolveOptions, discretize, solve_dirichlet

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
CSV_COLUMNS = ["identity", "group", "domain", "p", "lhs", "rhs", "residual", "tolerance", "pass"]
VERIFY_KINDS = ("divergence", "green1", "green2", "picone", "hardy", "diaz-saa", "mean-value", "flux", "bc")
EXPERIMENT_KINDS = ("trivial", "schrodinger", "comparison", "uniqueness")

DEFAULTS = {
    "group": "H1",
    "order": 8,
    "seed": 0,
    "samples": 10_000,
    "tolerance": None,
    "solver": {"n": 9, "p": 2.0, "eps": 1e-8, "tol": 1e-8, "max_iter": 20000, "init": "zero", "continuation": False},
}


# ---------------------------------------------------------------------------
# configuration

def load_config(path):
    """Read a YAML or JSON mapping; ``None`` gives an empty config."""
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}", "--config") from None
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"not valid YAML/JSON: {err}", "--config") from None
    if cfg is None:
        return {}
    if not isinstance(cfg, dict):
        raise ConfigError("top level must be a mapping", "--config")
    return cfg


def resolve(cfg, args):
    """Merge defaults, the config file and command-line flags."""
    out = json.loads(json.dumps(DEFAULTS))
    for key, value in cfg.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key].update(value)
        else:
            out[key] = value
    if args.seed is not None:
        out["seed"] = args.seed
    if args.order is not None:
        out["order"] = args.order
    return out


def _group(cfg):
    try:
        return spec_from_config(cfg["group"])
    except StratifiedError as err:
        raise ConfigError(str(err), "group") from None
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"invalid group description ({err})", "group") from None


def _expr(cfg, key, g, extra=("rho", "t"), path=None):
    path = path or key
    if key not in cfg or cfg[key] is None:
        raise ConfigError("missing expression", path)
    text = str(cfg[key])
    try:
        return ex.parse_expression(text, n_coords=g.N if g is not None else None, extra_names=extra)
    except StratifiedError as err:
        raise ConfigError(f"cannot parse {text!r}: {err}", path) from None


def _p(cfg, key="p", default=None):
    p = cfg.get(key, default)
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {p!r}", key) from None
    if not p > 1:
        raise ConfigError(f"p must exceed 1, got {p}", key)
    return p


def _domain(cfg, g, key="domain", gauge=None):
    d = cfg.get(key)
    if d is None:
        return None
    try:
        dom = make_domain(d, g, gauge)
    except (KeyError, TypeError, ValueError, StratifiedError) as err:
        raise ConfigError(f"invalid domain ({err})", key) from None
    if getattr(dom, "N", g.N) != g.N:
        raise ConfigError(f"domain has dimension {dom.N}, group has {g.N}", key)
    return dom


def _domain_label(dom):
    if isinstance(dom, Box):
        return f"box[{','.join(f'{v:g}' for v in dom.lo)};{','.join(f'{v:g}' for v in dom.hi)}]"
    return f"gauge_ball(r={dom.radius:g})"


def _row(identity, group, dom, p, lhs, rhs, residual, tol, ok, **extra):
    return {"identity": identity, "group": group, "domain": dom if isinstance(dom, str) else _domain_label(dom),
            "p": p, "lhs": float(lhs), "rhs": float(rhs), "residual": float(residual),
            "tolerance": float(tol), "pass": bool(ok), "extra": extra}


# ---------------------------------------------------------------------------
# verify

def _cases_or_config(cfg, corpus_fn, needed):
    """Config-driven single case when ``needed`` keys are present, else the shipped corpus."""
    if all(k in cfg for k in needed):
        g = _group(cfg)
        dom = _domain(cfg, g) or Box(-np.ones(g.N), np.ones(g.N))
        return [(g, cfg.get("group") if isinstance(cfg.get("group"), str) else g.name, dom, cfg)]
    out = []
    for case in corpus_fn():
        g = spec_from_config(case.group)
        out.append((g, case.group, case.box(), case.config()))
    return out


def verify_divergence(cfg):
    rows = []
    if "fields" in cfg:
        g = _group(cfg)
        dom = _domain(cfg, g) or Box(-np.ones(g.N), np.ones(g.N))
        fields = cfg["fields"]
        if not isinstance(fields, list) or len(fields) != g.N1:
            raise ConfigError(f"expected a list of {g.N1} expressions", "fields")
        exprs = [_expr({"f": f}, "f", g, path=f"fields[{i}]") for i, f in enumerate(fields)]
        cases = [(g, g.name, dom, exprs, int(cfg["order"]))]
    else:
        cases = []
        for case in C.divergence_corpus():
            g = spec_from_config(case.group)
            cases.append((g, case.group, case.box(), case.exprs["fields"], case.exprs["degree"] + 1))
    tol = cfg.get("tolerance") or 1e-10
    for g, name, dom, fields, order in cases:
        lhs, rhs = divergence_sides(g, dom, fields, QuadratureRule(order))
        rows.append(_row("divergence", name, dom, "", lhs, rhs, abs(lhs - rhs), tol, abs(lhs - rhs) < tol, order=order))
    return rows


def verify_green(cfg, which):
    rows = []
    fn = green_first_residual if which == "green1" else green_second_residual
    rule = QuadratureRule(int(cfg["order"]))
    for g, name, dom, case in _cases_or_config(cfg, C.green_corpus, ("u", "v")):
        u, v = _expr(case, "u", g), _expr(case, "v", g)
        p = _p(case, default=2.0)
        tol = cfg.get("tolerance") or (1e-10 if p == 2 else 1e-7)
        rep = fn(g, dom, u, v, p, rule)
        ok = rep.residual <= tol and (which == "green1" or rep.extra["antisymmetry"] <= 1e-10)
        rows.append(_row(which, name, dom, p, rep.lhs, rep.rhs, rep.residual, tol, ok,
                         **({"antisymmetry": rep.extra["antisymmetry"]} if which == "green2" else {})))
    return rows


def _nonlinearity(case, p, g):
    f = _expr(case, "f", None, extra=("t",)) if "f" in case else ex.power(ex.Var("t"), ex.Num(ex.to_fraction(p) - 1))
    try:
        return AdmissibleNonlinearity(f, p)
    except StratifiedError as err:
        raise ConfigError(str(err), "f") from None


def verify_picone(cfg):
    rows = []
    for g, name, dom, case in _cases_or_config(cfg, C.picone_corpus, ("u", "v")):
        p = _p(case, default=2.0)
        af = _nonlinearity(case, p, g)
        seed = int(case.get("seed", cfg["seed"])) if "u" not in cfg else int(cfg["seed"])
        rep = picone_scan(g, dom, _expr(case, "u", g), _expr(case, "v", g), af, int(cfg["samples"]), seed)
        rows.append(_row("picone", name, dom, p, rep.lhs, rep.rhs, rep.extra["max_abs_diff"], rep.tolerance,
                         rep.passed, min_R=rep.extra["min_R"], max_abs_L=rep.extra["max_abs_L"], f=ex.to_string(af.f)))
    return rows


def _gap_row(identity, name, dom, p, gap, tol):
    return _row(identity, name, dom, p, gap, 0.0, max(0.0, -gap), tol, gap >= -tol)


def verify_hardy(cfg):
    rows = []
    rule = QuadratureRule(int(cfg["order"]))
    tol = cfg.get("tolerance") or 1e-8
    for g, name, dom, case in _cases_or_config(cfg, C.hardy_corpus, ("u", "v")):
        p = _p(case, default=2.0)
        gap = hardy_gap(g, dom, _expr(case, "u", g), _expr(case, "v", g), _nonlinearity(case, p, g), p, rule)
        rows.append(_gap_row("hardy", name, dom, p, gap, tol))
    return rows


def verify_diaz_saa(cfg):
    rows = []
    rule = QuadratureRule(int(cfg["order"]))
    tol = cfg.get("tolerance") or 1e-8
    if "u1" in cfg and "u2" in cfg:
        g = _group(cfg)
        dom = _domain(cfg, g) or Box(-np.ones(g.N), np.ones(g.N))
        p = _p(cfg, default=2.0)
        gap = diaz_saa_gap(g, dom, _expr(cfg, "u1", g), _expr(cfg, "u2", g), p, rule)
        rows.append(_gap_row("diaz-saa", g.name, dom, p, gap, tol))
        return rows
    for case in C.diaz_saa_corpus():
        g = spec_from_config(case.group)
        u1, u2 = C.diaz_saa_profiles(case)
        rows.append(_gap_row("diaz-saa", case.group, case.box(), case.p, diaz_saa_gap(g, case.box(), u1, u2, case.p, rule), tol))
    return rows


def _gauge(cfg, g):
    try:
        return gauge_calibrate(g)
    except StratifiedError as err:
        raise ConfigError(str(err), "group") from None


def verify_mean_value(cfg):
    g = _group(cfg)
    pg = _gauge(cfg, g)
    dom = _domain(cfg, g) or Box(-np.ones(g.N), np.ones(g.N), 4)
    poles = cfg.get("poles") or ([cfg["pole"]] if "pole" in cfg else acceptance.MEAN_VALUE_POLES)
    tol = cfg.get("tolerance") or 1e-5
    rule = QuadratureRule(int(cfg.get("order") or 12))
    rows = []
    for pole in poles:
        pole = np.asarray(pole, dtype=float)
        if pole.size != g.N:
            raise ConfigError(f"pole needs {g.N} coordinates", "pole")
        if isinstance(dom, Box) and dom.contains(pole):
            raise ConfigError("the pole must lie outside the domain", "pole")
        flux = horizontal_flux(g, dom, pg.expr(2, pole=pole), 2, rule)
        rows.append(_row("mean-value", g.name, dom, 2.0, flux, 0.0, abs(flux), tol, abs(flux) < tol, pole=list(pole)))
    return rows


def verify_flux(cfg):
    g = _group(cfg)
    pg = _gauge(cfg, g)
    ps = cfg.get("ps") or ([cfg["p"]] if "p" in cfg else [2.0, 3.0])
    tol = cfg.get("tolerance") or 1e-3
    rule = QuadratureRule(int(cfg.get("order") or 14))
    ball, _ = reference_domains(pg)
    fallback = Box(*acceptance.FLUX_BOX, 8) if g.N == 3 else Box(-np.ones(g.N), np.ones(g.N), 2)
    doms = [ball, _domain(cfg, g, gauge=pg.d) or fallback]
    rows = []
    for p in ps:
        p = _p({"p": p})
        calibrate_c_p(pg, p)
        e = pg.expr(p)
        for dom in doms:
            F = weighted_flux(g, dom, e, p, rule)
            rows.append(_row("flux", g.name, dom, p, F, 1.0, abs(F - 1.0), tol, abs(F - 1.0) <= tol, c_p=pg.c[p]))
    return rows


def verify_bc(cfg):
    g = _group(cfg)
    dom = _domain(cfg, g) or Box(np.zeros(g.N), np.ones(g.N))
    kind = cfg.get("kind", "neumann")
    u = _expr(cfg, "u", g) if "u" in cfg else ex.ONE
    coeffs = None
    if kind == "robin":
        raw = cfg.get("coefficients")
        if not isinstance(raw, list):
            raise ConfigError("robin conditions need a list of coefficient expressions", "coefficients")
        coeffs = [_expr({"a": a}, "a", g, path=f"coefficients[{j}]") for j, a in enumerate(raw)]
    elif kind not in ("dirichlet", "neumann"):
        raise ConfigError(f"unknown kind {kind!r}", "kind")
    tol = cfg.get("tolerance") or 1e-10
    r = boundary_condition_residual(g, dom, u, kind, QuadratureRule(int(cfg["order"])), coeffs)
    return [_row(f"bc-{kind}", g.name, dom, "", r, 0.0, r, tol, r <= tol)]


VERIFY = {
    "divergence": verify_divergence,
    "green1": lambda c: verify_green(c, "green1"),
    "green2": lambda c: verify_green(c, "green2"),
    "picone": verify_picone,
    "hardy": verify_hardy,
    "diaz-saa": verify_diaz_saa,
    "mean-value": verify_mean_value,
    "flux": verify_flux,
    "bc": verify_bc,
}


# ---------------------------------------------------------------------------
# other commands

def group_info(cfg):
    g = _group(cfg)
    info = {"name": g.name, "strata": list(g.strata), "N": g.N, "Q": g.Q, "step": g.step,
            "rank": hoermander_rank(g, np.zeros(g.N)),
            "generators": [str(X) for X in g.generators]}
    row = _row("group-info", g.name, "-", "", info["rank"], g.N, abs(info["rank"] - g.N), 0, info["rank"] == g.N)
    return [row], info


def calibrate(cfg, what):
    g = _group(cfg)
    pg = _gauge(cfg, g)
    if what == "gauge":
        info = {"beta": pg.beta, "residual": pg.residual}
        return [_row("polarizability", g.name, "-", "", pg.residual, 0.0, pg.residual, 1e-8, pg.residual < 1e-8,
                     beta=pg.beta)], info
    ps = cfg.get("ps") or ([cfg["p"]] if "p" in cfg else [2.0])
    rows = []
    for p in ps:
        p = _p({"p": p})
        c = calibrate_c_p(pg, p)
        rows.append(_row("c_p", g.name, "unit gauge ball", p, c, c, 0.0, 0.0, True, c_p=c))
    return rows, {"c": {str(k): v for k, v in pg.c.items()}}


def _grid(cfg, g, key="box"):
    box = cfg.get(key) or {"lo": [0.0] * g.N, "hi": [1.0] * g.N}
    s = cfg["solver"]
    try:
        return discretize(g, Box(box["lo"], box["hi"]), s["n"])
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"invalid grid ({err})", key) from None


def _solve_opts(cfg):
    s = cfg["solver"]
    init = s.get("init", "zero")
    return SolveOptions(tol=float(s["tol"]), max_iter=int(s["max_iter"]), eps=float(s["eps"]),
                        seed=int(cfg["seed"]), init=init, continuation=bool(s.get("continuation", False)))


def solve(cfg, out):
    g = _group(cfg)
    grid = _grid(cfg, g)
    p = _p(cfg["solver"], default=2.0)
    reaction = Reaction(_expr(cfg, "reaction", g), p) if "reaction" in cfg else None
    try:
        sol = solve_dirichlet(grid, p, reaction, _solve_opts(cfg))
        ok = True
    except NoConvergence as err:
        sol, ok = err.solution, False
        if sol is None:
            raise
    report = {"converged": ok, "iterations": sol.iterations, "energy": sol.energy, "grad_norm": sol.grad_norm,
              "weak_residual": sol.weak_residual, "eps": sol.eps,
              "trace_monotone": bool(np.all(np.diff(sol.trace) <= 0)),
              "interior_min": sol.interior_min, "trace": [float(e) for e in sol.trace]}
    if out is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(g.N)] + ["u"])
        for j in range(grid.size):
            w.writerow([repr(float(v)) for v in grid.points[:, j]] + [repr(float(sol.values[j]))])
        (out / "solution.csv").write_text(buf.getvalue())
    row = _row("solve", g.name, f"grid{list(grid.n)}", p, sol.energy, sol.energy, sol.grad_norm,
               float(cfg["solver"]["tol"]) * (1 + abs(sol.energy)), ok)
    return [row], report


def experiment(cfg, kind):
    g = _group(cfg)
    grid = _grid(cfg, g)
    p = _p(cfg["solver"], default=2.0)
    opts = None
    n_starts = int(cfg.get("n_starts", 5))
    if kind in ("trivial", "schrodinger"):
        variant = "plain" if kind == "trivial" else "schrodinger"
        if variant == "schrodinger":
            _expr({"q": cfg.get("q", "1")}, "q", g)
        rep = trivial_solution_experiment(grid, p, variant, str(cfg.get("q", "1")), opts, n_starts, int(cfg["seed"]))
    elif kind == "comparison":
        q = float(cfg.get("q_exp", 0.5))
        if not 0 < q < p - 1:
            raise ConfigError(f"need 0 < q_exp < p - 1 = {p - 1}", "q_exp")
        coeff = _expr({"F_coeff": cfg.get("F_coeff", "1")}, "F_coeff", g)
        rep = comparison_experiment(grid, p, q, coeff, float(cfg.get("delta", 0.5)))
    else:
        reaction = Reaction(_expr({"reaction": cfg.get("reaction", "1")}, "reaction", g), p)
        rep = uniqueness_experiment(grid, p, reaction, n_starts, int(cfg["seed"]))
    row = _row(rep.experiment, g.name, f"grid{list(grid.n)}", p, rep.value, 0.0, rep.value, rep.tolerance, rep.passed)
    return [row], {"details": rep.details}


def suite(cfg):
    results = acceptance.run_criteria(cfg.get("criteria"))
    rows = [_row(f"criterion-{r.number}", "-", "-", "", r.value, r.tolerance, r.value, r.tolerance, r.passed,
                 name=r.name, details=r.details) for r in results]
    lines = [acceptance.format_line(r) for r in results]
    return rows, {"lines": lines}


# ---------------------------------------------------------------------------
# reporting

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_reports(out, stem, rows, cfg, extra=None):
    """``<stem>.csv`` with the standard columns and ``<stem>.json`` with rows, config and extras."""
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.DictWriter(buf, CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    (out / f"{stem}.csv").write_text(buf.getvalue())
    doc = {"config": cfg, "rows": rows, "passed": all(r["pass"] for r in rows)}
    if extra:
        doc.update(extra)
    (out / f"{stem}.json").write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")


def build_parser():
    parser = argparse.ArgumentParser(prog="stratified", description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON config file")
    common.add_argument("--out", help="directory for CSV/JSON reports")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--order", type=int, help="override the quadrature order")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("group-info", parents=[common], help="strata, homogeneous dimension and rank")
    v = sub.add_parser("verify", parents=[common], help="check an identity")
    v.add_argument("identity", choices=VERIFY_KINDS)
    c = sub.add_parser("calibrate", parents=[common], help="calibrate the gauge or c_p")
    c.add_argument("what", choices=("gauge", "cp"))
    sub.add_parser("solve", parents=[common], help="solve the discrete Dirichlet problem")
    e = sub.add_parser("experiment", parents=[common], help="run a solver experiment")
    e.add_argument("kind", choices=EXPERIMENT_KINDS)
    sub.add_parser("suite", parents=[common], help="run the acceptance battery")
    return parser


def run(args):
    """Execute parsed arguments; returns the exit status."""
    cfg = resolve(load_config(args.config), args)
    out = Path(args.out) if args.out else None
    extra = None
    if args.command == "group-info":
        rows, extra = group_info(cfg)
        stem = "group_info"
    elif args.command == "verify":
        rows = VERIFY[args.identity](cfg)
        stem = f"verify_{args.identity.replace('-', '_')}"
    elif args.command == "calibrate":
        rows, extra = calibrate(cfg, args.what)
        stem = f"calibrate_{args.what}"
    elif args.command == "solve":
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        rows, extra = solve(cfg, out)
        stem = "solve"
    elif args.command == "experiment":
        rows, extra = experiment(cfg, args.kind)
        stem = f"experiment_{args.kind}"
    else:
        rows, extra = suite(cfg)
        stem = "suite"
    if out is not None:
        report_extra = {k: v for k, v in (extra or {}).items() if k != "lines"}
        write_reports(out, stem, rows, cfg, report_extra)
    failed = [r for r in rows if not r["pass"]]
    if not args.quiet or failed:
        if extra and "lines" in extra:
            for line in extra["lines"]:
                print(line)
        elif args.command == "group-info":
            print(f"{extra['name']}: strata {extra['strata']}, N={extra['N']}, Q={extra['Q']}, rank {extra['rank']}")
        else:
            for r in rows:
                status = "PASS" if r["pass"] else "FAIL"
                print(f"[{status}] {r['identity']} {r['group']} {r['domain']} p={r['p']} "
                      f"residual={r['residual']:.3e} tol={r['tolerance']:.1e}")
        if failed:
            print(f"{len(failed)} of {len(rows)} checks failed: "
                  + ", ".join(f"{r['identity']}[{i}]" for i, r in enumerate(rows) if not r["pass"]), file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_PASS


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except StratifiedError as err:
        print(f"error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
