"""Configuration-driven experiment runner.

Subcommands: check, conjugate, solve, diagnose, sweep (config-driven, CSV out)
and gehring, moser (pure arithmetic, flags only).  Exit codes: 0 success,
1 certification/diagnostic failure, 2 config error, 3 solver non-convergence.

Config files are plain text `key = value` lines; `#` starts a comment.  The
integrand mini-language:

    expr := term ('+' term)*
    term := [coeff '*'] atom
    atom := 'power(mu=<r>,p=<r>)' | 'axis(i=<int>,q=<r>)' | 'poly(<file>)'

Whitespace is insignificant.  A poly file holds one monomial per line: a
coefficient followed by 1-based flat indices into z (row-major over (N, n));
`1.0 1 1 2 2` is the monomial z_1^2 z_2^2.

Recognized keys (defaults in parentheses): n (2), N (1), p, q, mu (0), L,
integrand, cells (32), epsilons (0.5,0.25,0.125,0.0625) or schedule_count,
boundary (sine), amplitudes (1.0), estimates (hd,sup), region
(0.5,...,0.45,ball), t_grid (1.1,1.25,1.5,1.75), sobolev_exp (4q/p), seed (0),
workers (1).
"""

import argparse
import concurrent.futures
import math
import os
import re
import sys
from dataclasses import dataclass

import numpy as np

from . import diagnostics, growth, solver
from .integrands import (AxisPower, EvenPolynomial, HomogeneousForm, Integrand,
                         PowerNorm, Scaled, Sum)
from .model import (DiagnosticsEntry, DiagnosticsReport, Region, Regime,
                    InvalidRegimeError)
from .solver import Schedule


class ConfigError(ValueError):
    def __init__(self, message, line=None, col=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", col {col}" if col is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.col = col


# ------------------------------------------------------------ mini-language

_TOKEN = re.compile(r"\s*(?:(?P<plus>\+)|(?P<star>\*)|(?P<name>[a-zA-Z_]\w*)"
                    r"|(?P<lpar>\()|(?P<rpar>\))|(?P<comma>,)|(?P<eq>=)"
                    r"|(?P<num>[-+]?\d+(?:\.\d*)?(?:[eE][-+]?\d+)?)"
                    r"|(?P<path>[./\w-]+))")


def _tokenize(text, line_no):
    pos = 0
    out = []
    while pos < len(text):
        mobj = _TOKEN.match(text, pos)
        if mobj is None or mobj.end() == pos:
            raise ConfigError(f"unrecognized integrand syntax near {text[pos:pos+10]!r}",
                              line=line_no, col=pos + 1)
        kind = mobj.lastgroup
        out.append((kind, mobj.group(kind), mobj.start(kind) + 1))
        pos = mobj.end()
    out.append(("end", "", len(text) + 1))
    return out


class _ExprParser:
    def __init__(self, text, line_no, base_dir, shape):
        self.text = text
        self.tokens = _tokenize(text, line_no)
        self.k = 0
        self.line_no = line_no
        self.base_dir = base_dir
        self.shape = shape  # (N, n)

    def peek(self):
        return self.tokens[self.k]

    def take(self, kind):
        tk = self.tokens[self.k]
        if tk[0] != kind:
            raise ConfigError(f"expected {kind}, found {tk[1]!r}",
                              line=self.line_no, col=tk[2])
        self.k += 1
        return tk

    def parse(self) -> Integrand:
        terms = [self.term()]
        while self.peek()[0] == "plus":
            self.take("plus")
            terms.append(self.term())
        self.take("end")
        return terms[0] if len(terms) == 1 else Sum(terms)

    def term(self) -> Integrand:
        tk = self.peek()
        if tk[0] == "num":
            coeff = float(self.take("num")[1])
            self.take("star")
            return Scaled(coeff, self.atom())
        return self.atom()

    def atom(self) -> Integrand:
        name_tok = self.take("name")
        name = name_tok[1]
        self.take("lpar")
        if name == "power":
            kw = self.kwargs({"mu": float, "p": float})
            self.take("rpar")
            return PowerNorm(kw["mu"], kw["p"])
        if name == "axis":
            kw = self.kwargs({"i": int, "q": float})
            self.take("rpar")
            N, n = self.shape
            if not (1 <= kw["i"] <= n):
                raise ConfigError(f"axis index i={kw['i']} out of range 1..{n}",
                                  line=self.line_no, col=name_tok[2])
            return AxisPower(kw["i"], kw["q"])
        if name == "poly":
            # the argument is a raw path: consume tokens to the matching ')'
            start_col = self.tokens[self.k][2]
            while self.tokens[self.k][0] not in ("rpar", "end"):
                self.k += 1
            if self.tokens[self.k][0] != "rpar":
                raise ConfigError("poly(...) missing closing parenthesis",
                                  line=self.line_no, col=start_col)
            end_col = self.tokens[self.k][2]
            self.take("rpar")
            val = self.text[start_col - 1:end_col - 1].strip()
            if not val:
                raise ConfigError("poly(...) needs a file path", line=self.line_no,
                                  col=start_col)
            return load_polynomial(os.path.join(self.base_dir, val), self.shape,
                                   line=self.line_no, col=start_col)
        raise ConfigError(f"unknown atom {name!r} (expected power, axis or poly)",
                          line=self.line_no, col=name_tok[2])

    def kwargs(self, spec):
        out = {}
        first = True
        while len(out) < len(spec):
            if not first:
                self.take("comma")
            first = False
            key = self.take("name")[1]
            if key not in spec:
                raise ConfigError(f"unknown argument {key!r}", line=self.line_no,
                                  col=self.tokens[self.k - 1][2])
            self.take("eq")
            tok = self.take("num")
            out[key] = spec[key](float(tok[1])) if spec[key] is int else spec[key](tok[1])
        return out


def load_polynomial(path, shape, line=None, col=None) -> EvenPolynomial:
    N, n = shape
    try:
        with open(path) as fh:
            rows = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read polynomial file {path!r}: {exc}", line=line, col=col)
    by_degree = {}
    for k, row in enumerate(rows, start=1):
        row = row.split("#", 1)[0].strip()
        if not row:
            continue
        parts = row.split()
        try:
            coeff = float(parts[0])
            idx = tuple(int(tok) for tok in parts[1:])
        except ValueError:
            raise ConfigError(f"bad monomial line {k} in {path!r}: {row!r}", line=line)
        by_degree.setdefault(len(idx), []).append((coeff, idx))
    if not by_degree:
        raise ConfigError(f"polynomial file {path!r} holds no monomials", line=line)
    try:
        comps = [HomogeneousForm.from_terms(N, n, deg, terms)
                 for deg, terms in sorted(by_degree.items())]
        poly = EvenPolynomial(comps)
        growth.homogeneous_decomposition(poly)  # rejects odd-degree content early
    except ValueError as exc:  # covers NotEvenError and bad monomial indices
        raise ConfigError(f"invalid polynomial {path!r}: {exc}", line=line, col=col)
    return poly


def parse_integrand(text, shape, base_dir=".", line_no=None) -> Integrand:
    return _ExprParser(text, line_no, base_dir, shape).parse()


# ------------------------------------------------------------ config files


@dataclass
class ExperimentConfig:
    regime: Regime
    integrand_expr: str
    integrand: Integrand
    cells: int
    epsilons: list
    boundary: str
    amplitudes: list
    estimates: list
    region: Region
    t_grid: list
    sobolev_exp: float
    seed: int
    workers: int = 1

    def schedule(self) -> Schedule:
        return Schedule(epsilons=list(self.epsilons))


_KNOWN_KEYS = {"n", "N", "p", "q", "mu", "L", "integrand", "cells", "epsilons",
               "schedule_count", "boundary", "amplitudes", "estimates", "region",
               "t_grid", "sobolev_exp", "seed", "workers"}


def _floats(text):
    return [float(tok) for tok in text.split(",") if tok.strip() != ""]


def parse_config(text, base_dir=".") -> ExperimentConfig:
    """Deterministic parse of the key = value experiment format."""
    raw = {}
    lines = {}
    for no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected key = value, got {body!r}", line=no)
        key, _, val = body.partition("=")
        key = key.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown key {key!r}", line=no)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", line=no)
        raw[key] = val.strip()
        lines[key] = no

    def need(key):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
        return raw[key]

    def number(key, default=None, conv=float):
        if key not in raw:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        try:
            return conv(float(raw[key]))
        except ValueError:
            raise ConfigError(f"bad number for {key!r}: {raw[key]!r}", line=lines[key])

    n = number("n", 2, int)
    N = number("N", 1, int)
    p = number("p")
    q = number("q")
    mu = number("mu", 0.0)
    L = number("L")
    try:
        regime = Regime(n=n, N=N, p=p, q=q, mu=mu, L=L)
    except InvalidRegimeError as exc:
        raise ConfigError(str(exc))

    expr = need("integrand")
    integrand = parse_integrand(expr, (N, n), base_dir=base_dir,
                                line_no=lines.get("integrand"))

    cells = number("cells", 32, int)
    if "epsilons" in raw:
        eps = _floats(raw["epsilons"])
    else:
        count = number("schedule_count", 4, int)
        eps = [2.0 ** -(i + 1) for i in range(count)]
    boundary = raw.get("boundary", "sine")
    amplitudes = _floats(raw.get("amplitudes", "1.0"))
    estimates = [tok.strip() for tok in raw.get("estimates", "hd,sup").split(",") if tok.strip()]
    known_estimates = {"hd", "sup", "rh", "cacc", "stress", "decay"}
    for est in estimates:
        if est not in known_estimates:
            raise ConfigError(f"unknown estimate {est!r} (choose from {sorted(known_estimates)})",
                              line=lines.get("estimates"))
    if "region" in raw:
        parts = [tok.strip() for tok in raw["region"].split(",")]
        if len(parts) != n + 2:
            raise ConfigError(f"region needs {n} center coordinates, radius, kind",
                              line=lines["region"])
        try:
            center = tuple(float(tok) for tok in parts[:n])
            region = Region(center, float(parts[n]), parts[n + 1])
        except ValueError as exc:
            raise ConfigError(f"bad region: {exc}", line=lines["region"])
    else:
        region = Region((0.5,) * n, 0.45, "ball")
    t_grid = _floats(raw.get("t_grid", "1.1,1.25,1.5,1.75"))
    sobolev_exp = number("sobolev_exp", 4.0 * q / p)
    seed = number("seed", 0, int)
    workers = number("workers", 1, int)
    try:
        Schedule(epsilons=eps)
    except ValueError as exc:
        raise ConfigError(str(exc), line=lines.get("epsilons"))
    return ExperimentConfig(regime=regime, integrand_expr=expr, integrand=integrand,
                            cells=cells, epsilons=eps, boundary=boundary,
                            amplitudes=amplitudes, estimates=estimates, region=region,
                            t_grid=t_grid, sobolev_exp=sobolev_exp, seed=seed,
                            workers=workers)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), base_dir=os.path.dirname(os.path.abspath(path)))


# ------------------------------------------------------------ CSV plumbing


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return f"{x:.17g}" if isinstance(x, (float, np.floating)) else str(x)


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _diag_rows(report: DiagnosticsReport):
    for e in report.entries:
        yield (e.estimate_id, e.lhs, e.rhs, e.ratio, e.fitted_exponent,
               e.grid, e.amplitude, e.epsilon)


DIAG_HEADER = ["estimate_id", "lhs", "rhs", "ratio", "fitted_exponent",
               "grid", "amplitude", "epsilon"]


# ------------------------------------------------------------ measurement core


def _solve_once(cfg: ExperimentConfig, amplitude: float):
    from .model import Grid

    grid = Grid(cfg.regime.n, cfg.cells)
    g = solver.boundary_family(cfg.boundary, grid, amplitude, cfg.regime.N, seed=cfg.seed)
    res = solver.run_scheme(cfg.integrand, cfg.regime, grid, g, cfg.schedule())
    return res


def measure_estimates(cfg: ExperimentConfig, amplitude: float, scheme_result) -> DiagnosticsReport:
    """Measure the selected estimates on the final field of one scheme run."""
    rep = DiagnosticsReport()
    fld = scheme_result.field
    r = cfg.regime
    F = cfg.integrand
    B = cfg.region
    eps = scheme_result.reports[-1].epsilon
    chain = diagnostics.hd_exponents(r, cfg.sobolev_exp)
    if "hd" in cfg.estimates:
        e = diagnostics.higher_diff_measure(fld, F, r, chain, B)
        e.amplitude, e.epsilon = amplitude, eps
        rep.add(e)
    if "sup" in cfg.estimates:
        e = diagnostics.sup_grad_measure(fld, F, B, b=chain.b)
        e.amplitude, e.epsilon = amplitude, eps
        rep.add(e)
    if "rh" in cfg.estimates and r.n == 2:
        base = diagnostics.region_energy_average(fld, F, B) + 1.0
        for t, lhs, _ in diagnostics.reverse_holder_scan(fld, F, r, cfg.t_grid, B, b=chain.b):
            rep.add(DiagnosticsEntry(f"rh_t={t:g}", lhs=lhs, rhs=base ** chain.b,
                                     grid=fld.grid.cells_per_side, amplitude=amplitude,
                                     epsilon=eps))
    if "cacc" in cfg.estimates and r.N == 1:
        cut = (B.scaled(0.4), B.scaled(0.8))
        for alpha in (-1.0, 0.0, 2.0):
            cc = diagnostics.caccioppoli_check(fld, F, r, alpha, cut)
            rep.add(DiagnosticsEntry(f"cacc_a={alpha:g}", lhs=cc.lhs, rhs=cc.rhs,
                                     grid=fld.grid.cells_per_side, amplitude=amplitude,
                                     epsilon=eps))
    if "stress" in cfg.estimates:
        ratio = diagnostics.stress_integrability(fld, F, r, B)
        rep.add(DiagnosticsEntry("stress", lhs=ratio, rhs=1.0,
                                 grid=fld.grid.cells_per_side, amplitude=amplitude,
                                 epsilon=eps))
    if "decay" in cfg.estimates:
        radii = [B.radius * f for f in (0.45, 0.35, 0.25, 0.18)]
        ld = diagnostics.log_decay_profile(fld, F, r, radii, B)
        for s, mass in zip(ld.radii, ld.masses):
            pred = ld.amplitude * math.log(B.radius / s) ** (-ld.decay_exponent)
            rep.add(DiagnosticsEntry(f"decay_r={s:g}", lhs=mass, rhs=max(pred, 0.0),
                                     grid=fld.grid.cells_per_side, amplitude=amplitude,
                                     epsilon=eps))
    return rep


def run_diagnose(cfg: ExperimentConfig) -> DiagnosticsReport:
    """Solve per amplitude, measure, and fit exponents across the sweep.

    Fitted exponents regress log lhs on log(avg_B F + 1) for the estimates whose
    right-hand side is a power of that base; other estimates keep None."""
    report = DiagnosticsReport()
    for amp in cfg.amplitudes:
        res = _solve_once(cfg, amp)
        report.extend(measure_estimates(cfg, amp, res))
    chain = diagnostics.hd_exponents(cfg.regime, cfg.sobolev_exp)
    for est in {e.estimate_id for e in report.entries}:
        if not (est in ("hdes", "sup_grad") or est.startswith("rh_t=")):
            continue
        entries = report.by_id(est)
        if len(entries) >= 4:
            bases = [e.rhs ** (1.0 / chain.b) for e in entries]
            lhss = [e.lhs for e in entries]
            try:
                b, _ = diagnostics.fit_exponent(bases, lhss)
            except ValueError:
                continue
            for e in entries:
                e.fitted_exponent = b
    return report


# ------------------------------------------------------------ subcommands


def cmd_check(args):
    cfg = load_config(args.config)
    try:
        cert = growth.check_legendre(cfg.integrand, cfg.regime,
                                     n_samples=args.samples, radius=args.radius,
                                     seed=cfg.seed)
    except (growth.EllipticityViolationError, InvalidRegimeError) as exc:
        print(f"certification FAILED: {exc}")
        return 1
    rows = [("assf3_constant", cert.constant_assf3),
            ("assf1_constant", cert.constant_assf1),
            ("samples", cert.samples),
            ("registered_L", cfg.regime.L)]
    if args.out:
        write_csv(args.out, ["quantity", "value"], rows)
    for k, v in rows:
        print(f"{k},{_fmt(v)}")
    passed = (math.isfinite(cert.constant_assf3) and math.isfinite(cert.constant_assf1)
              and cert.constant_assf3 <= cfg.regime.L)
    print(f"certified constants within registered L: {passed}")
    return 0 if passed else 1


def cmd_conjugate(args):
    from .duality import conjugate

    cfg = load_config(args.config)
    rng = np.random.default_rng(cfg.seed)
    N, n = cfg.regime.N, cfg.regime.n
    rows = []
    for _ in range(args.count):
        xi = rng.normal(size=(N, n))
        xi *= args.radius * rng.uniform(0.05, 1.0) / max(np.linalg.norm(xi), 1e-12)
        res = conjugate(cfg.integrand, xi)
        rows.append([v for v in xi.reshape(-1)] + [res.value]
                    + [v for v in res.argmax.reshape(-1)]
                    + [res.newton_iters, res.residual])
    header = [f"xi{i+1}{j+1}" for i in range(N) for j in range(n)] + ["value"] \
        + [f"z{i+1}{j+1}" for i in range(N) for j in range(n)] + ["iters", "residual"]
    if args.out:
        write_csv(args.out, header, rows)
    else:
        print(",".join(header))
        for row in rows:
            print(",".join(_fmt(v) for v in row))
    return 0


def cmd_solve(args):
    from .model import Grid

    cfg = load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    amp = cfg.amplitudes[0]
    try:
        res = _solve_once(cfg, amp)
    except solver.NonConvergenceError as exc:
        print(f"solver failed to converge: {exc}")
        return 3
    rows = []
    for rep, gterm in zip(res.reports, res.gamma_terms):
        rows.append((rep.epsilon, rep.gamma_eps, rep.energy, rep.residual_sup,
                     rep.iterations, gterm))
    write_csv(os.path.join(args.out, "reports.csv"),
              ["epsilon", "gamma_eps", "energy", "residual_sup", "iterations",
               "gamma_term"], rows)
    solver.export_field_csv(res.field, os.path.join(args.out, "field.csv"))
    solver.export_gradients_csv(res.field, os.path.join(args.out, "gradients.csv"))
    for v in res.violations:
        print(f"scheme monitor: {v}")
    print(f"solved {len(res.reports)} rungs; final energy {_fmt(res.energies[-1])}; "
          f"outputs in {args.out}")
    if any(v.startswith("eps=") for v in res.violations):
        return 3
    return 0


def cmd_diagnose(args):
    cfg = load_config(args.config)
    try:
        report = run_diagnose(cfg)
    except solver.NonConvergenceError as exc:
        print(f"solver failed to converge: {exc}")
        return 3
    write_csv(args.out, DIAG_HEADER, _diag_rows(report))
    bad = [e for e in report.entries
           if not (math.isfinite(e.lhs) and math.isfinite(e.rhs))]
    print(f"wrote {len(report.entries)} rows to {args.out}")
    if bad:
        print(f"{len(bad)} non-finite measurements")
        return 1
    return 0


def _sweep_point(cfg_text, base_dir, vary, value):
    cfg = parse_config(cfg_text, base_dir=base_dir)
    from .model import validate_regime

    if vary == "q":
        try:
            cfg.regime = cfg.regime.with_exponents(q=value)
        except InvalidRegimeError as exc:
            return {"value": value, "admissible": False, "threshold": math.nan,
                    "error": str(exc), "entries": []}
        amp = cfg.amplitudes[0]
    else:
        amp = value
    adm = validate_regime(cfg.regime)
    row = {"value": value, "admissible": adm.admissible, "threshold": adm.threshold,
           "error": "", "entries": []}
    solvable = adm.admissible and cfg.regime.n in (2, 3)
    if not solvable:
        return row
    try:
        res = _solve_once(cfg, amp)
        rep = measure_estimates(cfg, amp, res)
        row["entries"] = [(e.estimate_id, e.lhs, e.rhs, e.ratio) for e in rep.entries]
    except solver.NonConvergenceError as exc:
        row["error"] = f"non-convergence: {exc}"
    return row


def cmd_sweep(args):
    with open(args.config) as fh:
        cfg_text = fh.read()
    base_dir = os.path.dirname(os.path.abspath(args.config))
    cfg = parse_config(cfg_text, base_dir=base_dir)  # validate before the pool spins up
    values = _floats(args.values)
    if args.vary not in ("q", "amplitude"):
        print(f"cannot vary {args.vary!r}; choose q or amplitude")
        return 2
    jobs = [(cfg_text, base_dir, args.vary, v) for v in values]
    if cfg.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_sweep_point_star, jobs))
    else:
        results = [_sweep_point(*job) for job in jobs]
    rows = []
    for row in results:
        if row["entries"]:
            for est, lhs, rhs, ratio in row["entries"]:
                rows.append((args.vary, row["value"], row["admissible"],
                             row["threshold"], est, lhs, rhs, ratio, row["error"]))
        else:
            rows.append((args.vary, row["value"], row["admissible"], row["threshold"],
                         "", None, None, None, row["error"]))
    header = ["vary", "value", "admissible", "threshold", "estimate_id", "lhs",
              "rhs", "ratio", "error"]
    if args.out:
        write_csv(args.out, header, rows)
    print(",".join(header))
    for row in rows:
        print(",".join(_fmt(v) for v in row))
    return 0


def _sweep_point_star(job):
    return _sweep_point(*job)


def cmd_gehring(args):
    try:
        t = growth.gehring_exponent(args.c0, args.M, args.m)
    except ValueError as exc:
        print(f"error: {exc}")
        return 2
    print(f"{t:.12g}")
    return 0


def cmd_moser(args):
    try:
        params = diagnostics.MoserParams(alpha0=args.alpha0, gamma=args.gamma,
                                         c0=args.c0, M=args.M, tau1=args.tau1,
                                         tau2=args.tau2)
    except ValueError as exc:
        print(f"error: {exc}")
        return 2
    print("i,alpha_i")
    for i in range(args.count + 1):
        print(f"{i},{_fmt(diagnostics.moser_alpha_sequence(params, i))}")
    bound = diagnostics.moser_bound(params, args.V0)
    print(f"bound,{_fmt(bound)}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(
        prog="pqvar",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("check", help="growth certification of the configured integrand")
    pc.add_argument("--config", required=True)
    pc.add_argument("--samples", type=int, default=10000)
    pc.add_argument("--radius", type=float, default=1e3)
    pc.add_argument("--out", default=None)
    pc.set_defaults(fn=cmd_check)

    pj = sub.add_parser("conjugate", help="table of conjugate values at sampled points")
    pj.add_argument("--config", required=True)
    pj.add_argument("--count", type=int, default=10)
    pj.add_argument("--radius", type=float, default=5.0)
    pj.add_argument("--out", default=None)
    pj.set_defaults(fn=cmd_conjugate)

    ps = sub.add_parser("solve", help="run the regularized scheme and export the field")
    ps.add_argument("--config", required=True)
    ps.add_argument("--out", required=True)
    ps.set_defaults(fn=cmd_solve)

    pd = sub.add_parser("diagnose", help="solve per amplitude and measure the estimates")
    pd.add_argument("--config", required=True)
    pd.add_argument("--out", required=True)
    pd.set_defaults(fn=cmd_diagnose)

    pw = sub.add_parser("sweep", help="vary q or amplitude; one diagnostics row per point")
    pw.add_argument("--config", required=True)
    pw.add_argument("--vary", required=True)
    pw.add_argument("--values", required=True)
    pw.add_argument("--out", default=None)
    pw.set_defaults(fn=cmd_sweep)

    pg = sub.add_parser("gehring", help="self-improvement exponent t(c0, M, m)")
    pg.add_argument("--c0", type=float, required=True)
    pg.add_argument("--M", type=float, required=True)
    pg.add_argument("--m", type=float, required=True)
    pg.set_defaults(fn=cmd_gehring)

    pm = sub.add_parser("moser", help="power ladder table and the iterated sup bound")
    pm.add_argument("--alpha0", type=float, default=-1.0)
    pm.add_argument("--gamma", type=float, required=True)
    pm.add_argument("--c0", type=float, default=1.0)
    pm.add_argument("--M", type=float, default=1.0)
    pm.add_argument("--tau1", type=float, default=0.25)
    pm.add_argument("--tau2", type=float, default=0.125)
    pm.add_argument("--V0", type=float, default=1.0)
    pm.add_argument("--count", type=int, default=8)
    pm.set_defaults(fn=cmd_moser)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
