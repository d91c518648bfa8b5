"""Command-line interface.

Every command prints one JSON document (or writes it to ``--output``).
Exit status: 0 success, 1 usage error, 2 domain error, 3 resource, accounting
or I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import account, census, duality, mech, oracle
from .curve import (PiecewiseLinearCurve, TradeoffCurve, make_eps_delta, make_gaussian,
                    max_divergence, renyi, total_variation)
from .errors import (AccountingError, ConstructionError, DomainError, ResourceError,
                     SearchExhaustedError)

CONFIG_ENV = "FDPKIT_CONFIG"
DEFAULTS = {"grid": 10_000, "cell": 1e-4, "delta": 1e-5}


def load_defaults() -> dict:
    """Built-in defaults, overridden by the JSON file named in $FDPKIT_CONFIG."""
    cfg = dict(DEFAULTS)
    path = os.environ.get(CONFIG_ENV)
    if path:
        with open(path) as fh:
            cfg.update(json.load(fh))
    return cfg


# ---------------------------------------------------------------------------
# curve interchange and plotting

def write_curve_csv(curve: TradeoffCurve, dest) -> None:
    """Writes the knots of ``curve`` as ``alpha,beta`` rows with 17 significant digits."""
    pwl = curve.to_piecewise()
    own = isinstance(dest, (str, Path))
    fh = open(dest, "w", newline="") if own else dest
    try:
        fh.write("alpha,beta\n")
        for a, b in zip(pwl.alphas, pwl.betas):
            fh.write(f"{a:.17g},{b:.17g}\n")
    finally:
        if own:
            fh.close()


def read_curve_csv(path) -> PiecewiseLinearCurve:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["alpha", "beta"]:
            raise DomainError(f"{path}: curve CSV needs the header alpha,beta")
        try:
            rows = [(float(a), float(b)) for a, b in reader]
        except ValueError as err:
            raise DomainError(f"{path}: {err}") from None
    if len(rows) < 2:
        raise DomainError(f"{path}: need at least two knots")
    knots = np.array(rows)
    return PiecewiseLinearCurve(knots[:, 0], knots[:, 1])


def plot_curve(curves, path, points: int = 501) -> None:
    """SVG of named curves over the identity reference; byte-stable for equal input.

    Args:
      curves: mapping or sequence of (name, curve) pairs.
      path: output file.
    """
    from matplotlib import rc_context
    from matplotlib.figure import Figure

    items = list(curves.items()) if isinstance(curves, Mapping) else list(curves)
    if not items:
        raise DomainError("plot needs at least one curve")
    xs = np.linspace(0.0, 1.0, points)
    with rc_context({"svg.hashsalt": "fdpkit", "svg.fonttype": "path",
                     "path.simplify": False}):
        fig = Figure(figsize=(4.5, 4.5))
        ax = fig.add_subplot()
        ax.plot([0.0, 1.0], [1.0, 0.0], ls="--", lw=0.8, color="0.6", gid="reference",
                label="Id")
        for i, (name, curve) in enumerate(items):
            ax.plot(xs, curve(xs), lw=1.4, gid=f"curve-{i}", label=str(name))
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
        ax.set_aspect("equal")
        ax.set_xlabel(r"type I error $\alpha$")
        ax.set_ylabel(r"type II error $\beta$")
        ax.legend(frameon=False, loc="upper right")
        fig.savefig(path, format="svg", metadata={"Date": None})


# ---------------------------------------------------------------------------
# helpers

def _num(x):
    """JSON-safe float: non-finite values become strings."""
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, dict):
        return {k: _num(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_num(v) for v in x]
    return x


def _emit(doc: dict, args) -> None:
    text = json.dumps(_num(doc), indent=2, sort_keys=True)
    if getattr(args, "output", None):
        Path(args.output).write_text(text + "\n")
    else:
        print(text)


def _curves_from(args) -> list:
    """(name, curve) pairs from the shared curve-source flags, in flag order."""
    out = []
    for mu in args.gaussian or []:
        out.append((f"G_{mu:g}", make_gaussian(mu)))
    for eps in args.pure or []:
        out.append((f"f_{eps:g},0", make_eps_delta(eps, 0.0)))
    for eps, delta in args.eps_delta or []:
        out.append((f"f_{eps:g},{delta:g}", make_eps_delta(eps, delta)))
    for path in args.curve or []:
        out.append((Path(path).stem, read_curve_csv(path)))
    for path in args.mech or []:
        with open(path) as fh:
            spec = mech.spec_from_dict(json.load(fh))
        out.append((spec.kind, spec.curve()))
    return out


def _add_curve_sources(p):
    p.add_argument("--gaussian", type=float, action="append", metavar="MU",
                   help="G_mu (repeatable)")
    p.add_argument("--pure", type=float, action="append", metavar="EPS",
                   help="f_{eps,0} (repeatable)")
    p.add_argument("--eps-delta", type=float, nargs=2, action="append",
                   metavar=("EPS", "DELTA"), help="f_{eps,delta} (repeatable)")
    p.add_argument("--curve", action="append", metavar="CSV", help="curve CSV (repeatable)")
    p.add_argument("--mech", action="append", metavar="JSON",
                   help="mechanism specification (repeatable)")


# ---------------------------------------------------------------------------
# commands

def cmd_compose(args) -> int:
    named = _curves_from(args)
    if not named:
        raise DomainError("compose needs at least one curve")
    curves = [c for _, c in named] * args.repeat
    gaussian = all(type(c).__name__ == "GaussianCurve" for c in curves)
    if args.method == "closed":
        if not gaussian:
            raise DomainError("closed-form composition needs Gaussian curves only")
        report = account.compose_closed_form([c.mu for c in curves])
    elif args.method == "clt":
        report = account.clt_report(curves)
    else:
        report = account.compose_tensor(curves, cell=args.cell)
    lo, hi = report.eps_bounds(args.delta)
    doc = {"command": "compose", "method": report.method.value, "delta": args.delta,
           "eps_lower": lo, "eps_upper": hi, "m": len(curves),
           "certified": report.certified, "diagnostics": report.diagnostics}
    if gaussian:
        mu = account.compose_gaussian([c.mu for c in curves])
        doc["closed_form_mu"] = mu
        doc["closed_form_eps"] = duality.eps_at_delta(make_gaussian(mu), args.delta)
    if args.out_curve:
        write_curve_csv(report.lower, args.out_curve)
    if args.plot:
        plot_curve([("lower", report.lower), ("upper", report.upper)], args.plot)
    _emit(doc, args)
    return 0


def cmd_convert(args) -> int:
    named = _curves_from(args)
    if len(named) != 1:
        raise DomainError("convert needs exactly one curve")
    curve = named[0][1]
    doc = {"command": "convert", "curve": named[0][0],
           "max_divergence": max_divergence(curve),
           "total_variation": total_variation(curve)}
    pairs = [{"eps": e, "delta": duality.delta_at_eps(curve, e)} for e in args.eps or []]
    doc["delta_at_eps"] = pairs
    if len(pairs) == 1:
        doc["delta"] = pairs[0]["delta"]
    inv = [{"delta": d, "eps": duality.eps_at_delta(curve, d)} for d in args.delta or []]
    doc["eps_at_delta"] = inv
    if len(inv) == 1:
        doc["eps"] = inv[0]["eps"]
    doc["renyi"] = [{"gamma": g, "value": renyi(curve, g)} for g in args.gamma or []]
    _emit(doc, args)
    return 0


def cmd_dpsgd(args) -> int:
    method = {"gdp": "GDPLimit", "edgeworth": "Edgeworth", "fft": "FFT"}[args.method]
    cell = args.cell if args.cell is not None else account.DPSGD_CELL
    res = account.dpsgd_account(args.sigma, args.p, args.T, method, args.delta, cell=cell)
    doc = {"command": "dpsgd", "method": res.method.value, "sigma": args.sigma,
           "p": args.p, "T": args.T, "delta": args.delta, "eps": res.eps,
           "eps_lower": res.eps_lower, "eps_upper": res.eps_upper, "mu": res.mu,
           "diagnostics": {k: v for k, v in res.diagnostics.items()
                           if isinstance(v, (int, float, str, bool))}}
    if args.out_curve:
        write_curve_csv(res.curve, args.out_curve)
    if args.plot:
        plot_curve([(f"DP-SGD T={args.T}", res.curve)], args.plot)
    _emit(doc, args)
    return 0


def cmd_mixture(args) -> int:
    with open(args.spec) as fh:
        spec = mech.spec_from_dict(json.load(fh))
    if not isinstance(spec, mech.MixtureSpec):
        raise DomainError("mixture needs a specification of kind Mixture")
    curve = spec.curve()
    doc = {"command": "mixture", "components": len(spec.components),
           "knots": int(curve.alphas.size), "total_variation": total_variation(curve),
           "delta": args.delta, "eps": duality.eps_at_delta(curve, args.delta)}
    if args.out_curve:
        write_curve_csv(curve, args.out_curve)
    _emit(doc, args)
    return 0


def cmd_census(args) -> int:
    table = census.AllocationTable.from_csv(args.table)
    res = census.census_compose(table, args.delta, cell=args.cell)
    doc = {"command": "census", **res.to_json()}
    _emit(doc, args)
    return 0


def cmd_cnd(args) -> int:
    named = _curves_from(args)
    if len(named) != 1:
        raise DomainError("cnd needs exactly one target curve")
    dist = mech.construct_cnd(named[0][1])
    doc = {"command": "cnd", "target": named[0][0], "c": dist.c,
           "validation": mech.validate_cnd(dist), "seed": args.seed, "n": args.n}
    if args.n:
        draws = mech.cnd_sample(dist, np.random.default_rng(args.seed), args.n)
        doc["sample_median"] = float(np.median(draws))
        doc["sample_mean"] = float(np.mean(draws))
        if args.samples:
            np.savetxt(args.samples, draws, fmt="%.17g", header="z", comments="")
    _emit(doc, args)
    return 0


def cmd_verify(args) -> int:
    alphas = (np.arange(args.points) + 0.5) / args.points
    if args.discrete_gaussian is not None:
        sigma = args.discrete_gaussian
        x, p, q, _ = mech.discrete_gaussian_support(sigma, 1)
        target = mech.discrete_gaussian_curve(sigma, 1)
        sampler_p = lambda rng, n: rng.choice(x, size=n, p=p)
        sampler_q = lambda rng, n: rng.choice(x, size=n, p=q)
        loss = lambda v: (1.0 - 2.0 * v) / (2.0 * sigma * sigma)
        label = f"discrete Gaussian sigma={sigma:g}"
    else:
        mu = args.gaussian_shift
        target = make_gaussian(mu)
        sampler_p = lambda rng, n: rng.standard_normal(n)
        sampler_q = lambda rng, n: rng.standard_normal(n) + mu
        loss = lambda v: mu * mu / 2 - mu * v
        label = f"G_{mu:g}"
    emp = oracle.mc_tradeoff(sampler_p, sampler_q, loss, args.n, alphas, seed=args.seed)
    covered = int(np.sum(emp.contains(target)))
    doc = {"command": "verify", "target": label, "n": args.n, "seed": args.seed,
           "points": int(alphas.size), "covered": covered,
           "passed": covered >= math.ceil(0.95 * alphas.size),
           "alphas": emp.alphas.tolist(), "betas": emp.betas.tolist(),
           "half_widths": emp.half_widths.tolist()}
    _emit(doc, args)
    return 0


def cmd_plot(args) -> int:
    named = _curves_from(args)
    plot_curve(named, args.out)
    _emit({"command": "plot", "path": str(args.out), "curves": [n for n, _ in named]}, args)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def build_parser() -> argparse.ArgumentParser:
    cfg = load_defaults()
    parser = _Parser(prog="fdpkit", description="Trade-off function privacy accounting.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--output", help="write the JSON document here instead of stdout")

    p = sub.add_parser("compose", help="compose curves and report eps bounds")
    _add_curve_sources(p)
    p.add_argument("--repeat", type=int, default=1, help="compose the listed curves this many times")
    p.add_argument("--method", choices=["fft", "closed", "clt"], default="fft")
    p.add_argument("--cell", type=float, default=cfg["cell"])
    p.add_argument("--delta", type=float, default=cfg["delta"])
    p.add_argument("--out-curve", help="write the certified lower curve as CSV")
    p.add_argument("--plot", help="write an SVG of both bounds")
    common(p)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("convert", help="convert a curve to (eps, delta), Renyi and TV")
    _add_curve_sources(p)
    p.add_argument("--eps", type=float, action="append", help="report delta at eps")
    p.add_argument("--delta", type=float, action="append", help="report eps at delta")
    p.add_argument("--gamma", type=float, action="append", help="report Renyi divergence")
    common(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("dpsgd", help="account for noisy subsampled gradient descent")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--method", choices=["gdp", "edgeworth", "fft"], default="fft")
    p.add_argument("--delta", type=float, default=cfg["delta"])
    p.add_argument("--cell", type=float, default=None)
    p.add_argument("--out-curve")
    p.add_argument("--plot")
    common(p)
    p.set_defaults(func=cmd_dpsgd)

    p = sub.add_parser("mixture", help="lower bound for a mixture specification")
    p.add_argument("--spec", required=True, help="MechanismSpec JSON of kind Mixture")
    p.add_argument("--delta", type=float, default=cfg["delta"])
    p.add_argument("--out-curve")
    common(p)
    p.set_defaults(func=cmd_mixture)

    p = sub.add_parser("census", help="compose discrete Gaussian counting queries")
    p.add_argument("--table", required=True, help="CSV with header level,query,sigma")
    p.add_argument("--delta", type=float, default=cfg["delta"])
    p.add_argument("--cell", type=float, default=cfg["cell"])
    common(p)
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("cnd", help="canonical noise distribution for a target curve")
    _add_curve_sources(p)
    p.add_argument("--n", type=int, default=0, help="number of draws")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", help="write the draws as CSV")
    common(p)
    p.set_defaults(func=cmd_cnd)

    p = sub.add_parser("verify", help="Monte Carlo check of an analytic curve")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--gaussian-shift", type=float, default=1.0, metavar="MU")
    group.add_argument("--discrete-gaussian", type=float, metavar="SIGMA")
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="render curves to SVG")
    _add_curve_sources(p)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DomainError as err:
        print(f"fdpkit: {err}", file=sys.stderr)
        return 2
    except (AccountingError, ResourceError, ConstructionError, SearchExhaustedError,
            OSError) as err:
        print(f"fdpkit: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
