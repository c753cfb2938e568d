"""Command-line front end.

    dfqkd scs sweep --preset table1 --N 1e12,1e13,1e14 --L 0:500:10
    dfqkd npp eval --L 100 --N 1e14 --mu 0.005 --nu 0.002 --p 0.6 --p0 0.5
    dfqkd validate mc --protocol scs --rounds 1e6 --seed 7
    dfqkd definetti --N 1e12 --x 64

Exit codes: 0 success, 1 validation failure, 2 configuration error,
3 zero key at every evaluated point.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .channel import mc_sample, npp_expected_counts, scs_expected_counts
from .config import ConfigError, RunConfig
from .definetti import DimensionSpec, ln_g, ln_g_bound
from .optimizer import PARAM_NAMES, evaluate, optimize, sweep
from .results import KeyRateResult

log = logging.getLogger("dfqkd")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_ZERO_KEY = 3

CSV_COLUMNS = [
    "protocol", "L_km", "N", "mode", "mu", "nu", "p", "p0", "c0",
    "n_O/n_00", "n_B/n_0nu", "n_Z/n_nu0", "n_s", "e_bit", "n_ph_or_ncor",
    "l_bits", "rate_per_pulse", "eps_bar", "eps_cor", "eps_prime",
    "ln_inv_eps0", "ln_g", "clamps",
]


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.12g}"


def result_row(res: KeyRateResult, g_mode: str) -> dict:
    obs = res.observation
    p = res.params
    row = {
        "protocol": res.protocol,
        "L_km": fmt(res.L),
        "N": fmt(res.N),
        "mode": "asymptotic" if res.mode == "asymptotic" else g_mode,
        "mu": fmt(p.get("mu")), "nu": fmt(p.get("nu")), "p": fmt(p.get("p")),
        "p0": fmt(p.get("p0")), "c0": fmt(p.get("c0")),
        "l_bits": fmt(res.l), "rate_per_pulse": fmt(res.rate),
        "clamps": ";".join(res.clamps_hit),
    }
    if res.protocol == "scs":
        row.update({"n_O/n_00": fmt(obs.n_O), "n_B/n_0nu": fmt(obs.n_B),
                    "n_Z/n_nu0": fmt(obs.n_Z), "n_s": "", "e_bit": fmt(obs.e_bit),
                    "n_ph_or_ncor": fmt(res.terms.get("n_ph_bar"))})
    else:
        row.update({"n_O/n_00": fmt(obs.n_00), "n_B/n_0nu": fmt(obs.n_0nu),
                    "n_Z/n_nu0": fmt(obs.n_nu0), "n_s": fmt(obs.n_s), "e_bit": fmt(obs.e_bit),
                    "n_ph_or_ncor": fmt(res.terms.get("n_cor"))})
    row.update({k: fmt(v) for k, v in res.budget.as_row().items()})
    return row


def render_csv(results, g_mode: str) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for res in results:
        writer.writerow(result_row(res, g_mode))
    return buf.getvalue()


def render_summary(cfg: RunConfig, results) -> str:
    g = cfg.global_params
    lines = [
        f"protocol: {cfg.protocol}   g-mode: {cfg.mode}",
        f"p_d={g.p_d:g} e_d={g.e_d:g} eta_d={g.eta_d:g} f={g.f:g} "
        f"alpha_f={g.alpha_f:g} eps_tot={math.exp(-g.eps_tot.t):.3g}",
        f"{'L_km':>8} {'N':>10} {'rate':>12}  params",
    ]
    for r in results:
        label = "inf" if r.mode == "asymptotic" else f"{r.N:.0e}"
        params = " ".join(f"{k}={v:.4g}" for k, v in r.params.items())
        lines.append(f"{r.L:>8g} {label:>10} {r.rate:>12.4e}  {params}")
    positive = [r for r in results if r.l > 0]
    for N in sorted({r.N for r in results if r.mode == "finite"}):
        reach = [r.L for r in positive if r.N == N and r.mode == "finite"]
        lines.append(f"max distance with key, N={N:.0e}: "
                     + (f"{max(reach):g} km" if reach else "none"))
    return "\n".join(lines) + "\n"


def write_outputs(cfg: RunConfig, results, stem: str) -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{stem}.csv"
    csv_path.write_text(render_csv(results, cfg.mode))
    summary = render_summary(cfg, results)
    (out / f"{stem}_summary.txt").write_text(summary)
    sys.stdout.write(summary)
    return csv_path


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _global_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file")
    p.add_argument("--preset", choices=sorted(cfgmod.PRESETS), help="hardware preset")
    p.add_argument("--p-d", dest="p_d")
    p.add_argument("--e-d", dest="e_d")
    p.add_argument("--eta-d", dest="eta_d")
    p.add_argument("--f", dest="f")
    p.add_argument("--alpha-f", dest="alpha_f")
    p.add_argument("--eps-tot", dest="eps_tot")
    p.add_argument("--mode", choices=["exact", "paper-bound"], help="de Finetti penalty")
    p.add_argument("--out", help="output directory")


def _sweep_flags(p):
    p.add_argument("--N", help="comma list of pulse counts, e.g. 1e12,1e13")
    p.add_argument("--L", help="distances: start:stop:step (km, stop exclusive) or list")
    p.add_argument("--no-asymptotic", action="store_true", help="omit asymptotic rows")
    p.add_argument("--jobs", help="parallel workers for distances")
    p.add_argument("--grid-points")
    p.add_argument("--max-refine")
    p.add_argument("--optimize-c0", action="store_true", default=None)
    p.add_argument("--tune-budget", action="store_true", default=None)


def _eval_flags(p, protocol):
    p.add_argument("--N", required=False)
    p.add_argument("--L", required=False)
    for name in PARAM_NAMES[protocol]:
        p.add_argument(f"--{name}")
    if protocol == "scs":
        p.add_argument("--c0")
    p.add_argument("--asymptotic", action="store_true")
    p.add_argument("--optimize", action="store_true",
                   help="optimise parameters instead of evaluating a fixed point")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfqkd", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)
    for protocol in ("scs", "npp"):
        pp = sub.add_parser(protocol, help=f"{protocol.upper()} key-rate analysis")
        psub = pp.add_subparsers(dest="action", required=True)
        s = psub.add_parser("sweep", help="optimised rate-vs-distance table")
        _global_flags(s)
        _sweep_flags(s)
        e = psub.add_parser("eval", help="single-point evaluation with term breakdown")
        _global_flags(e)
        _eval_flags(e, protocol)
    v = sub.add_parser("validate", help="Monte-Carlo channel validation")
    vsub = v.add_subparsers(dest="action", required=True)
    mc = vsub.add_parser("mc")
    _global_flags(mc)
    mc.add_argument("--protocol", choices=["scs", "npp"], default="scs")
    mc.add_argument("--rounds")
    mc.add_argument("--seed")
    mc.add_argument("--seeds", help="number of consecutive seeds")
    mc.add_argument("--L", default=None)
    for name in ("mu", "nu", "p", "p0"):
        mc.add_argument(f"--{name}")
    d = sub.add_parser("definetti", help="print the de Finetti penalty")
    d.add_argument("--N", required=True)
    d.add_argument("--x", help="squared total dimension")
    d.add_argument("--dims", help="d_A,d_B,d_C (alternative to --x)")
    return parser


def _overrides(args, protocol) -> dict:
    a = vars(args)
    over = {"global": {k: a.get(k) for k in ("p_d", "e_d", "eta_d", "f", "alpha_f", "eps_tot")},
            "run": {"mode": a.get("mode")}, "search": {}, "params": {}, "validate": {}}
    if args.action == "sweep":
        over["run"].update(N=a.get("N"), L=a.get("L"), jobs=a.get("jobs"))
        if a.get("no_asymptotic"):
            over["run"]["asymptotic"] = "false"
        over["search"].update(grid_points=a.get("grid_points"), max_refine=a.get("max_refine"),
                              optimize_c0=a.get("optimize_c0"), tune_budget=a.get("tune_budget"))
    elif args.action == "eval":
        over["run"].update(N=a.get("N"), L=a.get("L"))
        over["params"] = {k: a.get(k) for k in (*PARAM_NAMES[protocol], "c0")}
    elif args.action == "mc":
        over["run"].update(L=a.get("L"))
        over["validate"] = {"rounds": a.get("rounds"), "seed": a.get("seed"),
                            "seeds": a.get("seeds")}
        over["params"] = {k: a.get(k) for k in PARAM_NAMES[protocol]}
    return over


def load_run_config(args, protocol) -> RunConfig:
    data = cfgmod.read_ini(args.config) if getattr(args, "config", None) else {}
    if getattr(args, "preset", None):
        data = cfgmod.merge({"global": cfgmod.PRESETS[args.preset]}, data)
    data = cfgmod.merge(data, _overrides(args, protocol))
    data = {s: v for s, v in data.items() if v}
    return cfgmod.build(protocol, data, output=getattr(args, "out", None))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_sweep(cfg: RunConfig) -> int:
    results = sweep(cfg.protocol, cfg.global_params, cfg.distances, cfg.N_values, cfg.space,
                    cfg.mode, cfg.asymptotic, cfg.source, n_jobs=cfg.jobs)
    write_outputs(cfg, results, f"{cfg.protocol}_sweep")
    if results and all(r.zero_key for r in results):
        return EXIT_ZERO_KEY
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args) -> int:
    N = cfg.N_values[0] if args.N is not None else cfg.global_params.N
    L = cfg.distances[0] if args.L is not None else cfg.global_params.L
    g = cfg.global_params.with_(N=N, L=L)
    names = PARAM_NAMES[cfg.protocol]
    if args.optimize:
        res = optimize(cfg.protocol, g, cfg.space, cfg.mode, args.asymptotic, cfg.source)
    else:
        missing = [n for n in names if n not in cfg.params]
        if missing:
            raise ConfigError(f"params.{missing[0]}", "required for eval (or pass --optimize)")
        params = {n: cfg.params[n] for n in names}
        res = evaluate(cfg.protocol, g, params, cfg.mode, args.asymptotic, cfg.source,
                       cfg.params.get("c0"))
    write_outputs(cfg, [res], f"{cfg.protocol}_eval")
    for k, v in res.terms.items():
        sys.stdout.write(f"  {k:>14}: {v:.12g}\n")
    return EXIT_ZERO_KEY if res.zero_key else EXIT_OK


def mc_check(cfg: RunConfig, params: dict, L: float):
    """Sample ``cfg.seeds`` runs and compare every count class with its expectation.

    Returns ``(passed, report_lines)``. A class passes when every seed lies
    within 4 sigma (sigma = sqrt(max(expected, 1))) and the mean signed z over seeds
    has magnitude below 1.
    """
    g = cfg.global_params.with_(N=cfg.rounds, L=L)
    if cfg.protocol == "scs":
        exp_obs = scs_expected_counts(g, params["mu"], params["p"])
        classes = ("n_O", "n_B", "n_Z")
    else:
        exp_obs = npp_expected_counts(g, params["mu"], params["nu"], params["p"], params["p0"])
        classes = ("n_00", "n_0nu", "n_nu0", "n_s")
    zs = {c: [] for c in classes}
    for s in range(cfg.seed, cfg.seed + cfg.seeds):
        obs = mc_sample(g, cfg.protocol, params, cfg.rounds, s)
        for c in classes:
            e = float(getattr(exp_obs, c))
            sigma = math.sqrt(max(e, 1.0))
            zs[c].append((getattr(obs, c) - e) / sigma)
    passed = True
    lines = []
    for c in classes:
        z = np.array(zs[c])
        ok = bool(np.all(np.abs(z) <= 4.0) and abs(z.mean()) < 1.0)
        passed &= ok
        lines.append(f"{'PASS' if ok else 'FAIL'} {c:>6}: expected={float(getattr(exp_obs, c)):.6g} "
                     f"max|z|={np.abs(z).max():.3f} mean z={z.mean():+.3f} "
                     f"mean|z|={np.abs(z).mean():.3f}")
    return passed, lines


DEFAULT_MC_PARAMS = {"mu": 0.05, "nu": 0.1, "p": 0.5, "p0": 0.5}


def cmd_validate(cfg: RunConfig, args) -> int:
    params = {n: cfg.params.get(n, DEFAULT_MC_PARAMS[n]) for n in PARAM_NAMES[cfg.protocol]}
    L = cfg.distances[0] if args.L is not None else 50.0
    passed, lines = mc_check(cfg, params, L)
    header = (f"Monte-Carlo validation: protocol={cfg.protocol} L={L:g} km rounds={cfg.rounds} "
              f"seeds={cfg.seed}..{cfg.seed + cfg.seeds - 1}")
    sys.stdout.write("\n".join([header, *lines, "PASS" if passed else "FAIL"]) + "\n")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_definetti(args) -> int:
    try:
        N = cfgmod.parse_int(args.N)
        if args.dims:
            d = [cfgmod.parse_int(v) for v in args.dims.split(",")]
            if len(d) != 3:
                raise ValueError("--dims needs three values")
            x = DimensionSpec(*d).x
        elif args.x:
            x = cfgmod.parse_int(args.x)
        else:
            raise ValueError("pass --x or --dims")
        exact, bound = ln_g(N, x), ln_g_bound(N, x)
    except ValueError as exc:
        raise ConfigError("definetti", str(exc)) from exc
    sys.stdout.write(f"N={N} x={x}\nln_g exact: {exact:.6f}\nln_g bound: {bound:.6f}\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.cmd == "definetti":
            return cmd_definetti(args)
        protocol = args.protocol if args.cmd == "validate" else args.cmd
        cfg = load_run_config(args, protocol)
        if args.cmd == "validate":
            return cmd_validate(cfg, args)
        if args.action == "sweep":
            return cmd_sweep(cfg)
        return cmd_eval(cfg, args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
