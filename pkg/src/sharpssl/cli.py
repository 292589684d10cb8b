"""Command-line entry point: ``sharpssl {select,cluster,simulate}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.  Reports are JSON (schema in ``report_schema.json``); simulation
tables are CSV.
"""
import argparse
import configparser
import csv
import json
import logging
import math
import os
import sys
import time
from importlib import resources

import numpy as np

from ._accel import set_threads, use_numba
from .base_em import EmConfig, run_em_multistart
from .dataset import load_column, load_csv
from .errors import ConfigError, DataError, NumericalError
from .evaluation import misclustering_rate, recovery, sign_loss
from .projections import SeededRng
from .sharp_ssl import DEFAULT_A, DEFAULT_B, SharpConfig, final_labels, select_variables
from .synth import bayes_risk, build_figure2_spec, build_two_class_spec, sample, spec_from_config

log = logging.getLogger("sharpssl")

SCHEMA_VERSION = 1
EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4

# flag name -> (type, default); also the keys accepted in a --config file
OPTIONS = {
    "data": (str, None),
    "label_column": (str, "label"),
    "unlabeled_token": (str, "0"),
    "k": (int, None),
    "d": (int, 3),
    "l": (int, 3),
    "groups": (int, DEFAULT_A),
    "per_group": (int, DEFAULT_B),
    "base": (str, "em"),
    "seed": (int, 0),
    "em_iters": (int, 100),
    "em_starts": (int, 1),
    "em_init": (str, "hier"),
    "final": (str, "em"),
    "truth": (str, None),
    "support": (str, None),
    "threads": (int, None),
    "out": (str, None),
}
CHOICES = {"base": ("lda", "em"), "em_init": ("sphere", "hier"), "final": ("em", "lda")}


def schema():
    return json.loads(resources.files("sharpssl").joinpath("report_schema.json").read_text())


# ---------------------------------------------------------------------------
# option resolution: flags > config file > defaults
# ---------------------------------------------------------------------------

def _read_config(path):
    cp = configparser.ConfigParser()
    try:
        ok = cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"--config: {exc}") from None
    if not ok:
        raise ConfigError(f"--config: cannot read {path}")
    out = {}
    for section in cp.sections():
        for key, raw in cp[section].items():
            key = key.replace("-", "_")
            if key not in OPTIONS:
                raise ConfigError(f"--config: unknown key {key!r} in [{section}]")
            typ = OPTIONS[key][0]
            try:
                out[key] = typ(raw)
            except ValueError:
                raise ConfigError(f"--config: {key} = {raw!r} is not a valid {typ.__name__}") from None
    return out


def resolve(args):
    file_opts = _read_config(args.config) if getattr(args, "config", None) else {}
    opts = {}
    for key, (_, default) in OPTIONS.items():
        val = getattr(args, key, None)
        if val is None:
            val = file_opts.get(key, default)
        opts[key] = val
    for key, allowed in CHOICES.items():
        if opts[key] not in allowed:
            raise ConfigError(f"--{key.replace('_', '-')}: {opts[key]!r} not in {allowed}")
    if opts["data"] is None:
        raise ConfigError("--data is required")
    if opts["threads"] is None and os.environ.get("SHARPSSL_THREADS"):
        try:
            opts["threads"] = int(os.environ["SHARPSSL_THREADS"])
        except ValueError:
            raise ConfigError("SHARPSSL_THREADS must be an integer") from None
    return opts


def _em_config(opts):
    init = "hierarchical" if opts["em_init"] == "hier" else "sphere"
    return EmConfig(M=opts["em_starts"], T=opts["em_iters"], init=init)


def _sharp_config(opts, ds):
    bound = min(ds.p, ds.n - ds.K)
    if not 1 <= opts["d"] <= bound:
        raise ConfigError(f"--d {opts['d']} must lie in [1, min(p, n - K)] = [1, {bound}]")
    if not 1 <= opts["l"] <= ds.p:
        raise ConfigError(f"--l {opts['l']} must lie in [1, p] = [1, {ds.p}]")
    for flag in ("groups", "per_group", "em_iters", "em_starts"):
        if opts[flag] < 1:
            raise ConfigError(f"--{flag.replace('_', '-')} must be positive")
    base = "lda" if opts["base"] == "lda" else _em_config(opts)
    return SharpConfig(d=opts["d"], ell=opts["l"], A=opts["groups"], B=opts["per_group"],
                       base=base, seed=opts["seed"])


def _load(opts):
    exclude = (opts["truth"],) if opts["truth"] else ()
    try:
        return load_csv(opts["data"], opts["label_column"], opts["unlabeled_token"],
                        K=opts["k"], exclude=exclude)
    except OSError as exc:
        raise DataError(f"--data: {exc}") from None


def _parse_support(text):
    try:
        return sorted(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"--support: {text!r} is not a comma-separated index list") from None


# ---------------------------------------------------------------------------
# select / cluster
# ---------------------------------------------------------------------------

def _report(command, opts, ds, res, labels=None, metrics=None, timings=None):
    echo = {k: opts[k] for k in OPTIONS if k not in ("out", "threads")}
    echo["k"] = ds.K
    rep = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "seed": opts["seed"],
        "config": echo,
        "n": ds.n,
        "p": ds.p,
        "n_labeled": ds.n_labeled,
        "selected": [int(j) for j in res.selected],
        "importance": [float(v) for v in res.importance.w],
        "projection_failures": res.importance.failures,
    }
    if ds.feature_names:
        rep["selected_names"] = [ds.feature_names[j] for j in res.selected]
    if labels is not None:
        rep["labels"] = [int(v) for v in labels]
    if metrics:
        rep["metrics"] = metrics
    if timings is not None:
        rep["timings"] = dict(timings, backend="numba" if use_numba() else "numpy")
    return rep


def _emit(rep, out):
    text = json.dumps(rep, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_select(args):
    opts = resolve(args)
    set_threads(opts["threads"])
    ds = _load(opts)
    cfg = _sharp_config(opts, ds)
    log.info("select: n=%d p=%d K=%d labeled=%d", ds.n, ds.p, ds.K, ds.n_labeled)
    res = select_variables(ds, cfg)
    log.info("sweep done in %.2fs", res.timings["sweep"])
    metrics = {}
    if opts["support"]:
        r = recovery(res.selected, _parse_support(opts["support"]))
        metrics["recovery"] = {"contains": r.contains, "hits": r.hits,
                               "precision": r.precision, "recall": r.recall}
    _emit(_report("select", opts, ds, res, metrics=metrics,
                  timings=res.timings if args.timings else None), opts["out"])
    return 0


def cmd_cluster(args):
    opts = resolve(args)
    set_threads(opts["threads"])
    ds = _load(opts)
    cfg = _sharp_config(opts, ds)
    log.info("cluster: n=%d p=%d K=%d labeled=%d", ds.n, ds.p, ds.K, ds.n_labeled)
    res = select_variables(ds, cfg)
    log.info("sweep done in %.2fs", res.timings["sweep"])
    t = time.perf_counter()
    labels = final_labels(ds, res.selected, opts["final"], opts["seed"])
    timings = dict(res.timings, final=time.perf_counter() - t)
    metrics = {}
    if opts["truth"]:
        truth = load_column(opts["data"], opts["truth"])
        unl = ds.y == 0
        metrics["misclustering"] = misclustering_rate(truth, labels, ds.K)
        if unl.any():
            metrics["misclustering_unlabeled"] = misclustering_rate(truth[unl], labels[unl], ds.K)
    if opts["support"]:
        r = recovery(res.selected, _parse_support(opts["support"]))
        metrics["recovery"] = {"contains": r.contains, "hits": r.hits,
                               "precision": r.precision, "recall": r.recall}
    _emit(_report("cluster", opts, ds, res, labels, metrics,
                  timings if args.timings else None), opts["out"])
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

FIGURE_DEFAULTS = {
    "2-iso": dict(p=200, snr=[4.0], n=[250], gamma=[0.05]),
    "2-aniso": dict(p=200, snr=[4.0], n=[250], gamma=[0.05]),
    "3": dict(p=3, snr=[1.5], n=[250], gamma=[0.0, 0.05, 0.3]),
}
SIM_FIELDS = ["row", "figure", "p", "snr", "n", "gamma", "rep", "misclustering",
              "misclustering_ci_low", "misclustering_ci_high", "bayes_risk",
              "recovered", "sign_loss", "sign_loss_ci_low", "sign_loss_ci_high"]
Z95 = 1.959963984540054


def _floats(text, flag):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"--{flag}: {text!r} is not a comma-separated number list") from None


def _ci(values):
    values = np.asarray([v for v in values if v is not None and not math.isnan(v)], dtype=float)
    if values.size == 0:
        return None, None, None
    m = float(values.mean())
    if values.size < 2:
        return m, None, None
    half = Z95 * float(values.std(ddof=1)) / math.sqrt(values.size)
    return m, m - half, m + half


def _sim_rep_sharp(spec, n, opts, rep_seed):
    ds, truth = sample(spec, n, SeededRng(rep_seed, (0,)))
    cfg = SharpConfig(d=opts["d"], ell=opts["l"], A=opts["groups"], B=opts["per_group"],
                      base=_em_config(opts), seed=rep_seed)
    cfg.validate(ds)
    res = select_variables(ds, cfg)
    labels = final_labels(ds, res.selected, "em", rep_seed)
    unl = ds.y == 0
    miscl = misclustering_rate(truth[unl], labels[unl], ds.K) if unl.any() else 0.0
    return {"misclustering": miscl,
            "recovered": int(recovery(res.selected, spec.support).contains)}


def _sim_rep_symmetric(spec, n, opts, rep_seed):
    ds, truth = sample(spec, n, SeededRng(rep_seed, (0,)))
    em = EmConfig(M=opts["em_starts"], T=opts["em_iters"], variant="symmetric", init="sphere")
    fit = run_em_multistart(ds, em, SeededRng(rep_seed, (1,)), return_fit=True)
    mu_hat = fit.params.means[1]
    labels = fit.labels.hard()
    unl = ds.y == 0
    miscl = misclustering_rate(truth[unl], labels[unl], 2) if unl.any() else 0.0
    return {"misclustering": miscl, "sign_loss": sign_loss(mu_hat, spec.means[1])}


def cmd_simulate(args):
    if not args.figure and not args.spec_file:
        raise ConfigError("--figure or --spec-file is required")
    if args.reps < 1:
        raise ConfigError("--reps must be positive")
    set_threads(args.threads if args.threads is not None
                else int(os.environ.get("SHARPSSL_THREADS", "0")) or None)
    figure = args.figure or "spec"
    grid = dict(FIGURE_DEFAULTS.get(figure, dict(p=None, snr=[None], n=[250], gamma=[None])))
    if args.snr:
        grid["snr"] = _floats(args.snr, "snr")
    if args.n:
        grid["n"] = [int(v) for v in _floats(args.n, "n")]
    if args.gamma:
        grid["gamma"] = _floats(args.gamma, "gamma")
    if args.p:
        grid["p"] = args.p
    opts = {"d": args.d, "l": args.l, "groups": args.groups, "per_group": args.per_group,
            "em_iters": args.em_iters, "em_starts": args.em_starts, "em_init": args.em_init}
    if figure == "3" and args.em_starts is None:
        opts["em_starts"] = 10
    opts = {k: (OPTIONS[k][1] if v is None else v) for k, v in opts.items()}

    rows = []
    setting = 0
    for snr in grid["snr"]:
        for n in grid["n"]:
            for gamma in grid["gamma"]:
                if figure == "spec":
                    spec = spec_from_config(args.spec_file)
                    if gamma is not None:
                        spec = spec.with_gamma(gamma)
                elif figure == "3":
                    spec = build_two_class_spec(grid["p"], grid["p"], snr, gamma)
                else:
                    variant = "isotropic" if figure == "2-iso" else "anisotropic"
                    spec = build_figure2_spec(grid["p"], snr, variant,
                                              SeededRng(args.seed, (9, setting)), gamma)
                bayes = bayes_risk(spec, args.bayes_mc, SeededRng(args.seed, (8, setting))).risk
                per = []
                for rep in range(args.reps):
                    rep_seed = args.seed * 1_000_003 + setting * 10_007 + rep
                    fn = _sim_rep_symmetric if figure == "3" else _sim_rep_sharp
                    out = fn(spec, n, opts, rep_seed)
                    log.info("setting %d rep %d: %s", setting, rep, out)
                    per.append(out)
                    rows.append({"row": "rep", "figure": figure, "p": spec.p, "snr": snr, "n": n,
                                 "gamma": spec.gamma, "rep": rep, "bayes_risk": bayes, **out})
                if args.reps > 1:
                    m, lo, hi = _ci([r["misclustering"] for r in per])
                    agg = {"row": "mean", "figure": figure, "p": spec.p, "snr": snr, "n": n,
                           "gamma": spec.gamma, "rep": args.reps, "bayes_risk": bayes,
                           "misclustering": m, "misclustering_ci_low": lo,
                           "misclustering_ci_high": hi}
                    if figure == "3":
                        s, slo, shi = _ci([r["sign_loss"] for r in per])
                        agg.update(sign_loss=s, sign_loss_ci_low=slo, sign_loss_ci_high=shi)
                    else:
                        agg["recovered"] = float(np.mean([r["recovered"] for r in per]))
                    rows.append(agg)
                setting += 1

    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=SIM_FIELDS, restval="", lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if v is None else v) for k, v in r.items()})
    finally:
        if args.out:
            fh.close()
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_common(sp):
    sp.add_argument("--config", help="INI file whose keys mirror the long flags")
    sp.add_argument("--data", help="CSV with a header row")
    sp.add_argument("--label-column", help="name of the label column, or 'none'")
    sp.add_argument("--unlabeled-token", help="label value meaning unlabeled (default 0)")
    sp.add_argument("--k", type=int, help="number of classes (default: largest label)")
    sp.add_argument("--d", type=int, help="projected dimension (default 3)")
    sp.add_argument("--l", type=int, help="number of coordinates to select (default 3)")
    sp.add_argument("--groups", type=int, help=f"A, number of groups (default {DEFAULT_A})")
    sp.add_argument("--per-group", type=int, help=f"B, projections per group (default {DEFAULT_B})")
    sp.add_argument("--base", help="base learner: lda or em (default em)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--em-iters", type=int, help="T, EM iterations (default 100)")
    sp.add_argument("--em-starts", type=int, help="M, random EM starts (default 1)")
    sp.add_argument("--em-init", help="sphere or hier (default hier)")
    sp.add_argument("--truth", help="column holding true labels (excluded from features)")
    sp.add_argument("--support", help="comma-separated true signal coordinates (0-based)")
    sp.add_argument("--threads", type=int, help="worker threads (env SHARPSSL_THREADS)")
    sp.add_argument("--out", help="write the JSON report here instead of stdout")
    sp.add_argument("--timings", action="store_true",
                    help="include wall-clock timings (breaks byte-identical reruns)")


def build_parser():
    ap = argparse.ArgumentParser(prog="sharpssl", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("select", help="rank and select coordinates")
    _add_common(sp)
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("cluster", help="select coordinates, then label every row")
    _add_common(sp)
    sp.add_argument("--final", help="final learner on the selected coordinates: em or lda")
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("simulate", help="Monte Carlo study on synthetic mixtures")
    sp.add_argument("--figure", choices=sorted(FIGURE_DEFAULTS))
    sp.add_argument("--spec-file", help="INI mixture spec (instead of --figure)")
    sp.add_argument("--reps", type=int, default=20)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--snr", help="comma-separated list")
    sp.add_argument("--n", help="comma-separated list")
    sp.add_argument("--gamma", help="comma-separated list")
    sp.add_argument("--p", type=int)
    sp.add_argument("--d", type=int)
    sp.add_argument("--l", type=int)
    sp.add_argument("--groups", type=int)
    sp.add_argument("--per-group", type=int)
    sp.add_argument("--em-iters", type=int)
    sp.add_argument("--em-starts", type=int)
    sp.add_argument("--em-init", choices=("sphere", "hier"))
    sp.add_argument("--bayes-mc", type=int, default=100_000,
                    help="Monte Carlo draws for the Bayes risk")
    sp.add_argument("--threads", type=int)
    sp.add_argument("--out", help="CSV path (default stdout)")
    sp.set_defaults(func=cmd_simulate)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"sharpssl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"sharpssl: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"sharpssl: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
