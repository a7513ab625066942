"""Command-line entry point: fit | assign | validate | compare | simulate.

Every command is a pure function of (input files, flags, seed) to (output
files, exit code): artifacts are emitted with sorted JSON keys and repr-level
floats, so a fixed seed reproduces them byte for byte. Config-file values
(``--config``, JSON) override defaults; command-line flags override both.
All randomness derives from ``--seed`` via ``numpy.random.SeedSequence``
spawning (one child stream per chain / restart / subject).
"""

import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from .core import GldaParams, GmmParams, PriorConfig
from .errors import DataValidationError, GldakitError, NumericalError
from .glda import GldaFitConfig, glda_fit
from .gmm import GmmFitConfig, gmm_fit, gmm_hard_assign, realized_proportions
from .ingest import (load_cohort, load_outcomes, save_cohort, save_outcomes,
                     standardize_within_subject)
from .posterior import glda_membership, state_series
from .synth import (SynthConfig, default_outcome_rule, generate_glda,
                    generate_gmm)
from .validate import (compare_models, render_comparison, render_results,
                       results_to_json, validate_weights)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _maybe_standardize(data, standardize):
    if not standardize:
        return data, None
    std, stats = standardize_within_subject(data)
    return std, stats


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def cmd_fit(args):
    data = load_cohort(args.cohort, delimiter=args.delimiter)
    data, stats = _maybe_standardize(data, not args.no_standardize)

    config_echo = {
        "model": args.model, "k": args.k, "seed": args.seed,
        "standardized": not args.no_standardize,
    }
    doc = {
        "model": args.model,
        "subject_ids": list(data.subject_ids),
        "var_names": list(data.var_names),
        "standardization": stats,
    }
    if args.model == "glda":
        config = GldaFitConfig(
            k=args.k, n_iters=args.iters, n_warmup=args.warmup,
            n_chains=args.chains, seed=args.seed,
            prior=PriorConfig.default(data.n_vars, alpha=args.alpha))
        config_echo.update({"n_iters": args.iters, "n_warmup": args.warmup,
                            "n_chains": args.chains, "alpha": args.alpha})
        post = glda_fit(data, config)
        doc.update({
            "theta": post.params.theta.tolist(),
            "mu": post.params.mu.tolist(),
            "sigma": post.params.sigma.tolist(),
            "diagnostics": {
                "logdensity": post.logdensity.tolist(),
                "rhat_mu": post.rhat["mu"].tolist(),
                "rhat_theta_max": float(np.nanmax(post.rhat["theta"])),
            },
        })
        if args.trace_out:
            _write_glda_trace(args.trace_out, post)
        print(f"glda fit: K={args.k}, M={data.n_subjects}, N={data.n_obs}, "
              f"max split-Rhat(mu)={np.nanmax(post.rhat['mu']):.4f}")
    else:
        config = GmmFitConfig(k=args.k, max_iters=args.iters,
                              n_restarts=args.restarts, seed=args.seed)
        config_echo.update({"max_iters": args.iters,
                            "n_restarts": args.restarts})
        params, loglik, trace = gmm_fit(data, config)
        doc.update({
            "theta": params.theta.tolist(),
            "mu": params.mu.tolist(),
            "sigma": params.sigma.tolist(),
            "diagnostics": {"log_likelihood": loglik,
                            "n_iterations": len(trace),
                            "loglik_trace": trace.tolist()},
        })
        print(f"gmm fit: K={args.k}, N={data.n_obs}, "
              f"log-likelihood={loglik:.4f}")
    doc["config"] = config_echo
    _write_json(args.out, doc)
    return EXIT_OK


def _write_glda_trace(path, post):
    n_warmup = post.config.n_warmup
    with open(path, "w", encoding="utf-8") as fh:
        k, v = post.mu_draws.shape[2], post.mu_draws.shape[3]
        cols = ["chain", "iter", "logdensity"]
        cols += [f"mu_{j}_{d}" for j in range(k) for d in range(v)]
        fh.write("\t".join(cols) + "\n")
        for c in range(post.mu_draws.shape[0]):
            for t in range(post.mu_draws.shape[1]):
                row = [str(c), str(n_warmup + t),
                       repr(float(post.logdensity[c, n_warmup + t]))]
                row += [repr(float(x)) for x in post.mu_draws[c, t].ravel()]
                fh.write("\t".join(row) + "\n")


# ---------------------------------------------------------------------------
# params artifact round trip
# ---------------------------------------------------------------------------

def _params_from_doc(doc):
    model = doc["model"]
    mu = np.asarray(doc["mu"], dtype=float)
    sigma = np.asarray(doc["sigma"], dtype=float)
    theta = np.asarray(doc["theta"], dtype=float)
    k = mu.shape[0]
    if model == "glda":
        return GldaParams(k=k, theta=theta, mu=mu, sigma=sigma)
    return GmmParams(k=k, theta=theta, mu=mu, sigma=sigma)


def _load_fit(path):
    doc = _load_json(path)
    if "model" not in doc:
        raise DataValidationError(f"{path}: not a fit artifact")
    return doc, _params_from_doc(doc)


def _cohort_for_params(args, doc):
    data = load_cohort(args.cohort, delimiter=args.delimiter)
    if doc["config"].get("standardized", True):
        data, _ = _maybe_standardize(data, True)
    if doc.get("var_names") and list(data.var_names) != doc["var_names"]:
        raise DataValidationError(
            "cohort variable columns do not match the fit artifact")
    return data


def _reindex_cohort(data, doc, params):
    """Map cohort subject indices onto the fit artifact's subject order."""
    if not isinstance(params, GldaParams):
        return data
    fit_ids = doc["subject_ids"]
    if list(data.subject_ids) == fit_ids:
        return data
    raise DataValidationError(
        "cohort subjects do not match the fit artifact's subjects")


# ---------------------------------------------------------------------------
# assign
# ---------------------------------------------------------------------------

def cmd_assign(args):
    doc, params = _load_fit(args.params)
    data = _cohort_for_params(args, doc)
    data = _reindex_cohort(data, doc, params)
    if params.n_vars != data.n_vars:
        raise DataValidationError("params/data dimension mismatch")

    if isinstance(params, GldaParams):
        trace = glda_membership(data, params)
    else:
        trace = gmm_hard_assign(data, params)

    keep = np.ones(data.n_obs, dtype=bool)
    if args.subject is not None:
        if args.subject not in data.subject_ids:
            raise DataValidationError(f"unknown subject {args.subject!r}")
        keep = data.subjects == data.subject_ids.index(args.subject)

    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=args.delimiter)
        header = ["subject", "timestamp", "label"]
        header += [f"resp_{j}" for j in range(trace.k)]
        writer.writerow(header)
        for n in range(data.n_obs):
            if not keep[n]:
                continue
            ts = "" if trace.timestamps is None else repr(
                float(trace.timestamps[n]))
            row = [data.subject_ids[trace.subjects[n]], ts,
                   str(int(trace.labels[n]))]
            row += [repr(float(x)) for x in trace.responsibilities[n]]
            writer.writerow(row)

    if args.series_dir:
        import os
        os.makedirs(args.series_dir, exist_ok=True)
        targets = ([data.subject_ids.index(args.subject)]
                   if args.subject is not None else range(data.n_subjects))
        for m in targets:
            series = state_series(trace, m)
            path = os.path.join(args.series_dir,
                                f"series_{data.subject_ids[m]}.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, delimiter=args.delimiter)
                writer.writerow(["timestamp", "label"])
                for ts, label in series:
                    writer.writerow([repr(ts), str(label)])
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate / compare
# ---------------------------------------------------------------------------

def _weights_for(doc, params, data, soft=False):
    if isinstance(params, GldaParams):
        return params.theta, doc["subject_ids"]
    trace = gmm_hard_assign(data, params)
    props = realized_proportions(trace, data.n_subjects, params.k, soft=soft)
    return props, list(data.subject_ids)


def cmd_validate(args):
    doc, params = _load_fit(args.params)
    data = _cohort_for_params(args, doc)
    data = _reindex_cohort(data, doc, params)
    outcomes = load_outcomes(args.outcomes, cohort=data,
                             delimiter=args.delimiter)
    weights, ids = _weights_for(doc, params, data, soft=args.soft)
    results = validate_weights(weights, ids, outcomes, doc["model"])
    text = render_results(results)
    with open(args.out + ".txt", "w", encoding="utf-8") as fh:
        fh.write(text)
    with open(args.out + ".json", "w", encoding="utf-8") as fh:
        fh.write(results_to_json(results) + "\n")
    print(text, end="")
    return EXIT_OK


def cmd_compare(args):
    doc_a, params_a = _load_fit(args.glda_params)
    doc_b, params_b = _load_fit(args.gmm_params)
    if doc_a["model"] != "glda" or doc_b["model"] != "gmm":
        raise DataValidationError(
            "--glda-params must be a glda fit and --gmm-params a gmm fit")
    if params_a.k != params_b.k:
        raise DataValidationError("fits have different K")
    data = _cohort_for_params(args, doc_a)
    data = _reindex_cohort(data, doc_a, params_a)
    outcomes = load_outcomes(args.outcomes, cohort=data,
                             delimiter=args.delimiter)
    w_a, ids_a = _weights_for(doc_a, params_a, data)
    w_b, ids_b = _weights_for(doc_b, params_b, data)
    res_a = validate_weights(w_a, ids_a, outcomes, "glda")
    res_b = validate_weights(w_b, ids_b, outcomes, "gmm")
    cells = compare_models(res_a, res_b, glda_means=params_a.mu,
                           gmm_means=params_b.mu)
    text = render_comparison(cells)
    with open(args.out + ".txt", "w", encoding="utf-8") as fh:
        fh.write(text)
    _write_json(args.out + ".json", cells)
    print(text, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    rule = default_outcome_rule(args.k) if args.with_outcomes else None
    config = SynthConfig(
        m=args.m, k=args.k, v=args.v, obs_per_subject=args.obs,
        alpha=args.alpha, mean_separation=args.separation,
        covariance_scale=args.cov_scale, outcome_rule=rule, seed=args.seed)
    if args.model == "glda":
        data, truth, outcomes = generate_glda(config)
        truth_doc = {"model": "glda", "theta": truth.theta.tolist()}
    else:
        data, truth = generate_gmm(config)
        outcomes = None
        truth_doc = {"model": "gmm", "theta": truth.theta.tolist()}
    truth_doc.update({"mu": truth.mu.tolist(), "sigma": truth.sigma.tolist(),
                      "config": {"m": args.m, "k": args.k, "v": args.v,
                                 "obs": args.obs, "alpha": args.alpha,
                                 "separation": args.separation,
                                 "cov_scale": args.cov_scale,
                                 "seed": args.seed}})
    save_cohort(data, args.out_prefix + "_cohort.csv",
                delimiter=args.delimiter)
    if outcomes is not None:
        save_outcomes(outcomes, args.out_prefix + "_outcomes.csv",
                      delimiter=args.delimiter)
    _write_json(args.out_prefix + "_truth.json", truth_doc)
    print(f"simulated {args.model} cohort: M={args.m}, V={args.v}, "
          f"N={data.n_obs}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(
        prog="gldakit",
        description="Hierarchical mixture-model toolkit for discrete state "
                    "discovery from repeated multivariate cohort data")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def shared(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="JSON file of flag defaults")
        p.add_argument("--delimiter", default=",")

    p = sub.add_parser("fit", help="fit a model to a cohort file")
    shared(p)
    p.add_argument("--model", choices=["glda", "gmm"], required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--warmup", type=int, default=200)
    p.add_argument("--chains", type=int, default=2)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--trace-out", help="columnar per-iteration trace file")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("assign", help="per-observation membership and labels")
    shared(p)
    p.add_argument("--params", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--subject", help="restrict output to one subject id")
    p.add_argument("--series-dir", help="write per-subject time series files")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("validate", help="regress outcomes on class weights")
    shared(p)
    p.add_argument("--params", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--out", required=True,
                   help="report base path (writes .txt and .json)")
    p.add_argument("--soft", action="store_true",
                   help="soft responsibilities instead of hard proportions "
                        "for the gmm baseline")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compare", help="side-by-side glda vs gmm report")
    shared(p)
    p.add_argument("--glda-params", required=True)
    p.add_argument("--gmm-params", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--outcomes", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("simulate", help="write a synthetic cohort")
    shared(p)
    p.add_argument("--model", choices=["glda", "gmm"], default="glda")
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--v", type=int, default=4)
    p.add_argument("--obs", type=int, default=100)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--separation", type=float, default=3.0)
    p.add_argument("--cov-scale", type=float, default=1.0)
    p.add_argument("--with-outcomes", action="store_true")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    # config-file values become defaults; explicit flags still win
    if "--config" in argv:
        cfg_path = argv[argv.index("--config") + 1]
        try:
            overrides = _load_json(cfg_path)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read config file: {exc}", file=sys.stderr)
            return EXIT_INPUT
        for action in parser._subparsers._group_actions[0].choices.values():
            known = {a.dest for a in action._actions}
            action.set_defaults(
                **{k: v for k, v in overrides.items() if k in known})
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataValidationError, GldakitError, OSError,
            json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
