"""Command-line interface.

Subcommands: simulate, fit, test, test-panel, test-population, covariance,
evaluate.  Results are written as CSV to --out; exit code 0 on success, 2
on validation/usage errors, 3 on numeric failures.
"""

from __future__ import annotations

import argparse
import csv
import sys

from . import io as hio
from .errors import LinkageHMMError, NumericError
from .harness import error_rate_experiment
from .inference import (
    ADMIXTURE,
    LINKAGE,
    covariance_mle,
    fit_admixture,
    fit_linkage,
)
from .lrt import run_population_test, run_test
from .model import (
    DIPLOID,
    EMISSION_MODES,
    EMISSION_STANDARD,
    GenotypeData,
    HAPLOID,
    INFINITY,
    check_layout,
)
from .simulate import SimulationConfig, config_map, generate_frequencies, simulate_linkage

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if value == INFINITY:
            return "inf"
        return repr(value)
    return str(value)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t != ""]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t != ""]


def _rate(text: str) -> float:
    return INFINITY if text.lower() in ("inf", "infinity") else float(text)


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--genotypes", required=True, help="genotypes TSV")
    p.add_argument("--freqs", help="allele frequencies TSV")
    p.add_argument("--map", dest="gmap", help="genetic map TSV")


def _add_common_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.05,
                   help="significance level (default 0.05)")
    p.add_argument("--emission", choices=EMISSION_MODES,
                   default=EMISSION_STANDARD)
    p.add_argument("--starts", type=int, default=8,
                   help="optimizer starts (default 8)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linkagehmm",
        description="Ancestry inference with marker linkage and a "
                    "likelihood-ratio test against marker independence.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic dataset")
    p.add_argument("--k", type=int, default=2, help="number of populations")
    p.add_argument("--markers", type=_ints, default=[100],
                   help="comma-separated markers per chromosome")
    p.add_argument("--q0", type=_floats, default=None,
                   help="comma-separated ancestry proportions (default uniform)")
    p.add_argument("--r0", type=_rate, default=1.0,
                   help="rate per cM, or 'inf' for the admixture model")
    p.add_argument("--d", type=float, default=1.0,
                   help="constant inter-marker distance in cM")
    p.add_argument("--ploidy", choices=(HAPLOID, DIPLOID), default=HAPLOID)
    p.add_argument("--individuals", type=int, default=1)
    p.add_argument("--freq-low", type=float, default=0.1)
    p.add_argument("--freq-high", type=float, default=0.9)
    p.add_argument("--emission", choices=EMISSION_MODES,
                   default=EMISSION_STANDARD)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True,
                   help="output prefix; writes <prefix>.genotypes.tsv, "
                        "<prefix>.freqs.tsv, <prefix>.map.tsv")

    p = sub.add_parser("fit", help="fit one model to every individual")
    _add_data_args(p)
    p.add_argument("--model", choices=(ADMIXTURE, LINKAGE), default=LINKAGE)
    _add_common_args(p)

    p = sub.add_parser("test", help="per-individual model comparison test")
    _add_data_args(p)
    _add_common_args(p)

    p = sub.add_parser("test-panel",
                       help="test every panel member, optionally with "
                            "leave-one-out frequencies")
    _add_data_args(p)
    p.add_argument("--labels", help="id/population TSV")
    p.add_argument("--loo", action="store_true",
                   help="leave-one-out frequencies from the panel itself "
                        "(requires --labels; --freqs is then ignored)")
    p.add_argument("--haploid-track", action="store_true",
                   help="use only the first haplotype track of diploid data")
    _add_common_args(p)

    p = sub.add_parser("test-population",
                       help="one joint test over all individuals sharing r")
    _add_data_args(p)
    _add_common_args(p)

    p = sub.add_parser("covariance", help="MLE covariance matrix as CSV")
    _add_data_args(p)
    p.add_argument("--model", choices=(ADMIXTURE, LINKAGE), default=LINKAGE)
    p.add_argument("--id", dest="target", default=None,
                   help="individual to analyze (default: first in file)")
    _add_common_args(p)

    p = sub.add_parser("evaluate", help="Monte-Carlo error-rate grid")
    p.add_argument("--d-values", type=_floats,
                   default=[0.1, 0.5, 1.0, 2.0, 5.0, 10.0])
    p.add_argument("--r-values", type=_floats, default=[1.0, 10.0, 100.0])
    p.add_argument("--markers", type=int, default=100)
    p.add_argument("--replicates", type=int, default=100)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--emission", choices=EMISSION_MODES,
                   default=EMISSION_STANDARD)
    p.add_argument("--starts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    return parser


def _load_inputs(args, need_map=True):
    panel = hio.load_genotypes(args.genotypes)
    if args.freqs is None:
        raise LinkageHMMError("--freqs is required here")
    freqs = hio.load_frequencies(args.freqs)
    gmap = None
    if need_map:
        if args.gmap is None:
            raise LinkageHMMError("--map is required here")
        gmap = hio.load_map(args.gmap)
    for g in panel.genotypes:
        check_layout(g, freqs, gmap)
    return panel, freqs, gmap


def _result_header(populations):
    return (["id", "ell_null", "ell_alt", "lambda", "p_value", "reject"]
            + [f"q_hat_{p}" for p in populations] + ["r_hat", "boundary_flag"])


def _result_row(ind, res):
    alt = res.alt_fit
    return ([ind, res.null_fit.ell_hat, alt.ell_hat, res.lambda_, res.p_value,
             res.reject] + list(alt.theta_hat.q)
            + [alt.theta_hat.r, alt.boundary])


def _cmd_simulate(args) -> int:
    if args.individuals < 1:
        raise LinkageHMMError("--individuals must be >= 1")
    q0 = tuple(args.q0) if args.q0 is not None else (1.0 / args.k,) * args.k
    base = SimulationConfig(
        q0=q0, r0=args.r0, markers_per_chromosome=tuple(args.markers),
        distance=args.d, freq_low=args.freq_low, freq_high=args.freq_high,
        ploidy=args.ploidy, emission_mode=args.emission, seed=args.seed,
    )
    freqs = generate_frequencies(base)  # shared by all individuals
    gmap = config_map(base)
    ids, genotypes = [], []
    for i in range(args.individuals):
        cfg = SimulationConfig(
            q0=q0, r0=args.r0, markers_per_chromosome=tuple(args.markers),
            distance=args.d, freqs=freqs, ploidy=args.ploidy,
            emission_mode=args.emission, seed=args.seed, stream=i,
        )
        data, _ = simulate_linkage(cfg)
        ids.append(f"ind{i + 1}")
        genotypes.append(data)
    panel = hio.PanelDataset(tuple(ids), tuple(genotypes))
    hio.write_genotypes(panel, f"{args.out}.genotypes.tsv")
    hio.write_frequencies(freqs, f"{args.out}.freqs.tsv")
    hio.write_map(gmap, f"{args.out}.map.tsv")
    print(f"wrote {args.out}.genotypes.tsv, {args.out}.freqs.tsv, "
          f"{args.out}.map.tsv")
    return EXIT_OK


def _cmd_fit(args) -> int:
    panel, freqs, gmap = _load_inputs(args, need_map=args.model == LINKAGE)
    header = (["id", "model", "ell"] +
              [f"q_hat_{p}" for p in freqs.populations] +
              ["r_hat", "converged", "boundary_flag"])
    rows = []
    for ind, data in zip(panel.ids, panel.genotypes):
        if args.model == LINKAGE:
            fit = fit_linkage(data, freqs, gmap, args.emission, args.starts,
                              args.seed)
        else:
            fit = fit_admixture(data, freqs, args.emission, args.starts,
                                args.seed)
        rows.append([ind, fit.model, fit.ell_hat] + list(fit.theta_hat.q)
                    + [fit.theta_hat.r, fit.converged, fit.boundary])
    _write_csv(args.out, header, rows)
    return EXIT_OK


def _cmd_test(args) -> int:
    panel, freqs, gmap = _load_inputs(args)
    rows = []
    for ind, data in zip(panel.ids, panel.genotypes):
        res = run_test(data, freqs, gmap, alpha=args.alpha,
                       mode=args.emission, n_starts=args.starts,
                       seed=args.seed)
        rows.append(_result_row(ind, res))
    _write_csv(args.out, _result_header(freqs.populations), rows)
    return EXIT_OK


def _first_track(data: GenotypeData) -> GenotypeData:
    return GenotypeData.haploid(tuple(x[:1] for x in data.tracks))


def _cmd_test_panel(args) -> int:
    panel = hio.load_genotypes(args.genotypes)
    labels = hio.load_labels(args.labels) if args.labels else None
    if labels is not None:
        panel = panel.with_labels(labels)
    if args.gmap is None:
        raise LinkageHMMError("--map is required here")
    gmap = hio.load_map(args.gmap)
    shared_freqs = None
    if not args.loo:
        if args.freqs is None:
            raise LinkageHMMError("test-panel needs --freqs unless --loo is set")
        shared_freqs = hio.load_frequencies(args.freqs)
    elif labels is None:
        raise LinkageHMMError("--loo requires --labels")

    rows, decisions = [], []
    populations = None
    for ind in panel.ids:
        data = panel.individual(ind)
        if args.haploid_track and data.ploidy == DIPLOID:
            data = _first_track(data)
        freqs = (hio.leave_one_out_frequencies(panel, ind)
                 if args.loo else shared_freqs)
        if populations is None:
            populations = freqs.populations
        check_layout(data, freqs, gmap)
        res = run_test(data, freqs, gmap, alpha=args.alpha,
                       mode=args.emission, n_starts=args.starts,
                       seed=args.seed)
        rows.append(_result_row(ind, res))
        decisions.append((panel.labels[ind] if panel.labels else "all",
                          res.reject))
    _write_csv(args.out, _result_header(populations), rows)
    summary = hio.summarize_panel(decisions)
    print(f"non-rejection fraction: {summary.overall_non_rejection:.4f} "
          f"({summary.n_individuals} individuals)")
    for pop, (kept, count) in sorted(summary.per_population.items()):
        print(f"  {pop}: {kept / count:.4f} ({count} individuals)")
    return EXIT_OK


def _cmd_test_population(args) -> int:
    panel, freqs, gmap = _load_inputs(args)
    res = run_population_test(panel.genotypes, freqs, gmap, alpha=args.alpha,
                              mode=args.emission, n_starts=args.starts,
                              seed=args.seed)
    alt = res.alt_fit
    header = (["id", "ell_null_i"] +
              [f"q_hat_{p}" for p in freqs.populations] +
              ["lambda", "p_value", "reject", "r_hat", "ell_null", "ell_alt"])
    null_joint = sum(nf.ell_hat * nf.M_total for nf in res.null_fit) / alt.M_total
    rows = []
    for ind, nf, q_hat in zip(panel.ids, res.null_fit, alt.q_hats):
        rows.append([ind, nf.ell_hat] + list(q_hat)
                    + [res.lambda_, res.p_value, res.reject, alt.r_hat,
                       null_joint, alt.ell])
    _write_csv(args.out, header, rows)
    return EXIT_OK


def _cmd_covariance(args) -> int:
    panel, freqs, gmap = _load_inputs(args, need_map=args.model == LINKAGE)
    target = args.target if args.target is not None else panel.ids[0]
    data = panel.individual(target)
    if args.model == LINKAGE:
        fit = fit_linkage(data, freqs, gmap, args.emission, args.starts,
                          args.seed)
    else:
        fit = fit_admixture(data, freqs, args.emission, args.starts, args.seed)
    cov = covariance_mle(fit, data, freqs, gmap)
    labels = [f"q_{p}" for p in freqs.populations]
    if args.model == LINKAGE:
        labels.append("r")
    header = [""] + labels
    rows = [[label] + list(cov.matrix[i]) for i, label in enumerate(labels)]
    _write_csv(args.out, header, rows)
    for note in cov.warnings:
        print(f"warning: {note}", file=sys.stderr)
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    result = error_rate_experiment(
        d_values=tuple(args.d_values), r_values=tuple(args.r_values),
        M=args.markers, replicates=args.replicates, alpha=args.alpha,
        seed=args.seed, K=args.k, n_starts=args.starts, mode=args.emission,
    )
    result.to_csv(args.out)
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "test": _cmd_test,
    "test-panel": _cmd_test_panel,
    "test-population": _cmd_test_population,
    "covariance": _cmd_covariance,
    "evaluate": _cmd_evaluate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (LinkageHMMError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
