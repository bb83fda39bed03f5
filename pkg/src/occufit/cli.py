"""Command line interface.

Two commands do the work: ``fit`` estimates a model from a CSV file
and ``simulate`` runs a replicated study. Every package error is
caught at this boundary and reported on stderr with exit code 1.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .detection import fit_detection
from .errors import InvalidConfig, OccufitError
from .fullfit import fit_full
from .io import CsvSchema, load_dataset_csv
from .occupancy import fit_two_stage
from .report import full_report, two_stage_report
from .simulate import SimConfig, run_study, summarize_study

__all__ = ["main", "build_parser"]


def _split_csv(text: str) -> list[str]:
    parts = [p.strip() for p in text.split(",")]
    if any(not p for p in parts):
        raise InvalidConfig(f"empty entry in comma-separated list {text!r}")
    return parts


def _parse_floats(text: str, flag: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in _split_csv(text))
    except ValueError as exc:
        raise InvalidConfig(f"{flag} expects comma-separated numbers: {exc}") from exc


def _parse_model_terms(spec: str) -> list[str]:
    """Split a model formula on '+' outside parentheses."""
    terms = []
    depth = 0
    cur = []
    for ch in spec:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise InvalidConfig(f"unbalanced parentheses in {spec!r}")
        if ch == "+" and depth == 0:
            terms.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise InvalidConfig(f"unbalanced parentheses in {spec!r}")
    terms.append("".join(cur).strip())
    if any(not t for t in terms):
        raise InvalidConfig(f"empty term in model {spec!r}")
    return terms


def _det_schema_parts(spec: str):
    """Site columns and visit groups named by a detection model."""
    site_cols: list[str] = []
    groups: list[tuple[str, tuple[str, ...]]] = []
    for term in _parse_model_terms(spec):
        if term == "1":
            continue
        if term.startswith("timevar(") and term.endswith(")"):
            inner = term[len("timevar(") : -1]
            if ":" not in inner:
                raise InvalidConfig(
                    f"survey covariate term {term!r} must look like "
                    "timevar(name:col1,col2,...)"
                )
            name, cols = inner.split(":", 1)
            groups.append((name.strip(), tuple(_split_csv(cols))))
        else:
            site_cols.append(term)
    return site_cols, groups


def _occ_cols(spec: str) -> list[str]:
    return [t for t in _parse_model_terms(spec) if t != "1"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="occufit",
        description="Occupancy models with imperfect detection, "
        "fitted in two stages or by joint maximum likelihood.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model to a CSV dataset")
    fit.add_argument("--data", required=True, help="CSV file, one row per site")
    fit.add_argument(
        "--detect-cols", required=True,
        help="comma-separated detection history columns, one per visit",
    )
    fit.add_argument(
        "--occ-model", default="1",
        help="occupancy covariate columns joined by '+' (default: intercept only)",
    )
    fit.add_argument(
        "--det-model", action="append", default=None,
        help="detection model: site columns and timevar(name:col1,...) terms "
        "joined by '+'; repeat the flag to compare candidates by AIC",
    )
    fit.add_argument(
        "--visit-intercepts", action="store_true",
        help="one detection intercept per visit instead of a shared one",
    )
    fit.add_argument(
        "--method", choices=("two-stage", "full", "both"), default="two-stage",
    )
    fit.add_argument(
        "--stage2", choices=("iwls", "direct", "offset"), default="iwls",
        help="maximiser for the occupancy stage of a two-stage fit",
    )
    fit.add_argument("--standardize", action="store_true",
                     help="centre and scale every covariate column")
    fit.add_argument("--site-col", default=None, help="optional site label column")
    fit.add_argument("--out", default=None, help="write the report as JSON here")

    sim = sub.add_parser("simulate", help="run a replicated simulation study")
    sim.add_argument("--sites", type=int, required=True)
    sim.add_argument("--visits", type=int, required=True)
    sim.add_argument("--alpha", required=True,
                     help="true occupancy intercept,slope")
    sim.add_argument("--beta", required=True,
                     help="true detection intercept,site slope,visit slope")
    sim.add_argument("--reps", type=int, default=1000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument(
        "--methods", default="iwls,direct,offset,full",
        help="comma-separated subset of iwls,direct,offset,full",
    )
    sim.add_argument(
        "--reference", default=None,
        help="method whose variance anchors the efficiency ratios "
        "(required when several methods run)",
    )
    sim.add_argument("--regen-covariates", action="store_true",
                     help="redraw covariates every replicate")
    sim.add_argument("--out-prefix", required=True,
                     help="writes <prefix>_replicates.csv and <prefix>_summary.json")

    sub.add_parser("version", help="print the package version")
    return parser


def _cmd_fit(args) -> int:
    det_specs = args.det_model if args.det_model else ["1"]

    def schema_for(spec: str) -> CsvSchema:
        site_cols, groups = _det_schema_parts(spec)
        return CsvSchema(
            detect_cols=tuple(_split_csv(args.detect_cols)),
            occ_cols=tuple(_occ_cols(args.occ_model)),
            det_site_cols=tuple(site_cols),
            det_visit_groups=tuple(groups),
            visit_intercepts=args.visit_intercepts,
            standardize=args.standardize,
            site_label_col=args.site_col,
        )

    selection = None
    if len(det_specs) > 1:
        selection = []
        for spec in det_specs:
            data = load_dataset_csv(args.data, schema_for(spec))
            det = fit_detection(data)
            selection.append(
                {"model": spec, "aic": det.aic, "converged": det.converged}
            )
        best = min(selection, key=lambda row: row["aic"])
        print("Detection model selection (conditional AIC):")
        for row in selection:
            marker = " <-- selected" if row is best else ""
            print(f"  {row['model']:<40} AIC {row['aic']:10.2f}{marker}")
        print()
        chosen = best["model"]
    else:
        chosen = det_specs[0]

    data = load_dataset_csv(args.data, schema_for(chosen))
    model_desc = {"occupancy": args.occ_model, "detection": chosen}

    reports = []
    if args.method in ("two-stage", "both"):
        fit2 = fit_two_stage(data, args.stage2)
        reports.append(two_stage_report(data, fit2, model_desc))
    if args.method in ("full", "both"):
        fitf = fit_full(data)
        reports.append(full_report(data, fitf, model_desc))

    for i, rep in enumerate(reports):
        if i:
            print()
        print(rep.to_text())

    if args.out:
        if len(reports) == 1:
            payload = reports[0].to_dict()
        else:
            payload = {"fits": [rep.to_dict() for rep in reports]}
        if selection is not None:
            payload["detection_model_selection"] = selection
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2)
        print(f"\nreport written to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    methods = tuple(_split_csv(args.methods))
    config = SimConfig(
        n_sites=args.sites,
        n_visits=args.visits,
        alpha=_parse_floats(args.alpha, "--alpha"),
        beta=_parse_floats(args.beta, "--beta"),
        n_reps=args.reps,
        seed=args.seed,
        methods=methods,
        regenerate_covariates=args.regen_covariates,
    )
    if args.reference is not None:
        reference = args.reference
    elif len(methods) == 1:
        reference = methods[0]
    else:
        raise InvalidConfig(
            "--reference is required when more than one method is requested"
        )

    result = run_study(config)
    summary = summarize_study(result, reference)

    csv_path = f"{args.out_prefix}_replicates.csv"
    json_path = f"{args.out_prefix}_summary.json"
    result.to_csv(csv_path)
    with open(json_path, "w") as fh:
        json.dump(summary.to_dict(), fh, indent=2)

    print(f"{config.n_reps} replicates, {config.n_sites} sites, "
          f"{config.n_visits} visits; reference method: {reference}")
    header = (f"{'method':<8} {'parameter':<24} {'median':>8} {'mad':>7} "
              f"{'eff':>8} {'eff_mad':>8}")
    print(header)
    print("-" * len(header))
    for m in result.methods:
        for key in summary.param_keys:
            st = summary.stats[m][key]
            print(
                f"{m:<8} {key:<24} {st.median:8.3f} {st.mad:7.3f} "
                f"{summary.efficiency[m][key]:8.2f} "
                f"{summary.efficiency_mad[m][key]:8.2f}"
            )
    print(f"\nreplicates written to {csv_path}")
    print(f"summary written to {json_path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        print(f"occufit {__version__}")
        return 0
    except OccufitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
