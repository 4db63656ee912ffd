"""Command-line front door.

Commands: rs-pair, build-walsh-measure, build-trig-measure,
theorem1-check (alias: verify), singularity-report, report.

Exit codes: 0 all certificates pass, 1 certificate failure (witness in
the report), 2 usage or configuration error, 3 I/O error.  All output
files are written atomically (temp file + rename).  Any flag may be
supplied through a JSON --config file keyed by the flag's dest name;
explicit flags win.  The only randomness is the subsampling fallback of
oversized verifications, all seeded from --seed (default printed).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from . import martingale, riesz, trig
from .rudin_shapiro import build_pair
from .walsh import SeriesFormatError, WalshSeries, series_from_csv

DEFAULT_SEED = 1729

EXIT_OK = 0
EXIT_CERT = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv(path: str, header, rows) -> None:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    _atomic_write_text(path, buf.getvalue())


def _fmt(x: float) -> str:
    return repr(float(x))


def _config_hash(args: argparse.Namespace) -> str:
    payload = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True, default=str).encode()
    ).hexdigest()


def _versions() -> dict:
    return {
        "walshriesz": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            with open(known.config) as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise _IOFailure(f"cannot read config {known.config}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise _UsageError(f"bad JSON in config {known.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise _UsageError("config file must hold a JSON object")
        command = argv[0] if argv and not argv[0].startswith("-") else None
        sub = next(
            a for a in parser._actions if isinstance(a, argparse._SubParsersAction)
        )
        target = sub.choices.get(command)
        if target is None:
            raise _UsageError("--config needs a subcommand to apply to")
        valid = {action.dest for action in target._actions}
        unknown = sorted(set(cfg) - valid)
        if unknown:
            raise _UsageError(f"unknown config keys: {', '.join(unknown)}")
        target.set_defaults(**cfg)
    return parser.parse_args(argv)


class _UsageError(Exception):
    pass


class _IOFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# rs-pair
# ---------------------------------------------------------------------------

def _cmd_rs_pair(args) -> int:
    pair = build_pair(args.level)
    rows = [(n, int(p), int(q)) for n, (p, q) in enumerate(zip(pair.p, pair.q))]
    if args.out == "-":
        writer = csv.writer(sys.stdout)
        writer.writerow(["n", "p", "q"])
        writer.writerows(rows)
    else:
        _write_csv(args.out, ["n", "p", "q"], rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# build-walsh-measure
# ---------------------------------------------------------------------------

def _cmd_build_walsh(args) -> int:
    print(f"seed: {args.seed}")
    try:
        psi = riesz.PsiSpec.parse(args.psi).validate()
    except (ValueError, riesz.PsiHypothesisError) as exc:
        raise _UsageError(str(exc)) from None
    budget = riesz.SummabilityBudget(scale=args.budget_scale)

    t0 = time.perf_counter()
    try:
        state = riesz.build_measure(
            psi,
            args.stages,
            budget,
            exhaustive_cap=args.cap,
            max_coordinates=args.max_coordinates,
        )
    except (riesz.LevelSelectionError, riesz.CoordinateBudgetError) as exc:
        raise _UsageError(str(exc)) from None
    build_s = time.perf_counter() - t0

    if state.used_coordinates > args.cap and not args.allow_sampled:
        raise _UsageError(
            f"{state.used_coordinates} coordinates exceed the exhaustive cap"
            f" {args.cap}; pass --allow-sampled to accept a sampled certificate"
        )

    t0 = time.perf_counter()
    positivity = riesz.verify_all_partial_sums(state, seed=args.seed)
    psi_report = riesz.psi_sum_report(state, psi, budget)
    singular = martingale.singularity_report(state)
    ortho = (
        martingale.verify_product_orthogonality(state)
        if state.stages >= 2
        else None
    )
    verify_s = time.perf_counter() - t0

    certificates = {
        "positivity": {
            "exhaustive": positivity.exhaustive,
            "depth": positivity.depth,
            "support_size": positivity.support_size,
            "band_edges": list(positivity.band_edges),
            "global_min": positivity.global_min,
            "stage_margins": list(positivity.stage_margins),
            "sampling": positivity.sampling,
            "passed": positivity.passed,
        },
        "psi_sum": {
            "stage_exact": list(psi_report.stage_exact),
            "stage_bounds": list(psi_report.stage_bounds),
            "budget_terms": list(psi_report.budget_terms or ()),
            "exact_total": psi_report.exact_total,
            "bound_total": psi_report.bound_total,
            "c0_term": psi_report.c0_term,
            "passed": psi_report.ok,
        },
        "singularity": {
            "hellinger": list(singular.hellinger),
            "hellinger_direct": list(singular.hellinger_direct),
            "concentration": [
                {str(d): v for d, v in row.items()} for row in singular.concentration
            ],
            "strictly_decreasing": all(
                b < a for a, b in zip(singular.hellinger, singular.hellinger[1:])
            ),
        },
        "orthogonality": None
        if ortho is None
        else {
            "max_mean_residual": ortho.max_mean_residual,
            "max_cross_residual": ortho.max_cross_residual,
            "max_second_moment": ortho.max_second_moment,
            "passed": ortho.ok,
        },
    }
    passed = (
        positivity.passed
        and psi_report.ok
        and certificates["singularity"]["strictly_decreasing"]
        and (ortho is None or ortho.ok)
    )

    t0 = time.perf_counter()
    rows = [(n, _fmt(state.spectrum[n])) for n in sorted(state.spectrum)]
    _write_csv(args.out, ["n", "coeff"], rows)
    manifest = {
        "command": "build-walsh-measure",
        "argv": list(args.argv),
        "config_hash": _config_hash(args),
        "seed": args.seed,
        "versions": _versions(),
        "psi": psi.descriptor,
        "budget_scale": args.budget_scale,
        **riesz.state_manifest(state),
        "certificates": certificates,
        "timings": {
            "build_s": build_s,
            "verify_s": verify_s,
        },
    }
    manifest["timings"]["export_s"] = time.perf_counter() - t0
    if args.manifest:
        _atomic_write_text(args.manifest, json.dumps(manifest, indent=2) + "\n")

    status = "pass" if passed else "FAIL"
    print(
        f"{status}: {state.stages} stages, {state.used_coordinates} coordinates,"
        f" min partial sum {positivity.global_min:.6f},"
        f" psi sum {psi_report.exact_total:.6e} <= {psi_report.bound_total:.6e}"
    )
    return EXIT_OK if passed else EXIT_CERT


# ---------------------------------------------------------------------------
# build-trig-measure
# ---------------------------------------------------------------------------

def _cmd_build_trig(args) -> int:
    print(f"seed: {args.seed}")
    try:
        psi = riesz.PsiSpec.parse(args.psi).validate()
    except (ValueError, riesz.PsiHypothesisError) as exc:
        raise _UsageError(str(exc)) from None
    budget = riesz.SummabilityBudget(scale=args.budget_scale)
    t0 = time.perf_counter()
    try:
        state, certs = trig.build_trig_measure(
            psi, args.stages, budget, oversample=args.grid_oversample
        )
    except riesz.LevelSelectionError as exc:
        raise _UsageError(str(exc)) from None
    build_s = time.perf_counter() - t0

    rows = [(0, _fmt(state.constant))] + [
        (f, _fmt(state.spectrum[f])) for f in sorted(state.spectrum)
    ]
    _write_csv(args.out, ["frequency", "coeff"], rows)
    if args.manifest:
        manifest = {
            "command": "build-trig-measure",
            "argv": list(args.argv),
            "config_hash": _config_hash(args),
            "seed": args.seed,
            "versions": _versions(),
            "psi": psi.descriptor,
            "budget_scale": args.budget_scale,
            "flatness_constant": trig.CTRIG,
            "stages": [
                {"level": f.level, "amplitude": f.amplitude} for f in state.factors
            ],
            "certificates": {
                "grid_points": certs.grid_points,
                "grid_min_partial": certs.grid_min_partial,
                "bernstein_slack": certs.bernstein_slack,
                "stage_supports_disjoint": certs.stage_supports_disjoint,
                "stage_psi_exact": list(certs.stage_psi_exact),
                "stage_psi_bounds": list(certs.stage_psi_bounds),
                "parseval_gap": certs.parseval_gap,
                "passed": certs.passed,
            },
            "timings": {"build_s": build_s},
        }
        _atomic_write_text(args.manifest, json.dumps(manifest, indent=2) + "\n")
    status = "pass" if certs.passed else "FAIL"
    print(
        f"{status}: {len(state.factors)} stages, top frequency {state.max_freq},"
        f" grid min {certs.grid_min_partial:.6f}"
        f" (Bernstein slack {certs.bernstein_slack:.3e})"
    )
    return EXIT_OK if certs.passed else EXIT_CERT


# ---------------------------------------------------------------------------
# theorem1-check
# ---------------------------------------------------------------------------

def _shifted_bound_sweep(series: WalshSeries, seed: int, m_cap: int = 64) -> dict:
    rng = np.random.default_rng(seed)
    checked = 0
    all_hold = True
    sampled = False
    for kj in range(series.depth):
        space = 1 << kj
        if space <= m_cap:
            ms = range(space)
        else:
            sampled = True
            extras = rng.integers(0, space, size=m_cap - 2)
            ms = sorted({0, space - 1, *map(int, extras)})
        for m in ms:
            for k in range(kj, series.depth + 1):
                checked += 1
                if not martingale.check_shifted_bound(series, kj, m, k):
                    all_hold = False
    return {
        "checked": checked,
        "all_hold": all_hold,
        "m_sampled": sampled,
        "m_cap": m_cap,
    }


def _cmd_theorem1_check(args) -> int:
    try:
        series = series_from_csv(args.infile)
    except OSError as exc:
        raise _IOFailure(f"cannot read {args.infile}: {exc}") from None
    except SeriesFormatError as exc:
        raise _IOFailure(f"{args.infile}: {exc}") from None

    equiv = martingale.check_positivity_equivalence(series)
    p3 = martingale.check_p3(series)
    shifted = None
    if equiv.all_prefixes_nonneg:
        shifted = _shifted_bound_sweep(series, args.seed)
    report = {
        "input": args.infile,
        "seed": args.seed,
        "depth": series.depth,
        "all_prefixes_nonneg": equiv.all_prefixes_nonneg,
        "inequality_holds": equiv.inequality_holds,
        "witness": None
        if equiv.witness is None
        else {
            "kind": equiv.witness.kind,
            "where": equiv.witness.where,
            "atom": equiv.witness.atom,
            "value": equiv.witness.value,
        },
        "p3": p3,
        "shifted_bounds": shifted,
        "envelope": martingale.dyadic_block_envelope(series),
    }
    text = json.dumps(report, indent=2) + "\n"
    if args.report:
        _atomic_write_text(args.report, text)
    else:
        sys.stdout.write(text)
    ok = (
        equiv.all_prefixes_nonneg
        and equiv.inequality_holds
        and p3
        and (shifted is None or shifted["all_hold"])
    )
    return EXIT_OK if ok else EXIT_CERT


# ---------------------------------------------------------------------------
# singularity-report / report
# ---------------------------------------------------------------------------

def _load_manifest(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise _IOFailure(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise _IOFailure(f"bad JSON in {path}: {exc}") from None


def _singularity_rows(report: martingale.SingularityReport):
    rows = []
    for k, (h, conc) in enumerate(zip(report.hellinger, report.concentration)):
        rows.append(
            (
                k,
                _fmt(h),
                _fmt(conc[0.5]),
                _fmt(conc[0.9]),
                _fmt(conc[0.99]),
            )
        )
    return rows


def _cmd_singularity_report(args) -> int:
    manifest = _load_manifest(args.state)
    try:
        state = riesz.state_from_manifest(manifest)
    except (KeyError, ValueError) as exc:
        raise _UsageError(f"cannot rebuild state from {args.state}: {exc}") from None
    report = martingale.singularity_report(state)
    rows = _singularity_rows(report)
    if args.out == "-":
        writer = csv.writer(sys.stdout)
        writer.writerow(["k", "hellinger", "conc50", "conc90", "conc99"])
        writer.writerows(rows)
    else:
        _write_csv(args.out, ["k", "hellinger", "conc50", "conc90", "conc99"], rows)
    return EXIT_OK


def _cmd_report(args) -> int:
    manifest = _load_manifest(args.manifest)
    try:
        spectrum = riesz.load_spectrum_csv(args.measure)
    except OSError as exc:
        raise _IOFailure(f"cannot read {args.measure}: {exc}") from None
    except SeriesFormatError as exc:
        raise _IOFailure(f"{args.measure}: {exc}") from None
    try:
        state = riesz.state_from_manifest(manifest)
        psi = riesz.PsiSpec.parse(manifest["psi"])
        budget = riesz.SummabilityBudget(scale=float(manifest["budget_scale"]))
    except (KeyError, ValueError) as exc:
        raise _UsageError(f"cannot rebuild state from {args.manifest}: {exc}") from None

    os.makedirs(args.out_dir, exist_ok=True)
    top = max(spectrum)
    depth = top.bit_length() if top else 0
    envelope_rows = []
    for k in range(depth):
        lo, hi = 1 << k, 1 << (k + 1)
        block = [abs(c) for n, c in spectrum.items() if lo <= n < hi]
        envelope_rows.append((k, _fmt(max(block) if block else 0.0)))
    _write_csv(
        os.path.join(args.out_dir, "envelope.csv"),
        ["k", "max_abs_coeff"],
        envelope_rows,
    )

    singular = martingale.singularity_report(state)
    _write_csv(
        os.path.join(args.out_dir, "hellinger.csv"),
        ["k", "hellinger"],
        [(k, _fmt(h)) for k, h in enumerate(singular.hellinger)],
    )
    _write_csv(
        os.path.join(args.out_dir, "concentration.csv"),
        ["k", "conc50", "conc90", "conc99"],
        [
            (k, _fmt(row[0.5]), _fmt(row[0.9]), _fmt(row[0.99]))
            for k, row in enumerate(singular.concentration)
        ],
    )

    psi_report = riesz.psi_sum_report(state, psi, budget)
    _write_csv(
        os.path.join(args.out_dir, "psi_terms.csv"),
        ["k", "exact", "bound", "budget_term"],
        [
            (k + 1, _fmt(e), _fmt(b), _fmt(t))
            for k, (e, b, t) in enumerate(
                zip(
                    psi_report.stage_exact,
                    psi_report.stage_bounds,
                    psi_report.budget_terms or (),
                )
            )
        ],
    )
    print(f"wrote 4 CSV files to {args.out_dir}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser plumbing
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="walshriesz",
        description="Build and verify Walsh and cosine product measures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help=f"seed for any randomized subsampling (default {DEFAULT_SEED})")
        p.add_argument("--config", help="JSON file of flag defaults (dest-name keys)")

    p = sub.add_parser("rs-pair", help="emit a Rudin-Shapiro sign pair as CSV")
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--out", default="-", help="output CSV path, or - for stdout")
    common(p)
    p.set_defaults(func=_cmd_rs_pair)

    p = sub.add_parser("build-walsh-measure",
                       help="build the Walsh product measure and certify it")
    p.add_argument("--psi", default="preset:logpow,p=1")
    p.add_argument("--stages", type=int, default=3)
    p.add_argument("--cap", type=int, default=14,
                   help="exhaustive verification cap in used coordinates")
    p.add_argument("--budget-scale", type=float, default=2.25,
                   help="stage budget is scale * 2^-k (default keeps 3 stages within the cap)")
    p.add_argument("--max-coordinates", type=int, default=30)
    p.add_argument("--allow-sampled", action="store_true",
                   help="accept a sampled certificate past the cap")
    p.add_argument("--out", default="measure.csv")
    p.add_argument("--manifest", default="manifest.json")
    common(p)
    p.set_defaults(func=_cmd_build_walsh)

    p = sub.add_parser("build-trig-measure",
                       help="build the cosine product measure and certify it")
    p.add_argument("--psi", default="preset:logpow,p=1")
    p.add_argument("--stages", type=int, default=2)
    p.add_argument("--grid-oversample", type=int, default=16)
    p.add_argument("--budget-scale", type=float, default=2.25)
    p.add_argument("--out", default="trig.csv")
    p.add_argument("--manifest", default=None)
    common(p)
    p.set_defaults(func=_cmd_build_trig)

    p = sub.add_parser("theorem1-check", aliases=["verify"],
                       help="verify positivity machinery on a series CSV")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--report", default=None, help="write the JSON report here")
    common(p)
    p.set_defaults(func=_cmd_theorem1_check)

    p = sub.add_parser("singularity-report",
                       help="Hellinger and concentration table from a manifest")
    p.add_argument("--state", required=True, help="manifest JSON of a built measure")
    p.add_argument("--out", default="-")
    common(p)
    p.set_defaults(func=_cmd_singularity_report)

    p = sub.add_parser("report", help="emit plot-data CSVs for a built measure")
    p.add_argument("--manifest", required=True)
    p.add_argument("--measure", required=True)
    p.add_argument("--out-dir", default="report")
    common(p)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = _apply_config(parser, argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _IOFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    args.argv = argv
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _IOFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001 - surface invariant failures cleanly
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_CERT


def _entry(command: str):
    def runner() -> None:
        raise SystemExit(main([command, *sys.argv[1:]]))

    return runner


rs_pair_main = _entry("rs-pair")
build_walsh_measure_main = _entry("build-walsh-measure")
build_trig_measure_main = _entry("build-trig-measure")
theorem1_check_main = _entry("theorem1-check")
verify_main = _entry("theorem1-check")
singularity_report_main = _entry("singularity-report")
report_main = _entry("report")


if __name__ == "__main__":
    raise SystemExit(main())
