"""Command-line entry point.

Subcommands wrap the library operations into reproducible runs: every
command validates its configuration up front, writes fixed-header CSVs, and
appends a record (configuration echo, content hashes of inputs, per-cell
errors) to ``manifest.json`` in the output directory.  All randomness flows
from ``--seeds``; reruns with identical inputs are byte-identical.

Exit codes: 0 success, 1 usage, 2 data validation, 3 internal.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import analysis, conformal, synth
from .adjust import AdjustmentPolicy
from .core import Dataset, LabelScale, ValidationError, read_samples, write_samples
from .extract import SynonymTable, extract_samples, read_transcripts

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _git_blob_sha1(path: Path) -> str:
    data = path.read_bytes()
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def _append_manifest(out_dir: Path, entry: dict) -> None:
    manifest_path = out_dir / "manifest.json"
    doc = {"runs": []}
    if manifest_path.exists():
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    doc["runs"].append(entry)
    manifest_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _parse_seeds(text: str) -> list:
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            seeds.extend(range(int(a), int(b) + 1))
        elif part:
            seeds.append(int(part))
    if not seeds:
        raise UsageError("no seeds given")
    return seeds


def _parse_fractions(text: str) -> list:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise UsageError(f"bad fraction list: {text!r}") from exc


def _scale_from(args) -> LabelScale:
    return LabelScale(args.scale_min, args.scale_max, args.scale_step)


def _policy_from(args, scale: LabelScale) -> AdjustmentPolicy | None:
    if args.adjust == "none":
        return None
    if args.adjust in ("shrink", "expand"):
        return AdjustmentPolicy(args.adjust)
    lam = args.lam
    if lam is None or lam == "full":
        return AdjustmentPolicy.full(scale)
    return AdjustmentPolicy("nearest", float(lam))


def _add_scale_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scale-min", type=float, default=1.0)
    p.add_argument("--scale-max", type=float, default=5.0)
    p.add_argument("--scale-step", type=float, default=1.0)


def _add_common_eval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--seeds", default="1..30", help="e.g. 1..30 or 1,2,5")
    p.add_argument("--calib-fraction", type=float, default=0.5)
    p.add_argument("--inner-train-fraction", type=float, default=0.5)
    p.add_argument("--out-dir", default=".")


def build_parser() -> _Parser:
    parser = _Parser(prog="confjudge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="transcripts JSONL -> samples JSONL")
    p.add_argument("transcripts")
    p.add_argument("--synonyms", help="JSON file mapping surface forms to ratings")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--exclusions", help="where to write the exclusions report")
    _add_scale_flags(p)

    p = sub.add_parser("evaluate", help="width/coverage per method and seed")
    p.add_argument("samples")
    p.add_argument("--methods", default=",".join(conformal.METHODS))
    p.add_argument("--adjust", choices=["none", "shrink", "expand", "nearest"], default="none")
    p.add_argument("--lambda", dest="lam", default=None, help='threshold in scale units, or "full"')
    p.add_argument("--point-predictor", choices=conformal.POINT_PREDICTORS, default="raw_score")
    p.add_argument("--jobs", type=int, default=None)
    _add_common_eval_flags(p)
    _add_scale_flags(p)

    p = sub.add_parser("midpoints", help="midpoint scorers vs raw score vs weighted average")
    p.add_argument("samples")
    _add_common_eval_flags(p)
    _add_scale_flags(p)

    p = sub.add_parser("het", help="Breusch-Pagan and White tests per dimension")
    p.add_argument("samples")
    p.add_argument("--out-dir", default=".")
    _add_scale_flags(p)

    p = sub.add_parser("sweep", help="coverage vs calibration fraction")
    p.add_argument("samples")
    p.add_argument("--method", default="r2ccp")
    p.add_argument("--fractions", default="0.25,0.5,0.75,1.0")
    _add_common_eval_flags(p)
    _add_scale_flags(p)

    p = sub.add_parser("synth", help="generate synthetic judge data")
    p.add_argument("--noise", choices=["homoscedastic", "heteroscedastic", "asymmetric"],
                   default="homoscedastic")
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--bias", type=float, default=1.0)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--oracle", help="where to write the oracle descriptor JSON")
    _add_scale_flags(p)

    p = sub.add_parser("human-baseline", help="conformal interval around one random annotation")
    p.add_argument("annotations", help='JSONL with {"id", "annotations": [...]} records')
    _add_common_eval_flags(p)
    _add_scale_flags(p)
    return parser


def _default_jobs() -> int:
    env = os.environ.get("CONFJUDGE_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _excluded_count(samples_path: str) -> int:
    """Extraction exclusions recorded next to the sample file; their count
    rides along in every downstream report."""
    sidecar = Path(samples_path).with_suffix(".exclusions.json")
    if sidecar.exists():
        try:
            return len(json.loads(sidecar.read_text(encoding="utf-8")))
        except (json.JSONDecodeError, TypeError):
            return 0
    return 0


def _load_dataset(args) -> Dataset:
    return read_samples(args.samples, _scale_from(args))


def cmd_extract(args) -> int:
    records = read_transcripts(args.transcripts)
    table = (SynonymTable.from_json(args.synonyms, args.k) if args.synonyms
             else SynonymTable.default(args.k))
    scale = _scale_from(args)
    samples, exclusions = extract_samples(records, table, args.k, scale)
    if not samples:
        print("no samples", file=sys.stderr)
        return EXIT_DATA
    out = Path(args.output)
    write_samples(out, Dataset(tuple(samples), scale, args.k))
    excl_path = Path(args.exclusions) if args.exclusions else out.with_suffix(".exclusions.json")
    excl_path.write_text(
        json.dumps([{"id": i, "reason": r} for i, r in exclusions], indent=2) + "\n",
        encoding="utf-8",
    )
    out_dir = out.parent if str(out.parent) else Path(".")
    _append_manifest(out_dir, {
        "command": "extract",
        "config": {"k": args.k, "scale": scale.to_dict(), "synonyms": args.synonyms},
        "inputs": {args.transcripts: _git_blob_sha1(Path(args.transcripts))},
        "outputs": [str(out), str(excl_path)],
        "written": len(samples),
        "excluded": len(exclusions),
    })
    print(f"wrote {len(samples)} samples, {len(exclusions)} exclusions")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in conformal.METHODS:
            raise UsageError(f"unknown method {m!r}; valid: {', '.join(conformal.METHODS)}")
    dataset = _load_dataset(args)
    policy = _policy_from(args, dataset.scale)
    seeds = _parse_seeds(args.seeds)
    jobs = args.jobs if args.jobs else _default_jobs()
    report = analysis.evaluate(
        dataset, methods, seeds, alpha=args.alpha, policy=policy,
        calib_fraction=args.calib_fraction, inner_train_fraction=args.inner_train_fraction,
        point_predictor=args.point_predictor, jobs=jobs,
        excluded=_excluded_count(args.samples),
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "eval.csv"
    analysis.write_eval_csv(csv_path, report.rows)
    _append_manifest(out_dir, {
        "command": "evaluate",
        "config": {
            "methods": methods, "seeds": seeds, "alpha": args.alpha,
            "adjust": args.adjust, "lambda": args.lam,
            "calib_fraction": args.calib_fraction,
            "inner_train_fraction": args.inner_train_fraction,
            "point_predictor": args.point_predictor,
            "scale": dataset.scale.to_dict(),
        },
        "inputs": {args.samples: _git_blob_sha1(Path(args.samples))},
        "outputs": [str(csv_path)],
        "errors": {f"{m}/{s}": msg for (m, s), msg in sorted(report.errors.items())},
        "empty_intervals": report.empty_intervals,
        "degenerate_intervals": report.degenerate_intervals,
        "excluded": report.excluded,
    })
    for method, agg in sorted(report.aggregates.items()):
        print(f"{method}: width {agg['mean_width']:.4f} +/- {agg['std_width']:.4f}, "
              f"coverage {agg['mean_coverage']:.4%} +/- {agg['std_coverage']:.4%}")
    return EXIT_OK


def cmd_midpoints(args) -> int:
    dataset = _load_dataset(args)
    seeds = _parse_seeds(args.seeds)
    rows = analysis.midpoint_report(
        dataset, seeds, alpha=args.alpha,
        calib_fraction=args.calib_fraction, inner_train_fraction=args.inner_train_fraction,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "midpoints.csv"
    analysis.write_midpoints_csv(csv_path, rows)
    _append_manifest(out_dir, {
        "command": "midpoints",
        "config": {"seeds": seeds, "alpha": args.alpha, "scale": dataset.scale.to_dict()},
        "inputs": {args.samples: _git_blob_sha1(Path(args.samples))},
        "outputs": [str(csv_path)],
        "excluded": _excluded_count(args.samples),
    })
    for r in rows:
        print(f"{r.scorer}: mse {r.mse:.4f}, mae {r.mae:.4f}, rho {r.spearman:.4f}")
    return EXIT_OK


def cmd_het(args) -> int:
    dataset = _load_dataset(args)
    groups: dict = {}
    for s in dataset.samples:
        groups.setdefault(s.meta.get("dimension", "all"), []).append(s)
    entries = []
    for dim in sorted(groups):
        sub = Dataset(tuple(groups[dim]), dataset.scale, dataset.k)
        entries.append((dim, "bp", analysis.bp_test(sub.logits, sub.labels)))
        entries.append((dim, "white", analysis.white_test(sub.logits, sub.labels)))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "het.csv"
    analysis.write_het_csv(csv_path, entries)
    _append_manifest(out_dir, {
        "command": "het",
        "config": {"scale": dataset.scale.to_dict()},
        "inputs": {args.samples: _git_blob_sha1(Path(args.samples))},
        "outputs": [str(csv_path)],
        "excluded": _excluded_count(args.samples),
    })
    for dim, name, res in entries:
        print(f"{dim}/{name}: LM {res.lm_stat:.3f} (p {res.lm_p:.3g}), F {res.f_stat:.3f} (p {res.f_p:.3g})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if args.method not in conformal.METHODS:
        raise UsageError(f"unknown method {args.method!r}; valid: {', '.join(conformal.METHODS)}")
    dataset = _load_dataset(args)
    seeds = _parse_seeds(args.seeds)
    fractions = _parse_fractions(args.fractions)
    rows = analysis.calibration_sweep(
        dataset, args.method, seeds, fractions, alpha=args.alpha,
        calib_fraction=args.calib_fraction, inner_train_fraction=args.inner_train_fraction,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sweep.csv"
    analysis.write_sweep_csv(csv_path, rows)
    _append_manifest(out_dir, {
        "command": "sweep",
        "config": {"method": args.method, "seeds": seeds, "fractions": fractions,
                   "alpha": args.alpha, "scale": dataset.scale.to_dict()},
        "inputs": {args.samples: _git_blob_sha1(Path(args.samples))},
        "outputs": [str(csv_path)],
        "excluded": _excluded_count(args.samples),
    })
    for r in rows:
        print(f"fraction {r.fraction:g}: coverage {r.mean_coverage:.4f} +/- {r.std_coverage:.4f}"
              + (" (skipped)" if r.skipped else ""))
    return EXIT_OK


def cmd_synth(args) -> int:
    scale = _scale_from(args)
    if args.noise == "homoscedastic":
        noise = synth.Homoscedastic(args.sigma)
    elif args.noise == "heteroscedastic":
        noise = synth.Heteroscedastic(args.sigma)
    else:
        noise = synth.Asymmetric(args.bias, args.sigma)
    spec = synth.GeneratorSpec(seed=args.seed, n=args.n, k=args.k, noise=noise, scale=scale)
    dataset, oracle = synth.generate(spec)
    out = Path(args.output)
    write_samples(out, dataset)
    oracle_path = Path(args.oracle) if args.oracle else out.with_suffix(".oracle.json")
    oracle_path.write_text(oracle.to_json() + "\n", encoding="utf-8")
    out_dir = out.parent if str(out.parent) else Path(".")
    _append_manifest(out_dir, {
        "command": "synth",
        "config": {"noise": args.noise, "sigma": args.sigma, "bias": args.bias,
                   "n": args.n, "k": args.k, "seed": args.seed, "scale": scale.to_dict()},
        "inputs": {},
        "outputs": [str(out), str(oracle_path)],
    })
    print(f"wrote {len(dataset)} samples")
    return EXIT_OK


def cmd_human_baseline(args) -> int:
    annotations = []
    with open(args.annotations, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                annotations.append([float(v) for v in rec["annotations"]])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"line {lineno}: malformed annotation record: {exc}") from exc
    seeds = _parse_seeds(args.seeds)
    rows = analysis.human_baseline(annotations, alpha=args.alpha, seeds=seeds,
                                   calib_fraction=args.calib_fraction)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "human.csv"
    analysis.write_eval_csv(csv_path, rows)
    _append_manifest(out_dir, {
        "command": "human-baseline",
        "config": {"seeds": seeds, "alpha": args.alpha, "calib_fraction": args.calib_fraction},
        "inputs": {args.annotations: _git_blob_sha1(Path(args.annotations))},
        "outputs": [str(csv_path)],
    })
    widths = [r.mean_width for r in rows]
    covs = [r.coverage for r in rows]
    print(f"human baseline: width {sum(widths)/len(widths):.4f}, coverage {sum(covs)/len(covs):.4%}")
    return EXIT_OK


_COMMANDS = {
    "extract": cmd_extract,
    "evaluate": cmd_evaluate,
    "midpoints": cmd_midpoints,
    "het": cmd_het,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
    "human-baseline": cmd_human_baseline,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
