"""Command-line entry point: ``dfaudit <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error (bad or missing input).
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import os
import sys
from typing import Sequence

from . import __version__, annotate, bias, ingest, report, stats, synth
from .errors import DfauditError
from .model import DEFAULT_REGISTRY, JoinPolicy, join

log = logging.getLogger("dfaudit")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _default_seed() -> int:
    raw = os.environ.get("DFAUDIT_SEED")
    if raw is None or raw == "":
        return 0
    try:
        seed = int(raw, 0)
    except ValueError:
        raise UsageError(f"DFAUDIT_SEED={raw!r} is not an integer") from None
    if not 0 <= seed < 2**64:
        raise UsageError("DFAUDIT_SEED must be an unsigned 64-bit integer")
    return seed


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _ratios(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated ratios")
    return parts[0], parts[1], parts[2]


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write(out: str | None, text: str) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    log.info("wrote %s", out)


def _load_table(path: str):
    """Annotations over any subset of the default attributes, in default order."""
    with open(path, "rb") as fh:
        header = fh.readline().decode("utf-8-sig", "replace").rstrip("\r\n").split(",")[1:]
        known = [c for c in header if c in DEFAULT_REGISTRY]
        registry = DEFAULT_REGISTRY.subset(known) if known else DEFAULT_REGISTRY
        fh.seek(0)
        return ingest.load_annotations(fh, registry)


def _data_error(path: str, exc: Exception) -> DfauditError:
    err = DfauditError(f"{path}: {exc}")
    err.__cause__ = exc
    return err


def _with_path(path: str, fn, *args):
    try:
        return fn(path, *args)
    except DfauditError as e:
        raise _data_error(path, e) from e


# ------------------------------------------------------------ subcommands


def cmd_filter_annotations(args: argparse.Namespace) -> None:
    config = annotate.FilterConfig(args.threshold)

    def run(path: str):
        with open(path, "rb") as fh:
            return annotate.apply_confidence_filter(annotate.load_confidences(fh), config, DEFAULT_REGISTRY)

    table = _with_path(args.input, run)
    if args.out in (None, "-"):
        ingest.write_annotations(table, sys.stdout.buffer)
    else:
        with open(args.out, "wb") as fh:
            ingest.write_annotations(table, fh)
    log.info("%d samples, threshold %.4g", len(table), args.threshold)


def cmd_stats(args: argparse.Namespace) -> None:
    table = _with_path(args.input, _load_table)
    summary = stats.attribute_distribution(table)
    if args.format == "svg":
        _write(args.out, report.distribution_svg(summary))
        return
    doc = {"distribution": summary.to_dict()}
    if args.min_count is not None:
        doc["support_filter"] = stats.support_filter(table, args.min_count).to_dict()
    _write(args.out, json.dumps(doc, indent=2) + "\n")


def cmd_correlate(args: argparse.Namespace) -> None:
    table = _with_path(args.input, _load_table)
    matrix = stats.pearson_correlations(table, args.policy)
    _write(args.out, report.correlations_csv(stats.top_correlations(matrix, args.top)))


def cmd_split(args: argparse.Namespace) -> None:
    def run(path: str):
        with open(path, "rb") as fh:
            return ingest.load_manifest(fh)

    manifest = _with_path(args.manifest, run)
    seed = args.seed if args.seed is not None else _default_seed()
    assignment = ingest.subject_exclusive_split(manifest, args.ratios, seed)
    buf = io.StringIO()
    ingest.write_splits(assignment, buf)
    _write(args.out, buf.getvalue())
    log.info("split sizes %s", {k.value: v for k, v in assignment.sizes().items()})


def cmd_audit(args: argparse.Namespace) -> None:
    table = _with_path(args.annotations, _load_table)

    def load_preds(path: str):
        with open(path, "rb") as fh:
            return ingest.load_predictions(fh, args.score_threshold)

    preds = _with_path(args.predictions, load_preds)
    dataset = _with_path(args.predictions, lambda _p: join(table, preds, JoinPolicy(args.join)))
    log.info("joined %d samples", len(dataset))
    kept = stats.support_filter(dataset.annotations, args.min_count)
    names = kept.kept_names()
    if args.attributes:
        with open(args.attributes, encoding="utf-8") as fh:
            listed = ingest.read_lines_as_list(fh)
        for n in listed:
            if n not in DEFAULT_REGISTRY:
                raise _data_error(args.attributes, DfauditError(f"unknown attribute {n!r}"))
        names = [n for n in names if n in set(listed)]
        dropped = sorted(set(listed) - set(names))
        if dropped:
            log.warning("listed attributes below min-count %d: %s", args.min_count, ", ".join(dropped))
    seed = args.seed if args.seed is not None else _default_seed()
    spec = bias.ControlGroupSpec(seed=seed, reps=args.control_reps, replacement=args.replacement)
    provenance = {
        "min_count": args.min_count,
        "score_threshold": args.score_threshold,
        "join": args.join,
        "inputs": {
            "annotations_sha256": _sha256(args.annotations),
            "predictions_sha256": _sha256(args.predictions),
        },
    }
    result = bias.audit(dataset, kept=names, spec=spec, provenance=provenance)
    _write(args.out, result.to_json())
    log.info("%d attribute rows", len(result.rows))


def cmd_synth(args: argparse.Namespace) -> None:
    def run(path: str):
        with open(path, encoding="utf-8") as fh:
            return synth.SynthConfig.from_json(fh.read())

    config = _with_path(args.config, run)
    summary = synth.write_population(args.out_dir, config)
    log.info("wrote %d samples to %s (label crc32 %08x)", summary["n_samples"], args.out_dir, summary["label_crc32"])


def cmd_report(args: argparse.Namespace) -> None:
    def run(path: str):
        with open(path, encoding="utf-8") as fh:
            try:
                return bias.BiasReport.from_json(fh.read())
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise DfauditError(f"not a bias report: {e}") from None

    rep = _with_path(args.input, run)
    options = report.RenderOptions(args.format, args.decimals, args.legacy_sentinels)
    if args.kind == "table":
        if args.format == "svg":
            raise UsageError("--kind table does not support --format svg")
        _write(args.out, report.render_table(rep, options))
        return
    _write(args.out, report.emit_scatter(rep, args.kind, options))
    if args.sentinels_out:
        _write(args.sentinels_out, report.scatter_data(rep, args.kind).sentinels_csv())


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dfaudit", description="Attribute-conditioned bias audits for deepfake detectors.")
    p.add_argument("--version", action="version", version=f"dfaudit {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more diagnostics on stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("filter-annotations", parents=[common], help="confidence records -> ternary annotations.csv")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out")
    s.add_argument("--threshold", type=float, default=annotate.DEFAULT_CONFIDENCE_THRESHOLD)
    s.set_defaults(func=cmd_filter_annotations)

    s = sub.add_parser("stats", parents=[common], help="label distribution per attribute")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out")
    s.add_argument("--format", choices=["json", "svg"], default="json")
    s.add_argument("--min-count", type=int, help="also report the support filter at this count")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("correlate", parents=[common], help="top pairwise Pearson correlations")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out")
    s.add_argument("--top", type=int, default=20)
    s.add_argument("--policy", choices=[c.value for c in stats.CorrelationPolicy], default="defined-pairs")
    s.set_defaults(func=cmd_correlate)

    s = sub.add_parser("split", parents=[common], help="subject-exclusive train/val/test split of identities")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out")
    s.add_argument("--ratios", type=_ratios, default=(0.6, 0.2, 0.2))
    s.add_argument("--seed", type=_seed, help="default: $DFAUDIT_SEED or 0")
    s.set_defaults(func=cmd_split)

    s = sub.add_parser("audit", parents=[common], help="per-attribute RP / CRP / PDRP / DDRP report")
    s.add_argument("--annotations", required=True)
    s.add_argument("--predictions", required=True)
    s.add_argument("--out")
    s.add_argument("--min-count", type=int, default=100)
    s.add_argument("--attributes", help="file listing the attributes to audit, one per line")
    s.add_argument("--seed", type=_seed, help="default: $DFAUDIT_SEED or 0")
    s.add_argument("--control-reps", type=int, default=1)
    s.add_argument("--replacement", action="store_true", help="draw control groups with replacement")
    s.add_argument("--score-threshold", type=float, default=0.5)
    s.add_argument("--join", choices=[j.value for j in JoinPolicy], default="intersect")
    s.set_defaults(func=cmd_audit)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic population")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("report", parents=[common], help="render a report.json as a table or scatter")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out")
    s.add_argument("--kind", choices=["table", *(k.value for k in report.ScatterKind)], default="table")
    s.add_argument("--format", choices=[f.value for f in report.OutputFormat], default="text")
    s.add_argument("--decimals", type=int, default=2)
    s.add_argument("--legacy-sentinels", action="store_true")
    s.add_argument("--sentinels-out", help="scatter only: CSV of rows without finite coordinates")
    s.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        try:
            args = parser.parse_args(argv)
        except SystemExit as e:  # --help / --version
            return int(e.code or 0)
        logging.basicConfig(
            level=logging.WARNING - 10 * min(args.verbose, 2),
            format="dfaudit: %(levelname)s: %(message)s",
            stream=sys.stderr,
        )
        if getattr(args, "control_reps", 1) < 1:
            raise UsageError("--control-reps must be >= 1")
        if getattr(args, "min_count", None) is not None and args.min_count < 1:
            raise UsageError("--min-count must be >= 1")
        args.func(args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except (DfauditError, OSError, ValueError) as e:
        if isinstance(e, OSError) and e.filename is not None:
            print(f"dfaudit: error: {e.filename}: {e.strerror}", file=sys.stderr)
        else:
            print(f"dfaudit: error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
