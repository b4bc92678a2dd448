"""``negaudit`` command line: build, verify, score, stats, simulate, report.

Exit codes: 0 success, 1 I/O/parse/join error, 2 validation failure.
Every output file gets a ``<output>.manifest.json`` sidecar; the outputs
themselves carry no timestamps, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from negaudit import __version__
from negaudit.answers import JoinError, ProtocolKind, join_predictions, validate_protocol
from negaudit.builder import (
    DEFAULT_VOCABULARY,
    PARAPHRASE_VARIANTS,
    BuildConfig,
    apply_paraphrase,
    build_protocol,
    build_report,
    load_label_table,
    shuffle_layout,
)
from negaudit.io import load_predictions, load_protocol, load_verified, write_json, write_jsonl, write_text
from negaudit.lexicon import BUILTIN_LEXICONS, get_lexicon
from negaudit.metrics import comparison_row, diff, render_markdown, score
from negaudit.resampling import Method, ResampleConfig, bootstrap_cis, paired_permutation_test
from negaudit.simulator import generate_instances, run_proposition_suite
from negaudit.verifier import SlotMode, VerifierConfig, batch_verify

SEED_ENV = "NEGAUDIT_SEED"
EXIT_OK, EXIT_IO, EXIT_INVALID = 0, 1, 2


class CLIError(Exception):
    def __init__(self, message: str, exit_code: int = EXIT_IO) -> None:
        super().__init__(message)
        self.exit_code = exit_code


@dataclass
class RunManifest:
    subcommand: str
    input_paths: list[str]
    config_echo: dict[str, Any]
    tool_version: str
    wall_time_ms: int


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 42
    try:
        return int(raw)
    except ValueError:
        raise CLIError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _write_manifest(output: str | Path, subcommand: str, inputs: Sequence[str], config: dict, started: float) -> None:
    manifest = RunManifest(
        subcommand=subcommand,
        input_paths=[str(p) for p in inputs],
        config_echo=config,
        tool_version=__version__,
        wall_time_ms=int((time.perf_counter() - started) * 1000),
    )
    write_json(f"{output}.manifest.json", asdict(manifest))


def _load_protocol(path: str):
    try:
        return load_protocol(path)
    except OSError as exc:
        raise CLIError(f"cannot read protocol {path}: {exc}") from exc
    except ValueError as exc:
        raise CLIError(str(exc)) from exc


def _load_predictions(path: str):
    try:
        return load_predictions(path)
    except OSError as exc:
        raise CLIError(f"cannot read predictions {path}: {exc}") from exc
    except ValueError as exc:
        raise CLIError(str(exc)) from exc


def _joined_or_fail(items, preds):
    try:
        joined = join_predictions(items, preds)
        joined.raise_for_errors()
    except JoinError as exc:
        raise CLIError(str(exc)) from exc
    return joined


# -- subcommands --------------------------------------------------------------


def _build_seed(args: argparse.Namespace) -> int:
    if args.shuffle_seed is not None:
        return args.shuffle_seed
    return args.seed if args.seed is not None else default_seed()


def cmd_build(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    kind = ProtocolKind(args.kind.upper())
    vocab = tuple(v.strip() for v in args.vocab.split(",")) if args.vocab else DEFAULT_VOCABULARY
    layout = tuple(args.layout.split(","))
    try:
        cfg = BuildConfig(
            finding_vocabulary=vocab,
            distractor_rule=args.distractor_rule,
            layout=layout,
            seed=_build_seed(args),
        )
    except ValueError as exc:
        raise CLIError(str(exc)) from exc
    try:
        table = load_label_table(args.table, cfg.finding_vocabulary)
    except OSError as exc:
        raise CLIError(f"cannot read label table {args.table}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise CLIError(f"malformed label table {args.table}: {exc}") from exc

    items = build_protocol(table, kind, cfg)
    if args.paraphrase:
        try:
            items = apply_paraphrase(items, args.paraphrase)
        except ValueError as exc:
            raise CLIError(str(exc), EXIT_INVALID) from exc
    shuffle = args.shuffle or args.shuffle_seed is not None
    if shuffle:
        items = shuffle_layout(items, cfg.seed)

    report = build_report(table, items, kind, args.expect_count).to_dict()
    validation = validate_protocol(items)
    report["validation"] = validation.to_dict()
    write_jsonl(args.out, (it.to_dict() for it in items))
    report_path = args.report or f"{args.out}.build.json"
    write_json(report_path, report)
    config = {
        "kind": kind.value,
        **cfg.to_dict(),
        "paraphrase": args.paraphrase,
        "shuffled": shuffle,
        "expect_count": args.expect_count,
    }
    _write_manifest(args.out, "build", [args.table], config, started)

    print(f"built {report['n_records']} {kind.value} records from {report['n_constructible_studies']} "
          f"of {report['n_studies_in_table']} studies -> {args.out}")
    if report["count_mismatch"]:
        print(f"warning: expected {args.expect_count} records, built {report['n_records']}", file=sys.stderr)
    if not validation.ok:
        for v in validation.errors[:10]:
            print(f"invalid: {v.item_id}: {v.message}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def _verifier_config(args: argparse.Namespace) -> VerifierConfig:
    try:
        lexicon = get_lexicon(args.lexicon)
    except (OSError, ValueError, KeyError) as exc:
        raise CLIError(f"cannot load lexicon {args.lexicon}: {exc}") from exc
    return VerifierConfig(
        lexicon=lexicon,
        slot_mode=SlotMode(args.slot_mode.upper()),
        y0_enabled=args.y0,
        y0_confidence_ceiling=args.y0_ceiling,
        y0_margin=args.y0_margin,
    )


def cmd_verify(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    cfg = _verifier_config(args)
    items = _load_protocol(args.protocol)
    preds = _load_predictions(args.predictions)
    _joined_or_fail(items, preds)
    results, summary = batch_verify(items, preds, cfg)
    write_jsonl(args.out, (r.to_dict() for r in results))
    summary_path = args.summary or f"{args.out}.summary.json"
    write_json(summary_path, summary.to_dict())
    _write_manifest(args.out, "verify", [args.protocol, args.predictions], cfg.to_dict(), started)

    print(f"coverage {summary.coverage_pct:.2f}% ({summary.triggered}/{summary.n})")
    for reason, count in summary.reason_counts.items():
        print(f"  {reason} {count}")
    if summary.warnings:
        print(f"warning: {summary.warnings} predictions lack Y0 confidence fields; left unchanged", file=sys.stderr)
    if summary.missing_predictions:
        print(f"warning: {len(summary.missing_predictions)} items have no prediction", file=sys.stderr)
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    lexicon = get_lexicon(args.lexicon)
    items = _load_protocol(args.protocol)
    preds = _load_predictions(args.predictions)
    _joined_or_fail(items, preds)
    report = score(items, preds, lexicon)
    write_json(args.out, report.to_dict())
    _write_manifest(args.out, "score", [args.protocol, args.predictions], {"lexicon": lexicon.name}, started)
    print(
        f"n {report.n} accuracy {report.accuracy_pct:.2f}% contradictions {report.contradictions} "
        f"presence_reversals {report.presence_reversals} wrong_with_negation {report.wrong_with_negation} "
        f"repairable {report.repairable_reversals}"
    )
    return EXIT_OK


def _paired_vectors(items, base_preds, verified):
    base_by_id = {p.item_id: p.choice_index for p in base_preds}
    final_by_id = {v.item_id: v.final_index for v in verified}
    if set(base_by_id) != set(final_by_id):
        raise CLIError("base and verified files cover different item sets")
    rows = [it for it in items if it.item_id in base_by_id]
    if len(rows) != len(base_by_id):
        raise CLIError("prediction files reference items not in the protocol")
    base_ok = np.array([base_by_id[it.item_id] == it.gold_index for it in rows], dtype=float)
    final_ok = np.array([final_by_id[it.item_id] == it.gold_index for it in rows], dtype=float)
    base_neg = np.array([it.options[base_by_id[it.item_id]].is_negated for it in rows], dtype=float)
    final_neg = np.array([it.options[final_by_id[it.item_id]].is_negated for it in rows], dtype=float)
    return rows, base_ok, final_ok, base_neg, final_neg


def _load_verified(path: str):
    try:
        return load_verified(path)
    except OSError as exc:
        raise CLIError(f"cannot read verified predictions {path}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise CLIError(str(exc)) from exc


def cmd_stats(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    method = Method(args.method.upper())
    cfg = ResampleConfig(args.n_resamples, args.seed if args.seed is not None else default_seed(), args.confidence, method)
    items = _load_protocol(args.protocol)
    base = _load_predictions(args.base)
    _joined_or_fail(items, base)
    verified = _load_verified(args.verified)
    rows, base_ok, final_ok, base_neg, final_neg = _paired_vectors(items, base, verified)
    studies = [it.study_id for it in rows]

    vectors = {
        "base_accuracy": base_ok,
        "verified_accuracy": final_ok,
        "delta_accuracy": final_ok - base_ok,
        "base_negated_picks": base_neg,
        "verified_negated_picks": final_neg,
    }
    kinds = {k: "sum" if k.endswith("_picks") else "mean" for k in vectors}
    acc = bootstrap_cis(vectors, cfg, study_ids=studies, statistic=kinds)
    perm = paired_permutation_test(base_ok, final_ok, cfg, study_ids=studies)
    out = {k: v.to_dict() for k, v in acc.items()}
    out["permutation"] = perm.to_dict()
    out["config"] = cfg.to_dict()
    write_json(args.out, out)
    _write_manifest(args.out, "stats", [args.protocol, args.base, args.verified], cfg.to_dict(), started)
    a, b = acc["base_accuracy"], acc["verified_accuracy"]
    print(f"base {a.point:.2f} [{a.low:.2f}, {a.high:.2f}]  verified {b.point:.2f} [{b.low:.2f}, {b.high:.2f}]  "
          f"p={perm.p_value:.4g} ({method.value}, seed {cfg.seed}, B={cfg.n_resamples})")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    lexicon = get_lexicon(args.lexicon)
    items = _load_protocol(args.protocol)
    base = _load_predictions(args.base)
    _joined_or_fail(items, base)
    verified = _load_verified(args.verified)
    try:
        d = diff(items, base, verified)
    except ValueError as exc:
        raise CLIError(str(exc)) from exc
    before = score(items, base, lexicon)
    after = score(items, [v.as_prediction() for v in verified], lexicon)
    rows = [comparison_row(args.label, before, after)]
    if args.by_finding:
        for finding in sorted(before.per_finding):
            rows.append(comparison_row(f"{args.label} / {finding}", before.per_finding[finding], after.per_finding[finding]))
    markdown = render_markdown(rows)
    write_text(args.out, markdown)
    json_path = args.json or f"{args.out}.json"
    write_json(json_path, {
        "rows": [r.to_dict() for r in rows],
        "diff": d.to_dict(),
        "base": before.to_dict(),
        "verified": after.to_dict(),
    })
    _write_manifest(args.out, "report", [args.protocol, args.base, args.verified], {"label": args.label, "lexicon": lexicon.name}, started)
    print(markdown, end="")
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    started = time.perf_counter()
    seed = args.seed if args.seed is not None else default_seed()
    instances = generate_instances(
        seed,
        args.n,
        u_range=tuple(args.u_range),
        v_pos_range=tuple(args.v_pos_range),
        v_neg_range=tuple(args.v_neg_range),
        distractor_u_range=tuple(args.distractor_u_range) if args.distractor_u_range else None,
    )
    report = run_proposition_suite(instances)
    config = {
        "seed": seed,
        "n": args.n,
        "u_range": args.u_range,
        "v_pos_range": args.v_pos_range,
        "v_neg_range": args.v_neg_range,
        "distractor_u_range": args.distractor_u_range,
    }
    if args.out_protocol:
        write_jsonl(args.out_protocol, (inst.item.to_dict() for inst in instances))
        _write_manifest(args.out_protocol, "simulate", [], config, started)
    if args.out_predictions:
        write_jsonl(args.out_predictions, (inst.prediction.to_dict() for inst in instances))
    if args.out_models:
        write_jsonl(args.out_models, ({"item_id": i.item.item_id, **i.model.to_dict()} for i in instances))
    result = report.to_dict()
    if args.report:
        write_json(args.report, {**result, "config": config})
    print(json.dumps(result, indent=2))
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_lexicon(args: argparse.Namespace) -> int:
    text = json.dumps(BUILTIN_LEXICONS[args.name].to_dict(), indent=2) + "\n"
    if args.out:
        write_text(args.out, text)
    else:
        print(text, end="")
    return EXIT_OK


# -- parser --------------------------------------------------------------------


def _add_verifier_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lexicon", default="extended", help="original, extended, or a lexicon JSON path")
    p.add_argument("--slot-mode", default="slot0", choices=["slot0", "slot_agnostic"])
    p.add_argument("--y0", action="store_true", help="enable the confidence fallback before polarity repair")
    p.add_argument("--y0-ceiling", type=float, default=0.80)
    p.add_argument("--y0-margin", type=float, default=0.03)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="negaudit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"negaudit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="construct a protocol JSONL from a label table")
    p.add_argument("--table", required=True, help="label CSV or JSONL")
    p.add_argument("--kind", required=True, choices=[k.value.lower() for k in ProtocolKind])
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="build report JSON (default <out>.build.json)")
    p.add_argument("--vocab", help="comma-separated finding vocabulary, in distractor priority order")
    p.add_argument("--layout", default="target,negated,distractor")
    p.add_argument("--distractor-rule", default="FIRST_IN_VOCAB_ORDER")
    p.add_argument("--paraphrase", choices=PARAPHRASE_VARIANTS)
    p.add_argument("--seed", type=int, default=None, help=f"layout shuffle seed (default 42 or ${SEED_ENV})")
    p.add_argument("--shuffle", action="store_true", help="shuffle option order per item using --seed")
    p.add_argument("--shuffle-seed", type=int, help="shorthand for --shuffle --seed N")
    p.add_argument("--expect-count", type=int, help="flag a mismatch if the record count differs")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("verify", help="apply polarity repair to a prediction file")
    p.add_argument("--protocol", required=True)
    p.add_argument("--predictions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--summary", help="summary JSON (default <out>.summary.json)")
    _add_verifier_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("score", help="accuracy and polarity-error counts")
    p.add_argument("--protocol", required=True)
    p.add_argument("--predictions", required=True, help="prediction or verified JSONL")
    p.add_argument("--out", required=True)
    p.add_argument("--lexicon", default="extended", help="lexicon used to classify question polarity")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stats", help="bootstrap CIs and paired permutation test")
    p.add_argument("--protocol", required=True)
    p.add_argument("--base", required=True)
    p.add_argument("--verified", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n-resamples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=None, help=f"default 42 or ${SEED_ENV}")
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--method", default="example", choices=["example", "study_clustered"])
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="markdown comparison table")
    p.add_argument("--protocol", required=True)
    p.add_argument("--base", required=True)
    p.add_argument("--verified", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--json", help="JSON twin of the table (default <out>.json)")
    p.add_argument("--label", default="run")
    p.add_argument("--by-finding", action="store_true")
    p.add_argument("--lexicon", default="extended")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("simulate", help="score-model instances and proposition checks")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--u-range", type=float, nargs=2, default=[0.0, 5.0])
    p.add_argument("--v-pos-range", type=float, nargs=2, default=[0.0, 2.0])
    p.add_argument("--v-neg-range", type=float, nargs=2, default=[0.0, 2.0])
    p.add_argument("--distractor-u-range", type=float, nargs=2)
    p.add_argument("--out-protocol")
    p.add_argument("--out-predictions")
    p.add_argument("--out-models")
    p.add_argument("--report")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("lexicon", help="dump a built-in lexicon as editable JSON")
    p.add_argument("name", choices=sorted(BUILTIN_LEXICONS))
    p.add_argument("--out")
    p.set_defaults(func=cmd_lexicon)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
