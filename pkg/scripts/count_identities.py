"""Rebuild the fixture protocols and print before/after tables for each.

Usage: python scripts/count_identities.py [--out-dir results/]
"""

import argparse
from pathlib import Path

from negaudit.fixtures import absence_items, direct_presence_items, make_predictions, retro_presence_fixture, rexvqa_like_fixture
from negaudit.io import write_json, write_text
from negaudit.metrics import comparison_row, diff, render_markdown, score
from negaudit.verifier import VerifierConfig, batch_verify


def runs():
    items = direct_presence_items()
    yield "direct presence (235)", items, make_predictions(items, 74, 153, 8)
    items = absence_items()
    yield "report absence (507)", items, make_predictions(items, 2, 504, 1)
    yield "retro presence (396)", *retro_presence_fixture()
    yield "sparse 1k probe", *rexvqa_like_fixture()


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", type=Path)
    args = parser.parse_args()

    cfg = VerifierConfig()
    rows, details = [], {}
    for label, items, base in runs():
        verified, summary = batch_verify(items, base, cfg)
        before, after = score(items, base), score(items, [v.as_prediction() for v in verified])
        rows.append(comparison_row(label, before, after))
        d = diff(items, base, verified)
        details[label] = {"coverage_pct": summary.coverage_pct, "reasons": summary.reason_counts, "diff": d.to_dict()}
        print(f"{label}: coverage {summary.coverage_pct:.2f}%  wrong-negated {before.wrong_with_negation} "
              f"-> {after.wrong_with_negation}  repairable {before.repairable_reversals}  worsened {d.worsened}")
    table = render_markdown(rows)
    print()
    print(table, end="")
    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        write_text(args.out_dir / "count_identities.md", table)
        write_json(args.out_dir / "count_identities.json", details)


if __name__ == "__main__":
    main()
