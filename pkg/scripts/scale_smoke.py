"""Time build -> verify -> score -> stats on a 135,754-record synthetic protocol."""

import argparse
import tempfile
import time
from pathlib import Path

from negaudit.builder import DEFAULT_VOCABULARY, write_label_csv
from negaudit.cli import main as cli
from negaudit.fixtures import make_predictions, scale_label_table
from negaudit.io import load_protocol, write_jsonl

N_TOTAL, N_NEGATED, N_CORRECT = 135_754, 84_966, 44_862


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--work-dir", type=Path, help="keep intermediate files here (default: temp dir)")
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        d = args.work_dir or Path(tmp)
        d.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        write_label_csv(d / "train.csv", scale_label_table(), DEFAULT_VOCABULARY)
        steps = [("build", ["build", "--table", d / "train.csv", "--kind", "direct_presence", "--out", d / "p.jsonl"])]
        for name, argv in steps:
            t = time.perf_counter()
            assert cli([str(a) for a in argv]) == 0
            print(f"[{name}] {time.perf_counter() - t:.1f}s")
        items = load_protocol(d / "p.jsonl")
        preds = make_predictions(items, N_CORRECT, N_NEGATED, N_TOTAL - N_CORRECT - N_NEGATED)
        write_jsonl(d / "base.jsonl", (p.to_dict() for p in preds))
        steps = [
            ("verify", ["verify", "--protocol", d / "p.jsonl", "--predictions", d / "base.jsonl", "--out", d / "v.jsonl"]),
            ("score", ["score", "--protocol", d / "p.jsonl", "--predictions", d / "v.jsonl", "--out", d / "score.json"]),
            ("stats", ["stats", "--protocol", d / "p.jsonl", "--base", d / "base.jsonl", "--verified", d / "v.jsonl", "--out", d / "stats.json"]),
        ]
        for name, argv in steps:
            t = time.perf_counter()
            assert cli([str(a) for a in argv]) == 0
            print(f"[{name}] {time.perf_counter() - t:.1f}s")
        print(f"total {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
