"""Slot-0 vs slot-agnostic absence repair on original and shuffled layouts."""

import argparse

from negaudit.builder import shuffle_layout
from negaudit.fixtures import absence_items, make_predictions, remap_to_layout
from negaudit.metrics import score
from negaudit.verifier import SlotMode, VerifierConfig, batch_verify


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[42, 43, 44])
    args = parser.parse_args()

    items = absence_items()
    base = make_predictions(items, 2, 504, 1)
    layouts = [("original", items, base)]
    for seed in args.seeds:
        shuffled = shuffle_layout(items, seed)
        layouts.append((f"shuffled {seed}", shuffled, remap_to_layout(shuffled, base)))

    print(f"{'layout':<14} {'mode':<14} {'acc':>7} {'repaired-correct':>17} {'contradictions':>15}")
    for name, its, preds in layouts:
        for mode in SlotMode:
            verified, _ = batch_verify(its, preds, VerifierConfig(slot_mode=mode))
            gold = {it.item_id: it.gold_index for it in its}
            fixed = sum(v.triggered and v.final_index == gold[v.item_id] for v in verified)
            report = score(its, [v.as_prediction() for v in verified])
            print(f"{name:<14} {mode.value:<14} {report.accuracy_pct:>7.2f} {fixed:>17} {report.contradictions:>15}")


if __name__ == "__main__":
    main()
