"""Repairs per negated-option wording, for both lexicons and both question polarities.

Every wrong prediction picks the negated option, so a full repair leaves
zero polarity errors.
"""

import argparse

from negaudit.builder import PARAPHRASE_VARIANTS, apply_paraphrase
from negaudit.fixtures import absence_items, direct_presence_items, make_predictions
from negaudit.lexicon import BUILTIN_LEXICONS
from negaudit.metrics import score
from negaudit.verifier import SlotMode, VerifierConfig, batch_verify


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--slot-mode", default="slot0", choices=["slot0", "slot_agnostic"])
    args = parser.parse_args()
    mode = SlotMode(args.slot_mode.upper())

    print(f"{'protocol':<10} {'variant':<16} {'lexicon':<9} {'errors':>7} {'after':>6} {'repaired':>9}")
    for name, items, n_correct in (("presence", direct_presence_items(), 74), ("absence", absence_items(), 2)):
        for variant in PARAPHRASE_VARIANTS:
            para = apply_paraphrase(items, variant)
            base = make_predictions(para, n_correct, len(para) - n_correct, 0)
            before = score(para, base).polarity_errors
            for lex_name, lexicon in BUILTIN_LEXICONS.items():
                verified, summary = batch_verify(para, base, VerifierConfig(lexicon=lexicon, slot_mode=mode))
                after = score(para, [v.as_prediction() for v in verified]).polarity_errors
                print(f"{name:<10} {variant:<16} {lex_name:<9} {before:>7} {after:>6} {summary.triggered:>9}")


if __name__ == "__main__":
    main()
