"""Run the score-model proposition checks over several parameter regimes."""

import argparse
import json

from negaudit.simulator import generate_instances, run_proposition_suite

REGIMES = {
    "uniform": {},
    "strong negation bias": {"u_range": (5, 6), "v_pos_range": (0, 0.1), "v_neg_range": (3, 4), "distractor_u_range": (0, 1)},
    "equal residuals": {"v_pos_range": (1, 1), "v_neg_range": (1, 1)},
    "strong distractors": {"distractor_u_range": (0, 8)},
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--n", type=int, default=10_000)
    args = parser.parse_args()

    ok = True
    for name, ranges in REGIMES.items():
        report = run_proposition_suite(generate_instances(args.seed, args.n, **ranges))
        ok &= report.ok
        print(f"== {name}")
        print(json.dumps(report.to_dict(), indent=2))
    raise SystemExit(0 if ok else 1)


if __name__ == "__main__":
    main()
