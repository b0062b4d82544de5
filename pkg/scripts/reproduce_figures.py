"""Posture-on/off curve pairs and verdicts for fig3 to fig6.

    python scripts/reproduce_figures.py --out-dir out/figures --workers 4
"""

import argparse
import json
from dataclasses import replace
from pathlib import Path

from u2vchan.cli import FIGURES, load_config, reproduce_figure


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="paper-fig3")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out-dir", type=Path, default=Path("out/figures"))
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--realizations", type=int, default=None)
    args = ap.parse_args()

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    table = {}
    for name in sorted(FIGURES):
        report = reproduce_figure(name, cfg, args.out_dir, args.workers, args.realizations)
        table[name] = {"verdicts": report["verdicts"], "anchors": report["anchors"]}
        for verdict, ok in report["verdicts"].items():
            print(f"{name:5s} {verdict:30s} {'PASS' if ok else 'FAIL'}")
    print(json.dumps(table, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
