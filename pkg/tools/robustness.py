#!/usr/bin/env python3
"""
tools/robustness.py
Expériences de robustesse sur le laboratoire virtuel : rapports de poids,
largeur des bornes de la cible d'angle, dispersion selon la graine.

Usage :
    python tools/robustness.py weights --config configs/surfactant_campaign.json
    python tools/robustness.py bounds --config configs/surfactant_campaign.json --seeds 5
    python tools/robustness.py seeds --config configs/surfactant_campaign.json --seeds 10 --out runs/seeds.csv
"""

import sys
import argparse
from pathlib import Path

# Ajouter le répertoire parent au path pour importer core/
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.errors import GoniolabError
from core.lab import VirtualLab
from core.optimizer import MEASUREMENT_SD
from core.orchestrator import bound_width_sweep, seed_sweep, weight_ratio_sweep
from core.utils import load_config, read_json, setup_logging

WEIGHT_RATIOS = [(1, 1), (1, 3), (3, 1), (1, 5), (5, 1)]
HALF_WIDTHS = [50, 25, 10, 5, 3 * MEASUREMENT_SD, 2 * MEASUREMENT_SD, MEASUREMENT_SD]


def main() -> int:
    parser = argparse.ArgumentParser(description="Expériences de robustesse")
    parser.add_argument("experiment", choices=["weights", "bounds", "seeds"])
    parser.add_argument("--config", required=True, help="JSON de campagne")
    parser.add_argument("--settings", default="config.yaml")
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--budget", type=int, default=60)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    settings = load_config(Path(args.settings))
    setup_logging(settings)
    campaign = read_json(Path(args.config))
    seeds = list(range(args.seeds))
    factory = lambda: VirtualLab.from_config({**settings, **campaign})

    try:
        if args.experiment == "weights":
            frame = weight_ratio_sweep(campaign, WEIGHT_RATIOS, seeds, args.budget, factory)
        elif args.experiment == "bounds":
            frame = bound_width_sweep(campaign, HALF_WIDTHS, seeds, args.budget, factory)
        else:
            frame = seed_sweep(campaign, seeds, args.budget, factory)
    except GoniolabError as e:
        print(f"❌ {e}")
        return 1

    summary = frame.groupby("setting", sort=False).agg(
        first_optimal_median=("first_optimal", "median"),
        optimal_count_mean=("optimal_count", "mean"),
        best_D_mean=("best_D", "mean"),
    )
    print(summary.to_string())
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(args.out, index=False)
        print(f"📊 Détail -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
