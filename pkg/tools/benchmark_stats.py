#!/usr/bin/env python3
"""
tools/benchmark_stats.py
Statistiques de répétabilité : tableau par niveau du porte-échantillons
(mesures d'eau) et comparaison de dispersion avec un goniomètre commercial.

Usage :
    python tools/benchmark_stats.py levels --in mesures_eau.json
    python tools/benchmark_stats.py compare --in comparaison.json

Formats :
    levels  : {"A": [100.9, ...], "B": [...], ...}
    compare : [{"substrate": "PTFE", "sd_a": 1.69, "n_a": 15, "sd_b": 4.43, "n_b": 5}, ...]
"""

import sys
import argparse
from pathlib import Path

# Ajouter le répertoire parent au path pour importer core/
sys.path.insert(0, str(Path(__file__).parent.parent))

from core.errors import GoniolabError
from core.stats import compare_methods, level_summary
from core.utils import read_json


def main() -> int:
    parser = argparse.ArgumentParser(description="Statistiques de répétabilité")
    parser.add_argument("table", choices=["levels", "compare"])
    parser.add_argument("--in", dest="source", required=True)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    try:
        data = read_json(Path(args.source))
        if args.table == "levels":
            frame = level_summary(data)
            print(frame.to_string(index=False))
            print(f"\n📊 Moyenne générale {frame.attrs['grand_mean']:.3f}°, SD {frame.attrs['grand_sd']:.3f}°")
        else:
            frame = compare_methods(data)
            print(frame.to_string(index=False))
    except GoniolabError as e:
        print(f"❌ {e}")
        return 1

    if args.out:
        frame.to_csv(args.out, index=False)
        print(f"✅ Tableau écrit : {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
