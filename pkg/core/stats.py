"""
core/stats.py
Statistiques des réplicats : moyenne/écart-type, test F de comparaison
de variances, réduction d'écart-type entre méthodes, résumé par niveau
"""

import math
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import special

from .errors import EmptyInput, InvalidSampleSize


def aggregate_replicates(angles: Iterable[float]) -> Tuple[float, float]:
    """Moyenne arithmétique et écart-type d'échantillon (n−1), SD = 0 pour un seul réplicat"""
    values = np.asarray(list(angles), dtype=float)
    if values.size == 0:
        raise EmptyInput("Aucune valeur à agréger")
    mean = math.fsum(values) / values.size
    if values.size == 1:
        return float(mean), 0.0
    sd = math.sqrt(math.fsum((values - mean) ** 2) / (values.size - 1))
    return float(mean), sd


def f_cdf(x: float, dfn: float, dfd: float) -> float:
    """Fonction de répartition de la loi F par la fonction bêta incomplète régularisée"""
    if x <= 0:
        return 0.0
    return float(special.betainc(dfn / 2.0, dfd / 2.0, dfn * x / (dfn * x + dfd)))


def f_test_variances(sd1: float, n1: int, sd2: float, n2: int) -> Tuple[float, float, Tuple[int, int]]:
    """Test F bilatéral d'égalité des variances.

    F = plus grande variance / plus petite, degrés de liberté ordonnés en conséquence.
    Retourne (F, p, (ddl numérateur, ddl dénominateur)).
    """
    if n1 < 2 or n2 < 2:
        raise InvalidSampleSize(f"Au moins 2 mesures par groupe (n1={n1}, n2={n2})")
    if sd1 <= 0 or sd2 <= 0:
        raise InvalidSampleSize("Écarts-types strictement positifs requis")

    v1, v2 = sd1 ** 2, sd2 ** 2
    if v1 >= v2:
        F, dfn, dfd = v1 / v2, n1 - 1, n2 - 1
    else:
        F, dfn, dfd = v2 / v1, n2 - 1, n1 - 1
    cdf = f_cdf(F, dfn, dfd)
    p = min(1.0, 2.0 * min(cdf, 1.0 - cdf))
    return F, p, (dfn, dfd)


def sd_reduction(sd_reference: float, sd_candidate: float) -> float:
    """Réduction relative (%) de l'écart-type du candidat par rapport à la référence"""
    if sd_reference <= 0:
        raise InvalidSampleSize("Écart-type de référence nul")
    return 100.0 * (sd_reference - sd_candidate) / sd_reference


def compare_methods(rows: Sequence[Dict[str, float]]) -> pd.DataFrame:
    """Tableau de comparaison de deux méthodes de mesure, une ligne par substrat.

    Chaque ligne : substrate, sd_a, n_a (méthode évaluée), sd_b, n_b (référence).
    """
    records = []
    for row in rows:
        F, p, _ = f_test_variances(row["sd_b"], int(row["n_b"]), row["sd_a"], int(row["n_a"]))
        records.append({
            "substrate": row["substrate"],
            "sd_a": row["sd_a"],
            "sd_b": row["sd_b"],
            "F": round(F, 4),
            "p": round(p, 4),
            "sd_reduction_pct": round(sd_reduction(row["sd_b"], row["sd_a"]), 1),
        })
    return pd.DataFrame.from_records(records)


def level_summary(values_by_level: Dict[str, List[float]]) -> pd.DataFrame:
    """Résumé par niveau du porte-échantillons : n, moyenne, SD, écart à la moyenne générale"""
    if not values_by_level or not any(values_by_level.values()):
        raise EmptyInput("Aucune mesure par niveau")
    grand_mean, grand_sd = aggregate_replicates(v for vals in values_by_level.values() for v in vals)
    records = []
    for level, values in values_by_level.items():
        if not values:
            continue
        mean, sd = aggregate_replicates(values)
        records.append({
            "level": level,
            "n": len(values),
            "mean": mean,
            "sd": sd,
            "bias": mean - grand_mean,
        })
    frame = pd.DataFrame.from_records(records)
    frame.attrs["grand_mean"] = grand_mean
    frame.attrs["grand_sd"] = grand_sd
    return frame
