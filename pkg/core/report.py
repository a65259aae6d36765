"""
core/report.py
Rapports de campagne : résumé CSV (meilleur D cumulé, statut par expérience)
et figures plotly (angle et désirabilité par itération)
"""

import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd
import plotly.express as px

from .errors import ConfigInvalid
from .utils import ColorScheme

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("iteration", "mean_deg", "D")


def load_history(path: Path) -> pd.DataFrame:
    """history.csv d'un répertoire de campagne (ou chemin direct du CSV)"""
    csv_path = path / "history.csv" if path.is_dir() else path
    if not csv_path.exists():
        raise ConfigInvalid(f"Historique introuvable: {csv_path}")
    frame = pd.read_csv(csv_path)
    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigInvalid(f"{csv_path}: colonnes manquantes {missing}")
    return frame


def summarize_history(frame: pd.DataFrame, band: Optional[Tuple[float, float]] = None) -> pd.DataFrame:
    """Ajoute best_D (maximum cumulé), in_band et un statut lisible"""
    summary = frame.copy()
    summary["best_D"] = summary["D"].cummax()
    if band is not None:
        summary["in_band"] = summary["mean_deg"].between(band[0], band[1])
    else:
        summary["in_band"] = False
    optimal = summary["optimal"].astype(bool) if "optimal" in summary else False
    summary["status"] = np.where(
        optimal, "optimal", np.where(summary["in_band"], "dans la bande", "hors cible")
    )
    return summary


def theta_figure(summary: pd.DataFrame, title: str = "Angle de contact par itération"):
    fig = px.scatter(
        summary,
        x="iteration",
        y="mean_deg",
        error_y="sd_deg" if "sd_deg" in summary else None,
        color="status",
        color_discrete_map=ColorScheme.band(),
        labels={"iteration": "Itération", "mean_deg": "θ moyen (°)", "status": "Statut"},
        title=title,
    )
    fig.update_layout(height=420)
    return fig


def desirability_figure(summary: pd.DataFrame, title: str = "Désirabilité"):
    long = summary.melt(id_vars="iteration", value_vars=["D", "best_D"], var_name="série", value_name="valeur")
    fig = px.line(
        long,
        x="iteration",
        y="valeur",
        color="série",
        color_discrete_map={"D": ColorScheme.INFO, "best_D": ColorScheme.PRIMARY},
        labels={"iteration": "Itération", "valeur": "D"},
        title=title,
    )
    fig.update_yaxes(range=[0, 1.02])
    fig.update_layout(height=360)
    return fig


def build_report(
    source: Path,
    out_csv: Path,
    out_html: Optional[Path] = None,
    band: Optional[Tuple[float, float]] = None
) -> pd.DataFrame:
    """Résumé CSV et, si demandé, page HTML autonome avec les deux figures"""
    summary = summarize_history(load_history(source), band)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    summary.to_csv(out_csv, index=False, float_format="%.10g", lineterminator="\n")

    if out_html is not None:
        parts = [
            theta_figure(summary).to_html(full_html=False, include_plotlyjs="cdn"),
            desirability_figure(summary).to_html(full_html=False, include_plotlyjs=False),
        ]
        out_html.write_text(
            "<html><head><meta charset='utf-8'><title>Rapport de campagne</title></head><body>"
            + "".join(parts) + "</body></html>",
            encoding="utf-8"
        )
        logger.info("Rapport HTML écrit : %s", out_html)
    return summary
