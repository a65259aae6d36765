"""
tests/test_tools.py
Scripts de tools/
"""

import sys
from pathlib import Path

import pandas as pd

from core.utils import write_json
from tools import benchmark_stats, robustness

ROOT = Path(__file__).parent.parent


def run(monkeypatch, module, *argv):
    monkeypatch.setattr(sys, "argv", [module.__name__, *argv])
    return module.main()


def test_level_table(tmp_path, monkeypatch, capsys):
    source = tmp_path / "eau.json"
    write_json(source, {"A": [100.0, 101.0], "B": [99.0, 100.0]})
    out = tmp_path / "niveaux.csv"
    assert run(monkeypatch, benchmark_stats, "levels", "--in", str(source), "--out", str(out)) == 0
    assert "Moyenne générale 100.000°" in capsys.readouterr().out
    frame = pd.read_csv(out)
    assert frame["level"].tolist() == ["A", "B"]
    assert frame["bias"].tolist() == [0.5, -0.5]


def test_compare_table_errors(tmp_path, monkeypatch):
    source = tmp_path / "comparaison.json"
    write_json(source, [{"substrate": "PTFE", "sd_a": 1.69, "n_a": 1, "sd_b": 4.43, "n_b": 5}])
    assert run(monkeypatch, benchmark_stats, "compare", "--in", str(source)) == 1


def test_seed_robustness(tmp_path, monkeypatch):
    out = tmp_path / "graines.csv"
    assert run(monkeypatch, robustness, "seeds",
               "--config", str(ROOT / "configs" / "surfactant_campaign.json"),
               "--settings", str(ROOT / "config.yaml"),
               "--seeds", "2", "--budget", "3", "--out", str(out)) == 0
    assert pd.read_csv(out)["seed"].tolist() == [0, 1]
