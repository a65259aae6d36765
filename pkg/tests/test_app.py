"""
tests/test_app.py
Interface en ligne de commande
"""

import json

import app
from core.utils import read_json


def test_throughput(capsys):
    assert app.main(["throughput", "--experiments", "30", "--replicates", "3"]) == 0
    assert "30 formulations" in capsys.readouterr().out


def test_render_then_measure(tmp_path, capsys):
    image = tmp_path / "goutte.png"
    assert app.main(["render", "--theta", "90", "--out", str(image)]) == 0
    assert image.exists()
    capsys.readouterr()
    assert app.main(["measure", str(image), "--json"]) == 0
    result = json.loads(capsys.readouterr().out)
    assert abs(result["angle_deg"] - 90.0) <= 1.0


def test_campaign_then_report(tmp_path):
    out = tmp_path / "ethanol"
    config = str(app.DEFAULT_CONFIG.parent / "configs" / "ethanol_campaign.json")
    assert app.main(["campaign", "run", "--config", config, "--budget", "4", "--out", str(out)]) == 0
    assert read_json(out / "record.json")["status"] == "completed"
    assert app.main(["report", "--in", str(out), "--out", str(out / "report.csv"), "--html"]) == 0
    assert (out / "report.html").exists()


def test_errors_return_one(tmp_path, capsys):
    assert app.main(["measure", str(tmp_path / "absent.png")]) == 1
    assert app.main(["--settings", str(tmp_path / "absent.yaml"), "throughput"]) == 1
    assert app.main(["report", "--in", str(tmp_path), "--out", str(tmp_path / "r.csv")]) == 1


def test_default_output_directories(tmp_path):
    settings = tmp_path / "config.yaml"
    settings.write_text('paths:\n  base_dir: "."\n  images_dir: "images"\n  runs_dir: "runs"\n', encoding="utf-8")
    assert app.main(["--settings", str(settings), "render", "--theta", "60"]) == 0
    assert (tmp_path / "images" / "goutte_60_0.png").exists()

    config = str(app.DEFAULT_CONFIG.parent / "configs" / "ethanol_campaign.json")
    assert app.main(["--settings", str(settings), "campaign", "run", "--config", config, "--budget", "2"]) == 0
    assert (tmp_path / "runs" / "ethanol" / "history.csv").exists()
