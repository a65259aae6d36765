"""
tests/test_memory.py
Journal d'événements et répertoire de campagne
"""

import json

import pytest

from core.memory import CampaignStore, EventLog, history_frame
from core.optimizer import campaign_from_config, record_result, recommend_next


@pytest.fixture
def record(ethanol_config):
    campaign = campaign_from_config(ethanol_config, 7)
    for angles in ([100.0, 101.0, 102.0], [88.0, 87.5, 87.0]):
        f = recommend_next(campaign)
        record_result(campaign, f, {"angles_deg": angles})
    return campaign


def test_append_and_reload(tmp_path):
    path = tmp_path / "events.jsonl"
    log = EventLog(path)
    log.append("campaign_start", campaign_id="ethanol", seed=7)
    log.append("recommendation", experiment_id=1, formulation={"ethanol": 12.5})
    log.append("result", experiment_id=1, iteration=1)

    again = EventLog(path)
    assert [e.seq for e in again.entries] == [1, 2, 3]
    assert again.entries[1]["formulation"] == {"ethanol": 12.5}
    assert [e["experiment_id"] for e in again.of_kind("result")] == [1]
    assert again.entries[0].timestamp == log.entries[0].timestamp


def test_in_memory_log():
    log = EventLog()
    assert not log
    log.append("fault", experiment_id=2, reason="x")
    assert len(log) == 1 and log.entries[0].get("missing") is None


def test_truncated_last_line_is_dropped(tmp_path):
    path = tmp_path / "events.jsonl"
    log = EventLog(path)
    log.append("recommendation", experiment_id=1, formulation={})
    log.append("result", experiment_id=1, iteration=1)
    with open(path, "a", encoding="utf-8") as f:
        f.write('{"seq":3,"event":"recomm')

    again = EventLog(path)
    assert len(again) == 2
    again.append("resume", iteration=1)
    assert [e.event for e in EventLog(path).entries] == ["recommendation", "result", "resume"]


def test_corrupted_middle_line(tmp_path):
    path = tmp_path / "events.jsonl"
    path.write_text('{"seq":1,"event":"a"}\nnot json\n{"seq":3,"event":"b"}\n', encoding="utf-8")
    with pytest.raises(json.JSONDecodeError):
        EventLog(path)


def test_history_frame(record):
    frame = history_frame(record)
    assert list(frame.columns) == ["iteration", "experiment_id", "ethanol", "mean_deg", "sd_deg",
                                   "t_contact_angle", "D", "optimal"]
    assert frame["iteration"].tolist() == [1, 2]
    assert frame["mean_deg"].tolist() == pytest.approx([101.0, 87.5])
    assert frame["D"].iloc[1] == pytest.approx(1.0)


def test_store_roundtrip(tmp_path, record):
    store = CampaignStore(tmp_path / "run")
    assert store.load_record() is None
    store.save(record)
    data = store.load_record()
    assert data["id"] == "ethanol"
    assert len(data["history"]) == 2
    lines = store.history_path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("iteration,experiment_id,ethanol")
