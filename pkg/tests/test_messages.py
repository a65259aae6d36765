"""
tests/test_messages.py
Format JSON canonique des messages
"""

import json

import pytest

from core.errors import SchemaViolation
from core.messages import (
    FaultMsg,
    RecommendationMsg,
    ResultMsg,
    decode_msg,
    encode_msg,
    recommendation_topic,
    result_topic,
)


def result_msg(**changes):
    msg = ResultMsg.from_angles("ethanol", 3, [86.0, 87.0, 88.0], [0.4, 0.5, 0.6], [10.0, 20.0, 30.0],
                                env={"temperature_c": 22.4, "humidity_pct": 41.0})
    for name, value in changes.items():
        setattr(msg, name, value)
    return msg


def test_topics():
    assert recommendation_topic("sds94-tween20") == "campaign/sds94-tween20/recommendation"
    assert result_topic("ethanol") == "campaign/ethanol/result"


def test_result_from_angles():
    msg = result_msg()
    assert msg.replicates == 3
    assert msg.mean_deg == pytest.approx(87.0)
    assert msg.sd_deg == pytest.approx(1.0)


@pytest.mark.parametrize("msg", [
    RecommendationMsg("ethanol", 1, {"ethanol": 32.5}, 3),
    FaultMsg("ethanol", 2, "StageFull: porte-échantillons plein"),
    result_msg(),
])
def test_encode_decode(msg):
    data = encode_msg(msg)
    assert decode_msg(data) == msg
    assert encode_msg(decode_msg(data)) == data


def test_canonical_layout():
    data = encode_msg(RecommendationMsg("ethanol", 1, {"ethanol": 32.5}, 3))
    assert data == b'{"kind":"recommendation","campaign_id":"ethanol","experiment_id":1,' \
                   b'"formulation":{"ethanol":32.5},"replicates":3}'
    assert "é" in encode_msg(FaultMsg("x", 1, "échec")).decode("utf-8")


def test_missing_campaign_id():
    payload = json.loads(encode_msg(result_msg()))
    del payload["campaign_id"]
    with pytest.raises(SchemaViolation) as info:
        decode_msg(json.dumps(payload).encode())
    assert info.value.path == "campaign_id"


def test_wrong_angle_count():
    with pytest.raises(SchemaViolation) as info:
        encode_msg(result_msg(angles_deg=[86.0, 87.0]))
    assert info.value.path == "angles"


def test_inconsistent_mean():
    with pytest.raises(SchemaViolation) as info:
        encode_msg(result_msg(mean_deg=90.0))
    assert info.value.path == "mean_deg"


def test_optional_env():
    payload = json.loads(encode_msg(result_msg()))
    del payload["env"]
    assert decode_msg(json.dumps(payload).encode()).env is None


@pytest.mark.parametrize("raw, path", [
    (b"not json", "$"),
    (b"[1, 2]", "$"),
    (b'{"kind": "hello"}', "kind"),
    (b'{"kind": "fault", "campaign_id": "", "experiment_id": 1, "reason": "x"}', "campaign_id"),
    (b'{"kind": "fault", "campaign_id": "c", "experiment_id": 0, "reason": "x"}', "experiment_id"),
    (b'{"kind": "recommendation", "campaign_id": "c", "experiment_id": 1, '
     b'"formulation": {"SDS94": -1}, "replicates": 3}', "formulation.SDS94"),
])
def test_schema_violations(raw, path):
    with pytest.raises(SchemaViolation) as info:
        decode_msg(raw)
    assert info.value.path == path
