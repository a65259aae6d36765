"""
tests/test_bus.py
Bus en processus et adaptateur MQTT (client paho simulé)
"""

from types import SimpleNamespace

import pytest

from core.bus import InProcessBus, MqttBus
from core.errors import LabFault


def test_in_process_fifo():
    bus = InProcessBus()
    seen = []
    bus.subscribe("a", lambda topic, payload: seen.append(payload))
    bus.publish("a", b"1")
    bus.publish("b", b"ignored")
    bus.publish("a", b"2")
    assert seen == []
    assert bus.pump() == 3
    assert seen == [b"1", b"2"]
    assert len(bus.published) == 3


def test_in_process_delivers_replies_in_same_pump():
    bus = InProcessBus()
    replies = []
    bus.subscribe("ping", lambda topic, payload: bus.publish("pong", payload + b"!"))
    bus.subscribe("pong", lambda topic, payload: replies.append(payload))
    bus.publish("ping", b"x")
    bus.pump()
    assert replies == [b"x!"]


class FakeClient:
    """Client paho minimal : enregistre les appels, publie avec le rc donné"""

    def __init__(self, rc=0):
        self.rc = rc
        self.subscriptions = []
        self.published = []
        self.calls = []
        self.on_connect = None
        self.on_message = None

    def connect(self, host, port, keepalive):
        self.calls.append(("connect", host, port, keepalive))

    def loop_start(self):
        self.calls.append(("loop_start",))

    def loop_stop(self):
        self.calls.append(("loop_stop",))

    def disconnect(self):
        self.calls.append(("disconnect",))

    def subscribe(self, topic, qos):
        self.subscriptions.append((topic, qos))

    def publish(self, topic, payload, qos):
        self.published.append((topic, payload, qos))
        return SimpleNamespace(rc=self.rc)

    def deliver(self, topic, payload):
        self.on_message(self, None, SimpleNamespace(topic=topic, payload=payload))


def test_mqtt_roundtrip():
    client = FakeClient()
    bus = MqttBus(host="broker", port=1884, client=client)
    bus.connect()
    seen = []
    bus.subscribe("campaign/x/result", lambda topic, payload: seen.append((topic, payload)))
    assert client.subscriptions == [("campaign/x/result", 1)]

    bus.publish("campaign/x/recommendation", b"{}")
    assert client.published == [("campaign/x/recommendation", b"{}", 1)]

    client.deliver("campaign/x/result", b"r1")
    client.deliver("campaign/x/result", b"r2")
    assert bus.pump(timeout=0.1) == 2
    assert seen == [("campaign/x/result", b"r1"), ("campaign/x/result", b"r2")]
    assert bus.pump(timeout=0.01) == 0

    bus.close()
    assert client.calls[0] == ("connect", "broker", 1884, 60)
    assert ("disconnect",) in client.calls


def test_mqtt_resubscribes_on_reconnect():
    client = FakeClient()
    bus = MqttBus(client=client)
    bus.subscribe("t", lambda topic, payload: None)
    client.on_connect(client, None, {}, 0)
    assert client.subscriptions == [("t", 1), ("t", 1)]
    client.on_connect(client, None, {}, 5)
    assert len(client.subscriptions) == 2


def test_mqtt_publish_failure():
    bus = MqttBus(client=FakeClient(rc=4))
    with pytest.raises(LabFault):
        bus.publish("t", b"x")
