"""
core/bus.py
Bus de messages publication/abonnement : en processus (défaut, tests)
ou via un broker MQTT (paho-mqtt 1.x)
"""

import logging
import queue
from collections import defaultdict, deque
from typing import Callable, Deque, Dict, List, Optional, Tuple

from .errors import LabFault

logger = logging.getLogger(__name__)

Handler = Callable[[str, bytes], None]


class InProcessBus:
    """File FIFO en mémoire ; les messages sont livrés par pump() dans l'ordre de publication"""

    def __init__(self):
        self._handlers: Dict[str, List[Handler]] = defaultdict(list)
        self._queue: Deque[Tuple[str, bytes]] = deque()
        self.published: List[Tuple[str, bytes]] = []

    def subscribe(self, topic: str, handler: Handler):
        self._handlers[topic].append(handler)

    def publish(self, topic: str, payload: bytes):
        self._queue.append((topic, payload))
        self.published.append((topic, payload))

    def pump(self, timeout: Optional[float] = None) -> int:
        """Livre tous les messages en attente (y compris ceux publiés pendant la livraison)"""
        delivered = 0
        while self._queue:
            topic, payload = self._queue.popleft()
            for handler in list(self._handlers.get(topic, [])):
                handler(topic, payload)
            delivered += 1
        return delivered

    def close(self):
        self._queue.clear()


class MqttBus:
    """Adaptateur broker MQTT ; les callbacks réseau alimentent une file vidée par pump()"""

    def __init__(self, host: str = "localhost", port: int = 1883, keepalive: int = 60,
                 client_id: str = "", qos: int = 1, client=None):
        if client is None:
            import paho.mqtt.client as mqtt
            client = mqtt.Client(client_id=client_id, clean_session=True)
        self.client = client
        self.host = host
        self.port = port
        self.keepalive = keepalive
        self.qos = qos
        self._handlers: Dict[str, List[Handler]] = defaultdict(list)
        self._inbox: "queue.Queue[Tuple[str, bytes]]" = queue.Queue()
        self._connected = False
        self.client.on_connect = self._on_connect
        self.client.on_message = self._on_message

    def connect(self):
        self.client.connect(self.host, self.port, self.keepalive)
        self.client.loop_start()
        self._connected = True
        logger.info("Connecté au broker %s:%d", self.host, self.port)

    def _on_connect(self, client, userdata, flags, rc):
        if rc != 0:
            logger.error("Connexion au broker refusée (rc=%s)", rc)
            return
        # réabonnement après reconnexion
        for topic in self._handlers:
            client.subscribe(topic, self.qos)

    def _on_message(self, client, userdata, message):
        self._inbox.put((message.topic, bytes(message.payload)))

    def subscribe(self, topic: str, handler: Handler):
        self._handlers[topic].append(handler)
        self.client.subscribe(topic, self.qos)

    def publish(self, topic: str, payload: bytes):
        info = self.client.publish(topic, payload, qos=self.qos)
        if getattr(info, "rc", 0) != 0:
            raise LabFault(f"Publication refusée sur {topic} (rc={info.rc})")

    def pump(self, timeout: Optional[float] = 1.0) -> int:
        """Attend au plus `timeout` secondes le premier message puis vide la file"""
        delivered = 0
        try:
            item = self._inbox.get(timeout=timeout) if timeout else self._inbox.get_nowait()
        except queue.Empty:
            return 0
        while True:
            topic, payload = item
            for handler in list(self._handlers.get(topic, [])):
                handler(topic, payload)
            delivered += 1
            try:
                item = self._inbox.get_nowait()
            except queue.Empty:
                return delivered

    def close(self):
        if self._connected:
            self.client.loop_stop()
            self.client.disconnect()
            self._connected = False
