import json
import threading

import pytest

from sdm_station.broker import Broker, BrokerConfig
from sdm_station.client import MqttClient


# acceptance criterion results, echoed after the run summary so they are
# visible without -s (see test_acceptance.report)
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def broker():
    b = Broker(BrokerConfig(tcp_bind=("127.0.0.1", 0))).start()
    yield b
    b.shutdown()


class Collector:
    """Subscriber that records (topic, payload) pairs and can wait on counts."""

    def __init__(self, host, port, client_id="collector"):
        self.messages = []
        self._cond = threading.Condition()
        self.client = MqttClient(host, port, client_id=client_id,
                                 on_message=self._on_message)

    def _on_message(self, topic, payload):
        with self._cond:
            self.messages.append((topic, payload))
            self._cond.notify_all()

    def connect(self, *filters):
        self.client.connect()
        for f in filters:
            self.client.subscribe(f)
        return self

    def wait_for(self, count, timeout=10.0):
        with self._cond:
            self._cond.wait_for(lambda: len(self.messages) >= count, timeout)
            return list(self.messages)

    def json_messages(self):
        with self._cond:
            return [json.loads(p) for _, p in self.messages]

    def close(self):
        self.client.close()


@pytest.fixture
def collector_factory(broker):
    made = []

    def make(*filters, client_id=None):
        c = Collector(broker.config.tcp_bind[0], broker.tcp_port,
                      client_id=client_id or f"collector{len(made)}")
        made.append(c)
        return c.connect(*filters)

    yield make
    for c in made:
        c.close()
