"""Publish-echo latency benchmark: RTT sweeps over message size and
interval, quartile summaries, CSV export.

The client subscribes to its own topic, embeds a monotonic send
timestamp in each payload, and measures receive-minus-send on the same
clock, so no cross-machine synchronization is needed.
"""

from __future__ import annotations

import csv
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .client import MqttClient

log = logging.getLogger("sdm.bench")

DEFAULT_SIZES = list(range(20, 1421, 100))  # 20..1420 bytes
DEFAULT_INTERVAL_MS = 17.0
DEFAULT_REPETITIONS = 100
WARMUP_COUNT = 10
LOSS_TIMEOUT_S = 2.0
OUTLIER_THRESHOLDS_MS = (30.0, 50.0, 100.0, 500.0)


@dataclass
class BenchConfig:
    broker_host: str
    broker_port: int
    topic: str = "bench/run"
    sizes: Sequence[int] = tuple(DEFAULT_SIZES)
    interval_ms: float = DEFAULT_INTERVAL_MS
    repetitions: int = DEFAULT_REPETITIONS
    warmup: int = WARMUP_COUNT

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if any(s < 20 for s in self.sizes):
            raise ValueError("sizes must be >= 20 bytes")


@dataclass(frozen=True)
class RttSample:
    seq: int
    size_bytes: int
    interval_ms: float
    rtt_us: float
    send_timestamp_us: int


@dataclass(frozen=True)
class RttStats:
    size_bytes: int
    interval_ms: float
    count: int
    min_us: float
    q1_us: float
    median_us: float
    q3_us: float
    max_us: float
    outliers: dict = field(default_factory=dict)  # threshold_ms -> count


def make_payload(seq: int, t_send_us: int, target_size: int) -> bytes:
    """Bench payload padded to target_size bytes (or the minimum encodable
    size if the JSON skeleton is already larger)."""
    skeleton = json.dumps({"seq": seq, "t_send_us": t_send_us, "pad": ""},
                          separators=(",", ":")).encode()
    pad_len = max(0, target_size - len(skeleton))
    return json.dumps({"seq": seq, "t_send_us": t_send_us, "pad": "x" * pad_len},
                      separators=(",", ":")).encode()


@dataclass
class SweepResult:
    samples: list[RttSample]
    losses: int
    flagged: bool  # loss rate above 10%


def run_sweep(config: BenchConfig, intervals_ms: Optional[Sequence[float]] = None
              ) -> SweepResult:
    """One message per size per repetition, ascending sizes, spaced by the
    interval.  With multiple intervals the whole sweep repeats per interval."""
    intervals = list(intervals_ms) if intervals_ms is not None else [config.interval_ms]
    received: dict[int, float] = {}
    lock = threading.Lock()
    got_any = threading.Event()

    def on_message(topic: str, payload: bytes):
        t_recv = time.monotonic_ns() / 1000.0
        try:
            d = json.loads(payload)
            seq = d["seq"]
        except (ValueError, KeyError):
            return
        with lock:
            received[seq] = t_recv
        got_any.set()

    client = MqttClient(config.broker_host, config.broker_port,
                        client_id=f"bench-{config.topic.replace('/', '-')}",
                        on_message=on_message)
    client.connect()
    try:
        client.subscribe(config.topic)
        samples: list[RttSample] = []
        sent: dict[int, tuple[int, float, int]] = {}  # seq -> (size, interval, t_send)
        seq = 0

        # warmup: discarded echoes to settle connection state
        for _ in range(config.warmup):
            client.publish(config.topic, make_payload(-1, 0, 60))
            time.sleep(0.002)
        time.sleep(0.1)
        with lock:
            received.clear()

        for interval in intervals:
            for _rep in range(config.repetitions):
                for size in config.sizes:
                    t_send = time.monotonic_ns() // 1000
                    payload = make_payload(seq, t_send, size)
                    # group by the requested size: tiny targets pad up to the
                    # JSON skeleton, which would otherwise split stats groups
                    sent[seq] = (size, interval, t_send)
                    client.publish(config.topic, payload)
                    seq += 1
                    if interval > 0:
                        time.sleep(interval / 1000.0)

        deadline = time.monotonic() + LOSS_TIMEOUT_S
        while time.monotonic() < deadline:
            with lock:
                if len(received) >= len(sent):
                    break
            time.sleep(0.01)

        losses = 0
        with lock:
            for s, (size, interval, t_send) in sent.items():
                t_recv = received.get(s)
                if t_recv is None:
                    losses += 1
                    continue
                samples.append(RttSample(s, size, interval, t_recv - t_send, t_send))
        flagged = losses > 0.10 * len(sent)
        if flagged:
            log.warning("loss rate %.1f%% exceeds 10%%", 100 * losses / len(sent))
        return SweepResult(samples, losses, flagged)
    finally:
        client.close()


def _quartiles(values: list[float]) -> tuple[float, float, float]:
    """Q1/median/Q3 by linear interpolation between order statistics."""
    xs = sorted(values)
    n = len(xs)

    def q(p: float) -> float:
        if n == 1:
            return xs[0]
        h = p * (n - 1)
        i = int(h)
        frac = h - i
        if i + 1 >= n:
            return xs[-1]
        return xs[i] + frac * (xs[i + 1] - xs[i])

    return q(0.25), q(0.5), q(0.75)


def summarize(samples: Sequence[RttSample]) -> list[RttStats]:
    """Per (size, interval) group: boxplot stats plus threshold outlier counts."""
    groups: dict[tuple[int, float], list[float]] = {}
    for s in samples:
        groups.setdefault((s.size_bytes, s.interval_ms), []).append(s.rtt_us)
    stats = []
    for (size, interval), rtts in sorted(groups.items()):
        if not rtts:
            log.warning("empty group (%d B, %.1f ms) omitted", size, interval)
            continue
        q1, med, q3 = _quartiles(rtts)
        outliers = {thr: sum(1 for r in rtts if r > thr * 1000.0)
                    for thr in OUTLIER_THRESHOLDS_MS}
        stats.append(RttStats(size, interval, len(rtts), min(rtts), q1, med, q3,
                              max(rtts), outliers))
    return stats


SAMPLE_COLUMNS = ["seq", "size", "interval_ms", "rtt_us"]
STATS_COLUMNS = ["size", "interval_ms", "count", "min_us", "q1_us", "median_us",
                 "q3_us", "max_us"] + [f"over_{int(t)}ms" for t in OUTLIER_THRESHOLDS_MS]


def export_results(stats: Sequence[RttStats], samples: Sequence[RttSample],
                   out_dir: str) -> tuple[str, str]:
    """Write raw-sample and boxplot-stat CSVs; returns their paths."""
    import os
    os.makedirs(out_dir, exist_ok=True)
    samples_path = os.path.join(out_dir, "rtt_samples.csv")
    stats_path = os.path.join(out_dir, "rtt_stats.csv")
    with open(samples_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SAMPLE_COLUMNS)
        for s in samples:
            w.writerow([s.seq, s.size_bytes, s.interval_ms, f"{s.rtt_us:.3f}"])
    with open(stats_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(STATS_COLUMNS)
        for st in stats:
            w.writerow([st.size_bytes, st.interval_ms, st.count,
                        f"{st.min_us:.3f}", f"{st.q1_us:.3f}", f"{st.median_us:.3f}",
                        f"{st.q3_us:.3f}", f"{st.max_us:.3f}"]
                       + [st.outliers[t] for t in OUTLIER_THRESHOLDS_MS])
    return samples_path, stats_path


def import_stats(path: str) -> list[RttStats]:
    out = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            out.append(RttStats(
                int(row["size"]), float(row["interval_ms"]), int(row["count"]),
                float(row["min_us"]), float(row["q1_us"]), float(row["median_us"]),
                float(row["q3_us"]), float(row["max_us"]),
                {t: int(row[f"over_{int(t)}ms"]) for t in OUTLIER_THRESHOLDS_MS}))
    return out
