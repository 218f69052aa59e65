"""Round-trip latency shapes: loopback sweep, then a simulated far broker.

Runs the size sweep against an embedded broker, then repeats one size
through the delay proxy at increasing one-way delays to show the
baseline + 2*delay relationship.
"""

from sdm_station.bench import BenchConfig, run_sweep, summarize
from sdm_station.broker import Broker, BrokerConfig
from sdm_station.proxy import DelayProxy

with Broker(BrokerConfig(tcp_bind=("127.0.0.1", 0))) as broker:
    cfg = BenchConfig("127.0.0.1", broker.tcp_port,
                      sizes=[20, 220, 420, 820, 1420], repetitions=50)
    result = run_sweep(cfg)
    print(f"loopback sweep ({cfg.repetitions} reps, "
          f"{cfg.interval_ms:.0f} ms interval, losses {result.losses}):")
    for st in summarize(result.samples):
        print(f"  {st.size_bytes:5d} B  median {st.median_us / 1000:6.3f} ms  "
              f"IQR [{st.q1_us / 1000:.3f} .. {st.q3_us / 1000:.3f}]")

    print("simulated remote broker (60 B messages):")
    for delay in (0.0, 5.0, 15.0, 40.0):
        with DelayProxy("127.0.0.1", broker.tcp_port,
                        one_way_delay_ms=delay) as proxy:
            r = run_sweep(BenchConfig("127.0.0.1", proxy.port, sizes=[60],
                                      interval_ms=5.0, repetitions=40))
        med = summarize(r.samples)[0].median_us / 1000
        print(f"  one-way {delay:4.0f} ms  ->  median RTT {med:7.2f} ms")

    with DelayProxy("127.0.0.1", broker.tcp_port, one_way_delay_ms=12.0,
                    jitter_ms=5.0, seed=3) as proxy:
        r = run_sweep(BenchConfig("127.0.0.1", proxy.port, sizes=[60],
                                  interval_ms=5.0, repetitions=60))
    rtts = sorted(s.rtt_us / 1000 for s in r.samples)
    frac = sum(1 for x in rtts if x < 50.0) / len(rtts)
    print(f"  one-way 12 ms + 5 ms jitter: median {rtts[len(rtts) // 2]:.1f} ms, "
          f"{100 * frac:.0f}% under 50 ms")
