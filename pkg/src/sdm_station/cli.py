"""Console entry points: station runner, latency bench, standalone broker."""

from __future__ import annotations

import argparse
import logging
import signal
import sys
import threading

from .broker import Broker, BrokerConfig


def _setup_logging(level: str):
    logging.basicConfig(
        stream=sys.stderr, level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s")


def _parse_bind(s: str) -> tuple[str, int]:
    host, _, port = s.rpartition(":")
    return host or "127.0.0.1", int(port)


def station_main(argv=None) -> int:
    from .station import Station, default_config_path, load_config, ConfigError

    p = argparse.ArgumentParser(prog="sdm-station",
                                description="Run the virtual media station")
    sub = p.add_subparsers(dest="cmd", required=True)
    runp = sub.add_parser("run", help="start broker and services")
    runp.add_argument("--config", default=default_config_path(),
                      help="station config JSON (default: bundled room)")
    runp.add_argument("--services", default=None,
                      help="comma-separated subset: localization,render,extraction")
    runp.add_argument("--broker", default=None,
                      help="external://host:port to use an existing broker")
    runp.add_argument("--log-level", default="info")
    args = p.parse_args(argv)

    _setup_logging(args.log_level)
    try:
        config = load_config(args.config)
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return 2
    if args.broker is not None:
        if not args.broker.startswith("external://"):
            print("--broker must look like external://host:port", file=sys.stderr)
            return 2
        host, port = _parse_bind(args.broker[len("external://"):])
        config.broker_embedded = False
        config.broker_host, config.broker_tcp_port = host, port
    services = args.services.split(",") if args.services else None

    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    station = Station(config, enabled_services=services)
    with station:
        logging.getLogger("sdm.station").info(
            "station up (broker %s:%s), Ctrl-C to stop",
            station.broker_host, station.broker_port)
        stop.wait()
    return 0


def bench_main(argv=None) -> int:
    from .bench import BenchConfig, export_results, run_sweep, summarize
    from .proxy import DelayProxy

    p = argparse.ArgumentParser(prog="sdm-bench",
                                description="Publish-echo RTT benchmark")
    p.add_argument("--broker", default="127.0.0.1:1883", help="host:port")
    p.add_argument("--sizes", default=None,
                   help="comma-separated payload sizes in bytes (default 20..1420)")
    p.add_argument("--interval-ms", type=float, default=17.0)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--proxy-delay-ms", type=float, default=None,
                   help="route through a local delay proxy with this one-way delay")
    p.add_argument("--proxy-jitter-ms", type=float, default=0.0)
    p.add_argument("--out-dir", default="bench_out")
    p.add_argument("--log-level", default="info")
    args = p.parse_args(argv)

    _setup_logging(args.log_level)
    host, port = _parse_bind(args.broker)
    sizes = [int(s) for s in args.sizes.split(",")] if args.sizes else None

    proxy = None
    if args.proxy_delay_ms is not None:
        proxy = DelayProxy(host, port, one_way_delay_ms=args.proxy_delay_ms,
                           jitter_ms=args.proxy_jitter_ms).start()
        host, port = "127.0.0.1", proxy.port
    try:
        kwargs = {} if sizes is None else {"sizes": sizes}
        config = BenchConfig(host, port, interval_ms=args.interval_ms,
                             repetitions=args.reps, **kwargs)
        result = run_sweep(config)
        stats = summarize(result.samples)
        samples_path, stats_path = export_results(stats, result.samples, args.out_dir)
        for st in stats:
            print(f"size {st.size_bytes:5d} B  interval {st.interval_ms:5.1f} ms  "
                  f"median {st.median_us / 1000:7.3f} ms  "
                  f"[{st.min_us / 1000:.3f} .. {st.max_us / 1000:.3f}]  n={st.count}")
        print(f"losses: {result.losses}  flagged: {result.flagged}")
        print(f"wrote {samples_path} and {stats_path}")
        return 1 if result.flagged else 0
    finally:
        if proxy is not None:
            proxy.shutdown()


def broker_main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="sdm-broker",
                                description="Standalone pub/sub broker (MQTT subset)")
    p.add_argument("--tcp-bind", default="127.0.0.1:1883")
    p.add_argument("--ws-bind", default="127.0.0.1:8083")
    p.add_argument("--max-payload", type=int, default=64 * 1024)
    p.add_argument("--log-level", default="info")
    args = p.parse_args(argv)

    _setup_logging(args.log_level)
    config = BrokerConfig(tcp_bind=_parse_bind(args.tcp_bind),
                          ws_bind=_parse_bind(args.ws_bind) if args.ws_bind else None,
                          max_payload=args.max_payload)
    stop = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: stop.set())
    with Broker(config) as broker:
        logging.getLogger("sdm.broker").info(
            "listening tcp=%s ws=%s", broker.tcp_port, broker.ws_port)
        stop.wait()
    return 0
