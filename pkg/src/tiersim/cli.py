"""Command-line entry point.

Subcommands: ``traces gen``, ``simulate``, ``report``, ``verify``,
``calibrate``, ``serve``, ``selftest``, ``dump``.  Exit codes: 0 on success,
1 when a verify check (or the self-test) fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import classify, energy, harness, station, store, trace
from .errors import TierSimError
from .node import Tier

_TIER_BY_FLAG = {"1": Tier.TIER1, "2": Tier.TIER2, "3": Tier.TIER3, "neural": Tier.NEURAL}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tiersim")
    sub = parser.add_subparsers(dest="command", required=True)

    p_traces = sub.add_parser("traces", help="trace file utilities")
    traces_sub = p_traces.add_subparsers(dest="traces_command", required=True)
    p_gen = traces_sub.add_parser("gen", help="generate a synthetic trace")
    p_gen.add_argument("--profile", choices=["reference", "custom"], default="custom")
    p_gen.add_argument("--duration-min", type=float, default=1.0)
    p_gen.add_argument("--interval-ms", type=float, default=trace.DEFAULT_SAMPLE_INTERVAL_MS)
    p_gen.add_argument("--activity", type=float, default=0.0)
    p_gen.add_argument("--falls", type=int, default=0)
    p_gen.add_argument("--fall-duration", type=int, default=3)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)

    p_sim = sub.add_parser("simulate", help="run the per-tier experiment")
    src = p_sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace", help="trace CSV to reuse in every run")
    src.add_argument("--profile", choices=["reference"], help="generate per-run traces")
    p_sim.add_argument(
        "--tier",
        action="append",
        choices=sorted(_TIER_BY_FLAG),
        help="tier to run (repeatable; default: 1 2 3)",
    )
    p_sim.add_argument("--runs", type=int, default=3)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--params", default="paper", help="params file path or 'paper'")
    p_sim.add_argument("--store", help="directory for per-run stores (default: temporary)")
    p_sim.add_argument("--out", required=True, help="result JSON path")
    p_sim.add_argument("--model", help="classifier model file (neural tier)")
    p_sim.add_argument("--window-width", type=int, help="classifier window width (neural tier)")
    p_sim.add_argument("--t-move", type=float, default=2.0)
    p_sim.add_argument("--t-fall", type=float, default=6.0)
    p_sim.add_argument("--refractory-ms", type=int, default=2000)

    p_report = sub.add_parser("report", help="render a result")
    p_report.add_argument("--in", dest="infile", required=True)
    p_report.add_argument("--format", choices=["table", "csv"], default="table")

    p_verify = sub.add_parser("verify", help="check a result against the reference targets")
    p_verify.add_argument("--in", dest="infile", required=True)

    p_cal = sub.add_parser("calibrate", help="solve energy constants from measured targets")
    p_cal.add_argument("--p1", type=float, required=True)
    p_cal.add_argument("--p2", type=float, required=True)
    p_cal.add_argument("--ntx1", type=float, required=True)
    p_cal.add_argument("--ntx2", type=float, required=True)
    p_cal.add_argument("--share", type=float, default=0.8)
    p_cal.add_argument("--split", type=float, default=0.5)
    p_cal.add_argument("--out", required=True)

    p_serve = sub.add_parser("serve", help="run the ingestion endpoint")
    p_serve.add_argument("--port", type=int, default=station.DEFAULT_PORT)
    p_serve.add_argument("--store", required=True)
    p_serve.add_argument("--risk-threshold", type=float, default=2.0)

    p_selftest = sub.add_parser("selftest", help="loopback-test a running endpoint")
    p_selftest.add_argument("--port", type=int, required=True)

    p_dump = sub.add_parser("dump", help="export one entity as CSV")
    p_dump.add_argument("--store", required=True)
    p_dump.add_argument("--entity", required=True, choices=store.ENTITY_KINDS)
    p_dump.add_argument("--csv", action="store_true", help="CSV output (the only format)")
    p_dump.add_argument("--out", help="write to a file instead of stdout")

    return parser


def _cmd_traces_gen(args) -> int:
    if args.profile == "reference":
        spec = trace.REFERENCE_PROFILE
    else:
        spec = trace.TraceSpec(
            duration_min=args.duration_min,
            sample_interval_ms=args.interval_ms,
            activity_fraction=args.activity,
            fall_count=args.falls,
            fall_duration_samples=args.fall_duration,
        )
    generated = trace.generate_trace(spec, args.seed)
    trace.write_trace(generated, args.out)
    print(f"wrote {len(generated)} samples to {args.out}")
    return 0


def _cmd_simulate(args) -> int:
    tiers = tuple(_TIER_BY_FLAG[flag] for flag in (args.tier or ["1", "2", "3"]))
    params = energy.resolve_params(args.params)
    classifier = classify.load_model(args.model) if args.model else None
    config = harness.ExperimentConfig(
        tiers=tiers,
        params=params,
        runs=args.runs,
        base_seed=args.seed,
        trace_spec=trace.REFERENCE_PROFILE if args.profile == "reference" else None,
        trace_path=args.trace,
        t_move=args.t_move,
        t_fall=args.t_fall,
        refractory_ms=args.refractory_ms,
        classifier=classifier,
        window_width=args.window_width,
        store_root=Path(args.store) if args.store else None,
    )
    result = harness.run_experiment(config)
    Path(args.out).write_text(harness.result_to_json(result), encoding="utf-8")
    print(f"wrote result to {args.out}")
    return 0


def _cmd_report(args) -> int:
    result = harness.result_from_json(Path(args.infile).read_text(encoding="utf-8"))
    sys.stdout.write(harness.emit_report(result, format=args.format))
    return 0


def _cmd_verify(args) -> int:
    result = harness.result_from_json(Path(args.infile).read_text(encoding="utf-8"))
    checks = harness.verify_reference(result)
    for check in checks:
        print(check.line())
    failed = sum(1 for check in checks if not check.passed)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 1 if failed else 0


def _cmd_calibrate(args) -> int:
    params = energy.calibrate(
        energy.CalibrationTargets(
            p1_w=args.p1,
            p2_w=args.p2,
            n_tx1=args.ntx1,
            n_tx2=args.ntx2,
            comm_share=args.share,
            cpu_split=args.split,
        )
    )
    energy.save_params(params, args.out)
    print(
        f"e_tx={params.e_tx_mws:.4f} mWs  p_listen={params.p_listen_mw:.2f} mW  "
        f"e_sample={params.e_sample_mws:.4f} mWs  p_base={params.p_base_mw:.2f} mW"
    )
    return 0


def _cmd_serve(args) -> int:
    with store.Store(args.store) as backing:
        server = station.IngestServer(
            backing, port=args.port, risk_threshold=args.risk_threshold
        )
        print(f"listening on port {args.port}, store {args.store}")
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.close()
    return 0


def _cmd_selftest(args) -> int:
    verdict = station.self_test(args.port)
    print(verdict)
    return 0 if verdict == "SUCCESS" else 1


def _cmd_dump(args) -> int:
    with store.Store(args.store) as backing:
        text = backing.dump_csv(args.entity)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "report": _cmd_report,
    "verify": _cmd_verify,
    "calibrate": _cmd_calibrate,
    "serve": _cmd_serve,
    "selftest": _cmd_selftest,
    "dump": _cmd_dump,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "traces":
            return _cmd_traces_gen(args)
        return _HANDLERS[args.command](args)
    except TierSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
