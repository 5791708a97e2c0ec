"""Experiment runner wiring trace -> node -> energy -> station -> store.

``run_experiment`` executes the three-runs-per-tier protocol: per tier and
run it obtains a trace (regenerated with ``base_seed + run`` for spec-backed
sources, reused verbatim for file sources), simulates the node, accounts the
energy, and pushes every transmission through the full pipeline (frame
encode/parse, wire-to-line conversion, ingestion with acknowledgement, and
persistence into a per-run store) so conservation can be checked end to
end.  Measurements are persisted with risk=true when the squared magnitude
reaches the movement threshold.

``emit_report`` renders per-tier tables (rows Run1..RunN, max, min, average;
columns Total, per minute, data, send rate, samples) plus a comparison
section; output is byte-deterministic.  The send-rate column is the mean
inter-transmission interval for tier 1 and the mean inter-sample interval
otherwise.

``verify_reference`` evaluates the quantitative reference checks against a
result produced on the reference profile with the shipped calibrated preset
and returns named pass/fail entries.
"""

from __future__ import annotations

import json
import tempfile
from dataclasses import dataclass
from pathlib import Path

from . import classify
from .energy import (
    ComparisonReport,
    EnergyParams,
    EnergyReport,
    REFERENCE_TARGETS,
    account,
    calibrate,
    compare,
)
from .errors import ComparisonError, SpecError
from .node import DecisionKind, NodeConfig, NodeLog, Tier, run_node
from .station import Ingestor, NotificationKind, alarm_frame, data_frame, encode_frame, forward, parse_frame
from .store import Store
from .trace import TraceSpec, Trace, generate_trace, load_trace

_TIER_ORDER = (Tier.TIER1, Tier.TIER2, Tier.TIER3, Tier.NEURAL)
_TIER_SHORT = {Tier.TIER1: "T1", Tier.TIER2: "T2", Tier.TIER3: "T3", Tier.NEURAL: "TN"}
_TIER_TITLE = {
    Tier.TIER1: "Tier 1",
    Tier.TIER2: "Tier 2",
    Tier.TIER3: "Tier 3",
    Tier.NEURAL: "Neural",
}

# ---------------------------------------------------------------------------
# Reference check targets
# ---------------------------------------------------------------------------
CALIBRATION_REL_TOL = 1e-9
POWER_REDUCTION_T1_T2_PCT = 12.7
POWER_REDUCTION_TOL_PP = 0.5
DATA_REDUCTION_T1_T2_RANGE = (94.5, 96.5)
TIER3_ALARM_COUNT = 8
DATA_REDUCTION_T2_T3_MIN_PCT = 99.5
TIER3_POWER_W = 0.1627
TIER3_POWER_REL_TOL = 0.03
SAMPLE_ENERGY_T1_MWS = 14.79
SAMPLE_ENERGY_T1_REL_TOL = 0.01
SAMPLE_ENERGY_T2_MWS = 8.17
SAMPLE_ENERGY_T2_REL_TOL = 0.02
SAMPLE_ENERGY_REDUCTION_PCT = 44.8
SAMPLE_ENERGY_REDUCTION_TOL_PP = 1.0

#: Published per-tier aggregates (total Ws, mean W, transmissions, samples)
#: that anchor the per-sample bookkeeping checks.  The tier-2 row is
#: internally inconsistent (samples x sampling period != total / power), so
#: per-sample energy for tier 2 is reproducible only from these aggregates,
#: not from a consistently accounted run.
PUBLISHED_TIER1 = {"total_ws": 2567.02, "power_w": 0.1834, "n_tx": 173515, "n_samples": 173515}
PUBLISHED_TIER2 = {"total_ws": 1689.49, "power_w": 0.1601, "n_tx": 6532, "n_samples": 207141}


# ---------------------------------------------------------------------------
# Result model
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class IngestTally:
    ok: int = 0
    duplicate: int = 0
    bad: int = 0
    unknown: int = 0
    alarms_persisted: int = 0
    camera_events: int = 0
    sip_events: int = 0


@dataclass(frozen=True)
class TierRow:
    """One numeric table row (a run, or a column-wise aggregate)."""

    total_ws: float
    power_w: float
    data: float
    send_rate_ms: float
    samples: float
    ws_per_sample: float
    duration_ms: float


@dataclass(frozen=True)
class RunRecord:
    tier: Tier
    run: int
    seed: int | None
    log_counts: dict
    energy: EnergyReport
    send_rate_ms: float
    ingest: IngestTally

    def row(self) -> TierRow:
        return TierRow(
            total_ws=self.energy.total_ws,
            power_w=self.energy.power_w,
            data=self.energy.n_tx,
            send_rate_ms=self.send_rate_ms,
            samples=self.energy.n_samples,
            ws_per_sample=self.energy.ws_per_sample,
            duration_ms=self.energy.duration_ms,
        )


@dataclass(frozen=True)
class TierBlock:
    tier: Tier
    runs: tuple

    def rows(self) -> list:
        return [record.row() for record in self.runs]

    def _aggregate(self, fn) -> TierRow:
        rows = self.rows()
        return TierRow(
            *(fn([getattr(r, name) for r in rows]) for name in TierRow.__dataclass_fields__)
        )

    @property
    def max_row(self) -> TierRow:
        return self._aggregate(max)

    @property
    def min_row(self) -> TierRow:
        return self._aggregate(min)

    @property
    def average_row(self) -> TierRow:
        return self._aggregate(lambda vs: sum(vs) / len(vs))

    def average_report(self) -> EnergyReport:
        avg = self.average_row
        return EnergyReport(
            total_ws=avg.total_ws,
            power_w=avg.power_w,
            ws_per_sample=avg.ws_per_sample,
            n_tx=avg.data,
            n_samples=avg.samples,
            duration_ms=avg.duration_ms,
        )


@dataclass(frozen=True)
class ExperimentResult:
    meta: dict
    blocks: dict  # Tier -> TierBlock

    def comparison(self) -> ComparisonReport | None:
        """Pairwise tier statistics; ``None`` when tiers 1 and 2 are not both present."""
        if Tier.TIER1 not in self.blocks or Tier.TIER2 not in self.blocks:
            return None
        return compare({tier: block.average_report() for tier, block in self.blocks.items()})

    def tiers(self) -> list:
        return [t for t in _TIER_ORDER if t in self.blocks]


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment needs; exactly one trace source is set."""

    tiers: tuple
    params: EnergyParams
    runs: int = 3
    base_seed: int = 0
    trace_spec: TraceSpec | None = None
    trace_path: str | None = None
    t_move: float = 2.0
    t_fall: float = 6.0
    refractory_ms: int = 2000
    node_address: int = 0x1
    classifier: classify.MlpModel | None = None
    window_width: int | None = None
    store_root: Path | None = None

    def validate(self) -> None:
        if not self.tiers:
            raise SpecError("at least one tier is required")
        if self.runs < 1:
            raise SpecError("runs must be >= 1")
        if (self.trace_spec is None) == (self.trace_path is None):
            raise SpecError("exactly one of trace_spec and trace_path must be set")
        if Tier.NEURAL in self.tiers and (self.classifier is None or self.window_width is None):
            raise SpecError("the neural tier requires a classifier model and window width")


def _register_pipeline_entities(store: Store, node_address: int) -> None:
    """One node worn by one person in one camera-equipped room."""
    type_id = store.upsert_entity("SensorTypes", {"description": "accelerometer"})
    person_id = store.upsert_entity("Persons", {"first_name": "Test", "last_name": "Resident"})
    room_id = store.upsert_entity("Rooms", {"name": "living-room"})
    store.upsert_entity("PersonRoom", {"person_id": person_id, "room_id": room_id})
    store.upsert_entity(
        "Cameras",
        {"name": "cam-1", "ip": "10.0.0.2", "url": "http://10.0.0.2/image", "room_id": room_id},
    )
    store.upsert_entity(
        "SensorNodes",
        {
            "ieee_address": f"{node_address:016x}",
            "name": "node-1",
            "type_id": type_id,
            "person_id": person_id,
        },
    )


def _simulate_run(
    config: ExperimentConfig, tier: Tier, run_index: int, store_dir: Path, trace: Trace, seed
) -> RunRecord:
    node_config = NodeConfig(
        tier=tier,
        t_move=config.t_move,
        t_fall=config.t_fall,
        refractory_ms=config.refractory_ms,
        node_address=config.node_address,
        classifier=config.classifier if tier is Tier.NEURAL else None,
        window_width=config.window_width if tier is Tier.NEURAL else None,
    )

    store = Store(store_dir)
    try:
        _register_pipeline_entities(store, config.node_address)
        ingestor = Ingestor(store, risk_threshold=config.t_move)
        try:
            seq = 0

            def on_decision(sample, decision):
                nonlocal seq
                if decision.kind is DecisionKind.TRANSMIT_DATA:
                    frame = data_frame(
                        config.node_address, seq, sample.t_ms, sample.ax, sample.ay, sample.az
                    )
                elif decision.kind is DecisionKind.TRANSMIT_ALARM:
                    frame = alarm_frame(config.node_address, seq, sample.t_ms, decision.payload)
                else:
                    return
                seq += 1
                line = forward(parse_frame(encode_frame(frame))).to_line()
                ingestor.handle_post(line)

            log = run_node(trace, node_config, on_decision=on_decision)
            report = account(log, config.params)
            tally = IngestTally(
                ok=ingestor.n_ok,
                duplicate=ingestor.n_duplicate,
                bad=ingestor.n_bad,
                unknown=ingestor.n_unknown,
                alarms_persisted=ingestor.n_alarms_persisted,
                camera_events=ingestor.notifications.count(
                    NotificationKind.CAMERA_SNAPSHOT_REQUESTED
                ),
                sip_events=ingestor.notifications.count(NotificationKind.SIP_CALL_INITIATED),
            )
        finally:
            ingestor.close()
    finally:
        store.close()

    if tier is Tier.TIER1:
        send_rate = log.duration_ms / log.n_tx if log.n_tx else 0.0
    else:
        send_rate = log.duration_ms / log.n_samples if log.n_samples else 0.0
    return RunRecord(
        tier=tier,
        run=run_index,
        seed=seed,
        log_counts={
            "duration_ms": log.duration_ms,
            "n_samples": log.n_samples,
            "n_tx_data": log.n_tx_data,
            "n_tx_alarm": log.n_tx_alarm,
        },
        energy=report,
        send_rate_ms=send_rate,
        ingest=tally,
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every (tier, run) cell; deterministic for a fixed config."""
    config.validate()
    blocks = {}
    tiers = tuple(t for t in _TIER_ORDER if t in config.tiers)
    traces = {}  # run index -> (trace, seed); shared across tiers (generation is pure)
    for run_index in range(1, config.runs + 1):
        if config.trace_spec is not None:
            seed = config.base_seed + (run_index - 1)
            traces[run_index] = (generate_trace(config.trace_spec, seed), seed)
        else:
            traces[run_index] = (load_trace(config.trace_path), None)
    with tempfile.TemporaryDirectory(prefix="tiersim-stores-") as scratch:
        for tier in tiers:
            records = []
            for run_index in range(1, config.runs + 1):
                if config.store_root is not None:
                    store_dir = Path(config.store_root) / f"{tier.value}-run{run_index}"
                else:
                    store_dir = Path(scratch) / f"{tier.value}-run{run_index}"
                run_trace, seed = traces[run_index]
                records.append(
                    _simulate_run(config, tier, run_index, store_dir, run_trace, seed)
                )
            blocks[tier] = TierBlock(tier=tier, runs=tuple(records))
    meta = {
        "tiers": [t.value for t in tiers],
        "runs": config.runs,
        "base_seed": config.base_seed,
        "trace": (
            {"path": str(config.trace_path)}
            if config.trace_path is not None
            else {
                "duration_min": config.trace_spec.duration_min,
                "sample_interval_ms": config.trace_spec.sample_interval_ms,
                "activity_fraction": config.trace_spec.activity_fraction,
                "fall_count": config.trace_spec.fall_count,
                "fall_duration_samples": config.trace_spec.fall_duration_samples,
            }
        ),
        "node": {
            "t_move": config.t_move,
            "t_fall": config.t_fall,
            "refractory_ms": config.refractory_ms,
            "node_address": config.node_address,
            "window_width": config.window_width,
        },
        "params": {
            "p_listen_mw": config.params.p_listen_mw,
            "p_base_mw": config.params.p_base_mw,
            "e_sample_mws": config.params.e_sample_mws,
            "e_tx_mws": config.params.e_tx_mws,
        },
    }
    return ExperimentResult(meta=meta, blocks=blocks)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------
def result_to_json(result: ExperimentResult) -> str:
    tiers = {}
    for tier in result.tiers():
        block = result.blocks[tier]
        tiers[tier.value] = {
            "runs": [
                {
                    "run": rec.run,
                    "seed": rec.seed,
                    "duration_ms": rec.log_counts["duration_ms"],
                    "n_samples": rec.log_counts["n_samples"],
                    "n_tx_data": rec.log_counts["n_tx_data"],
                    "n_tx_alarm": rec.log_counts["n_tx_alarm"],
                    "total_ws": rec.energy.total_ws,
                    "power_w": rec.energy.power_w,
                    "ws_per_sample": rec.energy.ws_per_sample,
                    "send_rate_ms": rec.send_rate_ms,
                    "ingest": {
                        "ok": rec.ingest.ok,
                        "duplicate": rec.ingest.duplicate,
                        "bad": rec.ingest.bad,
                        "unknown": rec.ingest.unknown,
                        "alarms_persisted": rec.ingest.alarms_persisted,
                        "camera_events": rec.ingest.camera_events,
                        "sip_events": rec.ingest.sip_events,
                    },
                }
                for rec in block.runs
            ]
        }
    return json.dumps({"meta": result.meta, "tiers": tiers}, sort_keys=True, indent=2) + "\n"


def result_from_json(text: str) -> ExperimentResult:
    doc = json.loads(text)
    blocks = {}
    for tier_name, block_doc in doc["tiers"].items():
        tier = Tier(tier_name)
        records = []
        for run_doc in block_doc["runs"]:
            n_tx = run_doc["n_tx_data"] + run_doc["n_tx_alarm"]
            energy = EnergyReport(
                total_ws=run_doc["total_ws"],
                power_w=run_doc["power_w"],
                ws_per_sample=run_doc["ws_per_sample"],
                n_tx=n_tx,
                n_samples=run_doc["n_samples"],
                duration_ms=run_doc["duration_ms"],
            )
            ingest = IngestTally(**run_doc["ingest"])
            records.append(
                RunRecord(
                    tier=tier,
                    run=run_doc["run"],
                    seed=run_doc["seed"],
                    log_counts={
                        "duration_ms": run_doc["duration_ms"],
                        "n_samples": run_doc["n_samples"],
                        "n_tx_data": run_doc["n_tx_data"],
                        "n_tx_alarm": run_doc["n_tx_alarm"],
                    },
                    energy=energy,
                    send_rate_ms=run_doc["send_rate_ms"],
                    ingest=ingest,
                )
            )
        blocks[tier] = TierBlock(tier=tier, runs=tuple(records))
    return ExperimentResult(meta=doc["meta"], blocks=blocks)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------
def _num(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else f"{value:.6f}"


def _table_row(label: str, row: TierRow) -> str:
    return (
        f"{label:<9}"
        f"{f'{row.total_ws:.2f} Ws':>14}"
        f"{f'{row.power_w:.4f} W':>12}"
        f"{_num(row.data):>10}"
        f"{f'{row.send_rate_ms:.2f} ms':>12}"
        f"{_num(row.samples):>10}"
    )


def _comparison_lines(comparison: ComparisonReport, arrow: str = "→") -> list:
    lines = []
    for pair in comparison.pairs:
        a = _TIER_SHORT[pair.tier_a]
        b = _TIER_SHORT[pair.tier_b]
        tag = f"{a}{arrow}{b}"
        lines.append(f"power reduction {tag}: {pair.power_reduction_pct:.2f}%")
        lines.append(f"data reduction {tag}: {pair.data_reduction_pct:.2f}%")
        lines.append(
            f"energy per sample {tag}: {pair.ws_per_sample_a:.4f} mWs {arrow} "
            f"{pair.ws_per_sample_b:.4f} mWs (reduction "
            f"{pair.sample_energy_reduction_pct:.2f}%)"
        )
    return lines


def emit_report(result: ExperimentResult, format: str = "table") -> str:
    """Render a result; byte-deterministic for equal results."""
    if format not in ("table", "csv"):
        raise ValueError("format must be 'table' or 'csv'")
    comparison = result.comparison()
    out = []
    if format == "table":
        header = (
            f"{'':<9}{'Total':>14}{'per minute':>12}{'data':>10}{'send rate':>12}{'samples':>10}"
        )
        for tier in result.tiers():
            block = result.blocks[tier]
            out.append(_TIER_TITLE[tier])
            out.append(header)
            for rec in block.runs:
                out.append(_table_row(f"Run{rec.run}", rec.row()))
            out.append(_table_row("max", block.max_row))
            out.append(_table_row("min", block.min_row))
            out.append(_table_row("average", block.average_row))
            out.append("")
        if comparison is not None:
            out.append("Comparison")
            out.extend(_comparison_lines(comparison))
        else:
            out.pop()  # drop the trailing blank line
    else:
        for tier in result.tiers():
            block = result.blocks[tier]
            out.append("tier,row,total_ws,per_minute_w,data,send_rate_ms,samples")
            rows = [(f"Run{rec.run}", rec.row()) for rec in block.runs]
            rows += [("max", block.max_row), ("min", block.min_row), ("average", block.average_row)]
            for label, row in rows:
                out.append(
                    f"{tier.value},{label},{row.total_ws:.6f},{row.power_w:.6f},"
                    f"{_num(row.data)},{row.send_rate_ms:.6f},{_num(row.samples)}"
                )
        if comparison is not None:
            out.append(
                "comparison,pair,power_reduction_pct,data_reduction_pct,"
                "ws_per_sample_a,ws_per_sample_b,sample_energy_reduction_pct"
            )
            for pair in comparison.pairs:
                tag = f"{_TIER_SHORT[pair.tier_a]}->{_TIER_SHORT[pair.tier_b]}"
                out.append(
                    f"comparison,{tag},{pair.power_reduction_pct:.6f},"
                    f"{pair.data_reduction_pct:.6f},{pair.ws_per_sample_a:.6f},"
                    f"{pair.ws_per_sample_b:.6f},{pair.sample_energy_reduction_pct:.6f}"
                )
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Reference verification
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: str
    target: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: measured {self.measured}, target {self.target}"


def _calibration_checks() -> list:
    params = calibrate(REFERENCE_TARGETS)
    checks = []
    # Ten-minute logs make the per-minute target rates integral.
    n_samples = round(REFERENCE_TARGETS.n_tx1 * 10)
    for name, tier, n_tx, target in (
        ("calibration-roundtrip-tier1", Tier.TIER1, n_samples, REFERENCE_TARGETS.p1_w),
        ("calibration-roundtrip-tier2", Tier.TIER2, round(REFERENCE_TARGETS.n_tx2 * 10), REFERENCE_TARGETS.p2_w),
    ):
        log = NodeLog(
            duration_ms=600_000,
            n_samples=n_samples,
            n_tx_data=n_tx,
            n_tx_alarm=0,
            config=NodeConfig(tier=tier),
        )
        power = account(log, params).power_w
        rel = abs(power - target) / target
        checks.append(
            CheckResult(
                name=name,
                passed=rel <= CALIBRATION_REL_TOL,
                measured=f"{power:.12f} W (rel err {rel:.2e})",
                target=f"{target} W to {CALIBRATION_REL_TOL:.0e} relative",
            )
        )
    return checks


def published_aggregate_report(aggregate: dict) -> EnergyReport:
    """EnergyReport carrying published per-tier aggregates verbatim."""
    duration_ms = aggregate["total_ws"] / aggregate["power_w"] * 1000.0
    return EnergyReport(
        total_ws=aggregate["total_ws"],
        power_w=aggregate["power_w"],
        ws_per_sample=aggregate["total_ws"] / aggregate["n_samples"] * 1000.0,
        n_tx=aggregate["n_tx"],
        n_samples=aggregate["n_samples"],
        duration_ms=duration_ms,
    )


def _published_sample_energy_checks() -> list:
    report = compare(
        {
            Tier.TIER1: published_aggregate_report(PUBLISHED_TIER1),
            Tier.TIER2: published_aggregate_report(PUBLISHED_TIER2),
        }
    )
    pair = report.pair(Tier.TIER1, Tier.TIER2)
    checks = []
    rel1 = abs(pair.ws_per_sample_a - SAMPLE_ENERGY_T1_MWS) / SAMPLE_ENERGY_T1_MWS
    checks.append(
        CheckResult(
            "sample-energy-t1-published",
            rel1 <= SAMPLE_ENERGY_T1_REL_TOL,
            f"{pair.ws_per_sample_a:.4f} mWs",
            f"{SAMPLE_ENERGY_T1_MWS} mWs +-{SAMPLE_ENERGY_T1_REL_TOL:.0%}",
        )
    )
    rel2 = abs(pair.ws_per_sample_b - SAMPLE_ENERGY_T2_MWS) / SAMPLE_ENERGY_T2_MWS
    checks.append(
        CheckResult(
            "sample-energy-t2-published",
            rel2 <= SAMPLE_ENERGY_T2_REL_TOL,
            f"{pair.ws_per_sample_b:.4f} mWs",
            f"{SAMPLE_ENERGY_T2_MWS} mWs +-{SAMPLE_ENERGY_T2_REL_TOL:.0%}",
        )
    )
    delta = abs(pair.sample_energy_reduction_pct - SAMPLE_ENERGY_REDUCTION_PCT)
    checks.append(
        CheckResult(
            "sample-energy-reduction-published",
            delta <= SAMPLE_ENERGY_REDUCTION_TOL_PP,
            f"{pair.sample_energy_reduction_pct:.2f}%",
            f"{SAMPLE_ENERGY_REDUCTION_PCT}% +-{SAMPLE_ENERGY_REDUCTION_TOL_PP} pp",
        )
    )
    return checks


def verify_reference(result: ExperimentResult) -> list:
    """Named pass/fail checks for a reference-profile result (tiers 1-3)."""
    for required in (Tier.TIER1, Tier.TIER2, Tier.TIER3):
        if required not in result.blocks:
            raise ComparisonError(f"verification requires {required.value} in the result")

    checks = _calibration_checks()
    comparison = result.comparison()
    pair12 = comparison.pair(Tier.TIER1, Tier.TIER2)
    pair23 = comparison.pair(Tier.TIER2, Tier.TIER3)

    delta = abs(pair12.power_reduction_pct - POWER_REDUCTION_T1_T2_PCT)
    checks.append(
        CheckResult(
            "power-reduction-t1-t2",
            delta <= POWER_REDUCTION_TOL_PP,
            f"{pair12.power_reduction_pct:.2f}%",
            f"{POWER_REDUCTION_T1_T2_PCT}% +-{POWER_REDUCTION_TOL_PP} pp",
        )
    )
    lo, hi = DATA_REDUCTION_T1_T2_RANGE
    checks.append(
        CheckResult(
            "data-reduction-t1-t2",
            lo <= pair12.data_reduction_pct <= hi,
            f"{pair12.data_reduction_pct:.2f}%",
            f"[{lo}%, {hi}%]",
        )
    )

    tier3 = result.blocks[Tier.TIER3]
    alarm_counts = [rec.log_counts["n_tx_alarm"] for rec in tier3.runs]
    checks.append(
        CheckResult(
            "tier3-alarm-count",
            all(count == TIER3_ALARM_COUNT for count in alarm_counts),
            f"per-run alarms {alarm_counts}",
            f"exactly {TIER3_ALARM_COUNT} per run",
        )
    )
    checks.append(
        CheckResult(
            "data-reduction-t2-t3",
            pair23.data_reduction_pct >= DATA_REDUCTION_T2_T3_MIN_PCT,
            f"{pair23.data_reduction_pct:.2f}%",
            f">= {DATA_REDUCTION_T2_T3_MIN_PCT}%",
        )
    )

    p3 = tier3.average_row.power_w
    rel3 = abs(p3 - TIER3_POWER_W) / TIER3_POWER_W
    checks.append(
        CheckResult(
            "tier3-power",
            rel3 <= TIER3_POWER_REL_TOL,
            f"{p3:.4f} W (rel err {rel3:.2%})",
            f"{TIER3_POWER_W} W +-{TIER3_POWER_REL_TOL:.0%}",
        )
    )

    ws1 = result.blocks[Tier.TIER1].average_row.ws_per_sample
    rel1 = abs(ws1 - SAMPLE_ENERGY_T1_MWS) / SAMPLE_ENERGY_T1_MWS
    checks.append(
        CheckResult(
            "sample-energy-t1-simulated",
            rel1 <= SAMPLE_ENERGY_T1_REL_TOL,
            f"{ws1:.4f} mWs",
            f"{SAMPLE_ENERGY_T1_MWS} mWs +-{SAMPLE_ENERGY_T1_REL_TOL:.0%}",
        )
    )
    checks.extend(_published_sample_energy_checks())

    conservation_ok = True
    conservation_notes = []
    pairing_ok = True
    pairing_notes = []
    for tier in result.tiers():
        for rec in result.blocks[tier].runs:
            n_tx = rec.log_counts["n_tx_data"] + rec.log_counts["n_tx_alarm"]
            if rec.ingest.ok != n_tx:
                conservation_ok = False
                conservation_notes.append(
                    f"{tier.value} run {rec.run}: {rec.ingest.ok} acks vs {n_tx} tx"
                )
            alarms = rec.log_counts["n_tx_alarm"]
            if not (
                rec.ingest.alarms_persisted == alarms
                and rec.ingest.camera_events == alarms
                and rec.ingest.sip_events == alarms
            ):
                pairing_ok = False
                pairing_notes.append(
                    f"{tier.value} run {rec.run}: alarms {alarms}, persisted "
                    f"{rec.ingest.alarms_persisted}, camera {rec.ingest.camera_events}, "
                    f"sip {rec.ingest.sip_events}"
                )
    checks.append(
        CheckResult(
            "ingestion-conservation",
            conservation_ok,
            "all runs conserve" if conservation_ok else "; ".join(conservation_notes),
            "OK acks == transmissions for every run",
        )
    )
    checks.append(
        CheckResult(
            "alarm-notification-pairing",
            pairing_ok,
            "all runs paired" if pairing_ok else "; ".join(pairing_notes),
            "one camera and one SIP event per persisted alarm",
        )
    )
    return checks
