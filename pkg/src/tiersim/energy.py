"""Affine per-operation energy model: accounting, calibration, comparison.

The model charges a run

    total_Ws = duration_s * (p_listen + p_base) / 1000
             + n_samples * e_sample / 1000
             + n_tx * e_tx / 1000

i.e. a constant radio-listen + CPU floor plus linear per-sample and
per-transmission costs.  This is the simplest form that exactly matches the
reference tier-1/tier-2 measurements while exposing the idle-listening floor
that limits what an alarm-only tier can save: the radio never sleeps, so a
node that transmits almost nothing still pays the full listen power.

``calibrate`` inverts the model against four measured targets (two mean
powers and two per-minute transmission rates) under a communication-share
assumption: ``comm_share`` of the tier-1 budget is radio (transmit energy
plus listening), the rest is split between per-sample processing cost and
static CPU power by ``cpu_split``.  The split does not affect any per-run
total because the sampling rate is the same across tiers.

Params file format: ``key=value`` lines in the order e_tx_mws, p_listen_mw,
p_base_mw, e_sample_mws.  A ``paper_calibrated`` preset produced from the
reference targets ships with the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import CalibrationError, ComparisonError, IoError, ParseError
from .node import NodeLog, Tier

_TIER_ORDER = (Tier.TIER1, Tier.TIER2, Tier.TIER3, Tier.NEURAL)
_PARAM_KEYS = ("e_tx_mws", "p_listen_mw", "p_base_mw", "e_sample_mws")


@dataclass(frozen=True)
class EnergyParams:
    """Calibrated per-operation energy constants."""

    p_listen_mw: float   # radio idle/listen power
    p_base_mw: float     # static CPU power
    e_sample_mws: float  # energy per sense+process cycle
    e_tx_mws: float      # energy per radio transmission

    def __post_init__(self):
        for name in ("p_listen_mw", "p_base_mw", "e_sample_mws", "e_tx_mws"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def floor_w(self) -> float:
        """Lower bound on mean power: the always-on listen + CPU drain."""
        return (self.p_listen_mw + self.p_base_mw) / 1000.0


@dataclass(frozen=True)
class EnergyReport:
    """Accounted totals for one run.

    Counts are integers for a single accounted run; comparison contexts may
    carry run averages, hence the float typing.
    """

    total_ws: float
    power_w: float
    ws_per_sample: float  # mWs per sample
    n_tx: float
    n_samples: float
    duration_ms: float


@dataclass(frozen=True)
class CalibrationTargets:
    """Measured anchors the model is solved against.

    ``p1_w``/``p2_w`` are tier-1/tier-2 mean powers in W, ``n_tx1``/``n_tx2``
    the matching transmissions per minute.
    """

    p1_w: float
    p2_w: float
    n_tx1: float
    n_tx2: float
    comm_share: float = 0.8
    cpu_split: float = 0.5


#: Published tier-1/tier-2 averages of the reference testbed.
REFERENCE_TARGETS = CalibrationTargets(p1_w=0.1834, p2_w=0.1601, n_tx1=746.8, n_tx2=37.2)


def account(log: NodeLog, params: EnergyParams) -> EnergyReport:
    """Charge a node log against the model; a zero-duration log costs nothing."""
    duration_s = log.duration_ms / 1000.0
    n_tx = log.n_tx_data + log.n_tx_alarm
    total_ws = (
        duration_s * (params.p_listen_mw + params.p_base_mw) / 1000.0
        + log.n_samples * params.e_sample_mws / 1000.0
        + n_tx * params.e_tx_mws / 1000.0
    )
    power_w = total_ws / duration_s if duration_s else 0.0
    ws_per_sample = total_ws / log.n_samples * 1000.0 if log.n_samples else 0.0
    return EnergyReport(
        total_ws=total_ws,
        power_w=power_w,
        ws_per_sample=ws_per_sample,
        n_tx=n_tx,
        n_samples=log.n_samples,
        duration_ms=log.duration_ms,
    )


def calibrate(targets: CalibrationTargets) -> EnergyParams:
    """Solve the model constants from the targets.

    The solution is unique: the power delta between the two tiers is carried
    entirely by the transmission-rate delta, which pins e_tx; the listen
    power absorbs the rest of the communication share; the non-communication
    budget is split between e_sample and p_base by ``cpu_split``.
    """
    t = targets
    if not t.p1_w > t.p2_w:
        raise CalibrationError("p1_w must exceed p2_w")
    if not t.n_tx1 > t.n_tx2 >= 0:
        raise CalibrationError("n_tx1 must exceed n_tx2 (both >= 0)")
    if not 0.0 < t.comm_share < 1.0:
        raise CalibrationError("comm_share must lie strictly between 0 and 1")
    if not 0.0 <= t.cpu_split <= 1.0:
        raise CalibrationError("cpu_split must lie in [0, 1]")

    e_tx = 60.0 * (t.p1_w - t.p2_w) / (t.n_tx1 - t.n_tx2) * 1000.0
    p_listen = t.comm_share * t.p1_w * 1000.0 - t.n_tx1 * e_tx / 60.0
    if p_listen < 0:
        raise CalibrationError(
            "transmit energy exceeds the communication budget; "
            "raise comm_share or check the targets"
        )
    budget = 60.0 * t.p1_w * (1.0 - t.comm_share)  # Ws per minute, non-communication
    e_sample = 1000.0 * t.cpu_split * budget / t.n_tx1
    p_base = 1000.0 * (1.0 - t.cpu_split) * budget / 60.0
    return EnergyParams(
        p_listen_mw=p_listen,
        p_base_mw=p_base,
        e_sample_mws=e_sample,
        e_tx_mws=e_tx,
    )


def reference_params() -> EnergyParams:
    """The model calibrated against :data:`REFERENCE_TARGETS`."""
    return calibrate(REFERENCE_TARGETS)


@dataclass(frozen=True)
class TierPairComparison:
    tier_a: Tier
    tier_b: Tier
    power_reduction_pct: float
    data_reduction_pct: float
    tx_per_min_a: float
    tx_per_min_b: float
    ws_per_sample_a: float
    ws_per_sample_b: float
    sample_energy_reduction_pct: float


@dataclass(frozen=True)
class ComparisonReport:
    pairs: tuple

    def pair(self, tier_a: Tier, tier_b: Tier) -> TierPairComparison:
        for p in self.pairs:
            if p.tier_a is tier_a and p.tier_b is tier_b:
                return p
        raise ComparisonError(f"no comparison for {tier_a.value} vs {tier_b.value}")


def _tx_per_min(report: EnergyReport) -> float:
    minutes = report.duration_ms / 60_000.0
    return report.n_tx / minutes if minutes else 0.0


def compare(reports: dict) -> ComparisonReport:
    """Pairwise reduction statistics over tier reports.

    Requires at least tiers 1 and 2; emits one row per ordered tier pair in
    canonical tier order.
    """
    for required in (Tier.TIER1, Tier.TIER2):
        if required not in reports:
            raise ComparisonError(f"missing report for {required.value}")
    present = [t for t in _TIER_ORDER if t in reports]
    pairs = []
    for i, tier_a in enumerate(present):
        for tier_b in present[i + 1 :]:
            a, b = reports[tier_a], reports[tier_b]
            rate_a, rate_b = _tx_per_min(a), _tx_per_min(b)
            pairs.append(
                TierPairComparison(
                    tier_a=tier_a,
                    tier_b=tier_b,
                    power_reduction_pct=100.0 * (1.0 - b.power_w / a.power_w),
                    data_reduction_pct=100.0 * (1.0 - rate_b / rate_a) if rate_a else 0.0,
                    tx_per_min_a=rate_a,
                    tx_per_min_b=rate_b,
                    ws_per_sample_a=a.ws_per_sample,
                    ws_per_sample_b=b.ws_per_sample,
                    sample_energy_reduction_pct=(
                        100.0 * (1.0 - b.ws_per_sample / a.ws_per_sample)
                        if a.ws_per_sample
                        else 0.0
                    ),
                )
            )
    return ComparisonReport(tuple(pairs))


# ---------------------------------------------------------------------------
# Params files
# ---------------------------------------------------------------------------
def save_params(params: EnergyParams, path) -> None:
    lines = [f"{key}={getattr(params, key)!r}" for key in _PARAM_KEYS]
    try:
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def _parse_params(text: str) -> EnergyParams:
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or key not in _PARAM_KEYS:
            raise ParseError(line_no, f"expected one of {_PARAM_KEYS}, got {line!r}")
        try:
            values[key] = float(value)
        except ValueError as exc:
            raise ParseError(line_no, f"bad value for {key}: {exc}") from exc
    missing = [key for key in _PARAM_KEYS if key not in values]
    if missing:
        raise ParseError(1, f"missing keys: {', '.join(missing)}")
    return EnergyParams(
        p_listen_mw=values["p_listen_mw"],
        p_base_mw=values["p_base_mw"],
        e_sample_mws=values["e_sample_mws"],
        e_tx_mws=values["e_tx_mws"],
    )


def load_params(path) -> EnergyParams:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return _parse_params(text)


def resolve_params(source: str) -> EnergyParams:
    """Load params from a file path, or a named preset (``paper``)."""
    if source in ("paper", "paper_calibrated"):
        text = resources.files("tiersim").joinpath("presets/paper_calibrated.params").read_text(
            encoding="utf-8"
        )
        return _parse_params(text)
    return load_params(source)
