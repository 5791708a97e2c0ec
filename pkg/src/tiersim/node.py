"""Per-sample decision logic of a body-worn sensor node.

Four policies, from no on-node intelligence to a learned classifier:

* TIER1 transmits every measurement.
* TIER2 transmits a measurement iff its squared magnitude reaches the
  movement threshold, else stays silent.
* TIER3 transmits a single alarm when the squared magnitude reaches the fall
  threshold, debounced by a refractory window so one fall yields one alarm.
* NEURAL buffers squared magnitudes into fixed-width windows and lets a
  trained net decide per window; only FALL-class windows transmit (the class
  index is the alarm payload).

The radio link is assumed lossless and collision-free; there is no duty
cycling, packet loss, or heartbeat.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import classify
from .errors import OrderError
from .trace import AccelSample, Trace, magnitude_sq  # noqa: F401  (re-exported op)


class Tier(Enum):
    TIER1 = "tier1"
    TIER2 = "tier2"
    TIER3 = "tier3"
    NEURAL = "neural"


class DecisionKind(Enum):
    TRANSMIT_DATA = "TRANSMIT_DATA"
    TRANSMIT_ALARM = "TRANSMIT_ALARM"
    SILENT = "SILENT"


#: Alarm payload code of a threshold-detected fall (TIER3).
ALARM_CODE_FALL = 1


@dataclass(frozen=True, slots=True)
class Decision:
    kind: DecisionKind
    payload: object = None  # triggering sample for data, alarm code for alarms

    def __post_init__(self):
        if self.kind is DecisionKind.TRANSMIT_DATA and not isinstance(self.payload, AccelSample):
            raise ValueError("TRANSMIT_DATA payload must be the triggering sample")
        if self.kind is DecisionKind.TRANSMIT_ALARM and not isinstance(self.payload, int):
            raise ValueError("TRANSMIT_ALARM payload must be an alarm code")
        if self.kind is DecisionKind.SILENT and self.payload is not None:
            raise ValueError("SILENT decisions carry no payload")


@dataclass(frozen=True)
class NodeConfig:
    """Tier selection plus thresholds (g^2) and alarm debounce.

    ``classifier`` and ``window_width`` are required for the NEURAL tier and
    ignored otherwise.
    """

    tier: Tier
    t_move: float = 2.0
    t_fall: float = 6.0
    refractory_ms: int = 2000
    node_address: int = 0x1
    classifier: classify.MlpModel | None = None
    window_width: int | None = None

    def __post_init__(self):
        if not self.t_move > 0:
            raise ValueError("t_move must be > 0")
        if self.t_fall < self.t_move:
            raise ValueError("t_fall must be >= t_move")
        if self.refractory_ms < 0:
            raise ValueError("refractory_ms must be >= 0")
        if not 0 <= self.node_address < 2**64:
            raise ValueError("node_address must fit in 64 bits")
        if self.tier is Tier.NEURAL:
            if self.classifier is None or self.window_width is None:
                raise ValueError("NEURAL tier requires a classifier and a window width")
            if self.classifier.n_inputs != self.window_width:
                raise ValueError("classifier input width does not match window_width")


@dataclass(frozen=True, slots=True)
class NodeState:
    last_t_ms: int | None = None
    last_alarm_t: int | None = None
    window: tuple = ()  # buffered squared magnitudes (NEURAL only)


@dataclass(frozen=True)
class NodeLog:
    """Counters of one simulated run, the input to energy accounting."""

    duration_ms: int
    n_samples: int
    n_tx_data: int
    n_tx_alarm: int
    config: NodeConfig
    decisions: tuple | None = None

    def __post_init__(self):
        if self.n_tx_data + self.n_tx_alarm > self.n_samples:
            raise ValueError("transmission counters exceed the sample count")

    @property
    def n_tx(self) -> int:
        return self.n_tx_data + self.n_tx_alarm


_SILENT = Decision(DecisionKind.SILENT)


def decide(config: NodeConfig, state: NodeState, sample: AccelSample):
    """Advance the node by one sample; returns ``(new_state, decision)``."""
    if state.last_t_ms is not None and sample.t_ms <= state.last_t_ms:
        raise OrderError(
            f"sample at t_ms={sample.t_ms} is not after t_ms={state.last_t_ms}"
        )
    tier = config.tier
    last_alarm = state.last_alarm_t
    window = state.window
    decision = _SILENT

    if tier is Tier.TIER1:
        decision = Decision(DecisionKind.TRANSMIT_DATA, sample)
    elif tier is Tier.TIER2:
        if magnitude_sq(sample) >= config.t_move:
            decision = Decision(DecisionKind.TRANSMIT_DATA, sample)
    elif tier is Tier.TIER3:
        if magnitude_sq(sample) >= config.t_fall and (
            last_alarm is None or sample.t_ms - last_alarm >= config.refractory_ms
        ):
            decision = Decision(DecisionKind.TRANSMIT_ALARM, ALARM_CODE_FALL)
            last_alarm = sample.t_ms
    else:  # NEURAL
        window = window + (magnitude_sq(sample),)
        if len(window) == config.window_width:
            scores = classify.mlp_forward(config.classifier, np.array(window))
            window = ()
            cls = int(np.argmax(scores))
            if cls == classify.FALL_CLASS:
                decision = Decision(DecisionKind.TRANSMIT_ALARM, cls)

    return NodeState(sample.t_ms, last_alarm, window), decision


def iter_decisions(trace: Trace, config: NodeConfig):
    """Yield ``(sample, decision)`` pairs for a whole trace."""
    state = NodeState()
    for sample in trace.samples:
        state, decision = decide(config, state, sample)
        yield sample, decision


def run_node(
    trace: Trace,
    config: NodeConfig,
    on_decision=None,
    record_decisions: bool = False,
) -> NodeLog:
    """Fold :func:`decide` over a trace and tally the decision kinds.

    ``on_decision(sample, decision)`` is invoked per sample when given, which
    lets callers feed transmissions into an ingestion pipeline in the same
    pass that produces the log.
    """
    n_samples = 0
    n_tx_data = 0
    n_tx_alarm = 0
    recorded = [] if record_decisions else None
    for sample, decision in iter_decisions(trace, config):
        n_samples += 1
        if decision.kind is DecisionKind.TRANSMIT_DATA:
            n_tx_data += 1
        elif decision.kind is DecisionKind.TRANSMIT_ALARM:
            n_tx_alarm += 1
        if on_decision is not None:
            on_decision(sample, decision)
        if recorded is not None:
            recorded.append(decision)
    return NodeLog(
        duration_ms=trace.duration_ms,
        n_samples=n_samples,
        n_tx_data=n_tx_data,
        n_tx_alarm=n_tx_alarm,
        config=config,
        decisions=tuple(recorded) if recorded is not None else None,
    )
