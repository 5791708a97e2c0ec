"""Base-station edge: radio frame codec, wire-to-line conversion, ingestion
with acknowledgements, alarm notification stubs, and a loopback self-test.

Frame layout (big-endian header): 8-byte node address, 4-byte sequence
number, 8-byte timestamp in ms, 1 kind byte (0x01 DATA, 0x02 ALARM), then
the payload: three little-endian IEEE-754 float32 axis values for DATA
(33 bytes total) or a big-endian uint16 alarm code for ALARM (23 bytes).

Line protocol (one record per line, UTF-8):

    node=<16 hex> seq=<u32> t_ms=<u64> kind=DATA x=<f> y=<f> z=<f>
    node=<16 hex> seq=<u32> t_ms=<u64> kind=ALARM code=<u16>

with reals printed to 6 decimals.  Acks: ``OK``, ``OK_DUPLICATE``,
``BAD_REQUEST``, ``UNKNOWN_NODE``.  An ack is only returned after the store
append has been flushed, so a crash between append and ack can duplicate a
record but never lose one; duplicates are absorbed by at-most-once
persistence per (node, seq).

Camera and SIP control are stubs: an alarm appends a snapshot-request event
and then a call-initiation event to the notification log, targeting the
camera resolved through node -> person -> room -> camera.
"""

from __future__ import annotations

import re
import struct
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from enum import Enum
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .errors import FrameError
from .store import Store

FRAME_KIND_DATA = 0x01
FRAME_KIND_ALARM = 0x02
DATA_FRAME_LEN = 33
ALARM_FRAME_LEN = 23

ACK_OK = "OK"
ACK_DUPLICATE = "OK_DUPLICATE"
ACK_BAD_REQUEST = "BAD_REQUEST"
ACK_UNKNOWN_NODE = "UNKNOWN_NODE"

DEFAULT_PORT = 8080
SELF_TEST_TIMEOUT_S = 5.0
#: Reserved loopback address the server registers for self-tests.
SELF_TEST_ADDRESS = 0xFFFFFFFFFFFFFFFF

_HEADER = struct.Struct(">QIQB")
_DATA_PAYLOAD = struct.Struct("<fff")
_ALARM_PAYLOAD = struct.Struct(">H")


def _as_f32(value: float) -> float:
    return _DATA_PAYLOAD.unpack(_DATA_PAYLOAD.pack(value, 0.0, 0.0))[0]


@dataclass(frozen=True)
class RadioFrame:
    """One over-the-air packet.  DATA payloads are coerced to float32 so the
    codec laws hold exactly for every constructible frame."""

    node_address: int
    seq: int
    t_ms: int
    kind: int
    payload: object  # (x, y, z) in g for DATA, alarm code for ALARM

    def __post_init__(self):
        if not 0 <= self.node_address < 2**64:
            raise FrameError("node_address must fit in 64 bits")
        if not 0 <= self.seq < 2**32:
            raise FrameError("seq must fit in 32 bits")
        if not 0 <= self.t_ms < 2**64:
            raise FrameError("t_ms must fit in 64 bits")
        if self.kind == FRAME_KIND_DATA:
            try:
                x, y, z = self.payload
            except (TypeError, ValueError):
                raise FrameError("DATA payload must be three axis values") from None
            object.__setattr__(self, "payload", (_as_f32(x), _as_f32(y), _as_f32(z)))
        elif self.kind == FRAME_KIND_ALARM:
            if not isinstance(self.payload, int) or not 0 <= self.payload < 2**16:
                raise FrameError("ALARM payload must be a 16-bit code")
        else:
            raise FrameError(f"unknown frame kind {self.kind:#x}")


def data_frame(node_address: int, seq: int, t_ms: int, x: float, y: float, z: float) -> RadioFrame:
    return RadioFrame(node_address, seq, t_ms, FRAME_KIND_DATA, (x, y, z))


def alarm_frame(node_address: int, seq: int, t_ms: int, code: int) -> RadioFrame:
    return RadioFrame(node_address, seq, t_ms, FRAME_KIND_ALARM, code)


def encode_frame(frame: RadioFrame) -> bytes:
    header = _HEADER.pack(frame.node_address, frame.seq, frame.t_ms, frame.kind)
    if frame.kind == FRAME_KIND_DATA:
        return header + _DATA_PAYLOAD.pack(*frame.payload)
    return header + _ALARM_PAYLOAD.pack(frame.payload)


def parse_frame(buf: bytes) -> RadioFrame:
    if len(buf) < _HEADER.size + 1:
        raise FrameError(f"frame too short ({len(buf)} bytes)")
    node_address, seq, t_ms, kind = _HEADER.unpack_from(buf)
    if kind == FRAME_KIND_DATA:
        if len(buf) != DATA_FRAME_LEN:
            raise FrameError(f"DATA frame must be {DATA_FRAME_LEN} bytes, got {len(buf)}")
        payload = _DATA_PAYLOAD.unpack_from(buf, _HEADER.size)
    elif kind == FRAME_KIND_ALARM:
        if len(buf) != ALARM_FRAME_LEN:
            raise FrameError(f"ALARM frame must be {ALARM_FRAME_LEN} bytes, got {len(buf)}")
        payload = _ALARM_PAYLOAD.unpack_from(buf, _HEADER.size)[0]
    else:
        raise FrameError(f"unknown frame kind {kind:#x}")
    return RadioFrame(node_address, seq, t_ms, kind, payload)


# ---------------------------------------------------------------------------
# Line protocol
# ---------------------------------------------------------------------------
_FLOAT = r"-?\d+\.\d{6}"
_DATA_LINE = re.compile(
    rf"^node=([0-9a-f]{{16}}) seq=(\d+) t_ms=(\d+) kind=DATA "
    rf"x=({_FLOAT}) y=({_FLOAT}) z=({_FLOAT})$"
)
_ALARM_LINE = re.compile(
    r"^node=([0-9a-f]{16}) seq=(\d+) t_ms=(\d+) kind=ALARM code=(\d+)$"
)


@dataclass(frozen=True)
class IngestRecord:
    node: str  # 16 lowercase hex characters
    seq: int
    t_ms: int
    kind: str  # DATA | ALARM
    x: float | None = None
    y: float | None = None
    z: float | None = None
    code: int | None = None

    def to_line(self) -> str:
        head = f"node={self.node} seq={self.seq} t_ms={self.t_ms}"
        if self.kind == "DATA":
            return f"{head} kind=DATA x={self.x:.6f} y={self.y:.6f} z={self.z:.6f}"
        return f"{head} kind=ALARM code={self.code}"

    @classmethod
    def parse_line(cls, line: str) -> "IngestRecord":
        m = _DATA_LINE.match(line)
        if m:
            node, seq, t_ms = m.group(1), int(m.group(2)), int(m.group(3))
            if seq >= 2**32 or t_ms >= 2**64:
                raise ValueError("seq/t_ms out of range")
            return cls(
                node=node,
                seq=seq,
                t_ms=t_ms,
                kind="DATA",
                x=float(m.group(4)),
                y=float(m.group(5)),
                z=float(m.group(6)),
            )
        m = _ALARM_LINE.match(line)
        if m:
            node, seq, t_ms, code = m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4))
            if seq >= 2**32 or t_ms >= 2**64 or code >= 2**16:
                raise ValueError("seq/t_ms/code out of range")
            return cls(node=node, seq=seq, t_ms=t_ms, kind="ALARM", code=code)
        raise ValueError(f"unrecognised record line: {line!r}")


def forward(frame: RadioFrame) -> IngestRecord:
    """Convert a parsed radio frame into an ingestion record (lossless)."""
    node = f"{frame.node_address:016x}"
    if frame.kind == FRAME_KIND_DATA:
        x, y, z = frame.payload
        return IngestRecord(node=node, seq=frame.seq, t_ms=frame.t_ms, kind="DATA", x=x, y=y, z=z)
    return IngestRecord(node=node, seq=frame.seq, t_ms=frame.t_ms, kind="ALARM", code=frame.payload)


# ---------------------------------------------------------------------------
# Notifications
# ---------------------------------------------------------------------------
class NotificationKind(Enum):
    CAMERA_SNAPSHOT_REQUESTED = "CAMERA_SNAPSHOT_REQUESTED"
    SIP_CALL_INITIATED = "SIP_CALL_INITIATED"


UNRESOLVED_TARGET = "UNRESOLVED"


@dataclass(frozen=True)
class NotificationEvent:
    t_ms: int
    kind: NotificationKind
    target: str


class NotificationLog:
    """Ordered record of stub camera/SIP actions."""

    def __init__(self):
        self.events = []

    def append(self, event: NotificationEvent) -> None:
        self.events.append(event)

    def count(self, kind: NotificationKind) -> int:
        return sum(1 for e in self.events if e.kind is kind)


def notify(record: IngestRecord, store: Store, log: NotificationLog) -> list:
    """Dispatch the two stub notifications for one alarm record.

    The camera is resolved through node -> person -> room -> camera; an
    incomplete chain yields UNRESOLVED targets rather than a failure.
    """
    if record.kind != "ALARM":
        raise ValueError("notify requires an ALARM record")
    targets = store.resolve_alarm_targets(record.node)
    if targets is not None and targets.camera_id is not None:
        target = f"camera:{targets.camera_id}"
    else:
        target = UNRESOLVED_TARGET
    events = [
        NotificationEvent(record.t_ms, NotificationKind.CAMERA_SNAPSHOT_REQUESTED, target),
        NotificationEvent(record.t_ms, NotificationKind.SIP_CALL_INITIATED, target),
    ]
    for event in events:
        log.append(event)
    return events


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------
class Ingestor:
    """Accepts record lines, persists them, acknowledges, and notifies.

    Duplicate suppression is keyed on (node, seq) and persisted in a sidecar
    log inside the store directory, so at-most-once holds across restarts.
    The measurement is appended and flushed before the seq mark; the marks
    themselves are buffered until close.  A crash can therefore only make an
    unacknowledged record's retry a duplicate measurement, never a lost one.
    """

    def __init__(self, store: Store, risk_threshold: float = 2.0, notification_log=None):
        self.store = store
        self.risk_threshold = risk_threshold
        self.notifications = notification_log if notification_log is not None else NotificationLog()
        self._lock = threading.Lock()
        self.n_ok = 0
        self.n_duplicate = 0
        self.n_bad = 0
        self.n_unknown = 0
        self.n_alarms_persisted = 0
        self._seen = set()
        self._seq_path = store.root / "ingest_seqs.log"
        if self._seq_path.exists():
            for line in self._seq_path.read_text(encoding="utf-8").splitlines():
                node, _, seq = line.partition(" ")
                if seq:
                    self._seen.add((node, int(seq)))
        self._seq_file = open(self._seq_path, "a", encoding="utf-8", newline="\n")

    def close(self) -> None:
        self._seq_file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def handle_post(self, line: str) -> str:
        try:
            record = IngestRecord.parse_line(line)
        except ValueError:
            with self._lock:
                self.n_bad += 1
            return ACK_BAD_REQUEST
        with self._lock:
            if not self.store.node_exists(record.node):
                self.n_unknown += 1
                return ACK_UNKNOWN_NODE
            key = (record.node, record.seq)
            if key in self._seen:
                self.n_duplicate += 1
                return ACK_DUPLICATE
            if record.kind == "DATA":
                values = [record.x, record.y, record.z]
                risk = (
                    record.x * record.x + record.y * record.y + record.z * record.z
                    >= self.risk_threshold
                )
            else:
                values = [float(record.code)]
                risk = True
            self.store.insert_measurement(record.node, record.t_ms, values, risk)
            self._seq_file.write(f"{record.node} {record.seq}\n")
            self._seen.add(key)
            if record.kind == "ALARM":
                self.n_alarms_persisted += 1
                notify(record, self.store, self.notifications)
            self.n_ok += 1
            return ACK_OK


# ---------------------------------------------------------------------------
# HTTP endpoint
# ---------------------------------------------------------------------------
class _IngestHandler(BaseHTTPRequestHandler):
    server_version = "tiersim-station/0.1"

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        body = self.rfile.read(length).decode("utf-8", errors="replace").strip("\n")
        ack = self.server.ingestor.handle_post(body)
        payload = ack.encode("ascii")
        self.send_response(200)
        self.send_header("Content-Type", "text/plain; charset=utf-8")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, fmt, *args):  # keep the endpoint quiet
        pass


class IngestServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, store: Store, port: int = DEFAULT_PORT, risk_threshold: float = 2.0,
                 host: str = "127.0.0.1"):
        super().__init__((host, port), _IngestHandler)
        self.store = store
        _register_self_test_node(store)
        self.ingestor = Ingestor(store, risk_threshold=risk_threshold)

    def close(self) -> None:
        self.ingestor.close()
        self.server_close()


def _register_self_test_node(store: Store) -> None:
    type_id = None
    # Reuse an existing selftest type if the store already has one.
    for row in store.iter_rows("SensorTypes"):
        if row["description"] == "selftest":
            type_id = row["id"]
            break
    if type_id is None:
        type_id = store.upsert_entity("SensorTypes", {"description": "selftest"})
    store.upsert_entity(
        "SensorNodes",
        {
            "ieee_address": f"{SELF_TEST_ADDRESS:016x}",
            "name": "selftest-loopback",
            "type_id": type_id,
        },
    )


def self_test(port: int, host: str = "127.0.0.1", timeout_s: float = SELF_TEST_TIMEOUT_S) -> str:
    """Post a loopback record to the local endpoint.

    Returns ``"SUCCESS"`` iff a positive ack (OK, or OK_DUPLICATE from an
    earlier test record) arrives within the timeout, else ``"FAILED"``.
    """
    seq = time.time_ns() & 0xFFFFFFFF
    record = IngestRecord(
        node=f"{SELF_TEST_ADDRESS:016x}",
        seq=seq,
        t_ms=time.time_ns() // 1_000_000,
        kind="DATA",
        x=0.0,
        y=0.0,
        z=1.0,
    )
    request = urllib.request.Request(
        f"http://{host}:{port}/ingest",
        data=record.to_line().encode("utf-8"),
        headers={"Content-Type": "text/plain; charset=utf-8"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(request, timeout=timeout_s) as response:
            ack = response.read().decode("utf-8").strip()
    except (urllib.error.URLError, OSError, TimeoutError):
        return "FAILED"
    return "SUCCESS" if ack in (ACK_OK, ACK_DUPLICATE) else "FAILED"
