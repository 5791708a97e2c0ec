"""File-backed persistence for the sensor/person/room/camera schema.

Nine entities with the dependency rules of a relational design: measurements
cannot exist without a node, data values without a measurement, images
without a camera, nodes without a type.  Timestamps are stored but never
used as keys (they are not unique).  A many-to-many person/room link lives
in its own join entity.

Storage engine: one append-only log file per entity plus an in-memory index
rebuilt on open, with a MANIFEST recording the schema version.  Ids come
from per-entity monotone counters persisted implicitly in the logs.  A
measurement's data rows are appended and flushed *before* its own row, so
the measurement row acts as the commit record: on reopen, data rows without
a parent (a torn write) are dropped, and a measurement therefore either
exists with all its values or not at all.

Log line format: space-separated ``key=value`` tokens, values
percent-encoded; binary payloads are base64.  Writes are serialized by a
lock; readers see the state as of the last completed write.
"""

from __future__ import annotations

import base64
import csv
import io
import threading
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote, unquote

from .errors import FormatError, IntegrityError, IoError, ValidationError

SCHEMA_VERSION = 1

# Column types: int, float, str<limit>, bool, bytes, num (int or float).
# fk entries name the referenced entity; optional fks may be absent.
_SCHEMAS = {
    "SensorTypes": (
        ("id", "int", None),
        ("description", "str", 64),
    ),
    "SensorNodes": (
        ("id", "int", None),
        ("ieee_address", "str", 64),
        ("name", "str", 64),
        ("type_id", "fk:SensorTypes", None),
        ("person_id", "fk?:Persons", None),
    ),
    "SensorMeasurements": (
        ("id", "int", None),
        ("timestamp", "num", None),
        ("risk", "bool", None),
        ("node_id", "fk:SensorNodes", None),
    ),
    "SensorData": (
        ("id", "int", None),
        ("value", "float", None),
        ("measurement_id", "fk:SensorMeasurements", None),
    ),
    "Persons": (
        ("id", "int", None),
        ("first_name", "str", 64),
        ("last_name", "str", 64),
    ),
    "Rooms": (
        ("id", "int", None),
        ("name", "str", 64),
    ),
    "PersonRoom": (
        ("id", "int", None),
        ("person_id", "fk:Persons", None),
        ("room_id", "fk:Rooms", None),
    ),
    "Cameras": (
        ("id", "int", None),
        ("name", "str", 64),
        ("ip", "str", 16),
        ("url", "str", 128),
        ("room_id", "fk?:Rooms", None),
    ),
    "CameraImages": (
        ("id", "int", None),
        ("timestamp", "num", None),
        ("image_data", "bytes", None),
        ("camera_id", "fk:Cameras", None),
    ),
}

# Replay order respects foreign-key dependencies.
_REPLAY_ORDER = (
    "SensorTypes",
    "Persons",
    "Rooms",
    "PersonRoom",
    "SensorNodes",
    "Cameras",
    "SensorMeasurements",
    "SensorData",
    "CameraImages",
)

ENTITY_KINDS = tuple(_SCHEMAS)


@dataclass(frozen=True)
class MeasurementView:
    id: int
    timestamp: float
    risk: bool
    values: tuple


@dataclass(frozen=True)
class AlarmTargets:
    person_id: int | None
    room_id: int | None
    camera_id: int | None


def _encode_value(col_type, value) -> str:
    if col_type == "bool":
        return "true" if value else "false"
    if col_type == "bytes":
        return base64.b64encode(value).decode("ascii")
    if col_type.startswith("str"):
        return quote(value, safe="")
    return repr(value)


def _decode_value(col_type, raw: str):
    if col_type == "int" or col_type.startswith("fk"):
        return int(raw)
    if col_type == "float":
        return float(raw)
    if col_type == "num":
        try:
            return int(raw)
        except ValueError:
            return float(raw)
    if col_type == "bool":
        return raw == "true"
    if col_type == "bytes":
        return base64.b64decode(raw.encode("ascii"))
    return unquote(raw)


class Store:
    """Single-writer, crash-tolerant entity store rooted at a directory."""

    def __init__(self, root, durability: str = "flush"):
        if durability not in ("flush", "fsync"):
            raise ValueError("durability must be 'flush' or 'fsync'")
        self.root = Path(root)
        self._durability = durability
        self._lock = threading.Lock()
        self._rows = {kind: {} for kind in _SCHEMAS}
        self._counters = {kind: 0 for kind in _SCHEMAS}
        self._nodes_by_addr = {}
        self._measurements_by_node = {}
        self._values_by_measurement = {}
        self._files = {}
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            self._check_manifest()
            self._replay()
            for kind in _SCHEMAS:
                self._files[kind] = open(self._log_path(kind), "a", encoding="utf-8", newline="\n")
        except OSError as exc:
            raise IoError(str(exc)) from exc

    # -- lifecycle ----------------------------------------------------------
    def close(self) -> None:
        with self._lock:
            for fh in self._files.values():
                fh.close()
            self._files = {}

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    def _log_path(self, kind: str) -> Path:
        return self.root / f"{kind.lower()}.log"

    def _check_manifest(self) -> None:
        manifest = self.root / "MANIFEST"
        if manifest.exists():
            text = manifest.read_text(encoding="utf-8").strip()
            if text != f"schema_version={SCHEMA_VERSION}":
                raise FormatError(f"unsupported store manifest: {text!r}")
        else:
            manifest.write_text(f"schema_version={SCHEMA_VERSION}\n", encoding="utf-8")

    def _replay(self) -> None:
        for kind in _REPLAY_ORDER:
            path = self._log_path(kind)
            if not path.exists():
                continue
            text = path.read_text(encoding="utf-8")
            complete, _, torn = text.rpartition("\n")
            # `torn` is a partial final line from an interrupted append; drop it.
            for line in complete.split("\n") if complete else []:
                if not line:
                    continue
                fields = self._parse_line(kind, line)
                self._counters[kind] = max(self._counters[kind], fields["id"])
                self._apply(kind, fields, check_parent=True)
            del torn

    def _parse_line(self, kind: str, line: str) -> dict:
        tokens = line.split(" ")
        raw = {}
        for token in tokens:
            key, sep, value = token.partition("=")
            if not sep:
                raise FormatError(f"corrupt {kind} log line: {line!r}")
            raw[key] = value
        fields = {}
        for name, col_type, _limit in _SCHEMAS[kind]:
            if name not in raw:
                if col_type.startswith("fk?"):
                    fields[name] = None
                    continue
                raise FormatError(f"corrupt {kind} log line (missing {name}): {line!r}")
            fields[name] = _decode_value(col_type, raw[name])
        return fields

    def _format_line(self, kind: str, fields: dict) -> str:
        parts = []
        for name, col_type, _limit in _SCHEMAS[kind]:
            value = fields.get(name)
            if value is None and col_type.startswith("fk?"):
                continue
            parts.append(f"{name}={_encode_value(col_type, value)}")
        return " ".join(parts)

    def _append(self, kind: str, fields: dict) -> None:
        self._append_raw(kind, self._format_line(kind, fields) + "\n")

    def _append_raw(self, kind: str, payload: str) -> None:
        fh = self._files[kind]
        try:
            fh.write(payload)
            fh.flush()
            if self._durability == "fsync":
                import os

                os.fsync(fh.fileno())
        except OSError as exc:
            raise IoError(str(exc)) from exc

    def _apply(self, kind: str, fields: dict, check_parent: bool = False) -> None:
        if check_parent and kind == "SensorData":
            # Data rows flushed before a measurement that never committed.
            if fields["measurement_id"] not in self._rows["SensorMeasurements"]:
                return
        self._rows[kind][fields["id"]] = fields
        if kind == "SensorNodes":
            self._nodes_by_addr[fields["ieee_address"]] = fields["id"]
        elif kind == "SensorMeasurements":
            self._measurements_by_node.setdefault(fields["node_id"], []).append(fields["id"])
            self._values_by_measurement.setdefault(fields["id"], [])
        elif kind == "SensorData":
            self._values_by_measurement.setdefault(fields["measurement_id"], []).append(
                fields["value"]
            )

    # -- validation ---------------------------------------------------------
    def _validate(self, kind: str, fields: dict) -> dict:
        schema = _SCHEMAS[kind]
        known = {name for name, _, _ in schema}
        unknown = set(fields) - known
        if unknown:
            raise ValidationError(f"{kind}: unknown fields {sorted(unknown)}")
        out = {}
        for name, col_type, limit in schema:
            if name == "id":
                if "id" in fields and not isinstance(fields["id"], int):
                    raise ValidationError(f"{kind}.id must be an integer")
                continue
            value = fields.get(name)
            if value is None:
                if col_type.startswith("fk?"):
                    out[name] = None
                    continue
                raise ValidationError(f"{kind}.{name} is required")
            if col_type.startswith("fk"):
                target = col_type.split(":", 1)[1]
                if not isinstance(value, int):
                    raise ValidationError(f"{kind}.{name} must be an integer id")
                if value not in self._rows[target]:
                    raise IntegrityError(kind, f"{name}={value}")
            elif col_type == "str":
                if not isinstance(value, str):
                    raise ValidationError(f"{kind}.{name} must be a string")
                if len(value) > limit:
                    raise ValidationError(
                        f"{kind}.{name} exceeds {limit} characters ({len(value)})"
                    )
            elif col_type == "int":
                if not isinstance(value, int):
                    raise ValidationError(f"{kind}.{name} must be an integer")
            elif col_type == "float":
                if not isinstance(value, (int, float)):
                    raise ValidationError(f"{kind}.{name} must be a number")
                value = float(value)
            elif col_type == "num":
                if not isinstance(value, (int, float)):
                    raise ValidationError(f"{kind}.{name} must be a number")
            elif col_type == "bool":
                if not isinstance(value, bool):
                    raise ValidationError(f"{kind}.{name} must be a boolean")
            elif col_type == "bytes":
                if not isinstance(value, (bytes, bytearray)):
                    raise ValidationError(f"{kind}.{name} must be bytes")
                value = bytes(value)
            out[name] = value
        return out

    def _next_id(self, kind: str) -> int:
        self._counters[kind] += 1
        return self._counters[kind]

    # -- operations ---------------------------------------------------------
    def upsert_entity(self, kind: str, fields: dict) -> int:
        """Insert or update a row; returns its id.

        SensorNodes are natural-keyed by ieee_address: a second upsert with
        the same address updates the row in place and returns the existing
        id.  Rows with an explicit ``id`` overwrite that id.
        """
        if kind not in _SCHEMAS:
            raise ValidationError(f"unknown entity kind {kind!r}")
        if kind in ("SensorMeasurements", "SensorData"):
            raise ValidationError(f"{kind} rows are created via insert_measurement")
        with self._lock:
            clean = self._validate(kind, fields)
            row_id = fields.get("id")
            if kind == "SensorNodes" and row_id is None:
                row_id = self._nodes_by_addr.get(clean["ieee_address"])
            if row_id is None:
                row_id = self._next_id(kind)
            else:
                self._counters[kind] = max(self._counters[kind], row_id)
            clean["id"] = row_id
            self._append(kind, clean)
            self._apply(kind, clean)
            return row_id

    def _resolve_node(self, node_ref) -> int:
        if isinstance(node_ref, str):
            node_id = self._nodes_by_addr.get(node_ref)
            if node_id is None:
                raise IntegrityError("SensorNodes", f"ieee_address={node_ref}")
            return node_id
        if node_ref not in self._rows["SensorNodes"]:
            raise IntegrityError("SensorNodes", f"id={node_ref}")
        return node_ref

    def node_exists(self, node_ref) -> bool:
        with self._lock:
            if isinstance(node_ref, str):
                return node_ref in self._nodes_by_addr
            return node_ref in self._rows["SensorNodes"]

    def insert_measurement(self, node_ref, timestamp, values, risk: bool = False) -> int:
        """Persist one measurement with its data rows; atomic on reopen."""
        if not values:
            raise ValidationError("a measurement requires at least one data value")
        for v in values:
            if not isinstance(v, (int, float)):
                raise ValidationError("data values must be numbers")
        if not isinstance(timestamp, (int, float)):
            raise ValidationError("timestamp must be a number")
        if not isinstance(risk, bool):
            raise ValidationError("risk must be a boolean")
        with self._lock:
            node_id = self._resolve_node(node_ref)
            m_id = self._next_id("SensorMeasurements")
            m_fields = {"id": m_id, "timestamp": timestamp, "risk": risk, "node_id": node_id}
            data_rows = []
            data_lines = []
            for v in values:
                d_id = self._next_id("SensorData")
                value = float(v)
                data_rows.append({"id": d_id, "value": value, "measurement_id": m_id})
                data_lines.append(f"id={d_id} value={value!r} measurement_id={m_id}\n")
            # Data first, measurement last: the measurement row is the commit record.
            self._append_raw("SensorData", "".join(data_lines))
            self._append_raw(
                "SensorMeasurements",
                f"id={m_id} timestamp={timestamp!r} "
                f"risk={'true' if risk else 'false'} node_id={node_id}\n",
            )
            self._apply("SensorMeasurements", m_fields)
            for row in data_rows:
                self._apply("SensorData", row)
            return m_id

    def query_measurements(
        self, node_ref, t_from, t_to, risk_only: bool = False
    ) -> list:
        """Measurements of a node with timestamp in [t_from, t_to], ascending."""
        if t_from > t_to:
            raise ValidationError("t_from must be <= t_to")
        with self._lock:
            node_id = self._resolve_node(node_ref)
            hits = []
            for m_id in self._measurements_by_node.get(node_id, []):
                row = self._rows["SensorMeasurements"][m_id]
                if not t_from <= row["timestamp"] <= t_to:
                    continue
                if risk_only and not row["risk"]:
                    continue
                hits.append(row)
            hits.sort(key=lambda r: (r["timestamp"], r["id"]))
            return [
                MeasurementView(
                    id=row["id"],
                    timestamp=row["timestamp"],
                    risk=row["risk"],
                    values=tuple(self._values_by_measurement.get(row["id"], ())),
                )
                for row in hits
            ]

    def resolve_alarm_targets(self, node_ref) -> AlarmTargets | None:
        """Follow node -> person -> room -> camera; ``None`` when no person.

        Ambiguity resolves to the lowest id at each hop; missing links yield
        a partial result.
        """
        with self._lock:
            node_id = self._resolve_node(node_ref)
            person_id = self._rows["SensorNodes"][node_id].get("person_id")
            if person_id is None:
                return None
            room_ids = sorted(
                row["room_id"]
                for row in self._rows["PersonRoom"].values()
                if row["person_id"] == person_id
            )
            if not room_ids:
                return AlarmTargets(person_id, None, None)
            room_id = room_ids[0]
            camera_ids = sorted(
                row["id"]
                for row in self._rows["Cameras"].values()
                if row.get("room_id") == room_id
            )
            if not camera_ids:
                return AlarmTargets(person_id, room_id, None)
            return AlarmTargets(person_id, room_id, camera_ids[0])

    def get_row(self, kind: str, row_id: int) -> dict | None:
        with self._lock:
            row = self._rows[kind].get(row_id)
            return dict(row) if row is not None else None

    def iter_rows(self, kind: str) -> list:
        """Snapshot of all rows of one entity, ascending by id."""
        if kind not in _SCHEMAS:
            raise ValidationError(f"unknown entity kind {kind!r}")
        with self._lock:
            return [dict(self._rows[kind][row_id]) for row_id in sorted(self._rows[kind])]

    def count(self, kind: str) -> int:
        with self._lock:
            return len(self._rows[kind])

    def dump_csv(self, kind: str) -> str:
        """One CSV per entity, columns in schema order, rows by ascending id."""
        if kind not in _SCHEMAS:
            raise ValidationError(f"unknown entity kind {kind!r}")
        with self._lock:
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            columns = [name for name, _, _ in _SCHEMAS[kind]]
            writer.writerow(columns)
            for row_id in sorted(self._rows[kind]):
                row = self._rows[kind][row_id]
                out = []
                for name, col_type, _limit in _SCHEMAS[kind]:
                    value = row.get(name)
                    if value is None:
                        out.append("")
                    elif col_type == "bool":
                        out.append("true" if value else "false")
                    elif col_type == "bytes":
                        out.append(base64.b64encode(value).decode("ascii"))
                    else:
                        out.append(str(value))
                writer.writerow(out)
            return buf.getvalue()
