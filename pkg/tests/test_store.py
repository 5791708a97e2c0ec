import numpy as np
import pytest

from tiersim.errors import FormatError, IntegrityError, ValidationError
from tiersim.store import ENTITY_KINDS, Store


@pytest.fixture
def store(tmp_path):
    with Store(tmp_path / "db") as s:
        yield s


def add_node(store, addr="00000000000000ab", person=False):
    type_id = store.upsert_entity("SensorTypes", {"description": "accelerometer"})
    fields = {"ieee_address": addr, "name": "node", "type_id": type_id}
    if person:
        person_id = store.upsert_entity("Persons", {"first_name": "A", "last_name": "B"})
        fields["person_id"] = person_id
    return store.upsert_entity("SensorNodes", fields)


class TestUpsert:
    def test_type_then_node_resolvable(self, store):
        type_id = store.upsert_entity("SensorTypes", {"description": "accelerometer"})
        node_id = store.upsert_entity(
            "SensorNodes", {"ieee_address": "0" * 16, "name": "n1", "type_id": type_id}
        )
        row = store.get_row("SensorNodes", node_id)
        assert row["type_id"] == type_id
        assert store.get_row("SensorTypes", type_id)["description"] == "accelerometer"

    def test_missing_type_rejected(self, store):
        with pytest.raises(IntegrityError, match="type_id=999"):
            store.upsert_entity(
                "SensorNodes", {"ieee_address": "0" * 16, "name": "n1", "type_id": 999}
            )

    def test_camera_ip_length_limit(self, store):
        room = store.upsert_entity("Rooms", {"name": "r"})
        with pytest.raises(ValidationError, match="16"):
            store.upsert_entity(
                "Cameras",
                {"name": "c", "ip": "1" * 17, "url": "http://x", "room_id": room},
            )

    def test_description_length_limit(self, store):
        with pytest.raises(ValidationError, match="64"):
            store.upsert_entity("SensorTypes", {"description": "x" * 65})

    def test_url_length_limit(self, store):
        with pytest.raises(ValidationError, match="128"):
            store.upsert_entity("Cameras", {"name": "c", "ip": "1.2.3.4", "url": "u" * 129})

    def test_node_natural_key_idempotent(self, store):
        first = add_node(store, addr="00000000000000ff")
        type_id = store.get_row("SensorNodes", first)["type_id"]
        second = store.upsert_entity(
            "SensorNodes",
            {"ieee_address": "00000000000000ff", "name": "renamed", "type_id": type_id},
        )
        assert second == first
        assert store.count("SensorNodes") == 1
        assert store.get_row("SensorNodes", first)["name"] == "renamed"

    def test_optional_camera_room(self, store):
        cam = store.upsert_entity("Cameras", {"name": "c", "ip": "1.2.3.4", "url": "http://c"})
        assert store.get_row("Cameras", cam)["room_id"] is None

    def test_unknown_kind(self, store):
        with pytest.raises(ValidationError, match="unknown entity"):
            store.upsert_entity("Gadgets", {"name": "x"})

    def test_unknown_field(self, store):
        with pytest.raises(ValidationError, match="unknown fields"):
            store.upsert_entity("Rooms", {"name": "r", "floor": 2})

    def test_measurements_not_upsertable(self, store):
        with pytest.raises(ValidationError, match="insert_measurement"):
            store.upsert_entity("SensorMeasurements", {"timestamp": 0, "risk": False, "node_id": 1})


class TestMeasurements:
    def test_triaxial_insert(self, store):
        node = add_node(store)
        m_id = store.insert_measurement(node, 1000, [0.0, 0.0, 1.0])
        assert store.count("SensorMeasurements") == 1
        assert store.count("SensorData") == 3
        view = store.query_measurements(node, 0, 2000)[0]
        assert view.id == m_id
        assert view.values == (0.0, 0.0, 1.0)

    def test_empty_values_rejected(self, store):
        node = add_node(store)
        with pytest.raises(ValidationError, match="at least one"):
            store.insert_measurement(node, 1000, [])
        assert store.count("SensorMeasurements") == 0

    def test_unknown_node_rejected(self, store):
        with pytest.raises(IntegrityError):
            store.insert_measurement("f" * 16, 1000, [1.0])

    def test_node_ref_by_address(self, store):
        add_node(store, addr="00000000000000cd")
        store.insert_measurement("00000000000000cd", 5, [2.0])
        assert store.count("SensorMeasurements") == 1

    def test_risk_round_trip(self, store):
        node = add_node(store)
        store.insert_measurement(node, 1, [1.0], risk=True)
        store.insert_measurement(node, 2, [1.0], risk=False)
        views = store.query_measurements(node, 0, 10)
        assert [v.risk for v in views] == [True, False]

    def test_duplicate_timestamps_allowed(self, store):
        node = add_node(store)
        a = store.insert_measurement(node, 7, [1.0])
        b = store.insert_measurement(node, 7, [2.0])
        assert a != b
        assert len(store.query_measurements(node, 7, 7)) == 2


class TestQueries:
    def test_empty_range(self, store):
        node = add_node(store)
        store.insert_measurement(node, 100, [1.0])
        assert store.query_measurements(node, 200, 300) == []

    def test_range_selects_subset_ordered(self, store):
        node = add_node(store)
        store.insert_measurement(node, 300, [3.0])
        store.insert_measurement(node, 100, [1.0])
        store.insert_measurement(node, 200, [2.0])
        views = store.query_measurements(node, 100, 200)
        assert [v.timestamp for v in views] == [100, 200]

    def test_risk_only_filter(self, store):
        node = add_node(store)
        store.insert_measurement(node, 1, [1.0], risk=False)
        store.insert_measurement(node, 2, [9.0], risk=True)
        store.insert_measurement(node, 3, [1.0], risk=False)
        views = store.query_measurements(node, 0, 10, risk_only=True)
        assert [v.timestamp for v in views] == [2]

    def test_inverted_range_rejected(self, store):
        node = add_node(store)
        with pytest.raises(ValidationError):
            store.query_measurements(node, 10, 0)

    def test_unknown_node(self, store):
        with pytest.raises(IntegrityError):
            store.query_measurements(999, 0, 1)


class TestAlarmTargets:
    def test_full_chain(self, store):
        node = add_node(store, person=True)
        person = store.get_row("SensorNodes", node)["person_id"]
        room = store.upsert_entity("Rooms", {"name": "bedroom"})
        store.upsert_entity("PersonRoom", {"person_id": person, "room_id": room})
        cam = store.upsert_entity(
            "Cameras", {"name": "c", "ip": "1.2.3.4", "url": "http://c", "room_id": room}
        )
        targets = store.resolve_alarm_targets(node)
        assert (targets.person_id, targets.room_id, targets.camera_id) == (person, room, cam)

    def test_person_without_room(self, store):
        node = add_node(store, person=True)
        targets = store.resolve_alarm_targets(node)
        assert targets.person_id is not None
        assert targets.room_id is None
        assert targets.camera_id is None

    def test_node_without_person(self, store):
        node = add_node(store)
        assert store.resolve_alarm_targets(node) is None

    def test_lowest_ids_win(self, store):
        node = add_node(store, person=True)
        person = store.get_row("SensorNodes", node)["person_id"]
        room_b = store.upsert_entity("Rooms", {"name": "b"})
        room_a = store.upsert_entity("Rooms", {"name": "a"})
        store.upsert_entity("PersonRoom", {"person_id": person, "room_id": room_b})
        store.upsert_entity("PersonRoom", {"person_id": person, "room_id": room_a})
        cam2 = store.upsert_entity(
            "Cameras", {"name": "c2", "ip": "1.1.1.2", "url": "http://2", "room_id": room_b}
        )
        cam1 = store.upsert_entity(
            "Cameras", {"name": "c1", "ip": "1.1.1.1", "url": "http://1", "room_id": room_b}
        )
        targets = store.resolve_alarm_targets(node)
        assert targets.room_id == min(room_a, room_b)
        # the lower room has no camera in this arrangement
        if targets.room_id == room_b:
            assert targets.camera_id == min(cam1, cam2)


class TestPersistence:
    def test_reopen_preserves_state(self, tmp_path):
        root = tmp_path / "db"
        with Store(root) as s:
            node = add_node(s, addr="00000000000000aa")
            s.insert_measurement(node, 50, [1.0, 2.0], risk=True)
        with Store(root) as s:
            views = s.query_measurements("00000000000000aa", 0, 100)
            assert len(views) == 1
            assert views[0].values == (1.0, 2.0)
            assert views[0].risk is True

    def test_id_counters_monotone_after_reopen(self, tmp_path):
        root = tmp_path / "db"
        with Store(root) as s:
            first = s.upsert_entity("Rooms", {"name": "r1"})
        with Store(root) as s:
            second = s.upsert_entity("Rooms", {"name": "r2"})
        assert second > first

    def test_manifest_version_checked(self, tmp_path):
        root = tmp_path / "db"
        Store(root).close()
        (root / "MANIFEST").write_text("schema_version=99\n")
        with pytest.raises(FormatError, match="manifest"):
            Store(root)

    def test_torn_measurement_recovered(self, tmp_path):
        """Data rows without their commit record are dropped on reopen."""
        root = tmp_path / "db"
        with Store(root) as s:
            node = add_node(s, addr="00000000000000aa")
            s.insert_measurement(node, 10, [1.0])
        # simulate a crash after the data append but before the commit record
        with open(root / "sensordata.log", "a") as fh:
            fh.write("id=99 value=5.0 measurement_id=98\n")
        with Store(root) as s:
            assert s.count("SensorData") == 1
            assert len(s.query_measurements("00000000000000aa", 0, 100)) == 1
            # the orphan's id is not reused
            m2 = s.insert_measurement("00000000000000aa", 20, [2.0])
            assert m2 > 98 or s.get_row("SensorData", 99) is None

    def test_partial_final_line_dropped(self, tmp_path):
        root = tmp_path / "db"
        with Store(root) as s:
            s.upsert_entity("Rooms", {"name": "whole"})
        with open(root / "rooms.log", "a") as fh:
            fh.write("id=2 name=torn")  # no newline: interrupted append
        with Store(root) as s:
            assert s.count("Rooms") == 1

    def test_binary_image_round_trip(self, tmp_path):
        root = tmp_path / "db"
        blob = bytes(range(256)) + b"\n=equals and spaces \x00"
        with Store(root) as s:
            cam = s.upsert_entity("Cameras", {"name": "c", "ip": "1.2.3.4", "url": "http://c"})
            img = s.upsert_entity(
                "CameraImages", {"timestamp": 123, "image_data": blob, "camera_id": cam}
            )
        with Store(root) as s:
            assert s.get_row("CameraImages", img)["image_data"] == blob

    def test_image_requires_camera(self, store):
        with pytest.raises(IntegrityError):
            store.upsert_entity("CameraImages", {"timestamp": 1, "image_data": b"x", "camera_id": 5})


class TestDump:
    def test_csv_columns_in_schema_order(self, store):
        add_node(store)
        text = store.dump_csv("SensorNodes")
        header = text.splitlines()[0]
        assert header == "id,ieee_address,name,type_id,person_id"

    def test_csv_values(self, store):
        node = add_node(store)
        store.insert_measurement(node, 5, [1.5], risk=True)
        lines = store.dump_csv("SensorMeasurements").splitlines()
        assert lines[0] == "id,timestamp,risk,node_id"
        assert lines[1] == f"1,5,true,{node}"

    def test_unknown_entity(self, store):
        with pytest.raises(ValidationError):
            store.dump_csv("Nope")

    def test_all_entities_dump(self, store):
        for kind in ENTITY_KINDS:
            assert store.dump_csv(kind).splitlines()[0]


class TestReferentialIntegrityProperty:
    """Randomized operation sequences checked against an in-memory shadow."""

    def test_random_sequences(self, tmp_path):
        rng = np.random.default_rng(2024)
        for round_no in range(5):
            root = tmp_path / f"db{round_no}"
            shadow = {"types": [], "nodes": {}, "measurements": {}}
            with Store(root) as s:
                for step in range(120):
                    op = rng.integers(4)
                    if op == 0:
                        type_id = s.upsert_entity(
                            "SensorTypes", {"description": f"type-{step}"}
                        )
                        shadow["types"].append(type_id)
                    elif op == 1 and shadow["types"]:
                        addr = f"{rng.integers(0, 2**32):016x}"
                        node_id = s.upsert_entity(
                            "SensorNodes",
                            {
                                "ieee_address": addr,
                                "name": f"n{step}",
                                "type_id": int(rng.choice(shadow["types"])),
                            },
                        )
                        shadow["nodes"][node_id] = addr
                        shadow["measurements"].setdefault(node_id, [])
                    elif op == 2 and shadow["nodes"]:
                        node_id = int(rng.choice(list(shadow["nodes"])))
                        ts = int(rng.integers(0, 1000))
                        values = [float(v) for v in rng.uniform(-2, 2, size=rng.integers(1, 4))]
                        s.insert_measurement(node_id, ts, values, risk=bool(rng.integers(2)))
                        shadow["measurements"][node_id].append((ts, tuple(values)))
                    else:
                        # a failing op must leave state unchanged
                        before = (
                            s.count("SensorMeasurements"),
                            s.count("SensorData"),
                            s.count("SensorNodes"),
                        )
                        with pytest.raises((IntegrityError, ValidationError)):
                            if rng.integers(2):
                                s.insert_measurement(10**6, 0, [1.0])
                            else:
                                s.upsert_entity(
                                    "SensorNodes",
                                    {"ieee_address": "f" * 16, "name": "x", "type_id": 10**6},
                                )
                        assert before == (
                            s.count("SensorMeasurements"),
                            s.count("SensorData"),
                            s.count("SensorNodes"),
                        )

                # full-range queries return exactly the shadow's multiset
                for node_id, entries in shadow["measurements"].items():
                    views = s.query_measurements(node_id, 0, 10**9)
                    assert sorted((v.timestamp, v.values) for v in views) == sorted(entries)
                    for view in views:
                        assert len(view.values) >= 1

            # referential integrity after reopen
            with Store(root) as s:
                for row in s.iter_rows("SensorNodes"):
                    assert s.get_row("SensorTypes", row["type_id"]) is not None
                for row in s.iter_rows("SensorMeasurements"):
                    assert s.get_row("SensorNodes", row["node_id"]) is not None
                for row in s.iter_rows("SensorData"):
                    assert s.get_row("SensorMeasurements", row["measurement_id"]) is not None
