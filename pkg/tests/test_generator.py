import json

import numpy as np
import pytest

from perfstream.generator import (
    METRIC_NAMES,
    Scenario,
    generate,
    parse_line,
    record_lines,
    replay,
)

from oracles import batch_kmeans, offline_cusum, ols_granger_p, ols_var


def collect_values(scenario):
    """(duration x n x d) tensor rebuilt from the emitted records."""
    lines = list(record_lines(scenario))
    preamble = json.loads(lines[0])
    n = preamble["n"]
    out = np.zeros((scenario.duration, n, len(METRIC_NAMES)))
    for line in lines[1:]:
        record = json.loads(line)
        if "v" in record:
            out[record["t"], record["e"]] = record["v"]
    return out


class TestDeterminism:
    def test_same_seed_identical_bytes(self):
        scenario = Scenario(seed=42, pes=2, kps_per_pe=4, duration=20)
        a = "\n".join(record_lines(scenario))
        b = "\n".join(record_lines(Scenario(seed=42, pes=2, kps_per_pe=4, duration=20)))
        assert a == b

    def test_different_seed_differs(self):
        a = "\n".join(record_lines(Scenario(seed=1, pes=1, kps_per_pe=4, duration=5)))
        b = "\n".join(record_lines(Scenario(seed=2, pes=1, kps_per_pe=4, duration=5)))
        assert a != b


class TestPlantedStructure:
    def test_level_shift_found_by_offline_cusum(self):
        scenario = Scenario(
            seed=7,
            pes=2,
            kps_per_pe=8,
            duration=400,
            events=[
                {"type": "level_shift", "t": 200, "metric": "Sec.Rb.", "group": 2,
                 "delta": 5 * 1.5}
            ],
        )
        tensor = collect_values(scenario)
        groups = scenario.group_of()
        series = tensor[:, groups == 2, METRIC_NAMES.index("Sec.Rb.")].mean(axis=1)
        changes = offline_cusum(series)
        assert any(abs(c - 200) <= 10 for c in changes)

    def test_groups_recoverable_by_batch_kmeans(self):
        scenario = Scenario(seed=8, pes=2, kps_per_pe=16, duration=64)
        tensor = collect_values(scenario)
        window = tensor[:, :, METRIC_NAMES.index("Sec.Rb.")].T  # entities x time
        labels, _, _ = batch_kmeans(window, 3, restarts=10, seed=8)
        truth = scenario.group_of()
        # ARI == 1 up to label permutation for well-separated defaults
        table = np.zeros((3, 3))
        np.add.at(table, (truth, labels), 1)
        assert (table.max(axis=1).sum()) / truth.size >= 0.99

    def test_causal_coupling_gives_granger_direction(self):
        scenario = Scenario(
            seed=9,
            pes=2,
            kps_per_pe=8,
            duration=600,
            ar1={"Net.Send.": (0.7, 6.0)},
            coupling=("Net.Send.", "Sec.Rb.", 0.8, 1),
        )
        tensor = collect_values(scenario)
        send = tensor[:, :, METRIC_NAMES.index("Net.Send.")].mean(axis=1)
        rb = tensor[:, :, METRIC_NAMES.index("Sec.Rb.")].mean(axis=1)
        panel = np.column_stack([send, rb])
        panel = (panel - panel.mean(0)) / panel.std(0, ddof=1)
        fit = ols_var(panel, p=1)
        assert ols_granger_p(fit, cause=0, effect=1, p=1) < 0.01
        assert ols_granger_p(fit, cause=1, effect=0, p=1) > 0.05

    def test_outlier_entity_stands_out(self):
        scenario = Scenario(
            seed=10,
            pes=1,
            kps_per_pe=16,
            duration=50,
            events=[{"type": "outlier_entity", "entity": 3, "metric": "Prim.Rb.",
                     "offset": 40.0}],
        )
        tensor = collect_values(scenario)
        m = METRIC_NAMES.index("Prim.Rb.")
        means = tensor[:, :, m].mean(axis=0)
        assert means[3] > means.max(where=np.arange(16) != 3, initial=0.0) + 20.0

    def test_comm_hotspot_emits_self_records(self):
        scenario = Scenario(
            seed=11, pes=1, kps_per_pe=4, duration=10,
            events=[{"type": "comm_hotspot", "from_t": 2, "to_t": 5,
                     "entities": [0], "weight": 99.0}],
        )
        self_records = [
            json.loads(line)
            for line in record_lines(scenario)
            if '"w":99.0' in line
        ]
        assert {r["t"] for r in self_records} == {2, 3, 4}
        assert all(r["s"] == r["d"] == 0 for r in self_records)

    def test_values_non_negative(self):
        scenario = Scenario(seed=12, pes=1, kps_per_pe=8, duration=30)
        assert collect_values(scenario).min() >= 0.0


class TestValidation:
    def test_bad_event_type_rejected(self):
        scenario = Scenario(events=[{"type": "meteor_strike"}])
        with pytest.raises(ValueError):
            scenario.validate()

    def test_bad_coupling_metric_rejected(self):
        scenario = Scenario(coupling=("NoSuch", "Sec.Rb.", 0.5, 1))
        with pytest.raises(ValueError):
            scenario.validate()

    def test_json_round_trip(self):
        scenario = Scenario(
            seed=3, pes=2, kps_per_pe=4, duration=10,
            ar1={"Net.Send.": (0.5, 2.0)},
            coupling=("Net.Send.", "Sec.Rb.", 0.4, 1),
            events=[{"type": "level_shift", "t": 5, "metric": "Sec.Rb.",
                     "group": 1, "delta": 3.0}],
        )
        restored = Scenario.from_json(scenario.to_json())
        assert "\n".join(record_lines(restored)) == "\n".join(record_lines(scenario))


class TestGenerateAndReplay:
    def test_generate_round_trip_through_file(self, tmp_path):
        scenario = Scenario(seed=4, pes=1, kps_per_pe=4, duration=8)
        path = tmp_path / "stream.ndjson"
        with open(path, "w") as handle:
            generate(scenario, lambda line: handle.write(line + "\n"), throttle=False)
        replayed = []
        emitted, skipped = replay(str(path), speed=0, sink=replayed.append)
        assert skipped == 0
        assert replayed == list(record_lines(scenario))
        assert emitted == len(replayed)

    def test_replay_timing_scales_with_speed(self, tmp_path):
        scenario = Scenario(seed=5, pes=1, kps_per_pe=2, duration=10, interval=1.0, group_count=2)
        path = tmp_path / "stream.ndjson"
        with open(path, "w") as handle:
            generate(scenario, lambda line: handle.write(line + "\n"), throttle=False)
        slept = []
        replay(str(path), speed=1.0, sink=lambda _: None, sleep=slept.append)
        assert len(slept) == 9  # one pause per slice boundary
        assert abs(sum(slept) - 9.0) < 0.45  # 10 s recording +- 5%
        slept2 = []
        replay(str(path), speed=4.0, sink=lambda _: None, sleep=slept2.append)
        assert abs(sum(slept2) - 9.0 / 4.0) < 0.2

    def test_malformed_lines_skipped_and_counted(self, tmp_path):
        path = tmp_path / "bad.ndjson"
        path.write_text('{"t":0,"e":0,"v":[1]}\nnot json\n[1,2]\n{"t":1,"e":0,"v":[2]}\n')
        out = []
        emitted, skipped = replay(str(path), speed=0, sink=out.append)
        assert emitted == 2
        assert skipped == 2

    def test_generate_throttle_paces_slices(self):
        scenario = Scenario(seed=6, pes=1, kps_per_pe=2, duration=5, interval=0.5, group_count=2)
        pauses = []
        fake_now = [0.0]

        def clock():
            return fake_now[0]

        def sleep(s):
            pauses.append(s)
            fake_now[0] += s

        generate(scenario, lambda _: None, throttle=True, clock=clock, sleep=sleep)
        assert len(pauses) == 4
        assert all(abs(p - 0.5) < 1e-9 for p in pauses)

    def test_parse_line(self):
        assert parse_line("") is None
        assert parse_line("nope") is None
        assert parse_line('{"t":1}') == {"t": 1}
