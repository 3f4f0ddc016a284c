import json
import math

import pytest

from jouletrace.accounting import (
    aggregate,
    gen_footprint_naive,
    gen_footprint_optimized,
)
from jouletrace.footprint import summarize
from jouletrace.model import ParseError
from jouletrace.synth import TENSOR_NAMES, PowerModel, SynthSpec, generate


class TestSpecValidation:
    def test_defaults_are_valid(self):
        SynthSpec(seed=1)

    @pytest.mark.parametrize(
        "kwargs, field",
        [
            ({"layers": 0}, "layers"),
            ({"tensors_per_layer": 0}, "tensors_per_layer"),
            ({"dur_min": 0}, "dur_min"),
            ({"dur_min": 5, "dur_max": 4}, "dur_max"),
            ({"period": 0}, "period"),
            ({"concurrency": 0}, "concurrency"),
            ({"devices": ()}, "devices"),
            ({"root": "a/b"}, "root"),
        ],
    )
    def test_invalid_fields_named(self, kwargs, field):
        with pytest.raises(ParseError, match=field):
            SynthSpec(seed=0, **kwargs)

    def test_from_dict_rejects_unknown_field(self):
        with pytest.raises(ParseError, match="bogus"):
            SynthSpec.from_dict({"seed": 0, "bogus": 1})

    def test_from_json(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(
            json.dumps(
                {
                    "seed": 3,
                    "devices": ["cpu:0", "gpu:0"],
                    "layers": 2,
                    "power": {"kind": "two_phase", "w_low": 2, "w_high": 9, "switch_ts": 100},
                }
            )
        )
        spec = SynthSpec.from_json(path)
        assert spec.power.kind == "two_phase"
        assert spec.devices == ("cpu:0", "gpu:0")

    def test_bad_power_kind(self):
        with pytest.raises(ParseError, match="kind"):
            PowerModel(kind="sawtooth")


class TestGenerate:
    def test_deterministic_for_seed(self):
        spec = SynthSpec(seed=42, layers=2, tensors_per_layer=2, concurrency=2)
        first = generate(spec)
        second = generate(spec)
        assert first[0] == second[0]
        assert first[1] == second[1]
        assert first[2] == second[2]

    def test_single_event_closed_form(self):
        spec = SynthSpec(
            seed=0,
            layers=1,
            tensors_per_layer=1,
            dur_min=50,
            dur_max=50,
            gap_max=0,
            power=PowerModel("constant", watts=1.0),
        )
        trace, power, expected = generate(spec)
        # every op occupies its ticks alone (concurrency 1, one device)
        for event in trace:
            op_joules = expected[event.op]
            assert abs(op_joules - (event.dur + 1) * 1e-6) <= 1e-15

    def test_fully_overlapping_identical_spans_split_in_half(self):
        spec = SynthSpec(
            seed=0,
            layers=1,
            tensors_per_layer=1,
            dur_min=99,
            dur_max=99,
            gap_max=0,
            concurrency=2,
            power=PowerModel("constant", watts=10.0),
        )
        trace, power, expected = generate(spec)
        events = list(trace)
        assert len(events) == 2
        if events[0].ts == events[1].ts:  # identical spans under gap_max=0
            total = math.fsum(expected.values())
            for op, joules in expected.items():
                assert abs(joules - total / 2) <= 1e-12 * total

    def test_expected_equals_naive_aggregate(self):
        spec = SynthSpec(seed=7, layers=2, tensors_per_layer=2, devices=("cpu:0", "gpu:0"))
        trace, power, expected = generate(spec)
        oracle = aggregate(gen_footprint_naive(trace, power)[0])
        assert expected == oracle

    def test_optimized_matches_expected(self):
        spec = SynthSpec(seed=8, layers=3, tensors_per_layer=2, concurrency=2)
        trace, power, expected = generate(spec)
        actual, _ = gen_footprint_optimized(trace, power)
        assert set(actual) == set(expected)
        for op in actual:
            assert abs(actual[op] - expected[op]) <= 1e-9 * max(expected[op], 1e-300)

    def test_summarized_key_count(self):
        spec = SynthSpec(seed=9, layers=4, tensors_per_layer=3)
        _, _, expected = generate(spec)
        stef = summarize(expected)
        assert len(stef) == spec.tensors_per_layer * len(TENSOR_NAMES)

    def test_backward_mirror_doubles_summarized_keys(self):
        spec = SynthSpec(seed=9, layers=2, tensors_per_layer=2, include_backward=True)
        trace, _, expected = generate(spec)
        stef = summarize(expected)
        assert len(stef) == 2 * spec.tensors_per_layer * len(TENSOR_NAMES)
        assert any(op.path and op.path[0] == "gradients" for op in expected)

    def test_every_op_site_is_instantiated(self):
        spec = SynthSpec(seed=10, layers=3, tensors_per_layer=2)
        trace, _, _ = generate(spec)
        assert {e.op for e in trace} == set(spec.op_names())

    def test_two_phase_power_levels(self):
        spec = SynthSpec(
            seed=11,
            power=PowerModel("two_phase", w_low=2.0, w_high=8.0, switch_ts=500),
            period=100,
        )
        _, power, _ = generate(spec)
        for device in power.devices():
            for sample in power[device]:
                assert sample.watts == (2.0 if sample.ts < 500 else 8.0)

    def test_ramp_power_is_nondecreasing(self):
        spec = SynthSpec(seed=12, power=PowerModel("ramp", w0=1.0, slope=5.0))
        _, power, _ = generate(spec)
        for device in power.devices():
            watts = [s.watts for s in power[device]]
            assert watts == sorted(watts)
