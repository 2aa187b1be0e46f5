from dataclasses import asdict, replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gentlegrasp.exceptions import ParseError
from gentlegrasp.scenario import load_preset
from gentlegrasp.simulator import run_episode
from gentlegrasp.telemetry import (
    RECORD_FIELDS,
    EpisodeReport,
    TelemetryRecord,
    TelemetryTrace,
    Verdict,
    compute_report,
    dumps_csv,
    dumps_jsonl,
    loads_csv,
    loads_jsonl,
    plot_columns,
    read_trace,
    write_trace,
)
from oracles import report_from_jsonl


@pytest.fixture(scope="module")
def cup_trace():
    return run_episode(load_preset("plastic_cup_pour").with_seed(7)).trace


@pytest.fixture(scope="module")
def dropped_trace():
    sc = load_preset("plastic_cup_pour")
    return run_episode(replace(sc, controller=replace(sc.controller, k_p=0.0)).with_seed(7)).trace


@pytest.mark.parametrize("fmt", ["jsonl", "csv"])
@pytest.mark.parametrize("which", ["cup_trace", "dropped_trace"])
def test_round_trip_is_byte_identical(tmp_path, request, fmt, which):
    trace = request.getfixturevalue(which)
    first = tmp_path / f"a.{fmt}"
    second = tmp_path / f"b.{fmt}"
    write_trace(trace, first, fmt)
    write_trace(read_trace(first), second, fmt)
    assert first.read_bytes() == second.read_bytes()
    back = read_trace(first)
    assert back.records == trace.records and back.verdict == trace.verdict


def test_formats_carry_same_content(cup_trace):
    a = loads_jsonl(dumps_jsonl(cup_trace))
    b = loads_csv(dumps_csv(cup_trace))
    assert a.records == b.records and a.header == b.header and a.report == b.report


def test_record_count(cup_trace):
    assert cup_trace.verdict is Verdict.SUCCESS
    header = cup_trace.header
    assert abs(len(cup_trace.records) - header["duration_s"] * header["rate_hz"]) <= 1


@pytest.mark.parametrize("which", ["cup_trace", "dropped_trace"])
def test_report_matches_independent_recomputation(request, which):
    trace = request.getfixturevalue(which)
    expected = report_from_jsonl(dumps_jsonl(trace))
    got = asdict(compute_report(trace))
    got.pop("ticks_over_budget")
    assert got == expected


def test_dropped_report(dropped_trace):
    report = compute_report(dropped_trace)
    assert report.verdict == "ObjectDropped"
    assert report.total_macro_slip >= dropped_trace.header["drop_threshold"]


def test_wall_clock_stays_out_of_files(cup_trace):
    trace = replace(cup_trace, report=replace(cup_trace.report, ticks_over_budget=3))
    assert "ticks_over_budget" not in dumps_jsonl(trace)
    assert "ticks_over_budget" not in dumps_csv(trace)


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50)
@given(st.lists(st.lists(finite, min_size=15, max_size=15), min_size=1, max_size=6),
       st.sampled_from(["reach", "hold", "release"]))
def test_arbitrary_floats_round_trip(rows, phase):
    records = []
    for k, values in enumerate(rows):
        kw = dict(zip([f for f in RECORD_FIELDS if f != "phase"], values))
        kw["t"] = float(k)
        records.append(TelemetryRecord(phase=phase, **kw))
    trace = TelemetryTrace({"rate_hz": 30.0, "cf_target": 0.25}, records, Verdict.SUCCESS,
                           EpisodeReport("Success", None, 0.1, 1.0, 0.0))
    for dumps, loads in ((dumps_jsonl, loads_jsonl), (dumps_csv, loads_csv)):
        text = dumps(trace)
        assert dumps(loads(text)) == text


@pytest.mark.parametrize(
    "mutate",
    [
        lambda t: t.replace('"schema_version": 1', '"schema_version": 9'),
        lambda t: "\n".join(t.splitlines()[:-1]) + "\n",  # no summary
        lambda t: t.replace('"type": "tick"', '"type": "tock"', 1),
        lambda t: t.replace('"mu_hat": ', '"mu_hat_x": ', 1),
        lambda t: t + "{not json\n",
    ],
)
def test_malformed_jsonl(cup_trace, mutate):
    with pytest.raises(ParseError):
        loads_jsonl(mutate(dumps_jsonl(cup_trace)))


def test_plot_columns(cup_trace):
    lines = plot_columns(cup_trace).splitlines()
    assert lines[0].split(",")[:4] == ["t", "f_mer_n", "f_mer_t", "mu_hat"]
    assert len(lines) == len(cup_trace.records) + 1
