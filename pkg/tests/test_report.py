from healflow.core.timeline import TimelineEntry, TimelineLog, entries_from_csv, entries_to_csv
from healflow.report import (compute_mttr, compute_report, default_bucket,
                             format_report, instance_uptime, render_marble)
from tests.conftest import build_graph, make_spec


def entry(time, instance, kind, node, port=None, topic="", value=None):
    return TimelineEntry(time, instance, kind, node, port, topic, value)


# --- CSV schema -----------------------------------------------------------------

def test_csv_header_is_stable():
    log = TimelineLog()
    assert log.to_csv().splitlines()[0] == "time_ms,instance,event,node,port,topic,value"


def test_csv_round_trip():
    log = TimelineLog()
    log.add(0, "i0", "emit", "s", 0, "lab/t", {"v": 1.5})
    log.add(10, "world", "fault", "d", None, "", {"kind": "device_offline"})
    log.add(10, "i0", "timer", "n", None, "", "interval")
    parsed = entries_from_csv(log.to_csv())
    assert parsed == log.entries


def test_csv_value_is_compact_sorted_json():
    log = TimelineLog()
    log.add(0, "i", "emit", "n", 0, "", {"b": 1, "a": 2})
    line = log.to_csv().splitlines()[1]
    assert '""a"":2,""b"":1' in line  # csv-quoted compact JSON


# --- mttr -------------------------------------------------------------------------

def failover_entries():
    return [
        entry(0, "red-b", "role-change", "red", value={"role": "master", "epoch": 1}),
        entry(60000, "red-b", "emit", "post", 0, "service/telemetry", 21.0),
        entry(300000, "world", "fault", "red-b", value={"kind": "instance_crash"}),
        entry(309000, "red-a", "role-change", "red", value={"role": "master", "epoch": 1}),
        entry(309000, "red-a", "emit", "notify", 0, "service/notify", {"role": "master"}),
        entry(360000, "red-a", "emit", "post", 0, "service/telemetry", 20.5),
    ]


def test_mttr_single_failover_sample():
    assert compute_mttr(failover_entries()) == [9000]


def test_mttr_needs_master_crash():
    entries = [
        entry(10, "world", "fault", "red-a", value={"kind": "instance_crash"}),
        entry(20, "red-b", "emit", "post", 0, "service/t", 1),
    ]
    assert compute_mttr(entries) == []  # crashed instance was never master


def test_mttr_na_formatting():
    report = compute_report([])
    text = format_report(report, "mttr")
    assert "n/a" in text


def test_mttr_mean_and_stdev_formatting():
    report = compute_report(failover_entries())
    text = format_report(report, "mttr")
    assert "mean=9000.0" in text
    assert "n=1" in text


# --- loss ---------------------------------------------------------------------------

def loss_entries(delivered):
    entries = []
    for i in range(22):
        t = (i + 1) * 60000
        entries.append(entry(t, "world", "emit", "dht-1", 0, "lab/dht", 21.0))
        if i != 4 or delivered == 22:  # reading five lost unless told otherwise
            entries.append(entry(t, "red-b", "emit", "post", 0, "service/telemetry", 21.0))
    return entries


def test_loss_expected_vs_delivered():
    report = compute_report(loss_entries(21))
    assert report.expected == {"dht-1": 22}
    assert report.delivered == {"service/telemetry": 21}
    assert report.loss("service/telemetry") == 1
    text = format_report(report, "loss", sink="telemetry")
    assert "delivered=21 expected=22 loss=1" in text


def test_loss_zero_when_all_delivered():
    report = compute_report(loss_entries(22))
    assert report.loss("service/telemetry") == 0


# --- uptime ---------------------------------------------------------------------------

def test_uptime_clips_crash_windows():
    entries = [
        entry(0, "a", "emit", "n", 0, "", 1),
        entry(100, "world", "fault", "a", value={"kind": "instance_crash"}),
        entry(400, "world", "fault", "a", value={"kind": "instance_restart"}),
        entry(1000, "a", "emit", "n", 0, "", 1),
    ]
    assert instance_uptime(entries) == {"a": 700}


# --- marble ---------------------------------------------------------------------------

def test_marble_single_emission():
    out = render_marble([entry(0, "i", "emit", "s", 0, "t", 1)], bucket_ms=100)
    lines = out.splitlines()
    assert lines[1].startswith("s ") or lines[1].startswith("s|") or "s" in lines[1]
    assert "|*|" in lines[1].replace(" ", "")


def test_marble_empty_timeline():
    out = render_marble([], bucket_ms=100)
    assert "no emissions" in out


def test_marble_buckets_and_counts():
    entries = [
        entry(0, "i", "emit", "s", 0, "t", 1),
        entry(50, "i", "emit", "s", 0, "t", 2),   # same bucket -> digit 2
        entry(250, "i", "emit", "s", 0, "t", 3),
    ]
    out = render_marble(entries, bucket_ms=100)
    row = next(line for line in out.splitlines() if line.startswith("s"))
    assert "|2.*|" in row.replace(" ", "")


def test_marble_multi_egress_rows_use_labels():
    graph = build_graph(make_spec("timing", "timing-check", {"expected": 1000}))
    entries = [
        entry(0, "i", "emit", "timing", 1, "t", "a"),
        entry(100, "i", "emit", "timing", 0, "t", "b"),
    ]
    out = render_marble(entries, bucket_ms=100, graph=graph, nodes=["timing"])
    assert "timing:tooFast" in out
    assert "timing:normal" in out
    assert "timing:tooSlow" in out  # silent class still gets a row


def test_marble_unknown_node_filter_errors():
    entries = [entry(0, "i", "emit", "s", 0, "t", 1)]
    try:
        render_marble(entries, bucket_ms=10, nodes=["ghost"])
    except ValueError as exc:
        assert "ghost" in str(exc)
    else:
        raise AssertionError("expected ValueError")


def test_default_bucket_prefers_graph_periods():
    graph = build_graph(make_spec("s", "sensor", {"period": 60000}))
    assert default_bucket([], graph) == 15000


def test_default_bucket_falls_back_to_observed_cadence():
    entries = [entry(t, "i", "emit", "s", 0, "t", 1) for t in (0, 400, 800)]
    assert default_bucket(entries) == 100
