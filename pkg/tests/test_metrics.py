import pytest
from hypothesis import given, strategies as st

from manetsim.metrics import (DROP_REASONS, MetricError, TraceParseError,
                              TraceRecord, analyze, average_delay,
                              dropped_packets, format_record, iter_records,
                              parse_record, routing_overhead, throughput)


def test_parse_send_example():
    rec = parse_record("s 10.250000000 3 AGT 42 cbr 512 3 7 -")
    assert rec.event == "s" and rec.node == 3 and rec.layer == "AGT"
    assert rec.uid == 42 and rec.ptype == "cbr" and rec.size == 512
    assert (rec.fsrc, rec.fdst) == (3, 7)
    assert rec.t_ns == 10_250_000_000


def test_parse_drop_example():
    rec = parse_record("d 11.000000000 5 RTR 42 cbr 512 3 7 NRTE")
    assert rec.event == "d" and rec.reason == "NRTE"


def test_parse_rejects_wrong_time_precision():
    with pytest.raises(TraceParseError) as err:
        parse_record("s 10.0 3 AGT 42 cbr 512 3 7 -")
    assert err.value.field == "time"


def test_parse_rejects_bad_reason_and_layer():
    with pytest.raises(TraceParseError):
        parse_record("d 1.000000000 5 RTR 42 cbr 512 3 7 WAT")
    with pytest.raises(TraceParseError):
        parse_record("s 1.000000000 5 PHY 42 cbr 512 3 7 -")


_records = st.builds(
    TraceRecord,
    event=st.sampled_from(("s", "r", "f")),
    t_ns=st.integers(0, 10**12),
    node=st.integers(0, 99),
    layer=st.sampled_from(("AGT", "RTR", "MAC")),
    uid=st.integers(0, 10**6),
    ptype=st.sampled_from(("cbr", "aodv:rreq", "dsdv", "zrp:ierp_q")),
    size=st.integers(0, 4096),
    fsrc=st.integers(-1, 99),
    fdst=st.integers(-1, 99),
    reason=st.just("-"),
)


@given(_records)
def test_format_parse_round_trip(rec):
    assert parse_record(format_record(rec)) == rec


@given(st.sampled_from(DROP_REASONS))
def test_drop_round_trip(reason):
    rec = TraceRecord("d", 123456789, 4, "MAC", 9, "cbr", 512, 0, 1, reason)
    assert parse_record(format_record(rec)) == rec


def _trace(lines):
    return list(iter_records(lines))


def _mk(event, t, node, layer, uid, ptype="cbr", size=512, fsrc=0, fdst=1, reason="-"):
    t_ns = round(t * 1e9)
    return (f"{event} {t_ns // 10**9}.{t_ns % 10**9:09d} {node} {layer} {uid} "
            f"{ptype} {size} {fsrc} {fdst} {reason}")


def test_throughput_definition():
    lines = [_mk("s", 1.0, 0, "AGT", i) for i in range(100)]
    lines += [_mk("r", 2.0, 1, "AGT", i) for i in range(95)]
    recs = _trace(lines)
    assert throughput(recs) == 0.95
    assert analyze(recs).throughput == 0.95


def test_throughput_all_delivered():
    lines = [_mk("s", 1.0, 0, "AGT", 1), _mk("r", 1.5, 1, "AGT", 1)]
    assert throughput(_trace(lines)) == 1.0


def test_zero_generated_is_an_error():
    with pytest.raises(MetricError):
        throughput([])
    with pytest.raises(MetricError):
        analyze([])


def test_average_delay_mean_of_delivered():
    lines = [
        _mk("s", 1.0, 0, "AGT", 1), _mk("r", 1.01, 1, "AGT", 1),
        _mk("s", 2.0, 0, "AGT", 2), _mk("r", 2.02, 1, "AGT", 2),
        _mk("s", 3.0, 0, "AGT", 3),  # never delivered: contributes nothing
    ]
    assert abs(average_delay(_trace(lines)) - 0.015) < 1e-12


def test_average_delay_single_packet():
    lines = [_mk("s", 10.0, 0, "AGT", 1), _mk("r", 10.1, 1, "AGT", 1)]
    assert abs(average_delay(_trace(lines)) - 0.1) < 1e-12


def test_average_delay_undefined_when_none_delivered():
    with pytest.raises(MetricError):
        average_delay(_trace([_mk("s", 1.0, 0, "AGT", 1)]))


def test_dropped_counts_data_only():
    lines = [
        _mk("d", 1.0, 2, "RTR", 1, reason="NRTE"),
        _mk("d", 1.0, 2, "RTR", 2, reason="NRTE"),
        _mk("d", 1.0, 2, "MAC", 3, reason="IFQ"),
        _mk("d", 1.0, 2, "RTR", 4, ptype="aodv:rreq", reason="NRTE"),
    ]
    assert dropped_packets(_trace(lines)) == 3
    assert dropped_packets([]) == 0


def test_overhead_counts_hopwise_transmissions():
    # one RREQ flooded across 5 nodes: 1 origination + 4 rebroadcasts
    lines = [_mk("s", 1.0, 0, "RTR", 7, ptype="aodv:rreq", size=48, fdst=4)]
    lines += [_mk("f", 1.0, k, "RTR", 7, ptype="aodv:rreq", size=48, fdst=4)
              for k in range(1, 5)]
    lines += [_mk("s", 1.0, 0, "AGT", 9), _mk("f", 1.1, 1, "RTR", 9)]  # data excluded
    lines += [_mk("r", 1.0, 1, "RTR", 7, ptype="aodv:rreq", size=48, fdst=4)]
    assert routing_overhead(_trace(lines)) == 5


def test_injected_drops_move_metrics_one_way():
    base = [_mk("s", 1.0, 0, "AGT", 1), _mk("r", 1.5, 1, "AGT", 1),
            _mk("s", 2.0, 0, "AGT", 2)]
    more = base + [_mk("d", 2.5, 3, "RTR", 2, reason="NRTE")]
    t0, t1 = throughput(_trace(base)), throughput(_trace(more))
    d0, d1 = dropped_packets(_trace(base)), dropped_packets(_trace(more))
    assert t1 <= t0
    assert d1 > d0
