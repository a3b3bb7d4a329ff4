import pytest

from aclp.eventlog import directly_follows_counts
from aclp.fuzzymine import build_initial_model, mine, topological_order
from aclp.synthetic import FlightSpec, generate_flight_log, log_from_sequences

PLAIN = dict(planted=(), latent_activity=None, latent_gap=None, latent_gap_parents=(), takeoff="C")


def spec_edges(spec):
    """Directly-follows edges the chain allows; branches of a block may run in either order."""
    edges = set()
    for a, b in zip(spec.chain, spec.chain[1:]):
        for x in a if isinstance(a, tuple) else (a,):
            for y in b if isinstance(b, tuple) else (b,):
                edges.add((x, y))
    for s in spec.chain:
        if isinstance(s, tuple):
            edges |= {(x, y) for x in s for y in s if x != y}
    return edges


def test_zero_noise_recovers_the_chain():
    spec = FlightSpec(chain=("A", "B", "C", "D"), self_loops={}, exceptions=(), **PLAIN)
    m, report = mine(generate_flight_log(spec, 200, 3))
    assert set(m.edges) == spec_edges(spec) and report.removed_edges() == set()
    assert topological_order(m) == ["A", "B", "C", "D"]


def test_zero_noise_default_process():
    spec = FlightSpec(self_loops={}, exceptions=())
    m, report = mine(generate_flight_log(spec, 300, 1))
    assert set(m.edges) == spec_edges(spec)
    # the two branches interleave freely, which reads as a two-way link that is kept
    assert report.binary_kept_loops == [("CATER", "FUEL")]


def test_self_loop_shows_up_before_resolution():
    spec = FlightSpec(chain=("A", "B", "C", "D"), self_loops={"B": 0.3}, exceptions=(), **PLAIN)
    log = generate_flight_log(spec, 300, 1)
    assert directly_follows_counts(log)[("B", "B")] > 0
    assert ("B", "B") in build_initial_model(log).edges
    m, report = mine(log)
    assert report.unary_resolved == ["B"] and ("B", "B1") in m.edges and ("B", "B") not in m.edges


def test_injected_exception_is_removed():
    spec = FlightSpec(chain=("A", "B", "C", "D"), self_loops={}, exceptions=(("B", "C"),),
                      exception_prob=0.1, **PLAIN)
    log = generate_flight_log(spec, 300, 2)
    assert directly_follows_counts(log)[("C", "B")] > 0
    m, report = mine(log)
    assert report.binary_exceptions_removed == [("C", "B")]
    assert ("B", "C") in m.edges


def test_flight_log_shape():
    spec = FlightSpec()
    log = generate_flight_log(spec, 25, 0)
    assert len(log) == 25 and log.activity_universe == set(spec.activities)
    takeoffs = [e for t in log for e in t.events if e.activity == spec.takeoff]
    assert all(spec.scheduled_attribute in e.extras for e in takeoffs)
    assert generate_flight_log(spec, 25, 0) == log
    assert spec.confounded == {("CRUISE_DESCEND", "FLIGHTDELAY")}
    assert spec.direct_causes == {"UNLOAD_CLEAN", "BOARD_PUSHBACK"}


@pytest.mark.parametrize("kw", [
    dict(chain=("A", "A")),
    dict(takeoff="NOPE"),
    dict(planted=("A_Z",)),
    dict(latent_activity="NOPE"),
    dict(exceptions=(("ARRIVE", "CLEAN"),)),
    dict(self_loops={"CLEAN": 1.0}),
    dict(exception_prob=2.0),
])
def test_invalid_spec(kw):
    with pytest.raises(ValueError):
        FlightSpec(**kw)


def test_invalid_case_count_and_sequences():
    with pytest.raises(ValueError):
        generate_flight_log(FlightSpec(), 0)
    log = log_from_sequences([["A", "B"], ["B"]])
    assert [t.activities for t in log] == [("A", "B"), ("B",)]
