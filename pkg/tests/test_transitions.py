import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import exclusivity_oracle
from sumosim import kif
from sumosim.kif import Variable
from sumosim.rules import ClosureBudgetExceeded, compile_rules
from sumosim.transitions import (
    Activity, ConflictReport, Deadlock, DomainConformance, HaltReason, MutualExclusion, Outcome,
    PartitionExclusivity, Predicate, Request, ResourceAtLeast, Transition, TransitionEngine,
    TripleAbsent, TriplePresent, ValidationPolicy, check_guards, run_probe_partition, schedule,
)
from sumosim.world import InsufficientResource, Microworld, ResourceQuantity

LINE = re.compile(r"step=\d+ tick=\d+ activity=\S+ transition=\S+ "
                  r"outcome=(Committed|RejectedGuards|CommittedWithConflicts-Halt) conflicts=\d+\Z")


@pytest.fixture
def world(kb):
    w = Microworld(kb, "lab", regions=("bench",))
    w.instantiate("Switch", "sw")
    w.connect("attribute", "sw", "DeviceOff")
    w.set_resource("Gasoline", 1)
    return w


def toggle(name, before, after, **extra):
    return Transition(name, guards=[TriplePresent("attribute", "sw", before)],
                      disconnects=[("attribute", "sw", before)],
                      connects=[("attribute", "sw", after)], **extra)


ON = toggle("On", "DeviceOff", "DeviceOn")
OFF = toggle("Off", "DeviceOn", "DeviceOff")


def probes():
    return [PartitionExclusivity("DeviceStateAttribute", "Switch"), DomainConformance()]


def test_guard_kinds(world):
    snap = world.snapshot()
    assert TriplePresent("attribute", "sw", "DeviceOff").holds(snap)
    assert TripleAbsent("attribute", "sw", "DeviceOn").holds(snap)
    assert ResourceAtLeast("Gasoline", 1).holds(snap)
    assert not ResourceAtLeast("Gasoline", 2).holds(snap)
    assert Predicate("tick zero", lambda s: s.tick == 0).holds(snap)
    check = check_guards(Transition("t", guards=[ResourceAtLeast("Gasoline", 5),
                                                 TripleAbsent("attribute", "sw", "DeviceOff")]), world)
    assert not check.passed and len(check.failures) == 2


def test_rejection_changes_nothing(kb, world):
    engine = TransitionEngine(kb, probes=probes())
    before = world.snapshot()
    record = engine.fire(OFF, world)
    assert record.outcome is Outcome.REJECTED_GUARDS
    assert world.snapshot() == before and engine.history == []
    assert record.tick_before == record.tick_after == 0


def test_commit_and_line(kb, world):
    engine = TransitionEngine(kb, probes=probes())
    record = engine.fire(ON, world, activity="hand", step=4)
    assert record.outcome is Outcome.COMMITTED and record.validated
    assert record.line() == "step=4 tick=1 activity=hand transition=On outcome=Committed conflicts=0"
    assert LINE.match(record.line())
    assert world.objects("attribute", "sw") == ["DeviceOn"]


def test_conflict_commits_and_halts(kb, world):
    bad = Transition("Glitch", connects=[("attribute", "sw", "DeviceOn")])
    record = TransitionEngine(kb, probes=probes()).fire(bad, world)
    assert record.outcome is Outcome.HALT
    (report,) = record.conflicts
    assert report.probe == "PartitionExclusivity" and report.entity == "sw"
    assert set(report.offending_facts) == {("attribute", "sw", "DeviceOn"), ("attribute", "sw", "DeviceOff")}
    assert world.has("attribute", "sw", "DeviceOn")   # committed, not rolled back


def test_insufficient_resource_rolls_back(kb, world):
    greedy = toggle("Greedy", "DeviceOff", "DeviceOn", consumes=[ResourceQuantity("Gasoline", 2)])
    before = world.snapshot()
    with pytest.raises(InsufficientResource):
        TransitionEngine(kb, probes=probes()).fire(greedy, world)
    assert world.snapshot() == before


def test_budget_rolls_back(kb, world):
    (t,) = kif.parse("(=> (attribute ?X DeviceOn) (exists (?Y) (and (attribute ?Y DeviceOn) (next ?X ?Y))))")
    engine = TransitionEngine(kb, rules=compile_rules(t), probes=[], max_rounds=3)
    before = world.snapshot()
    with pytest.raises(ClosureBudgetExceeded):
        engine.fire(ON, world)
    assert world.snapshot() == before


def test_process_entities_feed_rules(kb, world):
    on = toggle("TurningOnDevice", "DeviceOff", "DeviceOn", process=("TurningOnDevice", "sw"))
    engine = TransitionEngine(kb, probes=probes())
    record = engine.fire(on, world)
    assert record.outcome is Outcome.COMMITTED and record.closure_rounds == 1
    assert world.has("instance", "TurningOnDevice-1", "TurningOnDevice")
    assert world.has("holdsDuring", "interval-0", ("attribute", "sw", "DeviceOff"))
    assert world.has("holdsDuring", "interval-1", ("attribute", "sw", "DeviceOn"))


def test_skip_policy_only_skips_unchanged_repeats(kb, world):
    world.set_resource("Gasoline", 5)
    burn = Transition("Burn", consumes=[ResourceQuantity("Gasoline", 1)])
    engine = TransitionEngine(kb, probes=probes(), policy=ValidationPolicy.SKIP_IF_REPEAT_UNCHANGED)
    records = [engine.fire(burn, world, activity="a") for _ in range(3)]
    assert [r.validated for r in records] == [True, False, False]
    assert engine.fire(burn, world, activity="b").validated   # another activity intervened
    assert engine.fire(burn, world, activity="a").validated


def test_partition_probe_exhaustiveness(kb):
    store = {("instance", "sw", "Switch"), ("instance", "sw2", "Switch"), ("attribute", "sw2", "DeviceOn")}
    (report,) = run_probe_partition("DeviceStateAttribute", store, kb, applicable_class="Switch")
    assert report.entity == "sw" and "no member" in report.message
    assert run_probe_partition("DeviceStateAttribute", store, kb) == []


@settings(max_examples=100, deadline=None)
@given(st.sets(st.tuples(st.just("attribute"), st.sampled_from(["a", "b", "c"]),
                         st.sampled_from(["DeviceOn", "DeviceOff", "EngineOn", "Open"]))))
def test_partition_probe_against_counting(kb, store):
    members = kb.partitions["DeviceStateAttribute"].members
    expected = {e for e, n in exclusivity_oracle(store, members).items() if n > 1}
    reports = run_probe_partition("DeviceStateAttribute", store, kb)
    assert {r.entity for r in reports} == expected


def test_mutual_exclusion(kb):
    probe = MutualExclusion(("attribute", Variable("P"), "Hot"), ("attribute", Variable("P"), "Wet"))
    store = {("attribute", "x", "Hot"), ("attribute", "x", "Wet"), ("attribute", "y", "Hot")}
    (report,) = probe.run(store, kb)
    assert report.entity == "x"


def test_conflict_report_needs_facts():
    with pytest.raises(ValueError):
        ConflictReport("p", (), None, 0, "nothing")


# -- scheduler ----------------------------------------------------------------

def flipper(n, start=0):
    def script(world):
        for i in range(n):
            yield Request(ON if i % 2 == 0 else OFF, not_before=start + i)
    return script


def test_schedule_timers_and_completion(kb, world):
    engine = TransitionEngine(kb, probes=probes())
    trace = schedule([Activity("flip", flipper(3, start=5))], world, engine)
    assert [r.step for r in trace.records] == [5, 6, 7]
    assert trace.halt is HaltReason.SCHEDULE_COMPLETE
    assert all(LINE.match(line) for line in trace.lines())


def test_schedule_halt_reason_from_script(kb, world):
    def stopper(world):
        yield Request(ON)
        return HaltReason.SWITCH_OFF
    trace = schedule([Activity("s", stopper)], world, TransitionEngine(kb, probes=probes()))
    assert trace.halt is HaltReason.SWITCH_OFF


def test_schedule_max_steps(kb, world):
    def forever(world):
        while True:
            yield Request(ON)
            yield Request(OFF)
    trace = schedule([Activity("f", forever)], world, TransitionEngine(kb, probes=probes()), max_steps=7)
    assert trace.halt is HaltReason.MAX_STEPS and len(trace.records) == 7


def test_deadlock(kb, world):
    def waiter(world):
        yield Request(ON, wait_until=lambda snap: False)
    with pytest.raises(Deadlock):
        schedule([Activity("w", waiter)], world, TransitionEngine(kb, probes=probes()))


def test_schedule_is_seeded(kb):
    def run(seed):
        w = Microworld(kb)
        for i in range(3):
            w.instantiate("Switch", f"s{i}")
            w.connect("attribute", f"s{i}", "DeviceOff")

        def act(i):
            on = Transition(f"On{i}", guards=[TriplePresent("attribute", f"s{i}", "DeviceOff")],
                            disconnects=[("attribute", f"s{i}", "DeviceOff")],
                            connects=[("attribute", f"s{i}", "DeviceOn")])
            off = Transition(f"Off{i}", guards=[TriplePresent("attribute", f"s{i}", "DeviceOn")],
                             disconnects=[("attribute", f"s{i}", "DeviceOn")],
                             connects=[("attribute", f"s{i}", "DeviceOff")])

            def script(world):
                for _ in range(3):
                    yield Request(on)
                    yield Request(off)
            return Activity(f"a{i}", script)

        return schedule([act(i) for i in range(3)], w, TransitionEngine(kb, probes=[]), seed=seed).render()

    assert run(3) == run(3)
    assert len({run(s) for s in range(6)}) > 1
