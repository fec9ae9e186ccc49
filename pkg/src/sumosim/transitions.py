"""Guarded atomic transitions, conflict probes and a seeded activity scheduler."""
from __future__ import annotations

import enum
import random
import threading
from dataclasses import dataclass, field
from typing import Callable, Generator, Iterable

from .facts import fact_key, show, sorted_facts, substitute
from .ontology import KnowledgeBase, Partition, check_domains, instance_index
from .rules import (
    DEFAULT_MAX_ROUNDS, ClosureBudgetExceeded, SkolemRegistry, detect_conflicts,
    infer_closure, match,
)
from .world import InsufficientResource, Microworld, WorldError, WorldSnapshot


# -- guards -----------------------------------------------------------------

@dataclass(frozen=True)
class TriplePresent:
    pred: str
    subj: str
    obj: object

    def holds(self, snap: WorldSnapshot) -> bool:
        return snap.has(self.pred, self.subj, self.obj)

    def __str__(self):
        return f"present{show((self.pred, self.subj, self.obj))}"


@dataclass(frozen=True)
class TripleAbsent:
    pred: str
    subj: str
    obj: object

    def holds(self, snap: WorldSnapshot) -> bool:
        return not snap.has(self.pred, self.subj, self.obj)

    def __str__(self):
        return f"absent{show((self.pred, self.subj, self.obj))}"


@dataclass(frozen=True)
class ResourceAtLeast:
    resource: str
    amount: int

    def holds(self, snap: WorldSnapshot) -> bool:
        return snap.resource(self.resource) >= self.amount

    def __str__(self):
        return f"{self.resource}>={self.amount}"


@dataclass(frozen=True)
class Predicate:
    """A named check over a world snapshot."""
    name: str
    check: Callable[[WorldSnapshot], bool] = field(compare=False)

    def holds(self, snap: WorldSnapshot) -> bool:
        return bool(self.check(snap))

    def __str__(self):
        return self.name


Guard = TriplePresent | TripleAbsent | ResourceAtLeast | Predicate


@dataclass(frozen=True)
class GuardCheck:
    results: tuple    # (guard, passed) in declaration order

    @property
    def passed(self) -> bool:
        return all(ok for _, ok in self.results)

    @property
    def failures(self) -> tuple:
        return tuple(g for g, ok in self.results if not ok)

    def __bool__(self):
        return self.passed


# -- transitions ------------------------------------------------------------

@dataclass(frozen=True)
class Transition:
    """One atomic state change.

    ``process`` is an optional ``(process class, patient)`` pair: firing
    instantiates a process entity with begin/end interval facts so that
    rules about the process (such as the device-switching rules) can fire.
    ``increments`` lists ``(pred, subj)`` counters bumped by one.
    """
    name: str
    guards: tuple = ()
    disconnects: tuple = ()
    connects: tuple = ()
    consumes: tuple = ()
    produces: tuple = ()
    increments: tuple = ()
    process: tuple | None = None
    begin_attributes: tuple = ()
    end_attributes: tuple = ()

    def __post_init__(self):
        for name in ("guards", "disconnects", "connects", "consumes", "produces",
                     "increments", "begin_attributes", "end_attributes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        both = set(self.disconnects) & set(self.connects)
        if both:
            raise ValueError(f"{self.name}: {show(sorted(both, key=fact_key)[0])} "
                             "is both disconnected and connected")

    @property
    def delta(self) -> tuple:
        return (self.disconnects, self.connects, self.consumes, self.produces,
                self.increments, self.process, self.begin_attributes, self.end_attributes)


def check_guards(t: Transition, world) -> GuardCheck:
    """Evaluate every guard against one snapshot; all failures are reported."""
    snap = world.snapshot() if isinstance(world, Microworld) else world
    return GuardCheck(tuple((g, g.holds(snap)) for g in t.guards))


# -- probes -----------------------------------------------------------------

@dataclass(frozen=True)
class ConflictReport:
    probe: str
    offending_facts: tuple
    entity: object
    tick: int
    message: str

    def __post_init__(self):
        if not self.offending_facts:
            raise ValueError("a conflict report needs at least one offending fact")

    def __str__(self):
        facts = " ".join(show(f) for f in self.offending_facts)
        who = f" entity={self.entity}" if self.entity is not None else ""
        return f"{self.probe} tick={self.tick}{who}: {self.message} {facts}"


def run_probe_partition(partition: Partition, store: Iterable, kb: KnowledgeBase, tick: int = 0,
                        applicable_class: str | None = None,
                        predicate: str = "attribute") -> list[ConflictReport]:
    """Exactly-one check for a partition.

    Any entity bearing two or more members is reported.  Entities of
    ``applicable_class`` must also bear one member, so bearing none is
    reported for them.
    """
    if isinstance(partition, str):
        partition = kb.partitions[partition]
    members = set(partition.members)
    store = frozenset(store)
    bearing: dict = {}
    for fact in store:
        if len(fact) == 3 and fact[0] == predicate and fact[2] in members:
            bearing.setdefault(fact[1], []).append(fact)
    required: dict = {}
    if applicable_class is not None:
        for entity, classes in instance_index(store).items():
            for cls in sorted(classes, key=fact_key):
                if isinstance(cls, str) and applicable_class in kb.ancestors(cls):
                    required.setdefault(entity, ("instance", entity, cls))
    reports = []
    for entity in sorted(set(bearing) | set(required), key=fact_key):
        facts = sorted_facts(bearing.get(entity, ()))
        if len(facts) == 1:
            continue
        if facts:
            message = f"{len(facts)} members of {partition.parent} held at once"
        else:
            message = f"no member of {partition.parent} held"
            facts = [required[entity]]
        reports.append(ConflictReport("PartitionExclusivity", tuple(facts), entity, tick, message))
    return reports


@dataclass(frozen=True)
class PartitionExclusivity:
    partition: str
    applicable_class: str | None = None
    predicate: str = "attribute"
    kind = "PartitionExclusivity"

    def run(self, store, kb, tick=0):
        return run_probe_partition(kb.partitions[self.partition], store, kb, tick,
                                   self.applicable_class, self.predicate)


@dataclass(frozen=True)
class DomainConformance:
    kind = "DomainConformance"

    def run(self, store, kb, tick=0):
        store = frozenset(store)
        index = instance_index(store)

        def classes_of(term):
            return kb.classes_of(term, index.get(term, ()) if isinstance(term, str) else ())

        reports = []
        for fact in sorted_facts(store):
            if len(fact) < 2 or fact[0] not in kb.predicates:
                continue
            for v in check_domains(fact, kb, classes_of).violations:
                reports.append(ConflictReport(self.kind, (fact,), v.argument, tick, str(v)))
        return reports


@dataclass(frozen=True)
class MutualExclusion:
    """Two fact patterns that must never hold together."""
    first: tuple
    second: tuple
    kind = "MutualExclusion"

    def run(self, store, kb, tick=0):
        reports = []
        for binding in match((self.first, self.second), store, kb):
            a, b = substitute(self.first, binding), substitute(self.second, binding)
            entity = a[1] if len(a) > 1 else None
            reports.append(ConflictReport(self.kind, (a, b), entity, tick,
                                          f"{show(a)} excludes {show(b)}"))
        return reports


def standard_probes(kb: KnowledgeBase) -> list:
    """Disjointness for every declared partition plus domain conformance."""
    return [PartitionExclusivity(p) for p in sorted(kb.partitions)] + [DomainConformance()]


# -- firing -----------------------------------------------------------------

class Outcome(enum.Enum):
    COMMITTED = "Committed"
    REJECTED_GUARDS = "RejectedGuards"
    HALT = "CommittedWithConflicts-Halt"


class ValidationPolicy(enum.Enum):
    ALWAYS = "always"
    SKIP_IF_REPEAT_UNCHANGED = "skip"


@dataclass(frozen=True)
class TransitionRecord:
    transition: str
    activity: str
    step: int
    tick_before: int
    tick_after: int
    guard_results: tuple
    closure_rounds: int
    conflicts: tuple
    outcome: Outcome
    validated: bool
    before: WorldSnapshot = field(repr=False, compare=False)
    after: WorldSnapshot = field(repr=False, compare=False)

    def line(self) -> str:
        return (f"step={self.step} tick={self.tick_after} activity={self.activity} "
                f"transition={self.transition} outcome={self.outcome.value} "
                f"conflicts={len(self.conflicts)}")


def interval(tick: int) -> str:
    return f"interval-{tick}"


class TransitionEngine:
    """Serializes transition commits against one knowledge base.

    Holds the skolem registry shared by every closure rebuild and the commit
    history the skip policy consults.
    """

    def __init__(self, kb: KnowledgeBase, rules=None, probes=None,
                 policy: ValidationPolicy = ValidationPolicy.ALWAYS,
                 max_rounds: int = DEFAULT_MAX_ROUNDS):
        self.kb = kb
        self.rules = list(kb.rules if rules is None else rules)
        self.probes = list(standard_probes(kb) if probes is None else probes)
        self.policy = ValidationPolicy(policy)
        self.max_rounds = max_rounds
        self.registry = SkolemRegistry()
        self.history: list = []   # (activity, transition) per commit
        self._lock = threading.Lock()

    def validate(self, world: Microworld) -> tuple[int, list]:
        """Rebuild the closure into ``world`` and run every probe."""
        closure = infer_closure(world.explicit, self.rules, self.kb, self.registry, self.max_rounds)
        world.set_inferred(closure.store)
        return closure.rounds, detect_conflicts(closure.store, self.probes, self.kb, world.tick)

    def _may_skip(self, t: Transition, activity: str) -> bool:
        if self.policy is not ValidationPolicy.SKIP_IF_REPEAT_UNCHANGED:
            return False
        for who, previous in reversed(self.history):
            if who != activity:
                return False
            if previous.name == t.name:
                return previous.delta == t.delta
        return False

    def fire(self, t: Transition, world: Microworld, activity: str = "main",
             step: int = 0) -> TransitionRecord:
        with self._lock:
            return self._fire(t, world, activity, step)

    def _fire(self, t, world, activity, step):
        before = world.snapshot()
        guards = check_guards(t, before)
        if not guards.passed:
            return TransitionRecord(t.name, activity, step, before.tick, before.tick,
                                    guards.results, 0, (), Outcome.REJECTED_GUARDS, False,
                                    before, before)
        try:
            self._apply(t, world)
            skip = self._may_skip(t, activity)
            rounds, conflicts = (0, []) if skip else self.validate(world)
        except (InsufficientResource, ClosureBudgetExceeded, WorldError):
            world.restore(before)
            raise
        self.history.append((activity, t))
        outcome = Outcome.HALT if conflicts else Outcome.COMMITTED
        return TransitionRecord(t.name, activity, step, before.tick, world.tick, guards.results,
                                rounds, tuple(conflicts), outcome, not skip,
                                before, world.snapshot())

    def _apply(self, t: Transition, world: Microworld):
        for fact in t.disconnects:
            world.disconnect(*fact)
        for fact in t.connects:
            world.connect(*fact)
        for q in t.consumes:
            world.consume(q.resource, q.amount)
        for q in t.produces:
            world.produce(q.resource, q.amount)
        for pred, subj in t.increments:
            current = [o for o in world.objects(pred, subj) if isinstance(o, int)]
            count = current[0] if current else 0
            if current:
                world.disconnect(pred, subj, count)
            world.connect(pred, subj, count + 1)
        tick_before = world.tick
        world.advance()
        if t.process is None and not t.begin_attributes and not t.end_attributes:
            return
        begin, end = interval(tick_before), interval(world.tick)
        for name in (begin, end):
            if name not in world.entities:
                world.instantiate("TimeInterval", name)
        if t.process is not None:
            process_class, patient = t.process
            pid = f"{t.name}-{world.tick}"
            world.instantiate(process_class, pid)
            world.connect("patient", pid, patient)
            world.connect("beginInterval", pid, begin)
            world.connect("endInterval", pid, end)
        for entity, attr in t.begin_attributes:
            world.connect("holdsDuring", begin, ("attribute", entity, attr))
        for entity, attr in t.end_attributes:
            world.connect("holdsDuring", end, ("attribute", entity, attr))


# -- scheduling -------------------------------------------------------------

class HaltReason(enum.Enum):
    FUEL_EXHAUSTED = "FuelExhausted"
    SWITCH_OFF = "SwitchOff"
    CONFLICT_DETECTED = "ConflictDetected"
    MAX_STEPS = "MaxSteps"
    SCHEDULE_COMPLETE = "ScheduleComplete"


class Deadlock(Exception):
    def __init__(self, step: int, blocked: list[str]):
        super().__init__(f"step {step}: every activity is blocked ({', '.join(blocked)})")
        self.step = step
        self.blocked = blocked


@dataclass(frozen=True)
class Request:
    """Ask the scheduler to fire ``transition`` once the activity may proceed.

    ``not_before`` is a timer on the scheduler's step clock; ``wait_until``
    is a condition on the current world snapshot.
    """
    transition: Transition
    not_before: int | None = None
    wait_until: Callable[[WorldSnapshot], bool] | None = field(default=None, compare=False)

    def ready(self, snap: WorldSnapshot, step: int) -> bool:
        if self.not_before is not None and step < self.not_before:
            return False
        return self.wait_until is None or bool(self.wait_until(snap))


Script = Callable[[Microworld], Generator[Request, TransitionRecord, "HaltReason | None"]]


@dataclass(frozen=True)
class Activity:
    """A named script: a generator yielding :class:`Request` objects.

    The scheduler sends back the :class:`TransitionRecord` of each request.
    Returning a :class:`HaltReason` ends the whole run; returning ``None``
    just retires the activity.
    """
    name: str
    script: Script


@dataclass
class Trace:
    records: list = field(default_factory=list)
    halt: HaltReason | None = None
    steps: int = 0

    def lines(self) -> list[str]:
        return [r.line() for r in self.records]

    def render(self) -> str:
        return "".join(line + "\n" for line in self.lines())

    def committed(self, activity: str | None = None) -> list:
        return [r for r in self.records
                if r.outcome is not Outcome.REJECTED_GUARDS
                and (activity is None or r.activity == activity)]


def schedule(activities: list[Activity], world: Microworld, engine: TransitionEngine,
             seed: int = 0, max_steps: int = 10000) -> Trace:
    """Run activities to a halt, interleaving whole transitions.

    Whenever more than one activity can proceed, a ``random.Random(seed)``
    picks among them in list order, so the trace depends only on the world,
    the scripts, the seed and the policy.
    """
    if not activities:
        raise ValueError("schedule needs at least one activity")
    rng = random.Random(seed)
    trace = Trace()
    live: list = []
    for activity in activities:
        gen = activity.script(world)
        try:
            live.append([activity.name, gen, next(gen)])
        except StopIteration as stop:
            if stop.value is not None:
                trace.halt = HaltReason(stop.value)
                return trace
    step = 0
    while live:
        if step >= max_steps:
            trace.halt = HaltReason.MAX_STEPS
            break
        snap = world.snapshot()
        runnable = [slot for slot in live if slot[2].ready(snap, step)]
        if not runnable:
            timers = [slot[2].not_before for slot in live
                      if slot[2].not_before is not None and slot[2].not_before > step]
            if not timers:
                raise Deadlock(step, [slot[0] for slot in live])
            step = min(timers)
            continue
        slot = runnable[rng.randrange(len(runnable))] if len(runnable) > 1 else runnable[0]
        name, gen, request = slot
        record = engine.fire(request.transition, world, activity=name, step=step)
        trace.records.append(record)
        step += 1
        if record.outcome is Outcome.HALT:
            trace.halt = HaltReason.CONFLICT_DETECTED
            break
        try:
            slot[2] = gen.send(record)
        except StopIteration as stop:
            live.remove(slot)
            if stop.value is not None:
                trace.halt = HaltReason(stop.value)
                break
    else:
        trace.halt = HaltReason.SCHEDULE_COMPLETE
    trace.steps = step
    return trace
