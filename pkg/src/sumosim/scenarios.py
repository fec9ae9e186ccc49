"""The ignition-switch and 4-stroke-engine demonstrations."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .kif import Variable
from .ontology import KnowledgeBase, load_shipped
from .transitions import (
    Activity, DomainConformance, HaltReason, MutualExclusion, Outcome, PartitionExclusivity,
    Predicate, Request, ResourceAtLeast, Trace, TransitionEngine, Transition, TriplePresent,
    ValidationPolicy, schedule,
)
from .world import Microworld, ResourceQuantity

__all__ = [
    "IgnitionScenario", "EngineScenario", "StrokePhase", "HaltReason", "IgnitionRun",
    "EngineRun", "build_ignition_world", "ignition_transitions", "ignition_probes",
    "run_ignition", "build_engine_world", "engine_transitions", "engine_probes",
    "run_engine", "ScenarioError",
]

ENGINE = "thisGasEngine"
SWITCH = "ignitionSwitch"
PISTON = "piston1"
INTAKE_VALVE = "intakeValve"
EXHAUST_VALVE = "exhaustValve"
CRANKSHAFT = "crankshaft"
FUEL = "Gasoline"
EXHAUST = "Exhaust"


class ScenarioError(Exception):
    pass


class StrokePhase(enum.Enum):
    INTAKE = "Intake"
    COMPRESSION = "Compression"
    COMBUSTION = "Combustion"
    EXHAUST = "Exhaust"

    @property
    def attribute(self) -> str:
        return "Stroke" + self.value

    def successor(self) -> "StrokePhase":
        order = list(StrokePhase)
        return order[(order.index(self) + 1) % len(order)]


def _kb(kb: KnowledgeBase | None) -> KnowledgeBase:
    return kb if kb is not None else load_shipped()


# -- ignition ---------------------------------------------------------------

@dataclass(frozen=True)
class IgnitionScenario:
    toggle_schedule: tuple = ()
    sabotage_at: int | None = None
    initial_state: str = "Off"

    def __post_init__(self):
        object.__setattr__(self, "toggle_schedule", tuple(self.toggle_schedule))
        steps = self.toggle_schedule
        if any(b <= a for a, b in zip(steps, steps[1:])) or any(s < 0 for s in steps):
            raise ValueError("toggle schedule must be strictly increasing and non-negative")
        if self.initial_state != "Off":
            raise ValueError("the ignition scenario always starts Off")

    @classmethod
    def toggles(cls, n: int, sabotage_at: int | None = None) -> "IgnitionScenario":
        return cls(tuple(range(n)), sabotage_at)


def build_ignition_world(kb: KnowledgeBase | None = None) -> Microworld:
    world = Microworld(_kb(kb), "ignition", regions=("bay1",))
    world.instantiate("GasolineEngine", ENGINE, "bay1")
    world.connect("attribute", ENGINE, "EngineOff")
    return world


def _switching(name: str, device: str, before: str, after: str, also=()) -> Transition:
    """A TurningOn/OffDevice transition on ``device`` plus attribute swaps in ``also``."""
    swaps = [(device, before, after), *also]
    return Transition(
        name,
        guards=[TriplePresent("attribute", device, before)],
        disconnects=[("attribute", e, old) for e, old, _ in swaps],
        connects=[("attribute", e, new) for e, _, new in swaps],
        process=(name, device),
        begin_attributes=[(device, before)],
        end_attributes=[(device, after)],
    )


def ignition_transitions(engine: str = ENGINE) -> dict:
    return {
        "on": _switching("TurningOnDevice", engine, "EngineOff", "EngineOn"),
        "off": _switching("TurningOffDevice", engine, "EngineOn", "EngineOff"),
        "sabotage": Transition(
            "SabotageEngineOn",
            guards=[TriplePresent("attribute", engine, "EngineOff")],
            connects=[("attribute", engine, "EngineOn")],
        ),
    }


def ignition_probes() -> list:
    return [PartitionExclusivity("EngineState", "Engine"), DomainConformance()]


@dataclass
class IgnitionRun:
    trace: Trace
    world: Microworld
    halt: HaltReason

    @property
    def state(self) -> str:
        held = [a for a in self.world.objects("attribute", ENGINE) if a in ("EngineOn", "EngineOff")]
        return ",".join(held)

    def summary(self) -> str:
        committed = len(self.trace.committed())
        return f"halt={self.halt.value} transitions={committed} state={self.state}"


def run_ignition(s: IgnitionScenario, seed: int = 0, kb: KnowledgeBase | None = None,
                 policy=ValidationPolicy.ALWAYS, max_steps: int = 10000) -> IgnitionRun:
    kb = _kb(kb)
    world = build_ignition_world(kb)
    engine = TransitionEngine(kb, probes=ignition_probes(), policy=policy)
    engine.validate(world)
    moves = ignition_transitions()
    events = [(step, 1, "toggle") for step in s.toggle_schedule]
    if s.sabotage_at is not None:
        events.append((s.sabotage_at, 0, "sabotage"))

    def script(world):
        toggles = 0
        for step, _, kind in sorted(events):
            if kind == "sabotage":
                t = moves["sabotage"]
            else:
                t = moves["on"] if toggles % 2 == 0 else moves["off"]
                toggles += 1
            yield Request(t, not_before=step)

    trace = schedule([Activity("ignition", script)], world, engine, seed, max_steps)
    return IgnitionRun(trace, world, trace.halt)


# -- 4-stroke engine --------------------------------------------------------

@dataclass(frozen=True)
class EngineScenario:
    initial_fuel: int
    switch_off_at_step: int | None = None
    seed: int = 0
    max_steps: int = 10000

    def __post_init__(self):
        if self.initial_fuel < 0:
            raise ValueError("initial fuel must be >= 0")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")


def build_engine_world(kb: KnowledgeBase | None = None, fuel: int = 0) -> Microworld:
    world = Microworld(_kb(kb), "engine", regions=("bay1", "bay2", "dashboard"))
    world.instantiate("GasolineEngine", ENGINE, "bay1")
    world.instantiate("Piston", PISTON, "bay1")
    world.instantiate("PistonHead", "pistonHead1", "bay1")
    world.instantiate("PistonRod", "pistonRod1", "bay1")
    world.instantiate("IntakeValve", INTAKE_VALVE, "bay1")
    world.instantiate("ExhaustValve", EXHAUST_VALVE, "bay1")
    world.instantiate("SparkPlug", "sparkPlug", "bay1")
    world.instantiate("Crankshaft", CRANKSHAFT, "bay1")
    world.instantiate("IgnitionSwitch", SWITCH, "dashboard")

    world.add_assembly(PISTON, {"pistonHead1", "pistonRod1"})
    world.add_assembly(ENGINE, {PISTON, INTAKE_VALVE, EXHAUST_VALVE, "sparkPlug", CRANKSHAFT})
    for whole, assembly in sorted(world.assemblies.items()):
        for part in sorted(assembly.parts):
            world.connect("part", part, whole)

    world.connect("attribute", ENGINE, "EngineOff")
    world.connect("attribute", SWITCH, "DeviceOff")
    # the piston starts as if an exhaust stroke just finished
    world.connect("attribute", PISTON, StrokePhase.EXHAUST.attribute)
    world.connect("status", INTAKE_VALVE, "Closed")
    world.connect("status", EXHAUST_VALVE, "Open")
    world.connect("rotationCount", CRANKSHAFT, 0)

    world.set_resource(FUEL, fuel)
    world.set_resource(EXHAUST, 0)
    world.add_system(ENGINE, inputs={FUEL}, outputs={EXHAUST})
    return world


SWITCH_ON_GUARD = TriplePresent("attribute", SWITCH, "DeviceOn")
FUEL_GUARD = ResourceAtLeast(FUEL, 1)


def _phase(p: StrokePhase):
    return ("attribute", PISTON, p.attribute)


def engine_transitions() -> dict:
    intake, compression, combustion, exhaust = (_phase(p) for p in StrokePhase)
    return {
        "on": _switching("TurningOnDevice", SWITCH, "DeviceOff", "DeviceOn",
                         also=[(ENGINE, "EngineOff", "EngineOn")]),
        "off": _switching("TurningOffDevice", SWITCH, "DeviceOn", "DeviceOff",
                          also=[(ENGINE, "EngineOn", "EngineOff")]),
        "IntakeStroke": Transition(
            "IntakeStroke",
            guards=[SWITCH_ON_GUARD, FUEL_GUARD, TriplePresent(*exhaust)],
            disconnects=[exhaust, ("status", EXHAUST_VALVE, "Open"), ("status", INTAKE_VALVE, "Closed")],
            connects=[intake, ("status", EXHAUST_VALVE, "Closed"), ("status", INTAKE_VALVE, "Open")],
            consumes=[ResourceQuantity(FUEL, 1)],
        ),
        "CompressionStroke": Transition(
            "CompressionStroke",
            guards=[TriplePresent(*intake)],
            disconnects=[intake, ("status", INTAKE_VALVE, "Open")],
            connects=[compression, ("status", INTAKE_VALVE, "Closed")],
        ),
        "SparkAndCombustion": Transition(
            "SparkAndCombustion",
            guards=[Predicate("pistonAt Compression", lambda snap: snap.has(*compression))],
            disconnects=[compression],
            connects=[combustion],
            increments=[("rotationCount", CRANKSHAFT)],
        ),
        "ExhaustStroke": Transition(
            "ExhaustStroke",
            guards=[TriplePresent(*combustion)],
            disconnects=[combustion, ("status", EXHAUST_VALVE, "Closed")],
            connects=[exhaust, ("status", EXHAUST_VALVE, "Open")],
            produces=[ResourceQuantity(EXHAUST, 1)],
        ),
    }


STROKES = ("IntakeStroke", "CompressionStroke", "SparkAndCombustion", "ExhaustStroke")


def engine_probes() -> list:
    burning = ("attribute", Variable("P"), StrokePhase.COMBUSTION.attribute)
    return [
        PartitionExclusivity("EngineState", "Engine"),
        PartitionExclusivity("DeviceStateAttribute", "Switch"),
        PartitionExclusivity("PistonPhase", "Piston"),
        PartitionExclusivity("ValvePosition", "Valve", predicate="status"),
        MutualExclusion(burning, ("status", EXHAUST_VALVE, "Open")),
        MutualExclusion(burning, ("status", INTAKE_VALVE, "Open")),
        DomainConformance(),
    ]


def _switched_on(snap) -> bool:
    return any(len(f) == 3 and f[0] == "instance" and f[2] == "TurningOnDevice"
               for f in snap.explicit)


def ignition_script(moves: dict, switch_off_at: int | None):
    def script(world):
        yield Request(moves["on"])
        if switch_off_at is not None:
            yield Request(moves["off"], not_before=switch_off_at)
    return script


def piston_script(moves: dict, strokes=STROKES):
    """Loop full cycles; the cycle-start checks are the guards of the first stroke."""
    def script(world):
        wait = _switched_on
        while True:
            record = yield Request(moves[strokes[0]], wait_until=wait)
            wait = None
            if record.outcome is Outcome.REJECTED_GUARDS:
                failed = {g for g, ok in record.guard_results if not ok}
                if SWITCH_ON_GUARD in failed:
                    return HaltReason.SWITCH_OFF
                if FUEL_GUARD in failed:
                    return HaltReason.FUEL_EXHAUSTED
                raise ScenarioError(f"cycle start rejected: {sorted(map(str, failed))}")
            for name in strokes[1:]:
                record = yield Request(moves[name])
                if record.outcome is Outcome.REJECTED_GUARDS:
                    raise ScenarioError(f"{name} rejected mid-cycle at step {record.step}")
    return script


@dataclass
class EngineRun:
    trace: Trace
    world: Microworld
    halt: HaltReason
    initial_fuel: int
    engine: TransitionEngine = field(repr=False)

    def strokes(self) -> list[str]:
        return [r.transition for r in self.trace.committed("piston")]

    @property
    def cycles(self) -> int:
        return self.strokes().count("ExhaustStroke")

    @property
    def combustions(self) -> int:
        return self.strokes().count("SparkAndCombustion")

    @property
    def fuel_remaining(self) -> int:
        return self.world.resource(FUEL)

    def summary(self) -> str:
        return f"halt={self.halt.value} cycles={self.cycles} fuel_remaining={self.fuel_remaining}"


def run_engine(s: EngineScenario, kb: KnowledgeBase | None = None,
               policy=ValidationPolicy.ALWAYS, activities=None) -> EngineRun:
    """Run the ignition and piston activities together under the scheduler.

    ``activities`` replaces the default pair, e.g. with a mutated piston script.
    """
    kb = _kb(kb)
    world = build_engine_world(kb, s.initial_fuel)
    engine = TransitionEngine(kb, probes=engine_probes(), policy=policy)
    engine.validate(world)
    moves = engine_transitions()
    if activities is None:
        activities = [
            Activity("ignition", ignition_script(moves, s.switch_off_at_step)),
            Activity("piston", piston_script(moves)),
        ]
    trace = schedule(activities, world, engine, s.seed, s.max_steps)
    return EngineRun(trace, world, trace.halt, s.initial_fuel, engine)
