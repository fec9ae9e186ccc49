"""The microworld: registered entities, regions, assemblies, resources and
the active relationship store.

Explicit facts come only from :meth:`Microworld.instantiate` and
:meth:`Microworld.connect` (minus :meth:`Microworld.disconnect`).  Inferred
facts are replaced wholesale by :meth:`Microworld.set_inferred` when a
closure is rebuilt and can never be removed one at a time.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from decimal import Decimal

from .facts import fact_key, show
from .kif import StringLiteral
from .ontology import KnowledgeBase, check_domains, instance_index
from .rules import SKOLEM_PREFIX, Provenance

DEFAULT_REGION = "region0"


class WorldError(Exception):
    pass


class DuplicateEntity(WorldError):
    pass


class UnknownClass(WorldError):
    pass


class UnknownEntity(WorldError):
    pass


class UnknownRegion(WorldError):
    pass


class MissingTriple(WorldError):
    pass


class CannotRemoveInferred(WorldError):
    pass


class AssemblyError(WorldError):
    pass


class DomainViolationError(WorldError):
    def __init__(self, fact, violations):
        super().__init__("; ".join(str(v) for v in violations))
        self.fact = fact
        self.violations = violations


class InsufficientResource(WorldError):
    def __init__(self, resource: str, have: int, want: int):
        super().__init__(f"{resource}: have {have}, want {want}")
        self.resource = resource
        self.have = have
        self.want = want


@dataclass(frozen=True)
class Assembly:
    whole: str
    parts: frozenset

    def __post_init__(self):
        if not self.parts:
            raise AssemblyError(f"assembly {self.whole} has no parts")
        if self.whole in self.parts:
            raise AssemblyError(f"{self.whole} cannot be a part of itself")


@dataclass(frozen=True)
class SystemBoundary:
    system: str
    inputs: frozenset
    outputs: frozenset

    def __post_init__(self):
        if self.inputs & self.outputs:
            raise WorldError(f"{self.system}: {sorted(self.inputs & self.outputs)} "
                             "is both an input and an output")


@dataclass(frozen=True)
class ResourceQuantity:
    resource: str
    amount: int

    def __post_init__(self):
        if self.amount < 0:
            raise ValueError(f"negative quantity of {self.resource}")


_sequence = itertools.count()


@dataclass(frozen=True, eq=False)
class WorldSnapshot:
    """Immutable copy of a world's state.  Equality ignores the label."""
    id: str
    tick: int
    regions: frozenset
    entities: tuple          # sorted (entity, frozenset of classes)
    entity_region: tuple     # sorted (entity, region)
    explicit: frozenset
    inferred: frozenset
    assemblies: frozenset
    systems: frozenset
    resources: tuple         # sorted (resource, amount)
    sequence: int = field(default=0)

    @property
    def label(self) -> tuple:
        return (self.tick, self.sequence)

    @property
    def facts(self) -> frozenset:
        return self.explicit | self.inferred

    def _state(self):
        return (self.id, self.tick, self.regions, self.entities, self.entity_region,
                self.explicit, self.inferred, self.assemblies, self.systems, self.resources)

    def __eq__(self, other):
        if not isinstance(other, WorldSnapshot):
            return NotImplemented
        return self._state() == other._state()

    def __hash__(self):
        return hash(self._state())

    def has(self, *fact) -> bool:
        return tuple(fact) in self.explicit or tuple(fact) in self.inferred

    def resource(self, name: str) -> int:
        return dict(self.resources).get(name, 0)

    def region_of(self, entity: str) -> str | None:
        return dict(self.entity_region).get(entity)


class Microworld:
    """Mutable simulation frame.  Construction-time mutation is direct; during a
    run every change goes through the transition engine."""

    def __init__(self, kb: KnowledgeBase, id: str = "world", regions=(DEFAULT_REGION,)):
        self.kb = kb
        self.id = id
        self.tick = 0
        regions = tuple(regions)
        if not regions:
            raise ValueError("a microworld needs at least one region")
        self.home_region = regions[0]
        self.regions: set = set(regions)
        self.entities: dict = {}
        self.entity_region: dict = {}
        self.explicit: set = set()
        self.inferred: set = set()
        self.assemblies: dict = {}
        self.systems: dict = {}
        self.resources: dict = {}
        self.world_entity = f"{id}-frame"
        self.entities[self.world_entity] = {"Region"}
        self.entity_region[self.world_entity] = self.home_region
        self.explicit.add(("instance", self.world_entity, "Region"))

    # -- queries ------------------------------------------------------------

    @property
    def facts(self) -> set:
        return self.explicit | self.inferred

    def has(self, *fact) -> bool:
        return tuple(fact) in self.explicit or tuple(fact) in self.inferred

    def provenance(self, fact) -> Provenance | None:
        if fact in self.explicit:
            return Provenance.EXPLICIT
        if fact in self.inferred:
            return Provenance.INFERRED
        return None

    def objects(self, pred: str, subj: str) -> list:
        """Sorted objects ``o`` with ``(pred subj o)`` in the store."""
        return sorted((f[2] for f in self.facts
                       if len(f) == 3 and f[0] == pred and f[1] == subj), key=fact_key)

    def classes_of(self, term) -> set:
        extra = self.entities.get(term, ()) if isinstance(term, str) else ()
        return self.kb.classes_of(term, extra)

    def resource(self, name: str) -> int:
        return self.resources.get(name, 0)

    def region_of(self, entity: str) -> str | None:
        return self.entity_region.get(entity)

    def _accepts_object(self, obj) -> bool:
        if isinstance(obj, (int, Decimal, StringLiteral, tuple)):
            return True
        return obj in self.entities or self.kb.is_known(obj)

    def _check(self, fact):
        index = instance_index(self.explicit | self.inferred | {fact})
        extra = {e: set(c) for e, c in self.entities.items()}
        for e, classes in index.items():
            extra.setdefault(e, set()).update(classes)

        def classes_of(term):
            return self.kb.classes_of(term, extra.get(term, ()) if isinstance(term, str) else ())

        result = check_domains(fact, self.kb, classes_of)
        if not result.ok:
            raise DomainViolationError(fact, result.violations)

    # -- construction -------------------------------------------------------

    def add_region(self, region: str):
        self.regions.add(region)

    def instantiate(self, cls: str, entity: str, region: str | None = None):
        if entity in self.entities:
            raise DuplicateEntity(entity)
        if entity.startswith(SKOLEM_PREFIX):
            raise WorldError(f"{entity}: the {SKOLEM_PREFIX!r} prefix is reserved for generated entities")
        if not self.kb.is_class(cls):
            raise UnknownClass(cls)
        region = region or self.home_region
        if region not in self.regions:
            raise UnknownRegion(region)
        fact = ("instance", entity, cls)
        self._check(fact)
        self.entities[entity] = {cls}
        self.entity_region[entity] = region
        self.explicit.add(fact)
        return self

    def connect(self, pred: str, subj: str, obj):
        if subj not in self.entities:
            raise UnknownEntity(subj)
        if not self._accepts_object(obj):
            raise UnknownEntity(obj)
        fact = (pred, subj, obj)
        if fact in self.explicit:
            return self
        self._check(fact)
        self.explicit.add(fact)
        if pred == "instance" and isinstance(obj, str):
            self.entities[subj].add(obj)
        return self

    def disconnect(self, pred: str, subj: str, obj):
        fact = (pred, subj, obj)
        if fact not in self.explicit:
            if fact in self.inferred:
                raise CannotRemoveInferred(show(fact))
            raise MissingTriple(show(fact))
        self.explicit.discard(fact)
        if pred == "instance" and isinstance(obj, str):
            self.entities[subj].discard(obj)
        return self

    def set_property(self, pred: str, value):
        """Record a microworld-global property (gravity, air, ...)."""
        return self.connect(pred, self.world_entity, value)

    def set_inferred(self, facts):
        self.inferred = set(facts) - self.explicit

    def add_assembly(self, whole: str, parts):
        for e in (whole, *parts):
            if e not in self.entities:
                raise UnknownEntity(e)
        assembly = Assembly(whole, frozenset(parts))
        for other in self.assemblies.values():
            clash = (other.parts & assembly.parts) - {whole}
            if other.whole != whole and clash:
                raise AssemblyError(f"{sorted(clash)} already belong to {other.whole}")
        if whole in self._part_closure(set(parts)):
            raise AssemblyError(f"assembly {whole} would contain itself")
        existing = self.assemblies.get(whole)
        if existing is not None:
            assembly = Assembly(whole, existing.parts | assembly.parts)
        self.assemblies[whole] = assembly
        self.move(whole, self.entity_region[whole])
        return self

    def add_system(self, system: str, inputs=(), outputs=()):
        if system not in self.entities:
            raise UnknownEntity(system)
        self.systems[system] = SystemBoundary(system, frozenset(inputs), frozenset(outputs))
        return self

    def set_resource(self, resource: str, amount: int):
        self.resources[resource] = ResourceQuantity(resource, amount).amount
        return self

    # -- dynamics -----------------------------------------------------------

    def _part_closure(self, roots: set) -> set:
        out = set()
        stack = list(roots)
        while stack:
            e = stack.pop()
            if e in out:
                continue
            out.add(e)
            if e in self.assemblies:
                stack.extend(self.assemblies[e].parts)
        return out

    def parts_of(self, whole: str) -> set:
        """Every direct or nested part of ``whole``."""
        return self._part_closure({whole}) - {whole}

    def move(self, whole: str, region: str):
        if whole not in self.entities:
            raise UnknownEntity(whole)
        if region not in self.regions:
            raise UnknownRegion(region)
        for e in self._part_closure({whole}):
            self.entity_region[e] = region
        return self

    def consume(self, resource: str, amount: int):
        if amount < 0:
            raise ValueError("cannot consume a negative amount")
        have = self.resources.get(resource, 0)
        if amount > have:
            raise InsufficientResource(resource, have, amount)
        if amount:
            self.resources[resource] = have - amount
        return self

    def produce(self, resource: str, amount: int):
        if amount < 0:
            raise ValueError("cannot produce a negative amount")
        self.resources[resource] = self.resources.get(resource, 0) + amount
        return self

    def advance(self, ticks: int = 1):
        if ticks < 0:
            raise ValueError("ticks never run backwards")
        self.tick += ticks

    # -- snapshots ----------------------------------------------------------

    def snapshot(self) -> WorldSnapshot:
        return WorldSnapshot(
            id=self.id,
            tick=self.tick,
            regions=frozenset(self.regions),
            entities=tuple(sorted((e, frozenset(c)) for e, c in self.entities.items())),
            entity_region=tuple(sorted(self.entity_region.items())),
            explicit=frozenset(self.explicit),
            inferred=frozenset(self.inferred),
            assemblies=frozenset(self.assemblies.values()),
            systems=frozenset(self.systems.values()),
            resources=tuple(sorted(self.resources.items())),
            sequence=next(_sequence),
        )

    def restore(self, snap: WorldSnapshot):
        self.tick = snap.tick
        self.regions = set(snap.regions)
        self.entities = {e: set(c) for e, c in snap.entities}
        self.entity_region = dict(snap.entity_region)
        self.explicit = set(snap.explicit)
        self.inferred = set(snap.inferred)
        self.assemblies = {a.whole: a for a in snap.assemblies}
        self.systems = {s.system: s for s in snap.systems}
        self.resources = dict(snap.resources)
