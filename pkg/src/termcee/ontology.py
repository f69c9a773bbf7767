"""Event schema and argument-role numbering.

An ontology lists the event types of a corpus, each with an ordered role list.
Role tags are assigned per type in declaration order starting at 1; tag 0 is
the "O" (no role) tag shared by every type.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

O_TAG = 0
O_LABEL = "O"


class OntologyError(ValueError):
    pass


@dataclass(frozen=True)
class DupGroup:
    """Roles that one token may fill simultaneously inside a single event.

    ``pos_tags`` is the token predicate: tokens whose POS tag is in this set
    get extra matrix rows so that each role lands on its own row.
    """

    roles: frozenset[str]
    pos_tags: frozenset[str]

    @property
    def size(self) -> int:
        return len(self.roles)

    def matches(self, pos: str) -> bool:
        return pos in self.pos_tags


@dataclass(frozen=True)
class EventTypeDef:
    name: str
    roles: tuple[str, ...]
    dup_groups: tuple[DupGroup, ...] = ()

    def __post_init__(self):
        if not self.roles:
            raise OntologyError(f"event type {self.name!r} declares no roles")
        if len(set(self.roles)) != len(self.roles):
            raise OntologyError(f"duplicate role name in event type {self.name!r}")
        if O_LABEL in self.roles:
            raise OntologyError(f"role name {O_LABEL!r} is reserved ({self.name!r})")
        for group in self.dup_groups:
            unknown = group.roles - set(self.roles)
            if unknown:
                raise OntologyError(
                    f"dup group in {self.name!r} references unknown roles {sorted(unknown)}"
                )
            if group.size < 2:
                raise OntologyError(f"dup group in {self.name!r} must hold at least two roles")
            if not group.pos_tags:
                raise OntologyError(f"dup group in {self.name!r} has an empty pos_tags predicate")

    @property
    def role_count(self) -> int:
        return len(self.roles)


@dataclass(frozen=True)
class EventOntology:
    event_types: tuple[EventTypeDef, ...]
    _index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.event_types:
            raise OntologyError("ontology must declare at least one event type")
        names = [t.name for t in self.event_types]
        if len(set(names)) != len(names):
            raise OntologyError(f"duplicate event type names in {names}")
        object.__setattr__(self, "_index", MappingProxyType({n: i for i, n in enumerate(names)}))

    @property
    def u(self) -> int:
        """Number of event types (one prediction channel each)."""
        return len(self.event_types)

    @property
    def names(self) -> list[str]:
        return [t.name for t in self.event_types]

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise OntologyError(f"unknown event type {name!r}") from None

    def get(self, name: str) -> EventTypeDef:
        return self.event_types[self.index(name)]

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def to_dict(self) -> dict:
        return {
            "event_types": [
                {
                    "name": t.name,
                    "roles": list(t.roles),
                    "dup_groups": [
                        {"roles": sorted(g.roles, key=t.roles.index), "pos_tags": sorted(g.pos_tags)}
                        for g in t.dup_groups
                    ],
                }
                for t in self.event_types
            ]
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "EventOntology":
        try:
            raw_types = doc["event_types"]
        except (KeyError, TypeError):
            raise OntologyError("ontology document needs an 'event_types' list") from None
        types = []
        for raw in raw_types:
            try:
                name = str(raw["name"])
                roles = tuple(str(r) for r in raw["roles"])
                groups = tuple(
                    DupGroup(frozenset(str(r) for r in g["roles"]), frozenset(str(p) for p in g["pos_tags"]))
                    for g in raw.get("dup_groups", [])
                )
            except (KeyError, TypeError) as exc:
                raise OntologyError(f"malformed event type entry: {raw!r}") from exc
            types.append(EventTypeDef(name, roles, groups))
        return cls(tuple(types))


def load_ontology(path: str | Path) -> EventOntology:
    """Read an ontology from a TOML or JSON file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".json":
            doc = json.loads(text)
        else:
            doc = tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise OntologyError(f"cannot parse ontology {path}: {exc}") from exc
    return EventOntology.from_dict(doc)


def default_ontology() -> EventOntology:
    """The bundled five-type financial announcement schema (EF, ER, EU, EO, EP)."""
    text = resources.files("termcee").joinpath("data/chfinann.toml").read_text(encoding="utf-8")
    return EventOntology.from_dict(tomllib.loads(text))


def default_ontology_path() -> Path:
    return Path(str(resources.files("termcee").joinpath("data/chfinann.toml")))


@dataclass(frozen=True)
class RoleNumbering:
    """Per event type mapping from role name to tag (1-based, declaration order)."""

    tags: Mapping[str, Mapping[str, int]]

    def role_count(self, event_type: str) -> int:
        return len(self.tags[event_type])

    def role_names(self, event_type: str) -> list[str]:
        """Role names indexed by tag; position 0 holds the O label."""
        table = self.tags[event_type]
        names = [O_LABEL] * (len(table) + 1)
        for role, tag in table.items():
            names[tag] = role
        return names


def number_roles(ont: EventOntology) -> RoleNumbering:
    return RoleNumbering(
        MappingProxyType(
            {
                t.name: MappingProxyType({role: k for k, role in enumerate(t.roles, start=1)})
                for t in ont.event_types
            }
        )
    )


def role_tag(num: RoleNumbering, event_type: str, role: str) -> int:
    try:
        table = num.tags[event_type]
    except KeyError:
        raise OntologyError(f"unknown event type {event_type!r}") from None
    if role == O_LABEL:
        return O_TAG
    try:
        return table[role]
    except KeyError:
        raise OntologyError(f"event type {event_type!r} has no role {role!r}") from None
