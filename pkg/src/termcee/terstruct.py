"""Token-event pairs, duplicate-row planning and gold token-event-role matrices.

For a document with n tokens and m event slots every event type gets a
``rows x m`` grid of role tags. Rows are tokens in document order; a token that
can fill several roles of one event (a time token that is both start and end
date, say) is given extra rows right after its original so each row carries a
single tag.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, NamedTuple

import numpy as np

from .corpus import Document
from .ontology import EventOntology, RoleNumbering


class StructureError(ValueError):
    pass


class TokenEventPair(NamedTuple):
    token: int  # 0-based token index
    event: int  # 1-based event slot id


def build_pairs(doc: Document, m: int) -> list[TokenEventPair]:
    """All (token, event slot) pairs, token-major: index = i*m + (j-1)."""
    if m < 1:
        raise StructureError(f"m must be >= 1, got {m}")
    if len(doc.gold_records) > m:
        raise StructureError(f"{doc.doc_id}: {len(doc.gold_records)} gold events exceed m={m}")
    return [TokenEventPair(i, j) for i in range(doc.n) for j in range(1, m + 1)]


@dataclass(frozen=True)
class RowPlan:
    rows: tuple[tuple[int, int], ...]  # (token index, copy number)

    def __post_init__(self):
        starts: dict[int, int] = {}
        copies: dict[int, int] = {}
        for r, (tok, copy) in enumerate(self.rows):
            if copy == 0:
                starts[tok] = r
            copies[tok] = copies.get(tok, 0) + 1
        object.__setattr__(self, "_starts", starts)
        object.__setattr__(self, "_copies", copies)

    @property
    def row_count(self) -> int:
        return len(self.rows)

    @property
    def n(self) -> int:
        return len(self._copies)

    def first_row(self, token: int) -> int:
        return self._starts[token]

    def copies(self, token: int) -> int:
        return self._copies[token]

    def token_of(self, row: int) -> int:
        return self.rows[row][0]

    def token_index_array(self) -> np.ndarray:
        return np.array([tok for tok, _ in self.rows], dtype=np.int64)

    def to_list(self) -> list[dict]:
        return [{"token": tok, "copy": copy} for tok, copy in self.rows]

    @classmethod
    def from_list(cls, raw) -> "RowPlan":
        return cls(tuple((int(r["token"]), int(r["copy"])) for r in raw))


def token_copies(pos: str, ont: EventOntology) -> int:
    sizes = [g.size for t in ont.event_types for g in t.dup_groups if g.matches(pos)]
    return max(sizes, default=1)


def plan_duplicates(doc: Document, ont: EventOntology) -> RowPlan:
    """Row allocation shared by every event type's matrix for ``doc``.

    A token matching any duplicate-group predicate gets as many rows as the
    largest matching group; everything else gets one row.
    """
    rows = []
    for i, tok in enumerate(doc.tokens):
        rows.extend((i, c) for c in range(token_copies(tok.pos, ont)))
    return RowPlan(tuple(rows))


@dataclass(frozen=True)
class TerMatrix:
    event_type: str
    plan: RowPlan
    m: int
    tags: np.ndarray  # (row_count, m) int

    @property
    def shape(self) -> tuple[int, int]:
        return self.tags.shape

    def nonzero_cells(self) -> list[tuple[int, int, int]]:
        rr, cc = np.nonzero(self.tags)
        return [(int(r), int(c), int(self.tags[r, c])) for r, c in zip(rr, cc)]

    def to_dict(self) -> dict:
        return {"type": self.event_type, "m": self.m, "rows": self.plan.to_list(),
                "cells": [list(cell) for cell in self.nonzero_cells()]}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "TerMatrix":
        plan = RowPlan.from_list(raw["rows"])
        m = int(raw["m"])
        tags = np.zeros((plan.row_count, m), dtype=np.int64)
        for r, c, tag in raw["cells"]:
            tags[r, c] = tag
        return cls(str(raw["type"]), plan, m, tags)

    def __eq__(self, other):
        if not isinstance(other, TerMatrix):
            return NotImplemented
        return (self.event_type == other.event_type and self.m == other.m
                and self.plan == other.plan and np.array_equal(self.tags, other.tags))

    __hash__ = None


def build_gold_matrix(doc: Document, ont: EventOntology, num: RoleNumbering, m: int,
                      plan: RowPlan, event_type: str) -> TerMatrix:
    if len(doc.gold_records) > m:
        raise StructureError(f"{doc.doc_id}: {len(doc.gold_records)} gold events exceed m={m}")
    ont.index(event_type)
    tags = np.zeros((plan.row_count, m), dtype=np.int64)
    table = num.tags[event_type]
    for rec in doc.gold_records:
        if rec.event_type != event_type:
            continue
        per_token: dict[int, list[int]] = {}
        for role, idxs in rec.args.items():
            for i in idxs:
                per_token.setdefault(i, []).append(table[role])
        col = rec.event_id - 1
        for i, role_tags in per_token.items():
            if len(role_tags) > plan.copies(i):
                raise StructureError(
                    f"{doc.doc_id}: token {i} ({doc.tokens[i].text!r}) fills {len(role_tags)} roles in "
                    f"event {rec.event_id} but has {plan.copies(i)} row(s); a duplicate group is missing"
                )
            start = plan.first_row(i)
            for k, tag in enumerate(sorted(role_tags)):
                tags[start + k, col] = tag
    return TerMatrix(event_type, plan, m, tags)


def build_gold_matrices(doc: Document, ont: EventOntology, num: RoleNumbering, m: int,
                        plan: RowPlan | None = None) -> dict[str, TerMatrix]:
    plan = plan if plan is not None else plan_duplicates(doc, ont)
    return {t: build_gold_matrix(doc, ont, num, m, plan, t) for t in ont.names}


class Scheme(str, Enum):
    DE_PPN = "de-ppn"
    DOC2EDAG = "doc2edag"
    GIT = "git"
    REDEE = "redee"
    SCDEE = "scdee"
    PTPCG = "ptpcg"
    TER_ENTITY = "ter-entity"
    TER_TOKEN = "ter-token"


@dataclass(frozen=True)
class ComplexityInputs:
    n: int | None = None  # entities
    N: int | None = None  # tokens
    m: int | None = None  # corpus event slots
    m_prime: int | None = None  # gold events in the document
    r: int | None = None  # roles per type
    s: int | None = None  # sentences
    p: int | None = None  # paths
    k: int | None = None  # candidate arguments


_REQUIRED = {
    Scheme.DE_PPN: ("m", "n", "r"),
    Scheme.DOC2EDAG: ("n", "p", "r"),
    Scheme.GIT: ("n", "p", "r"),
    Scheme.REDEE: ("n", "s", "r"),
    Scheme.SCDEE: ("s", "m", "m_prime", "k", "r"),
    Scheme.PTPCG: ("n", "m_prime", "k", "r"),
    Scheme.TER_ENTITY: ("n", "m"),
    Scheme.TER_TOKEN: ("N", "m"),
}


def required_fields(scheme: Scheme | str) -> tuple[str, ...]:
    return _REQUIRED[Scheme(scheme)]


def complexity_cells(scheme: Scheme | str, inp: ComplexityInputs) -> int:
    """Cell count of the gold structure each scheme materialises per document."""
    scheme = Scheme(scheme)
    vals = {}
    for name in _REQUIRED[scheme]:
        v = getattr(inp, name)
        if v is None:
            raise StructureError(f"scheme {scheme.value} needs field {name!r}")
        if v < 0:
            raise StructureError(f"field {name!r} must be >= 0, got {v}")
        vals[name] = int(v)
    n, m, r = vals.get("n"), vals.get("m"), vals.get("r")
    if scheme is Scheme.DE_PPN:
        return m * n * r
    if scheme is Scheme.DOC2EDAG:
        return n * vals["p"] * r
    if scheme is Scheme.GIT:
        return n * vals["p"] * r + n * n
    if scheme is Scheme.REDEE:
        return (n + vals["s"]) ** 2 * r
    if scheme is Scheme.SCDEE:
        return vals["s"] * m + vals["m_prime"] * vals["k"] * r
    if scheme is Scheme.PTPCG:
        return n * n + vals["m_prime"] * vals["k"] * r
    if scheme is Scheme.TER_ENTITY:
        return n * m
    return vals["N"] * m
