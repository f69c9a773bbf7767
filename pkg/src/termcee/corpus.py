"""Pre-parsed document model, JSONL ingestion, stopword filtering and splits.

Documents arrive already segmented, POS-tagged and dependency-parsed (one JSON
object per line). Each token carries its own tags plus its dependency parent's
text, POS and relation; root tokens point at the ``<ROOT>`` sentinel.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .ontology import EventOntology

log = logging.getLogger(__name__)

ROOT = "<ROOT>"


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class ParsedToken:
    text: str
    pos: str
    dep: str
    sent_id: int
    word_id: int
    parent_text: str = ROOT
    parent_pos: str = ROOT
    parent_dep: str = ROOT

    def __post_init__(self):
        if self.sent_id < 0 or self.word_id < 0:
            raise CorpusError(f"negative sentence/word index on token {self.text!r}")

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "pos": self.pos,
            "dep": self.dep,
            "sent_id": self.sent_id,
            "word_id": self.word_id,
            "parent_text": self.parent_text,
            "parent_pos": self.parent_pos,
            "parent_dep": self.parent_dep,
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "ParsedToken":
        return cls(
            text=str(raw["text"]),
            pos=str(raw["pos"]),
            dep=str(raw["dep"]),
            sent_id=int(raw["sent_id"]),
            word_id=int(raw["word_id"]),
            parent_text=str(raw.get("parent_text", ROOT)),
            parent_pos=str(raw.get("parent_pos", ROOT)),
            parent_dep=str(raw.get("parent_dep", ROOT)),
        )


@dataclass(frozen=True)
class EventRecord:
    """One event: its 1-based slot id, type name and role -> token indices."""

    event_id: int
    event_type: str
    args: Mapping[str, tuple[int, ...]]

    def __post_init__(self):
        if self.event_id < 1:
            raise CorpusError(f"event ids are 1-based, got {self.event_id}")
        canon = {}
        for role, idxs in self.args.items():
            idxs = tuple(sorted({int(i) for i in idxs}))
            if not idxs:
                raise CorpusError(f"event {self.event_id} role {role!r} has an empty argument list")
            canon[role] = idxs
        object.__setattr__(self, "args", canon)

    def fillings(self) -> set[tuple[str, int]]:
        return {(role, i) for role, idxs in self.args.items() for i in idxs}

    def to_dict(self) -> dict:
        return {"event_id": self.event_id, "type": self.event_type,
                "args": {role: list(idxs) for role, idxs in self.args.items()}}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "EventRecord":
        return cls(int(raw["event_id"]), str(raw["type"]),
                   {str(k): tuple(v) for k, v in raw["args"].items()})


@dataclass(frozen=True)
class Document:
    doc_id: str
    tokens: tuple[ParsedToken, ...]
    gold_records: tuple[EventRecord, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        records = tuple(sorted(self.gold_records, key=lambda r: r.event_id))
        object.__setattr__(self, "gold_records", records)
        ids = [r.event_id for r in records]
        if ids != list(range(1, len(ids) + 1)):
            raise CorpusError(f"{self.doc_id}: event ids must be 1..k consecutive, got {ids}")
        n = len(self.tokens)
        for rec in records:
            for role, idxs in rec.args.items():
                bad = [i for i in idxs if not 0 <= i < n]
                if bad:
                    raise CorpusError(
                        f"{self.doc_id}: event {rec.event_id} role {role!r} points at token(s) "
                        f"{bad} but the document has {n} tokens"
                    )

    @property
    def n(self) -> int:
        return len(self.tokens)

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "tokens": [t.to_dict() for t in self.tokens],
            "events": [r.to_dict() for r in self.gold_records],
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> "Document":
        return cls(
            doc_id=str(raw["doc_id"]),
            tokens=tuple(ParsedToken.from_dict(t) for t in raw["tokens"]),
            gold_records=tuple(EventRecord.from_dict(e) for e in raw.get("events", [])),
        )


def check_against_ontology(doc: Document, ont: EventOntology) -> None:
    for rec in doc.gold_records:
        if rec.event_type not in ont:
            raise CorpusError(f"{doc.doc_id}: unknown event type {rec.event_type!r}")
        roles = set(ont.get(rec.event_type).roles)
        unknown = set(rec.args) - roles
        if unknown:
            raise CorpusError(
                f"{doc.doc_id}: event {rec.event_id} ({rec.event_type}) uses undeclared roles {sorted(unknown)}"
            )


def ingest_parsed(path: str | Path, ont: EventOntology | None = None) -> list[Document]:
    """Load and validate a document JSONL file."""
    docs = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = Document.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{path}:{lineno}: {exc}") from exc
            if doc.doc_id in seen:
                raise CorpusError(f"{path}:{lineno}: duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            if ont is not None:
                check_against_ontology(doc, ont)
            docs.append(doc)
    return docs


def dumps_document(doc: Document) -> str:
    return json.dumps(doc.to_dict(), ensure_ascii=False, separators=(",", ":"))


def write_jsonl(docs: Iterable[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for doc in docs:
            fh.write(dumps_document(doc))
            fh.write("\n")


def load_stoplist(path: str | Path | None = None) -> frozenset[str]:
    """One entry per line; blank lines ignored. ``None`` loads the bundled list."""
    if path is None:
        text = resources.files("termcee").joinpath("data/stopwords.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


def filter_stopwords(doc: Document, stoplist: Iterable[str],
                     keep_pos: Iterable[str] = ()) -> Document:
    """Drop stoplisted tokens and remap gold argument indices.

    Tokens whose POS is in ``keep_pos`` are never dropped (pass the union of
    the ontology's duplicate-group predicates so time/number tokens survive).
    """
    stoplist = frozenset(stoplist)
    if not stoplist:
        return doc
    keep_pos = frozenset(keep_pos)
    drop = {i for i, tok in enumerate(doc.tokens) if tok.text in stoplist and tok.pos not in keep_pos}
    if not drop:
        return doc
    for rec in doc.gold_records:
        for role, idxs in rec.args.items():
            hit = [i for i in idxs if i in drop]
            if hit:
                raise CorpusError(
                    f"{doc.doc_id}: gold argument {doc.tokens[hit[0]].text!r} "
                    f"(event {rec.event_id}, role {role}) is a stopword"
                )
    remap = {}
    kept = []
    for i, tok in enumerate(doc.tokens):
        if i not in drop:
            remap[i] = len(kept)
            kept.append(tok)
    records = tuple(
        EventRecord(r.event_id, r.event_type, {role: tuple(remap[i] for i in idxs) for role, idxs in r.args.items()})
        for r in doc.gold_records
    )
    return Document(doc.doc_id, tuple(kept), records)


def _partition_sizes(total: int, ratios: Sequence[float]) -> list[int]:
    # largest-remainder rounding; ties go to the earlier split
    raw = [r * total for r in ratios]
    sizes = [int(np.floor(x + 1e-9)) for x in raw]
    short = total - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda k: (-(raw[k] - sizes[k]), k))
    for k in order[:short]:
        sizes[k] += 1
    return sizes


def split_corpus(docs: Sequence[Document], ratios: Sequence[float] = (0.8, 0.1, 0.1),
                 seed: int = 0) -> tuple[list[Document], list[Document], list[Document]]:
    """Seeded shuffle, then cut into train/dev/test by ``ratios``."""
    if not docs:
        raise CorpusError("cannot split an empty corpus")
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusError(f"split ratios must be three non-negative values summing to 1, got {ratios}")
    rng = np.random.Generator(np.random.Philox(seed))
    order = rng.permutation(len(docs))
    n_train, n_dev, _ = _partition_sizes(len(docs), ratios)
    shuffled = [docs[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:n_train + n_dev], shuffled[n_train + n_dev:]
