"""Deterministic synthetic corpora shaped like financial event announcements.

Every event is written as one sentence: the first role's argument as subject
of a type-specific trigger verb, then each further role as a cue noun with its
argument attached underneath. Distractor sentences reuse the same lexicons
under a non-trigger verb ("held"), so an argument can only be told apart from a
look-alike by its context and dependency parent.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import ROOT, Document, EventRecord, ParsedToken
from .nncore.rng import SYNTH, make_rng
from .ontology import EventOntology, EventTypeDef

PERSONS = ("Zhang Chunji", "Li Wei", "Wang Fang", "Chen Jie", "Liu Yang", "Zhao Lei", "Huang Min",
           "Zhou Tao", "Wu Gang", "Xu Jing", "Sun Hao", "Ma Lin", "Zhu Hong", "Hu Bin", "Guo Qiang",
           "He Ping")
ORGS = ("Haitong Securities", "CITIC Trust", "Huatai Securities", "Shanghai Court", "Guotai Junan",
        "China Merchants Bank", "Industrial Bank", "Shenzhen Court", "Everbright Trust", "Minsheng Bank")
MONTHS = ("January", "February", "March", "April", "May", "June", "July", "August", "September",
          "October", "November", "December")
TRIGGERS = {"EF": "froze", "ER": "repurchased", "EU": "reduced", "EO": "increased", "EP": "pledged"}
DISTRACTOR_VERB = "held"

KIND_POS = {"person": "nh", "org": "ni", "number": "m", "time": "nt"}


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    doc_count: int = 20
    tokens_per_doc: int = 24
    event_type_count: int = 5
    roles_per_type: int = 4
    events_per_doc: tuple[int, int] = (1, 3)
    multi_role_rate: float = 0.3
    shared_arg_rate: float = 0.2
    seed: int = 7
    m: int = 8

    def __post_init__(self):
        lo, hi = self.events_per_doc
        for name in ("doc_count", "tokens_per_doc", "event_type_count", "roles_per_type", "m"):
            if getattr(self, name) < 1:
                raise SynthError(f"{name} must be >= 1")
        if not 1 <= lo <= hi:
            raise SynthError(f"events_per_doc range {self.events_per_doc} is invalid")
        for name in ("multi_role_rate", "shared_arg_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SynthError(f"{name} must lie in [0, 1]")


def _role_kind(et: EventTypeDef, role: str) -> str:
    if any(role in g.roles for g in et.dup_groups):
        return "time"
    if "Date" in role:
        return "time"
    if any(key in role for key in ("Shares", "Price", "Amount", "Ratio")):
        return "number"
    if any(key in role for key in ("Institution", "Company", "Pledgee")):
        return "org"
    return "person"


class _Lexicon:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.numbers = tuple(f"{k * 10000:,}" for k in range(1, 121)) + tuple(f"{k / 10:.1f}%" for k in range(5, 80, 5))

    def draw(self, kind: str) -> str:
        pool = {"person": PERSONS, "org": ORGS, "number": self.numbers, "time": MONTHS}[kind]
        return str(pool[int(self.rng.integers(len(pool)))])


class _Sentence:
    """Token buffer with head-index dependencies, resolved into ParsedTokens later."""

    def __init__(self):
        self.items: list[tuple[str, str, str, int]] = []  # text, pos, dep, head (-1 = root)

    def add(self, text: str, pos: str, dep: str, head: int) -> int:
        self.items.append((text, pos, dep, head))
        return len(self.items) - 1

    def __len__(self):
        return len(self.items)


def _dupable_pairs(et: EventTypeDef, roles: tuple[str, ...]) -> dict[str, str]:
    """First role -> second role for size-2 slices of dup groups fully inside ``roles``."""
    pairs = {}
    for g in et.dup_groups:
        if g.roles <= set(roles):
            ordered = [r for r in roles if r in g.roles]
            pairs[ordered[0]] = ordered[1]
    return pairs


def generate_synthetic(cfg: SynthConfig, ont: EventOntology) -> list[Document]:
    lo, hi = cfg.events_per_doc
    if hi > cfg.m:
        raise SynthError(f"events_per_doc upper bound {hi} exceeds the event slot count m={cfg.m}")
    if cfg.event_type_count > ont.u:
        raise SynthError(f"event_type_count {cfg.event_type_count} exceeds the ontology's {ont.u} types")
    types = ont.event_types[:cfg.event_type_count]
    for et in types:
        if cfg.roles_per_type > et.role_count:
            raise SynthError(f"roles_per_type {cfg.roles_per_type} exceeds {et.name}'s {et.role_count} roles")
    rng = make_rng(cfg.seed, SYNTH)
    lex = _Lexicon(rng)
    return [_one_document(f"synth-{cfg.seed}-{d:05d}", cfg, types, rng, lex) for d in range(cfg.doc_count)]


def _event_sentence(et, roles, rng, lex, cfg, shared_from: int | None):
    """Returns the sentence and role -> local token positions.

    With ``shared_from`` set the subject is omitted and the first role points
    back at that earlier event's subject (stored as ``-1 - event index``).
    """
    sent = _Sentence()
    verb_text = TRIGGERS.get(et.name, f"{et.name.lower()}ed")
    kinds = [_role_kind(et, r) for r in roles]
    pairs = _dupable_pairs(et, roles)
    args: dict[str, int] = {}
    if shared_from is None:
        args[roles[0]] = sent.add(lex.draw(kinds[0]), KIND_POS[kinds[0]], "SBV", 1)
    else:
        args[roles[0]] = -1 - shared_from
    verb = sent.add(verb_text, "v", "HED", -1)
    dates_used: set[str] = set()
    skip = set()
    for role, kind in zip(roles[1:], kinds[1:]):
        if role in skip:
            continue
        text = lex.draw(kind)
        if kind == "time":
            # distinct date texts inside one event
            while text in dates_used:
                text = lex.draw(kind)
            dates_used.add(text)
        if role in pairs and rng.random() < cfg.multi_role_rate:
            cue = sent.add("period", "n", "ADV", verb)
            tok = sent.add(text, KIND_POS[kind], "ATT", cue)
            args[role] = args[pairs[role]] = tok
            skip.add(pairs[role])
            continue
        cue = sent.add(role.lower(), "n", "ADV" if kind == "time" else "VOB", verb)
        args[role] = sent.add(text, KIND_POS[kind], "ATT", cue)
    return sent, args


def _distractor(rng, lex) -> _Sentence:
    sent = _Sentence()
    sent.add(lex.draw("person"), "nh", "SBV", 1)
    verb = sent.add(DISTRACTOR_VERB, "v", "HED", -1)
    cue = sent.add("shares", "n", "VOB", verb)
    sent.add(lex.draw("number"), "m", "ATT", cue)
    if rng.random() < 0.5:
        tcue = sent.add("dated", "n", "ADV", verb)
        sent.add(lex.draw("time"), "nt", "ATT", tcue)
    return sent


def _one_document(doc_id, cfg, types, rng, lex) -> Document:
    lo, hi = cfg.events_per_doc
    k = int(rng.integers(lo, hi + 1))
    events = []  # (event type, sentence, local args)
    own_subject: dict[int, str] = {}  # event index -> subject kind
    for e in range(k):
        et = types[int(rng.integers(len(types)))]
        roles = et.roles[:cfg.roles_per_type]
        kind = _role_kind(et, roles[0])
        donors = [p for p, pk in own_subject.items() if pk == kind]
        shared_from = None
        if donors and rng.random() < cfg.shared_arg_rate:
            shared_from = donors[int(rng.integers(len(donors)))]
        sent, args = _event_sentence(et, roles, rng, lex, cfg, shared_from)
        if shared_from is None:
            own_subject[e] = kind
        events.append((et, sent, args))
    # interleave distractors until the length target is met
    sentences: list[tuple[_Sentence, int | None]] = [(s, i) for i, (_, s, _) in enumerate(events)]
    length = sum(len(s) for s, _ in sentences)
    while length < cfg.tokens_per_doc:
        d = _distractor(rng, lex)
        sentences.insert(int(rng.integers(len(sentences) + 1)), (d, None))
        length += len(d)

    tokens: list[ParsedToken] = []
    offsets: dict[int, int] = {}
    for sid, (sent, ev) in enumerate(sentences):
        if ev is not None:
            offsets[ev] = len(tokens)
        for wid, (text, pos, dep, head) in enumerate(sent.items):
            if head < 0:
                ptext = ppos = pdep = ROOT
            else:
                ptext, ppos, pdep, _ = sent.items[head]
            tokens.append(ParsedToken(text, pos, dep, sid, wid, ptext, ppos, pdep))

    records = []
    for ev, (et, _, args) in enumerate(events):
        glob = {}
        for role, loc in args.items():
            if loc < 0:
                donor = -1 - loc
                glob[role] = (offsets[donor] + events[donor][2][events[donor][0].roles[0]],)
            else:
                glob[role] = (offsets[ev] + loc,)
        records.append(EventRecord(ev + 1, et.name, glob))
    return Document(doc_id, tuple(tokens), tuple(records))
