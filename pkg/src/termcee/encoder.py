"""Token-event pair features and the stacked Bi-LSTM encoder.

Each pair (row r, event slot j) is embedded as the concatenation, in order, of
token semantics, event slot id, POS, dependency relation, sentence index,
word index, parent token, parent POS and parent relation. Ablated features are
simply left out of the concatenation. Duplicate rows reuse the original
token's features.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import nncore as nn
from .corpus import ROOT, Document
from .terstruct import RowPlan

UNK = "<UNK>"

# concatenation order of the integrated pair vector
PAIR_FEATURES = ("sem", "eid", "pos", "dep", "senid", "wordid", "pword", "ppos", "pdep")
ABLATION_FLAGS = ("pos", "dep", "senid", "wordid", "pword", "ppos", "pdep", "eid", "etype", "all")


@dataclass(frozen=True)
class FeatureConfig:
    sem_dim: int = 64
    feat_dim: int = 16
    hidden_size: int = 64
    lstm_layers: int = 2
    dropout: float = 0.2
    ablation: frozenset[str] = field(default_factory=frozenset)
    sent_cap: int = 128
    word_cap: int = 256

    def __post_init__(self):
        object.__setattr__(self, "ablation", frozenset(self.ablation))
        bad = self.ablation - set(ABLATION_FLAGS)
        if bad:
            raise ValueError(f"unknown ablation flag(s) {sorted(bad)}; choose from {ABLATION_FLAGS}")
        for name in ("sem_dim", "feat_dim", "hidden_size", "lstm_layers", "sent_cap", "word_cap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    @classmethod
    def paper(cls, **overrides) -> "FeatureConfig":
        return replace(cls(sem_dim=768, feat_dim=50, hidden_size=200, lstm_layers=4), **overrides)

    def uses(self, feature: str) -> bool:
        if feature == "sem":
            return True
        return "all" not in self.ablation and feature not in self.ablation

    def width(self, feature: str) -> int:
        if feature in ("sem", "pword"):
            return self.sem_dim
        return self.feat_dim

    @property
    def input_dim(self) -> int:
        """Width of the integrated pair vector fed to the Bi-LSTM."""
        return sum(self.width(f) for f in PAIR_FEATURES if self.uses(f))

    @property
    def head_input_dim(self) -> int:
        return 2 * self.hidden_size + (self.feat_dim if self.uses("etype") else 0)

    def to_dict(self) -> dict:
        return {"sem_dim": self.sem_dim, "feat_dim": self.feat_dim, "hidden_size": self.hidden_size,
                "lstm_layers": self.lstm_layers, "dropout": self.dropout,
                "ablation": sorted(self.ablation), "sent_cap": self.sent_cap, "word_cap": self.word_cap}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "FeatureConfig":
        raw = dict(raw)
        raw["ablation"] = frozenset(raw.get("ablation", ()))
        return cls(**raw)


class Vocab:
    """String -> id table; id 0 is ``<UNK>``."""

    def __init__(self, items: Iterable[str] = ()):
        self.items: list[str] = [UNK]
        self._index: dict[str, int] = {UNK: 0}
        for it in items:
            self.add(it)

    def add(self, item: str) -> int:
        if item not in self._index:
            self._index[item] = len(self.items)
            self.items.append(item)
        return self._index[item]

    def index(self, item: str) -> int:
        return self._index.get(item, 0)

    def __contains__(self, item: str) -> bool:
        return item in self._index

    def __len__(self) -> int:
        return len(self.items)

    def __eq__(self, other):
        return isinstance(other, Vocab) and self.items == other.items


@dataclass
class FeatureVocabs:
    tokens: Vocab
    pos: Vocab
    dep: Vocab

    @classmethod
    def build(cls, docs: Sequence[Document]) -> "FeatureVocabs":
        tokens, pos, dep = Vocab([ROOT]), Vocab([ROOT]), Vocab([ROOT])
        for doc in docs:
            for tok in doc.tokens:
                tokens.add(tok.text)
                tokens.add(tok.parent_text)
                pos.add(tok.pos)
                pos.add(tok.parent_pos)
                dep.add(tok.dep)
                dep.add(tok.parent_dep)
        return cls(tokens, pos, dep)

    def to_dict(self) -> dict:
        return {"tokens": self.tokens.items, "pos": self.pos.items, "dep": self.dep.items}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "FeatureVocabs":
        def vocab(items):
            if not items or items[0] != UNK:
                raise ValueError("serialized vocabulary must start with <UNK>")
            return Vocab(items[1:])
        return cls(vocab(raw["tokens"]), vocab(raw["pos"]), vocab(raw["dep"]))


def _uniform(rng: np.random.Generator, shape, bound: float) -> np.ndarray:
    return rng.uniform(-bound, bound, size=shape)


class Encoder:
    def __init__(self, cfg: FeatureConfig, vocabs: FeatureVocabs, m: int, store: nn.ParamStore,
                 rng: np.random.Generator, pretrained: np.ndarray | None = None):
        """``pretrained`` (rows aligned with ``vocabs.tokens``) replaces and freezes the token table."""
        self.cfg, self.vocabs, self.m, self.store = cfg, vocabs, m, store
        d_sem, d_feat = cfg.sem_dim, cfg.feat_dim

        def table(name, rows, dim):
            store.add(name, _uniform(rng, (rows, dim), 0.5 / dim))

        if pretrained is not None:
            if pretrained.shape != (len(vocabs.tokens), d_sem):
                raise ValueError(f"pretrained table {pretrained.shape} != ({len(vocabs.tokens)}, {d_sem})")
            store.add("emb.token", pretrained, trainable=False)
        else:
            table("emb.token", len(vocabs.tokens), d_sem)
        if cfg.uses("eid"):
            table("emb.eid", m, d_feat)
        for feat, rows in (("pos", len(vocabs.pos)), ("dep", len(vocabs.dep)), ("senid", cfg.sent_cap),
                           ("wordid", cfg.word_cap), ("ppos", len(vocabs.pos)), ("pdep", len(vocabs.dep))):
            if cfg.uses(feat):
                table(f"emb.{feat}", rows, d_feat)
        H = cfg.hidden_size
        d_in = cfg.input_dim
        for layer in range(cfg.lstm_layers):
            for direction in ("fwd", "bwd"):
                pre = f"lstm.{layer}.{direction}"
                store.add(f"{pre}.W", _uniform(rng, (d_in, 4 * H), 0.08))
                store.add(f"{pre}.U", _uniform(rng, (H, 4 * H), 0.08))
                bias = np.zeros(4 * H)
                bias[H:2 * H] = 1.0  # forget gate
                store.add(f"{pre}.b", bias)
            d_in = 2 * H

    def embed_token(self, text: str) -> np.ndarray:
        return self.store["emb.token"].data[self.vocabs.tokens.index(text)]

    def feature_ids(self, doc: Document, plan: RowPlan) -> dict[str, np.ndarray]:
        """Per-pair id arrays over the expanded sequence, length ``row_count * m``."""
        cfg, v, m = self.cfg, self.vocabs, self.m
        toks = [doc.tokens[i] for i in plan.token_index_array()]
        row_ids = {
            "sem": [v.tokens.index(t.text) for t in toks],
            "pos": [v.pos.index(t.pos) for t in toks],
            "dep": [v.dep.index(t.dep) for t in toks],
            "senid": [min(t.sent_id, cfg.sent_cap - 1) for t in toks],
            "wordid": [min(t.word_id, cfg.word_cap - 1) for t in toks],
            "pword": [v.tokens.index(t.parent_text) for t in toks],
            "ppos": [v.pos.index(t.parent_pos) for t in toks],
            "pdep": [v.dep.index(t.parent_dep) for t in toks],
        }
        ids = {k: np.repeat(np.asarray(x, dtype=np.int64), m) for k, x in row_ids.items()}
        ids["eid"] = np.tile(np.arange(m, dtype=np.int64), len(toks))
        return ids

    def integrate_features(self, doc: Document, plan: RowPlan) -> nn.Tensor:
        ids = self.feature_ids(doc, plan)
        parts = []
        for feat in PAIR_FEATURES:
            if not self.cfg.uses(feat):
                continue
            table = "emb.token" if feat in ("sem", "pword") else f"emb.{feat}"
            parts.append(nn.embedding(self.store[table], ids[feat]))
        return nn.concat(parts, axis=1)

    def integrate_pair(self, doc: Document, plan: RowPlan, row: int, event_id: int) -> np.ndarray:
        """Feature vector of one (row, event slot) pair; ``event_id`` is 1-based."""
        if not 1 <= event_id <= self.m:
            raise nn.ShapeError(f"event id {event_id} outside 1..{self.m}")
        x = self.integrate_features(doc, plan)
        return x.data[row * self.m + event_id - 1]

    def bilstm_encode(self, x: nn.Tensor, train: bool = False,
                      rng: np.random.Generator | None = None) -> nn.Tensor:
        cfg, store = self.cfg, self.store
        h = nn.dropout(x, cfg.dropout, rng, train)
        for layer in range(cfg.lstm_layers):
            if layer:
                h = nn.dropout(h, cfg.dropout, rng, train)
            f = nn.lstm(h, store[f"lstm.{layer}.fwd.W"], store[f"lstm.{layer}.fwd.U"], store[f"lstm.{layer}.fwd.b"])
            b = nn.lstm(h, store[f"lstm.{layer}.bwd.W"], store[f"lstm.{layer}.bwd.U"], store[f"lstm.{layer}.bwd.b"],
                        reverse=True)
            h = nn.concat([f, b], axis=1)
        return h

    def encode(self, doc: Document, plan: RowPlan, train: bool = False,
               rng: np.random.Generator | None = None) -> nn.Tensor:
        return self.bilstm_encode(self.integrate_features(doc, plan), train, rng)
