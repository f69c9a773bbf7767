"""Training, checkpointing and batch prediction."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from . import nncore as nn
from .channels import class_weights
from .corpus import ROOT, Document, EventRecord, filter_stopwords
from .encoder import FeatureConfig, FeatureVocabs, Vocab
from .evaldecode import DocResult, MetricsReport, decode_events, evaluate, score_document
from .model import TerMcee
from .nncore import container
from .nncore.rng import DROPOUT, SHUFFLE, make_rng
from .ontology import EventOntology, RoleNumbering, number_roles
from .terstruct import RowPlan, TerMatrix, build_gold_matrices, plan_duplicates

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "termcee-checkpoint/1"
EMBEDDINGS_FORMAT = "termcee-embeddings/1"


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 1
    lr: float = 1e-3
    dropout: float = 0.2
    epochs: int = 10
    m: int = 8
    seed: int = 0
    features: FeatureConfig = field(default_factory=FeatureConfig)
    clip_norm: float | None = 5.0  # global-norm clip; None disables
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if self.features.dropout != self.dropout:
            object.__setattr__(self, "features", replace(self.features, dropout=self.dropout))

    @classmethod
    def paper(cls, **overrides) -> "TrainConfig":
        """Published settings: 768/50-dim embeddings, 4 x 200 Bi-LSTM, m = 34."""
        base = dict(m=34, features=FeatureConfig.paper())
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return {"batch_size": self.batch_size, "lr": self.lr, "dropout": self.dropout, "epochs": self.epochs,
                "m": self.m, "seed": self.seed, "features": self.features.to_dict(), "clip_norm": self.clip_norm,
                "beta1": self.beta1, "beta2": self.beta2, "eps": self.eps}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "TrainConfig":
        raw = dict(raw)
        raw["features"] = FeatureConfig.from_dict(raw["features"])
        return cls(**raw)


def keep_pos(ont: EventOntology) -> frozenset[str]:
    """POS tags that stopword filtering must never drop (duplicate-group predicates)."""
    return frozenset(p for t in ont.event_types for g in t.dup_groups for p in g.pos_tags)


def prepare(docs: Sequence[Document], ont: EventOntology, stoplist) -> list[Document]:
    if not stoplist:
        return list(docs)
    kp = keep_pos(ont)
    return [filter_stopwords(d, stoplist, kp) for d in docs]


def load_embeddings(path: str | Path) -> tuple[list[str], np.ndarray]:
    arrays, meta = container.load(path)
    if meta.get("format") != EMBEDDINGS_FORMAT or "vectors" not in arrays:
        raise ValueError(f"{path} is not an embedding file")
    tokens = list(meta["tokens"])
    vectors = arrays["vectors"].astype(np.float32)
    if vectors.shape[0] != len(tokens):
        raise ValueError("embedding file token list and vector rows disagree")
    return tokens, vectors


def save_embeddings(path: str | Path, tokens: Sequence[str], vectors: np.ndarray) -> None:
    container.save(path, {"vectors": np.asarray(vectors, dtype=np.float32)},
                   {"format": EMBEDDINGS_FORMAT, "tokens": list(tokens)})


def _pretrained_table(vocabs: FeatureVocabs, tokens: Sequence[str], vectors: np.ndarray) -> np.ndarray:
    table = np.zeros((len(vocabs.tokens), vectors.shape[1]), dtype=np.float32)
    row = {t: i for i, t in enumerate(tokens)}
    for i, item in enumerate(vocabs.tokens.items):
        if item in row:
            table[i] = vectors[row[item]]
    return table


@dataclass
class Checkpoint:
    config: TrainConfig
    ontology: EventOntology
    vocabs: FeatureVocabs
    params: dict[str, np.ndarray]
    frozen: tuple[str, ...]
    class_weights: dict[str, np.ndarray]
    stoplist: tuple[str, ...] = ()
    epoch: int = 0

    def meta(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "train_config": self.config.to_dict(),
            "ontology": self.ontology.to_dict(),
            "vocabs": self.vocabs.to_dict(),
            "frozen": list(self.frozen),
            "class_weights": {t: w.tolist() for t, w in self.class_weights.items()},
            "stoplist": list(self.stoplist),
            "epoch": self.epoch,
        }

    def save(self, path: str | Path) -> None:
        container.save(path, self.params, self.meta())

    def class_weight_report(self) -> dict:
        return {t: {"weights": w.tolist()} for t, w in self.class_weights.items()}

    @classmethod
    def load(cls, path: str | Path) -> "Checkpoint":
        arrays, meta = container.load(path)
        if meta.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path} is not a checkpoint")
        return cls(
            config=TrainConfig.from_dict(meta["train_config"]),
            ontology=EventOntology.from_dict(meta["ontology"]),
            vocabs=FeatureVocabs.from_dict(meta["vocabs"]),
            params=arrays,
            frozen=tuple(meta["frozen"]),
            class_weights={t: np.asarray(w, dtype=np.float64) for t, w in meta["class_weights"].items()},
            stoplist=tuple(meta["stoplist"]),
            epoch=int(meta["epoch"]),
        )

    def build_model(self) -> TerMcee:
        cfg = self.config
        pretrained = self.params["emb.token"] if "emb.token" in self.frozen else None
        model = TerMcee(self.ontology, cfg.features, self.vocabs, cfg.m, cfg.seed, pretrained=pretrained)
        model.store.load_arrays(self.params)
        return model


@dataclass
class EpochLog:
    epoch: int
    total_loss: float
    per_channel_loss: list[float]
    dev_avg_f1: float | None

    def to_json(self) -> str:
        return json.dumps({"epoch": self.epoch, "total_loss": self.total_loss,
                           "per_channel_loss": self.per_channel_loss, "dev_avg_f1": self.dev_avg_f1})


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    log: list[EpochLog]
    best_epoch: int


@dataclass
class DocPrediction:
    doc_id: str
    plan: RowPlan
    matrices: dict[str, TerMatrix]
    confidences: dict[str, np.ndarray]
    records: list[EventRecord]

    def to_dict(self) -> dict:
        return {"doc_id": self.doc_id, "m": next(iter(self.matrices.values())).m if self.matrices else 0,
                "rows": self.plan.to_list(),
                "matrices": [mat.to_dict() for mat in self.matrices.values()],
                "events": [r.to_dict() for r in self.records]}

    @classmethod
    def from_dict(cls, raw: Mapping) -> "DocPrediction":
        mats = {}
        for mraw in raw["matrices"]:
            mat = TerMatrix.from_dict(mraw)
            mats[mat.event_type] = mat
        return cls(str(raw["doc_id"]), RowPlan.from_list(raw["rows"]), mats, {},
                   [EventRecord.from_dict(e) for e in raw["events"]])


def predict_with_model(model: TerMcee, docs: Sequence[Document], num: RoleNumbering) -> list[DocPrediction]:
    out = []
    for doc in docs:
        plan = plan_duplicates(doc, model.ont)
        tags, conf = model.predict_grids(doc, plan)
        mats = {t: TerMatrix(t, plan, model.m, tags[k]) for k, t in enumerate(model.ont.names)}
        confs = {t: conf[k] for k, t in enumerate(model.ont.names)}
        out.append(DocPrediction(doc.doc_id, plan, mats, confs, decode_events(mats, model.ont, num, confs)))
    return out


def score_predictions(preds: Sequence[DocPrediction], docs: Sequence[Document], ont: EventOntology,
                      m: int) -> MetricsReport:
    """Score predictions against gold documents (already stopword-filtered, same order or by id)."""
    num = number_roles(ont)
    by_id = {d.doc_id: d for d in docs}
    results: list[DocResult] = []
    for pred in preds:
        doc = by_id[pred.doc_id]
        gold = build_gold_matrices(doc, ont, num, m, pred.plan)
        results.append(score_document(doc.doc_id, pred.matrices, gold, pred.records, doc.gold_records))
    return evaluate(results, ont.names)


def train(train_docs: Sequence[Document], ont: EventOntology, cfg: TrainConfig = TrainConfig(),
          dev_docs: Sequence[Document] | None = None, stoplist=None,
          embeddings: tuple[Sequence[str], np.ndarray] | None = None,
          on_epoch: Callable[[EpochLog], None] | None = None) -> TrainResult:
    if not train_docs:
        raise TrainingError("training set is empty")
    stop = tuple(sorted(stoplist)) if stoplist else ()
    train_docs = prepare(train_docs, ont, stop)
    dev_docs = prepare(dev_docs, ont, stop) if dev_docs else []
    num = number_roles(ont)
    m = cfg.m

    if embeddings is not None:
        tokens, vectors = embeddings
        if vectors.shape[1] != cfg.features.sem_dim:
            cfg = replace(cfg, features=replace(cfg.features, sem_dim=int(vectors.shape[1])))
        base = FeatureVocabs.build(train_docs)
        vocabs = FeatureVocabs(Vocab([ROOT, *tokens]), base.pos, base.dep)
        pretrained = _pretrained_table(vocabs, tokens, vectors)
    else:
        vocabs = FeatureVocabs.build(train_docs)
        pretrained = None

    plans, golds = [], []
    for doc in train_docs:
        plan = plan_duplicates(doc, ont)
        mats = build_gold_matrices(doc, ont, num, m, plan)
        plans.append(plan)
        golds.append([mats[t].tags for t in ont.names])
    weights = [class_weights((g[k] for g in golds), ont.event_types[k].role_count + 1, ont.names[k])
               for k in range(ont.u)]

    model = TerMcee(ont, cfg.features, vocabs, m, cfg.seed, pretrained=pretrained)
    store = model.store
    shuffle_rng = make_rng(cfg.seed, SHUFFLE)
    dropout_rng = make_rng(cfg.seed, DROPOUT)

    history: list[EpochLog] = []
    best_f1, best_epoch, best_params = -math.inf, 0, None
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(train_docs))
        epoch_total = 0.0
        per_channel = np.zeros(ont.u, dtype=np.float64)
        store.zero_grad()
        for step, idx in enumerate(order, start=1):
            doc = train_docs[idx]
            try:
                loss, parts = model.loss(doc, plans[idx], golds[idx], weights, train=True, rng=dropout_rng)
            except nn.NonFiniteError as exc:
                raise TrainingError(f"non-finite loss on document {doc.doc_id} (epoch {epoch}): {exc}") from exc
            loss.backward()
            epoch_total += float(loss.data)
            per_channel += parts
            if step % cfg.batch_size == 0 or step == len(order):
                if cfg.clip_norm is not None:
                    nn.clip_grad_norm(store, cfg.clip_norm)
                try:
                    nn.adam_step(store, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
                except nn.NonFiniteError as exc:
                    raise TrainingError(f"non-finite gradient after document {doc.doc_id}: {exc}") from exc
        dev_f1 = None
        if dev_docs:
            dev_f1 = score_predictions(predict_with_model(model, dev_docs, num), dev_docs, ont, m).tag_avg_f1
        entry = EpochLog(epoch, epoch_total, per_channel.tolist(), dev_f1)
        history.append(entry)
        log.info("epoch %d loss %.4f dev F1 %s", epoch, epoch_total, dev_f1)
        if on_epoch is not None:
            on_epoch(entry)
        score = dev_f1 if dev_f1 is not None else float(epoch)
        if score > best_f1:
            best_f1, best_epoch, best_params = score, epoch, store.snapshot()

    frozen = tuple(name for name, p in store.params.items() if not p.requires_grad)
    ckpt = Checkpoint(cfg, ont, vocabs, best_params, frozen,
                      {t: weights[k] for k, t in enumerate(ont.names)}, stop, best_epoch)
    return TrainResult(ckpt, history, best_epoch)


def predict(docs: Sequence[Document], checkpoint: Checkpoint,
            ablation: frozenset[str] | None = None) -> list[DocPrediction]:
    """Argmax tag grids per document and event type, plus decoded records.

    ``ablation`` is the feature set the caller's pipeline was built with; it
    must match the checkpoint's.
    """
    trained_with = checkpoint.config.features.ablation
    if ablation is not None and frozenset(ablation) != trained_with:
        raise ValueError(f"feature ablation {sorted(ablation)} does not match the checkpoint's {sorted(trained_with)}")
    if not docs:
        return []
    docs = prepare(docs, checkpoint.ontology, checkpoint.stoplist)
    unknown = sum(1 for d in docs for t in d.tokens if t.text not in checkpoint.vocabs.tokens)
    if unknown:
        log.warning("%d token(s) are outside the checkpoint vocabulary and map to <UNK>", unknown)
    model = checkpoint.build_model()
    return predict_with_model(model, docs, number_roles(checkpoint.ontology))


def toy_grad_check(seed: int = 0, coords: int = 50, epsilon: float = 1e-3,
                   tolerance: float = 1e-4) -> nn.GradCheckReport:
    """Finite-difference check of the full summed loss on a 2-token, m=2, two-type model in float64."""
    from .corpus import ParsedToken
    from .ontology import DupGroup, EventTypeDef

    ont = EventOntology((
        EventTypeDef("A", ("a1", "a2", "a3"), (DupGroup(frozenset({"a2", "a3"}), frozenset({"nt"})),)),
        EventTypeDef("B", ("b1", "b2")),
    ))
    doc = Document("toy", (
        ParsedToken("Li Wei", "nh", "SBV", 0, 0, "May", "nt", "HED"),
        ParsedToken("May", "nt", "HED", 0, 1),
    ), (EventRecord(1, "A", {"a1": (0,), "a2": (1,), "a3": (1,)}), EventRecord(2, "B", {"b1": (0,)})))
    cfg = FeatureConfig(sem_dim=4, feat_dim=3, hidden_size=4, lstm_layers=2, dropout=0.0)
    num = number_roles(ont)
    model = TerMcee(ont, cfg, FeatureVocabs.build([doc]), 2, seed, dtype=np.float64)
    plan = plan_duplicates(doc, ont)
    mats = build_gold_matrices(doc, ont, num, 2, plan)
    gold = [mats[t].tags for t in ont.names]
    weights = [class_weights([g], ont.event_types[k].role_count + 1) for k, g in enumerate(gold)]
    rng = make_rng(seed, nn.CHECK)
    # move off the near-flat initial point so every gradient is well above round-off
    for p in model.store.trainable().values():
        p.data[...] = rng.uniform(-1.0, 1.0, p.shape)
    return nn.grad_check(lambda: model.loss(doc, plan, gold, weights)[0], model.store, epsilon, tolerance,
                         coords, rng)
