"""Per-event-type prediction channels and the median-weighted loss.

Channel t maps every encoded pair through a one-hidden-layer tanh network,
fed the pair state concatenated with the event type embedding, then an affine
layer to ``|roles_t| + 1`` tag logits (tag 0 is O). Losses are weighted
cross-entropies summed over the whole pair grid; the model loss is the plain
sum over channels.
"""
from __future__ import annotations

import logging
import math
from typing import Iterable, Sequence

import numpy as np

from . import nncore as nn
from .encoder import FeatureConfig
from .ontology import EventOntology

log = logging.getLogger(__name__)


class ChannelHeads:
    def __init__(self, ont: EventOntology, cfg: FeatureConfig, store: nn.ParamStore,
                 rng: np.random.Generator):
        self.ont, self.cfg, self.store = ont, cfg, store
        H = cfg.hidden_size
        if cfg.uses("etype"):
            store.add("emb.etype", rng.uniform(-0.5 / cfg.feat_dim, 0.5 / cfg.feat_dim, (ont.u, cfg.feat_dim)))
        for t, et in enumerate(ont.event_types):
            store.add(f"head.{t}.W1", rng.uniform(-0.08, 0.08, (cfg.head_input_dim, H)))
            store.add(f"head.{t}.b1", np.zeros(H))
            store.add(f"head.{t}.Wp", rng.uniform(-0.08, 0.08, (H, et.role_count + 1)))
            store.add(f"head.{t}.bp", np.zeros(et.role_count + 1))

    def width(self, t: int) -> int:
        return self.ont.event_types[t].role_count + 1

    def channel_forward(self, H: nn.Tensor, t: int) -> nn.Tensor:
        """Tag logits, one row per pair position."""
        if not 0 <= t < self.ont.u:
            raise IndexError(f"channel {t} out of range for {self.ont.u} event types")
        s = self.store
        h = H
        if self.cfg.uses("etype"):
            h = nn.concat([H, nn.embedding(s["emb.etype"], np.full(H.shape[0], t))], axis=1)
        hidden = nn.tanh(nn.add(nn.matmul(h, s[f"head.{t}.W1"]), s[f"head.{t}.b1"]))
        return nn.add(nn.matmul(hidden, s[f"head.{t}.Wp"]), s[f"head.{t}.bp"])


def class_counts(grids: Iterable[np.ndarray], width: int) -> np.ndarray:
    counts = np.zeros(width, dtype=np.int64)
    for g in grids:
        counts += np.bincount(np.asarray(g, dtype=np.int64).ravel(), minlength=width)[:width]
    return counts


def class_weights(grids: Iterable[np.ndarray], width: int, name: str = "") -> np.ndarray:
    """Median frequency balancing: w_c = median(counts) / count_c.

    The median runs over the classes that occur at least once; classes that
    never occur get weight 0. A channel with no non-O cell at all falls back to
    uniform weights.
    """
    counts = class_counts(grids, width)
    if counts[1:].sum() == 0:
        log.warning("channel %s has no gold argument cells; using uniform class weights", name)
        return np.ones(width, dtype=np.float64)
    seen = counts > 0
    if not seen.all():
        log.info("channel %s: tags %s never occur in training gold (weight 0)", name,
                 np.flatnonzero(~seen).tolist())
    med = float(np.median(counts[seen]))
    weights = np.zeros(width, dtype=np.float64)
    weights[seen] = med / counts[seen]
    return weights


def channel_loss(probs: nn.Tensor, gold_tags: np.ndarray, weights: np.ndarray) -> nn.Tensor:
    """Weighted cross-entropy over all positions; ``gold_tags`` is the flattened rows x m grid."""
    return nn.weighted_nll(probs, np.asarray(gold_tags).ravel(), weights)


def total_loss(losses: Sequence[nn.Tensor]) -> nn.Tensor:
    for t, loss in enumerate(losses):
        if not math.isfinite(float(loss.data)):
            raise nn.NonFiniteError(f"channel {t} loss is not finite")
    return nn.add_all(list(losses))
