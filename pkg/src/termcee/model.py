"""The full pair-tagging network: feature integration, Bi-LSTM, one channel per event type."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import nncore as nn
from .channels import ChannelHeads, channel_loss, total_loss
from .corpus import Document
from .encoder import Encoder, FeatureConfig, FeatureVocabs
from .nncore.rng import INIT, make_rng
from .ontology import EventOntology
from .terstruct import RowPlan


class TerMcee:
    def __init__(self, ont: EventOntology, cfg: FeatureConfig, vocabs: FeatureVocabs, m: int,
                 seed: int = 0, dtype=np.float32, pretrained: np.ndarray | None = None):
        self.ont, self.cfg, self.vocabs, self.m = ont, cfg, vocabs, m
        self.store = nn.ParamStore(dtype)
        rng = make_rng(seed, INIT)
        self.encoder = Encoder(cfg, vocabs, m, self.store, rng, pretrained)
        self.heads = ChannelHeads(ont, cfg, self.store, rng)

    def logits(self, doc: Document, plan: RowPlan, train: bool = False,
               rng: np.random.Generator | None = None) -> list[nn.Tensor]:
        H = self.encoder.encode(doc, plan, train, rng)
        return [self.heads.channel_forward(H, t) for t in range(self.ont.u)]

    def probabilities(self, doc: Document, plan: RowPlan, train: bool = False,
                      rng: np.random.Generator | None = None) -> list[nn.Tensor]:
        return [nn.softmax_rows(z) for z in self.logits(doc, plan, train, rng)]

    def loss(self, doc: Document, plan: RowPlan, gold: Sequence[np.ndarray], weights: Sequence[np.ndarray],
             train: bool = False, rng: np.random.Generator | None = None) -> tuple[nn.Tensor, list[float]]:
        """Summed channel loss and the per-channel values; ``gold[t]`` is the rows x m tag grid."""
        probs = self.probabilities(doc, plan, train, rng)
        losses = [channel_loss(p, g, w) for p, g, w in zip(probs, gold, weights)]
        return total_loss(losses), [float(l.data) for l in losses]

    def predict_grids(self, doc: Document, plan: RowPlan) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Argmax tags (lowest tag wins ties) and their probabilities, per channel, as rows x m grids."""
        tags, conf = [], []
        for p in self.probabilities(doc, plan, train=False):
            best = np.argmax(p.data, axis=1)
            tags.append(best.reshape(plan.row_count, self.m))
            conf.append(p.data[np.arange(best.size), best].reshape(plan.row_count, self.m))
        return tags, conf
