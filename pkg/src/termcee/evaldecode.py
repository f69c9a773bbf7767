"""Matrix -> record decoding and O-filtered scoring.

Tag-level scoring is the headline metric: only cells where the gold or the
predicted tag is non-zero count, so the overwhelming number of correct "O"
cells cannot inflate the score. Record-level scoring (greedy one-to-one record
matching) is reported alongside it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .corpus import EventRecord
from .ontology import EventOntology, RoleNumbering
from .terstruct import TerMatrix


class EvalError(ValueError):
    pass


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __iadd__(self, other: "Counts") -> "Counts":
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        return self

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    @property
    def gold_total(self) -> int:
        return self.tp + self.fn

    def to_dict(self) -> dict:
        return {"p": self.precision, "r": self.recall, "f1": self.f1,
                "tp": self.tp, "fp": self.fp, "fn": self.fn}


def decode_events(matrices: Mapping[str, TerMatrix], ont: EventOntology, num: RoleNumbering,
                  confidences: Mapping[str, np.ndarray] | None = None) -> list[EventRecord]:
    """Turn per-type tag grids (sharing one row plan) into event records.

    Each event column goes to the channel with the most non-zero cells in it;
    ties fall to the higher mean confidence over those cells (when per-cell
    confidences are given), then to the earlier channel.
    """
    present = [t for t in ont.names if t in matrices]
    if not present:
        return []
    first = matrices[present[0]]
    plan, m = first.plan, first.m
    for t in present:
        if matrices[t].plan != plan or matrices[t].m != m:
            raise EvalError("matrices passed to decode_events must share one row plan and m")
    records = []
    for col in range(m):
        best = None
        for t in present:
            column = matrices[t].tags[:, col]
            nz = np.flatnonzero(column)
            if nz.size == 0:
                continue
            conf = float(np.mean(confidences[t][nz, col])) if confidences is not None else 0.0
            key = (nz.size, conf, -ont.index(t))
            if best is None or key > best[0]:
                best = (key, t, nz)
        if best is None:
            continue
        _, t, nz = best
        names = num.role_names(t)
        args: dict[str, set[int]] = {}
        for row in nz:
            tag = int(matrices[t].tags[row, col])
            if tag >= len(names):
                raise EvalError(f"tag {tag} out of range for event type {t!r}")
            args.setdefault(names[tag], set()).add(plan.token_of(int(row)))
        records.append(EventRecord(col + 1, t, {role: tuple(sorted(v)) for role, v in args.items()}))
    return records


def score_tags(pred: TerMatrix, gold: TerMatrix) -> Counts:
    """O-filtered cell counts for one event type's matrix."""
    if pred.tags.shape != gold.tags.shape:
        raise EvalError(f"shape mismatch: pred {pred.tags.shape} vs gold {gold.tags.shape}")
    p, g = pred.tags, gold.tags
    wrong = p != g
    return Counts(
        tp=int(np.count_nonzero((p == g) & (g != 0))),
        fp=int(np.count_nonzero((p != 0) & wrong)),
        fn=int(np.count_nonzero((g != 0) & wrong)),
    )


def score_records(pred: Sequence[EventRecord], gold: Sequence[EventRecord]) -> dict[str, Counts]:
    """Greedy one-to-one record matching per event type, counted over (role, token) fillings."""
    out: dict[str, Counts] = {}
    for t in sorted({r.event_type for r in pred} | {r.event_type for r in gold}):
        ps = [r.fillings() for r in pred if r.event_type == t]
        gs = [r.fillings() for r in gold if r.event_type == t]
        cand = sorted(
            ((len(pf & gf), gi, pi) for pi, pf in enumerate(ps) for gi, gf in enumerate(gs)),
            key=lambda x: (-x[0], x[1], x[2]),
        )
        used_p, used_g = set(), set()
        c = Counts()
        for overlap, gi, pi in cand:
            if overlap == 0:
                break
            if pi in used_p or gi in used_g:
                continue
            used_p.add(pi)
            used_g.add(gi)
            c += Counts(overlap, len(ps[pi]) - overlap, len(gs[gi]) - overlap)
        for pi, pf in enumerate(ps):
            if pi not in used_p:
                c.fp += len(pf)
        for gi, gf in enumerate(gs):
            if gi not in used_g:
                c.fn += len(gf)
        out[t] = c
    return out


@dataclass
class DocResult:
    doc_id: str
    gold_events: int
    tag: dict[str, Counts]
    record: dict[str, Counts]


def score_document(doc_id: str, pred_mats: Mapping[str, TerMatrix], gold_mats: Mapping[str, TerMatrix],
                   pred_records: Sequence[EventRecord], gold_records: Sequence[EventRecord]) -> DocResult:
    tag = {t: score_tags(pred_mats[t], gold_mats[t]) for t in gold_mats}
    return DocResult(doc_id, len(gold_records), tag, score_records(pred_records, gold_records))


@dataclass
class MetricsReport:
    types: list[str]
    tag: dict[str, Counts]
    record: dict[str, Counts]
    doc_count: int
    splits: dict[str, "MetricsReport | None"] = field(default_factory=dict)

    def _avg(self, table: dict[str, Counts]) -> float:
        present = [t for t in self.types if table[t].gold_total > 0]
        if not present:
            return 0.0
        return float(np.mean([table[t].f1 for t in present]))

    @property
    def tag_avg_f1(self) -> float:
        """Unweighted mean of per-type tag F1 over types that occur in gold."""
        return self._avg(self.tag)

    @property
    def record_avg_f1(self) -> float:
        return self._avg(self.record)

    def tag_micro(self) -> Counts:
        total = Counts()
        for t in self.types:
            total += self.tag[t]
        return total

    def to_dict(self) -> dict:
        out = {
            "doc_count": self.doc_count,
            "per_type": {t: {"tag": self.tag[t].to_dict(), "record": self.record[t].to_dict()}
                         for t in self.types},
            "avg": {"tag_f1": self.tag_avg_f1, "record_f1": self.record_avg_f1},
            "micro": {"tag": self.tag_micro().to_dict()},
        }
        if self.splits:
            out["splits"] = {k: (v.to_dict() if v is not None else None) for k, v in self.splits.items()}
        return out

    def table(self) -> str:
        lines = [f"{'Type':<8}{'P':>8}{'R':>8}{'F1':>8}{'recF1':>8}"]
        for t in self.types:
            c = self.tag[t]
            lines.append(f"{t:<8}{100 * c.precision:>8.1f}{100 * c.recall:>8.1f}{100 * c.f1:>8.1f}"
                         f"{100 * self.record[t].f1:>8.1f}")
        lines.append(f"{'Avg':<8}{'':>8}{'':>8}{100 * self.tag_avg_f1:>8.1f}{100 * self.record_avg_f1:>8.1f}")
        if self.splits:
            lines.append("")
            lines.append(f"{'Type':<8}{'S.':>8}{'M.':>8}")
            single, multi = self.splits.get("single"), self.splits.get("multi")
            for t in self.types + ["Avg"]:
                cells = []
                for rep in (single, multi):
                    if rep is None:
                        cells.append("-")
                    elif t == "Avg":
                        cells.append(f"{100 * rep.tag_avg_f1:.1f}")
                    else:
                        cells.append(f"{100 * rep.tag[t].f1:.1f}")
                lines.append(f"{t:<8}{cells[0]:>8}{cells[1]:>8}")
        return "\n".join(lines)


def aggregate(results: Sequence[DocResult], types: Sequence[str]) -> MetricsReport:
    tag = {t: Counts() for t in types}
    rec = {t: Counts() for t in types}
    for res in results:
        for t, c in res.tag.items():
            tag[t] += c
        for t, c in res.record.items():
            rec[t] += c
    return MetricsReport(list(types), tag, rec, len(results))


def split_report(results: Sequence[DocResult], types: Sequence[str]) -> dict[str, MetricsReport | None]:
    """Single-event vs multi-event partitions; documents with no gold event form ``none``."""
    parts = {
        "single": [r for r in results if r.gold_events == 1],
        "multi": [r for r in results if r.gold_events > 1],
        "none": [r for r in results if r.gold_events == 0],
    }
    return {k: (aggregate(v, types) if v else None) for k, v in parts.items()}


def evaluate(results: Sequence[DocResult], types: Sequence[str]) -> MetricsReport:
    report = aggregate(results, types)
    report.splits = split_report(results, types)
    return report
