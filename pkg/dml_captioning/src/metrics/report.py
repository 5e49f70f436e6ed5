"""Oracle aggregation and the evaluation report."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from ..errors import DataError
from .diversity import div_n, mbleu, self_cider
from .purity import PurityReport
from .quality import IdfTable, bleu, cider_d, corpus_bleu, rouge_l

logger = logging.getLogger(__name__)

QUALITY_METRICS = ("bleu1", "bleu4", "rouge_l", "cider_d")


def sentence_scores(candidate: str, references: Sequence[str], idf: IdfTable) -> Dict[str, float]:
    return {
        "bleu1": bleu(candidate, references, max_n=1),
        "bleu4": bleu(candidate, references, max_n=4),
        "rouge_l": rouge_l(candidate, references),
        "cider_d": cider_d(candidate, references, idf),
    }


def score_candidates(
    candidates: Sequence[Mapping[str, Any]],
    references: Mapping[str, Sequence[str]],
    idf: IdfTable,
) -> pd.DataFrame:
    """One row per candidate: image_id, mode, caption, logprob and every sentence score."""
    rows: List[Dict[str, Any]] = []
    for record in candidates:
        image_id = record["image_id"]
        if image_id not in references:
            raise DataError(f"candidate for unknown image '{image_id}'")
        row = {
            "image_id": image_id,
            "mode": int(record.get("mode", -1)),
            "caption": record["caption"],
            "logprob": float(record.get("logprob", 0.0)),
        }
        row.update(sentence_scores(record["caption"], references[image_id], idf))
        rows.append(row)
    return pd.DataFrame(rows, columns=["image_id", "mode", "caption", "logprob", *QUALITY_METRICS])


def _image_order(table: pd.DataFrame) -> List[str]:
    return sorted(table["image_id"].unique())


def oracle_scores(table: pd.DataFrame, metrics: Sequence[str] = QUALITY_METRICS) -> Dict[str, float]:
    """Per image, the best sentence score over candidates; then the mean over images."""
    if table.empty:
        raise DataError("oracle scoring needs at least one candidate")
    order = _image_order(table)
    out = {}
    for metric in metrics:
        best = table.groupby("image_id")[metric].max()
        out[metric] = float(np.mean(best.loc[order].to_numpy()))
    return out


def per_mode_scores(table: pd.DataFrame, metrics: Sequence[str] = QUALITY_METRICS) -> Dict[int, Dict[str, float]]:
    """Mean sentence score of each mode over the images it captioned."""
    order = _image_order(table)
    out: Dict[int, Dict[str, float]] = {}
    for mode, group in table.groupby("mode", sort=True):
        indexed = group.groupby("image_id").first()
        images = [i for i in order if i in indexed.index]
        out[int(mode)] = {m: float(np.mean(indexed.loc[images, m].to_numpy())) for m in metrics}
    return out


def best_candidates(table: pd.DataFrame) -> pd.DataFrame:
    """The highest log-probability candidate per image (lowest mode on ties)."""
    ranked = table.sort_values(["image_id", "logprob", "mode"], ascending=[True, False, True], kind="mergesort")
    return ranked.groupby("image_id", sort=True).head(1).reset_index(drop=True)


def corpus_scores(table: pd.DataFrame, references: Mapping[str, Sequence[str]]) -> Dict[str, float]:
    """Scores of the model's own best-1 choice: corpus BLEU, mean ROUGE-L and CIDEr-D."""
    top = best_candidates(table)
    refs = [references[i] for i in top["image_id"]]
    return {
        "bleu1": corpus_bleu(list(top["caption"]), refs, max_n=1),
        "bleu4": corpus_bleu(list(top["caption"]), refs, max_n=4),
        "rouge_l": float(np.mean(top["rouge_l"].to_numpy())),
        "cider_d": float(np.mean(top["cider_d"].to_numpy())),
    }


def diversity_scores(table: pd.DataFrame, idf: IdfTable) -> Optional[Dict[str, float]]:
    """Set diversity averaged over images; None when no image has two candidates."""
    groups = [list(g["caption"]) for _, g in table.groupby("image_id", sort=True)]
    groups = [g for g in groups if len(g) >= 2]
    if not groups:
        return None
    return {
        "div1": float(np.mean([div_n(g, 1) for g in groups])),
        "div2": float(np.mean([div_n(g, 2) for g in groups])),
        "mbleu": float(np.mean([mbleu(g) for g in groups])),
        "self_cider": float(np.mean([self_cider(g, idf) for g in groups])),
    }


@dataclass
class MetricsReport:
    corpus: Dict[str, float]
    oracle: Dict[str, float]
    diversity: Optional[Dict[str, float]]
    per_mode: Dict[int, Dict[str, float]]
    n_images: int
    effective_modes: int
    purity: Optional[PurityReport] = None
    per_image: pd.DataFrame = field(default_factory=pd.DataFrame, repr=False)

    def to_json(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "corpus": self.corpus,
            "oracle": self.oracle,
            "diversity": self.diversity,
            "per_mode": {str(m): scores for m, scores in self.per_mode.items()},
            "n_images": self.n_images,
            "effective_modes": self.effective_modes,
        }
        if self.purity is not None:
            payload["purity"] = self.purity.purity
            payload["adjusted_rand"] = self.purity.adjusted_rand
        return payload


def build_report(
    candidates: Sequence[Mapping[str, Any]],
    references: Mapping[str, Sequence[str]],
    idf: Optional[IdfTable] = None,
    purity: Optional[PurityReport] = None,
) -> MetricsReport:
    """Score generated captions against references.

    The candidate and reference image id sets must be identical.
    """
    candidate_ids = {r["image_id"] for r in candidates}
    if candidate_ids != set(references):
        missing = sorted(set(references) - candidate_ids)[:3]
        extra = sorted(candidate_ids - set(references))[:3]
        raise DataError(f"candidate and reference image ids differ (missing {missing}, unexpected {extra})")
    idf = idf or IdfTable.from_references(references[i] for i in sorted(references))
    table = score_candidates(candidates, references, idf)
    return MetricsReport(
        corpus=corpus_scores(table, references),
        oracle=oracle_scores(table),
        diversity=diversity_scores(table, idf),
        per_mode=per_mode_scores(table),
        n_images=len(candidate_ids),
        effective_modes=int(table.loc[table["mode"] >= 0, "mode"].nunique()),
        purity=purity,
        per_image=table,
    )
