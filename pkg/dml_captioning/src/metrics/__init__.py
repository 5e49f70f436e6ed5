"""Caption Metrics Package"""

from .diversity import div_n, mbleu, self_cider
from .purity import PurityReport, mode_purity
from .quality import IdfTable, bleu, cider_d, corpus_bleu, rouge_l
from .report import MetricsReport, build_report, oracle_scores

__all__ = [
    "div_n",
    "mbleu",
    "self_cider",
    "PurityReport",
    "mode_purity",
    "IdfTable",
    "bleu",
    "cider_d",
    "corpus_bleu",
    "rouge_l",
    "MetricsReport",
    "build_report",
    "oracle_scores",
]
