"""Agreement between two raters: confusion metrics, weighted kappa, Cronbach's alpha.

The AI scorer and the expert each produce a :class:`RaterTable` of binary
scores for the seven criteria plus overall acceptance. The expert table is
the reference ("ground truth") for the confusion metrics.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from .criteria import is_acceptable
from .errors import DegenerateMarginals, PairingError, ZeroVariance

CSV_HEADER = ("image_id", "c1", "c2", "c3", "c4", "c5", "c6", "c7", "acceptable")
ITEM_KEYS = CSV_HEADER[1:8]
ROW_KEYS = ITEM_KEYS + ("acceptable",)
ROW_LABELS = (
    "Neutral position",
    "Horizontal orientation",
    "Fetal palate (mid-sagittal section)",
    "Magnification",
    "Left definition for caliper",
    "Right definition for caliper",
    "Fetal face up/down",
    "Acceptance of CRL measurement",
)
CI_LEVEL = 0.95


# Rater tables


@dataclass(frozen=True)
class RaterRow:
    image_id: str
    items: tuple  # seven bools, c1..c7
    acceptable: bool

    @property
    def score(self) -> int:
        return sum(self.items)


@dataclass(frozen=True)
class RaterTable:
    rater_id: str
    rows: tuple

    def __post_init__(self):
        rows = tuple(self.rows)
        seen = set()
        for row in rows:
            if row.image_id in seen:
                raise ValueError(f"duplicate image_id {row.image_id!r} in {self.rater_id} table")
            seen.add(row.image_id)
            if len(row.items) != 7:
                raise ValueError(f"{row.image_id}: expected 7 criteria, got {len(row.items)}")
        object.__setattr__(self, "rows", rows)

    @property
    def image_ids(self) -> list:
        return [row.image_id for row in self.rows]

    def by_id(self) -> dict:
        return {row.image_id: row for row in self.rows}

    def acceptance_consistent(self) -> bool:
        """True when every row's acceptance follows the score >= 4 rule."""
        return all(row.acceptable == is_acceptable(row.score) for row in self.rows)

    @classmethod
    def from_scorecards(cls, cards, rater_id: str = "ai") -> "RaterTable":
        rows = [
            RaterRow(card.image_id, tuple(bool(v) for v in card.criteria()), card.acceptable)
            for card in sorted(cards, key=lambda c: c.image_id)
        ]
        return cls(rater_id, tuple(rows))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow([row.image_id, *(int(v) for v in row.items), int(row.acceptable)])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8", newline="")

    @classmethod
    def read_csv(cls, path, rater_id: Optional[str] = None) -> "RaterTable":
        path = Path(path)
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
                raise ValueError(f"{path}: header must be {','.join(CSV_HEADER)}")
            rows = []
            for lineno, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                if len(rec) != len(CSV_HEADER):
                    raise ValueError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
                flags = []
                for value in rec[1:]:
                    value = value.strip()
                    if value not in ("0", "1"):
                        raise ValueError(f"{path}:{lineno}: scores must be 0 or 1, got {value!r}")
                    flags.append(value == "1")
                rows.append(RaterRow(rec[0], tuple(flags[:7]), flags[7]))
        return cls(rater_id or path.stem, tuple(rows))


def pair_tables(gt: RaterTable, pred: RaterTable) -> list:
    """Rows of both tables matched by image id, in sorted id order.

    Raises:
        PairingError: the tables do not cover the same image ids.
    """
    a, b = gt.by_id(), pred.by_id()
    if a.keys() != b.keys():
        only_a = sorted(a.keys() - b.keys())
        only_b = sorted(b.keys() - a.keys())
        raise PairingError(
            f"image ids differ: {len(only_a)} only in {gt.rater_id}, "
            f"{len(only_b)} only in {pred.rater_id}"
        )
    return [(a[k], b[k]) for k in sorted(a)]


# Confusion metrics


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def table(self) -> np.ndarray:
        """2x2 counts, rows = reference (1, 0), columns = prediction (1, 0)."""
        return np.array([[self.tp, self.fn], [self.fp, self.tn]], dtype=np.int64)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: Optional[float]
    recall: Optional[float]


def confusion(gt, pred) -> ConfusionMatrix:
    """Confusion counts of ``pred`` against the reference ``gt``.

    Raises:
        PairingError: the vectors have different lengths.
    """
    g = np.asarray(gt, dtype=bool)
    p = np.asarray(pred, dtype=bool)
    if g.shape != p.shape or g.ndim != 1:
        raise PairingError(f"cannot pair vectors of shapes {g.shape} and {p.shape}")
    return ConfusionMatrix(
        tp=int(np.sum(g & p)),
        fp=int(np.sum(~g & p)),
        fn=int(np.sum(g & ~p)),
        tn=int(np.sum(~g & ~p)),
    )


def metrics(cm: ConfusionMatrix) -> Metrics:
    if cm.n < 1:
        raise ValueError("confusion matrix is empty")
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else None
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else None
    return Metrics((cm.tp + cm.tn) / cm.n, precision, recall)


# Weighted kappa


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    ci_low: float
    ci_high: float
    p_value: Optional[float]
    n: int
    se: float
    se_null: float


def linear_weights(k: int) -> np.ndarray:
    i = np.arange(k)
    return 1.0 - np.abs(i[:, None] - i[None, :]) / (k - 1)


def kappa_from_table(table) -> KappaResult:
    """Linearly weighted kappa of a k x k contingency table.

    Rows index the first rater's category, columns the second's. The CI uses
    the Fleiss-Cohen-Everitt large-sample variance; the p-value is a
    two-sided normal test of kappa = 0 using the variance under the null.

    Raises:
        DegenerateMarginals: chance agreement is 1, so kappa is undefined.
    """
    counts = np.asarray(table, dtype=float)
    if counts.ndim != 2 or counts.shape[0] != counts.shape[1] or counts.shape[0] < 2:
        raise ValueError("kappa needs a square table with at least 2 categories")
    n = counts.sum()
    if n < 2:
        raise ValueError("kappa needs at least 2 paired ratings")
    k = counts.shape[0]
    w = linear_weights(k)
    p = counts / n
    row, col = p.sum(axis=1), p.sum(axis=0)
    po = float(np.sum(w * p))
    pe = float(np.sum(w * np.outer(row, col)))
    if pe >= 1.0:
        raise DegenerateMarginals("both raters use one identical category; kappa is undefined")
    kappa = (po - pe) / (1.0 - pe)

    w_row = w @ col  # mean weight for each first-rater category
    w_col = row @ w  # mean weight for each second-rater category
    spread = w_row[:, None] + w_col[None, :]
    var = (
        np.sum(p * (w - spread * (1.0 - kappa)) ** 2) - (kappa - pe * (1.0 - kappa)) ** 2
    ) / (n * (1.0 - pe) ** 2)
    var0 = (np.sum(np.outer(row, col) * (w - spread) ** 2) - pe**2) / (n * (1.0 - pe) ** 2)
    if np.count_nonzero(row) == 1 or np.count_nonzero(col) == 1:
        # One rater never varies: kappa is exactly 0 and both variances vanish,
        # but rounding would leave ~1e-17 residue and a meaningless p-value.
        var = var0 = 0.0
    se = float(np.sqrt(max(var, 0.0)))
    se0 = float(np.sqrt(max(var0, 0.0)))

    z = stats.norm.ppf(0.5 + CI_LEVEL / 2.0)
    p_value = float(2.0 * stats.norm.sf(abs(kappa) / se0)) if se0 > 0 else None
    return KappaResult(
        float(kappa), float(kappa - z * se), float(kappa + z * se), p_value, int(round(n)), se, se0
    )


def weighted_kappa(gt, pred, k_categories: int = 2) -> KappaResult:
    """Weighted kappa of two equal-length vectors coded ``0 .. k-1``."""
    g = np.asarray(gt).astype(np.int64)
    p = np.asarray(pred).astype(np.int64)
    if g.shape != p.shape or g.ndim != 1:
        raise PairingError(f"cannot pair vectors of shapes {g.shape} and {p.shape}")
    if g.size < 2:
        raise ValueError("kappa needs at least 2 paired ratings")
    for v in (g, p):
        if v.min() < 0 or v.max() >= k_categories:
            raise ValueError(f"categories must be coded 0..{k_categories - 1}")
    table = np.zeros((k_categories, k_categories), dtype=np.int64)
    np.add.at(table, (g, p), 1)
    return kappa_from_table(table)


# Cronbach's alpha


@dataclass(frozen=True)
class AlphaResult:
    alpha_all: float
    alpha_if_deleted: dict  # item name -> alpha without it (None if undefined)
    k_items: int


def _alpha(items: np.ndarray) -> Optional[float]:
    k = items.shape[1]
    total_var = items.sum(axis=1).var(ddof=1)
    if total_var == 0:
        return None
    return k / (k - 1) * (1.0 - items.var(axis=0, ddof=1).sum() / total_var)


def cronbach_alpha(items, names=ITEM_KEYS) -> AlphaResult:
    """Cronbach's alpha over item columns, plus alpha with each item removed.

    Raises:
        ZeroVariance: the per-image total score never varies.
    """
    x = np.asarray(items, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("alpha needs an n x k matrix with n >= 2")
    k = x.shape[1]
    if k < 3:
        raise ValueError("alpha with deletions needs at least 3 items")
    names = tuple(names)
    if len(names) != k:
        raise ValueError(f"{len(names)} names for {k} items")
    overall = _alpha(x)
    if overall is None:
        raise ZeroVariance("total score variance is zero")
    deleted = {name: _alpha(np.delete(x, i, axis=1)) for i, name in enumerate(names)}
    return AlphaResult(float(overall), {k_: (None if v is None else float(v)) for k_, v in deleted.items()}, k)


# Report


@dataclass(frozen=True)
class CriterionAgreement:
    key: str
    label: str
    confusion: ConfusionMatrix
    metrics: Metrics
    kappa: Optional[KappaResult]


@dataclass(frozen=True)
class AgreementReport:
    ai_id: str
    expert_id: str
    n_images: int
    rows: tuple  # CriterionAgreement, c1..c7 then acceptance
    alpha_expert: Optional[AlphaResult]
    alpha_ai: Optional[AlphaResult]
    accepted_expert: int
    accepted_ai: int

    def to_dict(self) -> dict:
        def kappa_dict(res):
            if res is None:
                return None
            return {
                "kappa": res.kappa,
                "ci_low": res.ci_low,
                "ci_high": res.ci_high,
                "p_value": res.p_value,
                "n": res.n,
            }

        def alpha_dict(res):
            if res is None:
                return None
            return {
                "alpha_all": res.alpha_all,
                "alpha_if_deleted": dict(res.alpha_if_deleted),
                "k_items": res.k_items,
            }

        return {
            "ai_rater": self.ai_id,
            "expert_rater": self.expert_id,
            "n_images": self.n_images,
            "accepted": {"expert": self.accepted_expert, "ai": self.accepted_ai},
            "criteria": [
                {
                    "criterion": row.key,
                    "label": row.label,
                    "confusion": {
                        "tp": row.confusion.tp,
                        "fp": row.confusion.fp,
                        "fn": row.confusion.fn,
                        "tn": row.confusion.tn,
                    },
                    "accuracy": row.metrics.accuracy,
                    "precision": row.metrics.precision,
                    "recall": row.metrics.recall,
                    "weighted_kappa": kappa_dict(row.kappa),
                }
                for row in self.rows
            ],
            "cronbach_alpha": {
                "expert": alpha_dict(self.alpha_expert),
                "ai": alpha_dict(self.alpha_ai),
            },
        }

    def to_markdown(self) -> str:
        def pct(v):
            return "n/a" if v is None else f"{100.0 * v:.1f}"

        def num(v):
            return "n/a" if v is None else f"{v:.3f}"

        def pval(v):
            if v is None:
                return "n/a"
            return "<0.001" if v < 0.001 else f"{v:.3f}"

        lines = [
            "# Agreement between AI-based and expert-based image scoring",
            "",
            f"Images compared: {self.n_images}. "
            f"Acceptable: {self.accepted_ai} out of {self.n_images} (AI-based), "
            f"{self.accepted_expert} out of {self.n_images} (expert-based).",
            "",
            "## Table 1. Accuracy, precision and recall per criterion",
            "",
            "| Criteria | Accuracy (%) | Precision (%) | Recall (%) |",
            "|---|---|---|---|",
        ]
        for i, row in enumerate(self.rows, start=1):
            m = row.metrics
            lines.append(f"| {i}-{row.label} | {pct(m.accuracy)} | {pct(m.precision)} | {pct(m.recall)} |")
        lines += [
            "",
            "## Table 2. Cohen's weighted kappa per criterion",
            "",
            "| Criteria | p | Cohen's weighted kappa (95% CI [LB, UB]) |",
            "|---|---|---|",
        ]
        for i, row in enumerate(self.rows, start=1):
            kr = row.kappa
            if kr is None:
                lines.append(f"| {i}-{row.label} | n/a | n/a |")
            else:
                lines.append(
                    f"| {i}-{row.label} | {pval(kr.p_value)} | "
                    f"{num(kr.kappa)} [{num(kr.ci_low)}, {num(kr.ci_high)}] |"
                )
        lines += [
            "",
            "## Table 3. Cronbach's alpha if each item is deleted",
            "",
            "| Criteria | Expert-based | AI-based |",
            "|---|---|---|",
        ]

        def deleted(res, key):
            return "n/a" if res is None else num(res.alpha_if_deleted[key])

        for i, key in enumerate(ITEM_KEYS, start=1):
            lines.append(
                f"| {i}-{ROW_LABELS[i - 1]} | {deleted(self.alpha_expert, key)} | "
                f"{deleted(self.alpha_ai, key)} |"
            )
        all_e = "n/a" if self.alpha_expert is None else num(self.alpha_expert.alpha_all)
        all_a = "n/a" if self.alpha_ai is None else num(self.alpha_ai.alpha_all)
        lines.append(f"| Alpha coefficient for all seven items | {all_e} | {all_a} |")
        return "\n".join(lines) + "\n"


def _safe_alpha(items) -> Optional[AlphaResult]:
    try:
        return cronbach_alpha(items)
    except ZeroVariance:
        return None


def compare_tables(ai: RaterTable, expert: RaterTable) -> AgreementReport:
    """Full AI-versus-expert comparison, with the expert table as reference.

    Raises:
        PairingError: the tables cover different image ids.
    """
    pairs = pair_tables(expert, ai)
    gt = np.array([[*e.items, e.acceptable] for e, _ in pairs], dtype=bool).reshape(-1, 8)
    pred = np.array([[*a.items, a.acceptable] for _, a in pairs], dtype=bool).reshape(-1, 8)
    rows = []
    for j, (key, label) in enumerate(zip(ROW_KEYS, ROW_LABELS)):
        cm = confusion(gt[:, j], pred[:, j])
        try:
            kr = kappa_from_table(cm.table()) if cm.n >= 2 else None
        except DegenerateMarginals:
            kr = None
        rows.append(CriterionAgreement(key, label, cm, metrics(cm), kr))
    n = len(pairs)
    return AgreementReport(
        ai_id=ai.rater_id,
        expert_id=expert.rater_id,
        n_images=n,
        rows=tuple(rows),
        alpha_expert=_safe_alpha(gt[:, :7]) if n >= 2 else None,
        alpha_ai=_safe_alpha(pred[:, :7]) if n >= 2 else None,
        accepted_expert=int(gt[:, 7].sum()),
        accepted_ai=int(pred[:, 7].sum()),
    )


__all__ = [
    "AgreementReport",
    "AlphaResult",
    "ConfusionMatrix",
    "KappaResult",
    "Metrics",
    "RaterRow",
    "RaterTable",
    "compare_tables",
    "confusion",
    "cronbach_alpha",
    "kappa_from_table",
    "metrics",
    "weighted_kappa",
]
