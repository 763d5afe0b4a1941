"""Strategy grid for ablation runs.

Eight configurations switch four components on and off: width-dependent
extraneous density vs a constant one, width-scaled vs fixed process noise,
probabilistic vs IOU association, and how detector confidence is used.
Models are fitted once on the training sequences; ``c_EX`` is re-searched
per row so every variant gets its own best clutter scale.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

from .estimate import CEX_EXPONENTS, FitReport, TrainingSequence, fit, search_cex
from .evalkit.metrics import MetricsReport, combine, evaluate
from .pipeline import TrackerConfig, run


@dataclass(frozen=True)
class Strategy:
    row: int
    dynamic_clutter: bool
    distance_aware: bool
    assoc: str  # "probabilistic" or "iou"
    confidence: str  # "off", "raw" or "calibrated"

    def apply(self, cfg: TrackerConfig) -> TrackerConfig:
        return cfg.replace(
            clutter="dynamic" if self.dynamic_clutter else "constant",
            distance_aware=self.distance_aware,
            motion=cfg.motion.replace(distance_aware=self.distance_aware),
            assoc=self.assoc,
            confidence=self.confidence,
        )


ABLATION_ROWS = (
    Strategy(1, False, True, "probabilistic", "off"),
    Strategy(2, False, False, "probabilistic", "off"),
    Strategy(3, True, False, "probabilistic", "off"),
    Strategy(4, True, False, "iou", "off"),
    Strategy(5, True, True, "iou", "off"),
    Strategy(6, True, True, "probabilistic", "off"),
    Strategy(7, True, True, "probabilistic", "raw"),
    Strategy(8, True, True, "probabilistic", "calibrated"),
)

FULL = ABLATION_ROWS[-1]


def single_axis_downgrades(full: Strategy = FULL) -> dict[str, Strategy]:
    return {
        "constant_clutter": Strategy(0, False, full.distance_aware, full.assoc, full.confidence),
        "naive_motion": Strategy(0, full.dynamic_clutter, False, full.assoc, full.confidence),
        "iou_assoc": Strategy(0, full.dynamic_clutter, full.distance_aware, "iou", full.confidence),
        "no_confidence": Strategy(0, full.dynamic_clutter, full.distance_aware, full.assoc, "off"),
    }


@dataclass
class AblationResult:
    strategy: Strategy
    c_ex: float
    metrics: MetricsReport


def evaluate_strategy(
    st: Strategy,
    fitted: FitReport,
    base: TrackerConfig,
    train: Sequence[TrainingSequence],
    val: Sequence[TrainingSequence],
    search: bool = True,
    exponents: Sequence[float] = CEX_EXPONENTS,
) -> AblationResult:
    cfg = st.apply(base.replace(motion=fitted.motion_params(base.motion.dt)))
    cm = fitted.confidence_model
    clutter = fitted.clutter_model
    if search:
        c_ex, _ = search_cex(train, cm, clutter, cfg, exponents)
        clutter = clutter.with_cex(c_ex)
    reports = {}
    for s in val:
        scfg = cfg.replace(motion=cfg.motion.replace(dt=s.dt))
        res = run(s.frames, scfg, clutter, cm)
        reports[s.name] = evaluate(s.gt, res.boxes)
    return AblationResult(st, clutter.c_ex, combine(reports))


def run_ablation(
    train: Sequence[TrainingSequence],
    val: Sequence[TrainingSequence],
    base: TrackerConfig,
    rows: Sequence[Strategy] = ABLATION_ROWS,
    search: bool = True,
    exponents: Sequence[float] = CEX_EXPONENTS,
    fitted: FitReport | None = None,
) -> list[AblationResult]:
    if fitted is None:
        fitted = fit(train, base, search=False)
    return [evaluate_strategy(st, fitted, base, train, val, search, exponents) for st in rows]


CSV_COLUMNS = ("row", "dynamic_clutter", "distance_aware", "prob_assoc", "detection_confidence", "MOTA", "IDF1", "c_ex")


def to_csv(results: Sequence[AblationResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    conf_label = {"off": "-", "raw": "raw", "calibrated": "calib"}
    for r in results:
        st = r.strategy
        w.writerow([
            st.row,
            "yes" if st.dynamic_clutter else "-",
            "yes" if st.distance_aware else "-",
            "yes" if st.assoc == "probabilistic" else "IOU",
            conf_label[st.confidence],
            f"{100 * r.metrics.mota:.1f}",
            f"{100 * r.metrics.idf1:.1f}",
            f"{r.c_ex:.4g}",
        ])
    return buf.getvalue()
