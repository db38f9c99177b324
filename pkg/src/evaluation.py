from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Protocol, Sequence

import numpy as np
from tqdm import tqdm

from errors import PreconditionError
from models import MotionClass, TargetWindow
from utils import logger, progress_enabled
from utils.rng import child_rng, derive_seed

HEIGHT_BIN = 0.05
N_CLASSES = len(MotionClass)


class Pipeline(Protocol):
    def fit(self, samples: Sequence[Any], targets: Sequence[Any], seed: int = 0) -> Any: ...

    def predict(self, samples: Sequence[Any]) -> np.ndarray: ...


@dataclass(frozen=True)
class FoldPlan:
    assignments: Dict[str, int]
    k: int

    def fold_of(self, group: str) -> int:
        return self.assignments[group]

    def test_mask(self, groups: Sequence[str], fold: int) -> np.ndarray:
        return np.array([self.assignments[g] == fold for g in groups], dtype=bool)


def grouped_kfold(subjects: Sequence[str], k: int = 5, seed: int = 0) -> FoldPlan:
    unique = sorted(set(subjects))
    if k < 2:
        raise PreconditionError(f"cross-validation needs at least 2 folds, got {k}")
    if len(unique) < k:
        raise PreconditionError(f"{len(unique)} subjects cannot fill {k} folds")
    order = child_rng(seed).permutation(len(unique))
    return FoldPlan(assignments={unique[j]: i % k for i, j in enumerate(order)}, k=k)


def group_keys(windows: Sequence[TargetWindow]) -> List[str]:
    """
    subject id of every window; windows of a class recorded by a single
    subject are grouped by recording instead
    """
    subjects = [w.subject_id or w.track_id for w in windows]
    by_class: Dict[int, set] = defaultdict(set)
    for w, s in zip(windows, subjects):
        if isinstance(w.label, MotionClass):
            by_class[int(w.label)].add(s)

    keys = []
    for w, s in zip(windows, subjects):
        if isinstance(w.label, MotionClass) and len(by_class[int(w.label)]) == 1:
            keys.append(f"{s}/{w.recording_id or w.track_id}")
        else:
            keys.append(s)
    return keys


@dataclass
class ClassificationReport:
    confusion: np.ndarray
    row_normalized: np.ndarray
    per_class_precision: np.ndarray
    per_class_recall: np.ndarray
    per_class_f1: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    classes_present: List[int]
    diagnostics: List[str] = field(default_factory=list)
    importances: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "classification",
            "classes": [c.label for c in MotionClass],
            "classes_present": [MotionClass(c).label for c in self.classes_present],
            "confusion": self.confusion.astype(int).tolist(),
            "row_normalized": self.row_normalized.tolist(),
            "per_class_precision": self.per_class_precision.tolist(),
            "per_class_recall": self.per_class_recall.tolist(),
            "per_class_f1": self.per_class_f1.tolist(),
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "diagnostics": list(self.diagnostics),
            "importances": dict(self.importances),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ClassificationReport":
        return cls(
            confusion=np.array(data["confusion"]),
            row_normalized=np.array(data["row_normalized"]),
            per_class_precision=np.array(data["per_class_precision"]),
            per_class_recall=np.array(data["per_class_recall"]),
            per_class_f1=np.array(data["per_class_f1"]),
            macro_precision=data["macro_precision"],
            macro_recall=data["macro_recall"],
            macro_f1=data["macro_f1"],
            classes_present=[int(MotionClass.from_str(c)) for c in data["classes_present"]],
            diagnostics=list(data.get("diagnostics", [])),
            importances=dict(data.get("importances", {})),
        )


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """elementwise num / den with 0/0 taken as 0"""
    out = np.zeros(len(num))
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    return out


def metrics_from_confusion(confusion: np.ndarray) -> ClassificationReport:
    """rows are true classes, columns predictions"""
    confusion = np.asarray(confusion, dtype=float)
    support = confusion.sum(axis=1)
    predicted = confusion.sum(axis=0)
    tp = np.diag(confusion)

    precision = _safe_ratio(tp, predicted)
    recall = _safe_ratio(tp, support)
    f1 = _safe_ratio(2 * precision * recall, precision + recall)
    row_normalized = np.zeros_like(confusion)
    has = support > 0
    row_normalized[has] = confusion[has] / support[has, None]

    present = np.flatnonzero(has)
    macro = (lambda a: float(a[present].mean()) if len(present) else 0.0)
    return ClassificationReport(
        confusion=confusion.astype(np.int64),
        row_normalized=row_normalized,
        per_class_precision=precision,
        per_class_recall=recall,
        per_class_f1=f1,
        macro_precision=macro(precision),
        macro_recall=macro(recall),
        macro_f1=macro(f1),
        classes_present=[int(c) for c in present],
    )


@dataclass(frozen=True)
class BinStat:
    center: float
    mae: float
    std: float
    count: int


@dataclass
class RegressionReport:
    mae: float
    std_abs_err: float
    binned_mae: List[BinStat]
    count: int
    importances: Dict[str, float] = field(default_factory=dict)
    baseline: Optional["RegressionReport"] = None

    def to_dict(self) -> Dict[str, Any]:
        out = {
            "kind": "regression",
            "mae": self.mae,
            "std_abs_err": self.std_abs_err,
            "count": self.count,
            "binned_mae": [
                {"center": b.center, "mae": b.mae, "std": b.std, "count": b.count} for b in self.binned_mae
            ],
            "importances": dict(self.importances),
        }
        if self.baseline is not None:
            out["baseline"] = self.baseline.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RegressionReport":
        return cls(
            mae=data["mae"],
            std_abs_err=data["std_abs_err"],
            binned_mae=[BinStat(**b) for b in data["binned_mae"]],
            count=data["count"],
            importances=dict(data.get("importances", {})),
            baseline=cls.from_dict(data["baseline"]) if data.get("baseline") else None,
        )


def regression_report(truth: Sequence[float], predicted: Sequence[float], bin_width: float = HEIGHT_BIN) -> RegressionReport:
    truth = np.asarray(truth, dtype=float)
    err = np.abs(np.asarray(predicted, dtype=float) - truth)
    if len(err) == 0:
        raise PreconditionError("no predictions to evaluate")

    # rounding keeps heights on a bin edge (1.50, 1.55, ...) in the upper bin
    index = np.floor(np.round(truth / bin_width, 9)).astype(np.int64)
    bins = []
    for i in np.unique(index):
        sel = err[index == i]
        bins.append(
            BinStat(center=float(round((i + 0.5) * bin_width, 6)), mae=float(sel.mean()), std=float(sel.std()), count=int(len(sel)))
        )
    return RegressionReport(mae=float(err.mean()), std_abs_err=float(err.std()), binned_mae=bins, count=int(len(err)))


def _folds(plan: FoldPlan, groups: Sequence[str], desc: str):
    groups = list(groups)
    for fold in tqdm(range(plan.k), desc=desc, disable=not progress_enabled(), leave=False):
        test = plan.test_mask(groups, fold)
        if not test.any():
            continue
        train = ~test
        if {g for g, t in zip(groups, test) if t} & {g for g, t in zip(groups, train) if t}:
            raise PreconditionError(f"fold {fold}: a group appears in both training and test data")
        yield fold, np.flatnonzero(train), np.flatnonzero(test)


def cross_validate(
    make_pipeline: Callable[[], Pipeline],
    samples: Sequence[Any],
    targets: Sequence[Any],
    groups: Sequence[str],
    plan: FoldPlan,
    seed: int = 0,
    on_fold: Optional[Callable[[int, Pipeline], None]] = None,
) -> np.ndarray:
    """out-of-fold predictions for every sample"""
    targets = np.asarray(targets)
    predictions = np.empty(len(samples), dtype=targets.dtype)
    for fold, train, test in _folds(plan, groups, "folds"):
        pipeline = make_pipeline()
        pipeline.fit([samples[i] for i in train], targets[train], derive_seed(seed, fold))
        predictions[test] = pipeline.predict([samples[i] for i in test])
        logger.debug(f"fold {fold}: trained on {len(train)}, tested on {len(test)} samples")
        if on_fold:
            on_fold(fold, pipeline)
    return predictions


def evaluate_classification(
    make_pipeline: Callable[[], Pipeline],
    samples: Sequence[Any],
    targets: Sequence[int],
    groups: Sequence[str],
    plan: FoldPlan,
    seed: int = 0,
) -> ClassificationReport:
    targets = np.asarray(targets, dtype=np.int64)
    diagnostics: List[str] = []
    importances: List[np.ndarray] = []
    names: List[str] = []

    def inspect(fold: int, pipeline: Pipeline) -> None:
        train_classes = {int(d.motion) for d in getattr(pipeline, "dictionaries", [])}
        test_classes = set(targets[plan.test_mask(groups, fold)].tolist())
        for code in sorted(test_classes - train_classes):
            diagnostics.append(f"fold {fold}: class {MotionClass(code).label} absent from training data")
        if hasattr(pipeline, "importances"):
            importances.append(np.asarray(pipeline.importances))
            names[:] = list(pipeline.feature_names)

    predicted = cross_validate(make_pipeline, samples, targets, groups, plan, seed, inspect)
    confusion = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    np.add.at(confusion, (targets, predicted), 1)

    report = metrics_from_confusion(confusion)
    report.diagnostics = diagnostics
    if importances:
        report.importances = dict(zip(names, np.mean(importances, axis=0).tolist()))
    return report


def evaluate_regression(
    make_pipeline: Callable[[], Pipeline],
    samples: Sequence[Any],
    targets: Sequence[float],
    groups: Sequence[str],
    plan: FoldPlan,
    seed: int = 0,
) -> RegressionReport:
    importances: List[np.ndarray] = []
    names: List[str] = []

    def inspect(fold: int, pipeline: Pipeline) -> None:
        if hasattr(pipeline, "importances"):
            importances.append(np.asarray(pipeline.importances))
            names[:] = list(pipeline.feature_names)

    predicted = cross_validate(make_pipeline, samples, np.asarray(targets, dtype=float), groups, plan, seed, inspect)
    report = regression_report(targets, predicted)
    if importances:
        report.importances = dict(zip(names, np.mean(importances, axis=0).tolist()))
    return report
