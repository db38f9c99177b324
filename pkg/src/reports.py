"""Report artifacts.

Every renderer returns the file content as a string, so the caller decides
where it goes; SVGs carry a fixed hash salt and no date, which keeps two runs
byte-identical.
"""

import csv
import io
import json
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from errors import DataError  # noqa: E402
from evaluation import ClassificationReport, RegressionReport  # noqa: E402
from models import MotionClass  # noqa: E402
from utils.fs import canonical_json  # noqa: E402

plt.rcParams["svg.hashsalt"] = "radargait"
plt.rcParams["font.size"] = 9

Report = ClassificationReport | RegressionReport


def report_json(report: Report) -> str:
    return canonical_json(report.to_dict())


def load_report(path: Path) -> Report:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise DataError(f"report {path} not found")
    except json.JSONDecodeError as e:
        raise DataError(f"invalid report JSON in {path}: {e}")

    match data.get("kind"):
        case "classification":
            return ClassificationReport.from_dict(data)
        case "regression":
            return RegressionReport.from_dict(data)
        case other:
            raise DataError(f"{path}: unknown report kind {other!r}")


def _table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    cells = [[str(h) for h in header]] + [[f"{c:.4f}" if isinstance(c, float) else str(c) for c in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _importance_rows(importances: Dict[str, float], top: int = 10) -> List[List[Any]]:
    ranked = sorted(importances.items(), key=lambda kv: (-kv[1], kv[0]))
    return [[name, value] for name, value in ranked[:top]]


def classification_table(report: ClassificationReport) -> str:
    rows = [
        [c.label, int(report.confusion[c].sum()), report.per_class_precision[c], report.per_class_recall[c], report.per_class_f1[c]]
        for c in MotionClass
    ]
    rows.append(["macro", int(report.confusion.sum()), report.macro_precision, report.macro_recall, report.macro_f1])
    out = _table(["class", "support", "precision", "recall", "f1"], rows)
    if report.importances:
        out += "\n" + _table(["feature", "importance"], _importance_rows(report.importances))
    if report.diagnostics:
        out += "\n" + "\n".join(report.diagnostics) + "\n"
    return out


def regression_table(report: RegressionReport) -> str:
    baseline = {b.center: b for b in report.baseline.binned_mae} if report.baseline else {}
    rows = []
    for b in report.binned_mae:
        base = baseline.get(b.center)
        rows.append([b.center, b.count, b.mae, b.std, base.mae if base else "-"])
    rows.append(["all", report.count, report.mae, report.std_abs_err, report.baseline.mae if report.baseline else "-"])
    out = _table(["height", "count", "mae", "std", "boulic_mae"], rows)
    if report.importances:
        out += "\n" + _table(["feature", "importance"], _importance_rows(report.importances))
    return out


def text_table(report: Report) -> str:
    return classification_table(report) if isinstance(report, ClassificationReport) else regression_table(report)


def confusion_csv(report: ClassificationReport) -> str:
    labels = [c.label for c in MotionClass]
    lines = ["true\\predicted," + ",".join(labels)]
    for c in MotionClass:
        lines.append(c.label + "," + ",".join(str(int(v)) for v in report.confusion[c]))
    return "\n".join(lines) + "\n"


def binned_csv(report: RegressionReport) -> str:
    baseline = {b.center: b for b in report.baseline.binned_mae} if report.baseline else {}
    lines = ["center,count,mae,std,boulic_mae"]
    for b in report.binned_mae:
        base = baseline.get(b.center)
        lines.append(f"{b.center!r},{b.count},{b.mae!r},{b.std!r},{repr(base.mae) if base else ''}")
    return "\n".join(lines) + "\n"


def _svg(fig) -> str:
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def confusion_svg(report: ClassificationReport) -> str:
    labels = [c.label for c in MotionClass]
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.imshow(report.row_normalized, cmap="Blues", vmin=0.0, vmax=1.0, interpolation="nearest")
    for i in range(len(labels)):
        for j in range(len(labels)):
            value = report.row_normalized[i, j]
            ax.text(j, i, f"{value:.2f}", ha="center", va="center", color="white" if value > 0.5 else "black")
    ax.set_xticks(range(len(labels)), labels, rotation=45, ha="right")
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(f"macro F1 {report.macro_f1:.3f}")
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    return _svg(fig)


def binned_svg(report: RegressionReport) -> str:
    centers = np.array([b.center for b in report.binned_mae])
    width = float(np.min(np.diff(centers))) * 0.8 if len(centers) > 1 else 0.04

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(
        centers,
        [b.mae for b in report.binned_mae],
        width=width,
        yerr=[b.std for b in report.binned_mae],
        capsize=3,
        color="tab:blue",
        label=f"forest (MAE {report.mae:.3f} m)",
    )
    if report.baseline:
        base = sorted(report.baseline.binned_mae, key=lambda b: b.center)
        ax.plot(
            [b.center for b in base],
            [b.mae for b in base],
            "o-",
            color="tab:red",
            linewidth=1,
            label=f"Boulic (MAE {report.baseline.mae:.3f} m)",
        )
    ax.set_xlabel("true height (m)")
    ax.set_ylabel("mean absolute error (m)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    return _svg(fig)


def importances_svg(importances: Dict[str, float]) -> str:
    """horizontal bars, most important feature on top"""
    ranked = sorted(importances.items(), key=lambda kv: (kv[1], kv[0]))
    fig, ax = plt.subplots(figsize=(6, max(2.5, 0.25 * len(ranked) + 1)))
    ax.barh([k for k, _ in ranked], [v for _, v in ranked], color="tab:green")
    ax.set_xlabel("mean impurity decrease")
    ax.grid(True, axis="x", alpha=0.3)
    fig.tight_layout()
    return _svg(fig)


def render_artifacts(report: Report) -> Dict[str, str]:
    """file name -> content for everything 'report' writes"""
    if isinstance(report, ClassificationReport):
        files = {
            "report.txt": classification_table(report),
            "confusion.csv": confusion_csv(report),
            "confusion.svg": confusion_svg(report),
        }
    else:
        files = {
            "report.txt": regression_table(report),
            "binned_mae.csv": binned_csv(report),
            "binned_mae.svg": binned_svg(report),
        }
    if report.importances:
        files["importances.svg"] = importances_svg(report.importances)
    return files


def summary(report: Report) -> Dict[str, Any]:
    if isinstance(report, ClassificationReport):
        return {
            "macro_f1": report.macro_f1,
            "macro_precision": report.macro_precision,
            "macro_recall": report.macro_recall,
        }
    out = {"mae": report.mae, "std_abs_err": report.std_abs_err, "count": report.count}
    if report.baseline:
        out["boulic_mae"] = report.baseline.mae
    return out


def sweep_table(points: Sequence[Dict[str, Any]]) -> str:
    if not points:
        return ""
    keys = sorted({k for p in points for k in p["overrides"]})
    metrics = sorted(points[0]["summary"])
    rows = [[p["overrides"].get(k, "") for k in keys] + [p["summary"][m] for m in metrics] for p in points]
    return _table(keys + metrics, rows)


def feature_csv(keys: Sequence[Dict[str, Any]], names: Sequence[str], matrix: np.ndarray) -> str:
    """one row per window: identifying columns, then the features"""
    id_cols = list(keys[0]) if keys else ["window"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(id_cols + list(names))
    for ids, row in zip(keys, np.asarray(matrix)):
        writer.writerow([ids[c] for c in id_cols] + [repr(float(v)) for v in row])
    return buf.getvalue()


def read_feature_csv(path: Path, names: Sequence[str]) -> Tuple[List[Dict[str, str]], np.ndarray]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            rows = list(csv.DictReader(f))
    except FileNotFoundError:
        raise DataError(f"feature table {path} not found")
    if not rows:
        raise DataError(f"feature table {path} has no rows")

    missing = [n for n in names if n not in rows[0]]
    if missing:
        raise DataError(f"{path}: missing feature columns {', '.join(missing)}")
    try:
        values = np.array([[float(r[n]) for n in names] for r in rows], dtype=float)
    except (TypeError, ValueError) as e:
        raise DataError(f"{path}: bad feature value: {e}")
    ids = [{k: v for k, v in r.items() if k not in names} for r in rows]
    return ids, values
