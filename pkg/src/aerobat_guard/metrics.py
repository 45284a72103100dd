"""Tracking-error metrics over logged runs: per-axis RMS, total RMS, stability, score."""
import csv
import io
from dataclasses import asdict, dataclass

import numpy as np

DEFAULT_TARGET = (0.0, 0.0, 0.2)


def rms_axis(series, target=0.0):
    """Root-mean-square deviation of ``series`` from ``target``.

    Raises:
        ValueError: on an empty series.
    """
    s = np.asarray(series, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("rms of an empty series is undefined")
    return float(np.sqrt(np.mean((s - target) ** 2)))


def rms_total(rx, ry, rz):
    vals = np.array([rx, ry, rz], dtype=float)
    if np.any(vals < 0):
        raise ValueError("per-axis RMS values must be non-negative")
    return float(np.sqrt(vals @ vals))


def stability_metric(sx, sy, sz):
    """Negative mean of the per-axis standard deviations (0 is perfectly steady)."""
    vals = np.array([sx, sy, sz], dtype=float)
    if np.any(vals < 0):
        raise ValueError("standard deviations must be non-negative")
    return float(-vals.mean())


def performance_score(total_rms, stability):
    return float(-total_rms + stability)


@dataclass(frozen=True)
class MetricsReport:
    rms_x: float
    rms_y: float
    rms_z: float
    rms_total: float
    stability: float
    score: float
    label: str = ""

    @classmethod
    def from_axes(cls, rx, ry, rz, sx, sy, sz, label=""):
        tot = rms_total(rx, ry, rz)
        stab = stability_metric(sx, sy, sz)
        return cls(rx, ry, rz, tot, stab, performance_score(tot, stab), label)


def analyze_positions(positions, target=DEFAULT_TARGET, scale=1.0, label=""):
    """Metrics for an ``(N, 3)`` position trace.

    Args:
        positions: guard positions (log units).
        target: per-axis reference in the same units as ``positions``.
        scale: multiplier applied to positions and target before the metrics
            (100 turns metres into the centimetre-scale numbers of the
            published error table).
    """
    p = np.asarray(positions, dtype=float) * scale
    if p.ndim != 2 or p.shape[1] != 3 or len(p) == 0:
        raise ValueError("positions must be a non-empty (N, 3) array")
    tgt = np.asarray(target, dtype=float) * scale
    r = [rms_axis(p[:, i], tgt[i]) for i in range(3)]
    s = p.std(axis=0)  # population sigma
    return MetricsReport.from_axes(*r, *s, label=label)


FIELDS = ("label", "rms_x", "rms_y", "rms_z", "rms_total", "stability", "score")


def reports_to_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIELDS)
    for r in reports:
        d = asdict(r)
        w.writerow([d["label"]] + [f"{d[k]:.6f}" for k in FIELDS[1:]])
    return buf.getvalue()


def format_table(reports, digits=3):
    """Aligned text table: one row per report."""
    head = ["Test", "RMS X", "RMS Y", "RMS Z", "Total RMS", "Stability", "Score"]
    rows = [[r.label, *(f"{v:.{digits}f}" for v in (r.rms_x, r.rms_y, r.rms_z, r.rms_total, r.stability,
                                                     r.score))] for r in reports]
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h) for i, h in enumerate(head)]

    def line(cells):
        return "  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(cells, widths)))

    out = [line(head), line(["-" * w for w in widths])]
    out += [line(r) for r in rows]
    return "\n".join(out)


def rank(reports):
    """Reports sorted best (highest score) first."""
    return sorted(reports, key=lambda r: r.score, reverse=True)
