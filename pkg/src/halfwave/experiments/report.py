"""Run reports: JSON manifest + certificates, CSV series, SVG figures.

Every number in a report traces to a series or certificate in the same
file; reports are deterministic (no timestamps, repr-roundtrip floats), so
identical config + seed reproduce byte-identical CSV.  Partial writes are
removed on failure.

Exit codes: 0 all certificates pass, 1 certificate failure, 2 configuration
error, 3 numerical failure (flagged run).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

EXIT_OK = 0
EXIT_CERT_FAILURE = 1
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3


@dataclass
class Series:
    tag: str
    times: np.ndarray
    values: np.ndarray
    shell: int | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)


@dataclass
class RunReport:
    label: str
    manifest: dict = field(default_factory=dict)
    series: list[Series] = field(default_factory=list)
    certificates: list[dict] = field(default_factory=list)
    flagged: bool = False

    def add_series(self, tag: str, times, values, shell: int | None = None):
        self.series.append(Series(tag, times, values, shell))

    def add_certificate(self, cert) -> None:
        self.certificates.append(cert if isinstance(cert, dict) else cert.as_dict())

    @property
    def all_passed(self) -> bool:
        return all(c.get("pass", False) for c in self.certificates)

    def exit_code(self) -> int:
        if self.flagged:
            return EXIT_NUMERICAL_FAILURE
        return EXIT_OK if self.all_passed else EXIT_CERT_FAILURE

    def merged(self, other: "RunReport") -> "RunReport":
        out = RunReport(self.label, dict(self.manifest), list(self.series),
                        list(self.certificates), self.flagged or other.flagged)
        out.manifest.update(other.manifest)
        out.series.extend(other.series)
        out.certificates.extend(other.certificates)
        return out


def _json_clean(x):
    if isinstance(x, dict):
        return {str(k): _json_clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_json_clean(v) for v in x.tolist()]
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


def write_csv(report: RunReport, path: Path) -> None:
    """Columns t, value, shell, tag; floats via repr (shortest round-trip)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "value", "shell", "tag"])
        for s in report.series:
            shell = "" if s.shell is None else str(s.shell)
            for t, v in zip(s.times, s.values):
                writer.writerow([repr(float(t)), repr(float(v)), shell, s.tag])


def read_series_csv(path: Path) -> list[Series]:
    """Re-ingest a series CSV bit-exactly (repr floats round-trip)."""
    groups: dict[tuple, list[tuple[float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["t", "value", "shell", "tag"]:
            raise ValueError(f"unexpected CSV header {header}")
        for row in reader:
            t, v, shell, tag = row
            key = (tag, int(shell) if shell else None)
            groups.setdefault(key, []).append((float(t), float(v)))
    out = []
    for (tag, shell), rows in groups.items():
        times = np.array([r[0] for r in rows])
        values = np.array([r[1] for r in rows])
        out.append(Series(tag, times, values, shell))
    return out


def write_report(
    report: RunReport,
    out_dir: str | Path,
    formats: tuple[str, ...] = ("json", "csv", "svg"),
) -> dict[str, Path]:
    """Emit the report artifacts; on failure, partially written files are removed."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    try:
        if "json" in formats:
            path = out_dir / f"{report.label}.json"
            doc = {
                "schema": "halfwave-report/1",
                "label": report.label,
                "manifest": _json_clean(report.manifest),
                "certificates": _json_clean(report.certificates),
                "series_index": [
                    {"tag": s.tag, "shell": s.shell, "n_samples": len(s.times)}
                    for s in report.series
                ],
                "flagged": bool(report.flagged),
                "all_passed": bool(report.all_passed),
            }
            with open(path, "w") as fh:
                json.dump(doc, fh, indent=1, sort_keys=True)
                fh.write("\n")
            written["json"] = path
        if "csv" in formats:
            path = out_dir / f"{report.label}.csv"
            write_csv(report, path)
            written["csv"] = path
        if "svg" in formats and report.series:
            from halfwave.experiments.plots import plot_report_figures

            for name, path in plot_report_figures(report, out_dir).items():
                written[name] = path
    except Exception:
        for path in written.values():
            try:
                Path(path).unlink()
            except OSError:
                pass
        raise
    return written
