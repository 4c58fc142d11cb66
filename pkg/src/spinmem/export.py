"""CSV writers and run manifests.

Numbers are written with ``repr`` (shortest round-trip decimal), so a CSV
read back with ``float`` reproduces every value bit for bit, and identical
inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

SPECTRUM_HEADER = ("omega", "reflection")
SURFACE_HEADER = ("kappa", "omega", "reflection")
BUDGET_HEADER = ("alpha_l", "eta_noise", "snr_c", "ns_fraction", "snr_s", "flags")
TRACE_HEADER = ("t", "e_in_re", "e_in_im", "e_cav_re", "e_cav_im", "e_out_re", "e_out_im", "spin_norm")
EVENTS_HEADER = ("t", "event")
RESULT_HEADER = ("c", "kappa", "eta_measured", "eta_predicted", "leakage", "fidelity", "flags")
DESIGN_HEADER = (
    "kappa_star", "alpha_per_m", "alpha_l", "finesse", "q_from_identity", "q_paper_formula", "q_resonator",
    "multimode_n", "eta", "eta_noise", "snr_c", "snr_s", "flags",
)


def fmt(value) -> str:
    """Round-trip text for a CSV cell."""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(x) for x in row])
    return path


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def write_spectrum(path, omegas, values, scale: float = 1.0) -> Path:
    """``omega,reflection``; ``scale`` divides frequencies into display units."""
    return write_rows(path, SPECTRUM_HEADER, zip(np.asarray(omegas) / scale, values))


def write_surface(path, kappas, omegas, surface, scale: float = 1.0) -> Path:
    """Long format ``kappa,omega,reflection`` with ``surface[i, j]`` at (kappas[i], omegas[j])."""
    def rows():
        for k, line in zip(kappas, surface):
            for w, r in zip(omegas, line):
                yield (k / scale, w / scale, r)
    return write_rows(path, SURFACE_HEADER, rows())


def write_trace(path, trace, time_scale: float = 1.0, stride: int = 1) -> Path:
    """Field amplitudes and spin excitation number; field amplitudes in sqrt(quanta/time) units."""
    sl = slice(None, None, max(1, int(stride)))
    t = trace.t[sl] / time_scale
    cols = (t, trace.e_in[sl].real, trace.e_in[sl].imag, trace.e_cav[sl].real, trace.e_cav[sl].imag,
            trace.e_out[sl].real, trace.e_out[sl].imag, trace.spin_norm[sl])
    return write_rows(path, TRACE_HEADER, zip(*cols))


def write_events(path, events, time_scale: float = 1.0) -> Path:
    return write_rows(path, EVENTS_HEADER, ((t / time_scale, name) for t, name in events))


def write_budget(path, budgets) -> Path:
    return write_rows(path, BUDGET_HEADER, ([b.row()[k] for k in BUDGET_HEADER] for b in budgets))


def result_row(result, freq_scale: float = 1.0) -> list:
    r = result.row()
    r["kappa"] = r["kappa"] / freq_scale
    return [r[k] for k in RESULT_HEADER]


def write_results(path, results, freq_scale: float = 1.0, lead: Optional[tuple] = None) -> Path:
    """Protocol results; ``lead = (name, values)`` prepends a sweep column."""
    header = RESULT_HEADER if lead is None else (lead[0],) + RESULT_HEADER
    rows = []
    for i, res in enumerate(results):
        row = result_row(res, freq_scale)
        rows.append(row if lead is None else [lead[1][i]] + row)
    return write_rows(path, header, rows)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    """Provenance for one CLI invocation.

    The timestamp and the manifest itself vary between runs; the data files
    and their hashes do not.
    """

    command: str
    config_path: Optional[str]
    config_hash: Optional[str]
    tool_version: str
    outputs: dict = field(default_factory=dict)  # relative path -> sha256
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    timestamp: str = field(default_factory=lambda: _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"))

    def add_output(self, path, root) -> None:
        p = Path(path)
        self.outputs[str(p.relative_to(root))] = sha256_file(p)

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config_path": self.config_path,
            "config_hash": self.config_hash,
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
            "outputs": dict(sorted(self.outputs.items())),
            "diagnostics": {k: _json_safe(v) for k, v in self.diagnostics.items()},
            "warnings": list(self.warnings),
        }

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
        return path


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return _json_safe(v.item())
    return v
