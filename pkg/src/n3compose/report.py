"""Figure rendering for benchmark results: line charts of reasoning time
against composition length and against dummy count, written as PNG files
alongside the CSV output.
"""

from __future__ import annotations

import os
from collections import defaultdict
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .benchmark import TimingRecord


def _rows(records: Sequence) -> List[dict]:
    rows = []
    for r in records:
        if isinstance(r, TimingRecord):
            rows.append({"n": r.spec.n, "d": r.spec.d, "dummies": r.spec.dummies,
                         "reason_ms": r.reason_s * 1000, "parse_ms": r.parse_s * 1000})
        else:
            rows.append({"n": int(r["n"]), "d": int(r["d"]), "dummies": int(r["dummies"]),
                         "reason_ms": float(r["reason_ms"]), "parse_ms": float(r["parse_ms"])})
    return rows


def _means(rows: List[dict], key_fields: Tuple[str, ...], value: str) -> Dict[tuple, float]:
    groups: Dict[tuple, List[float]] = defaultdict(list)
    for row in rows:
        groups[tuple(row[f] for f in key_fields)].append(row[value])
    return {k: sum(v) / len(v) for k, v in groups.items()}


def render_figures(records: Sequence, out_dir: str) -> List[str]:
    """One chart per aspect present in the data; returns written paths."""
    os.makedirs(out_dir, exist_ok=True)
    rows = _rows(records)
    written: List[str] = []

    plain = [r for r in rows if r["dummies"] == 0]
    if plain:
        means = _means(plain, ("d", "n"), "reason_ms")
        fig, ax = plt.subplots(figsize=(6, 4))
        for d in sorted({r["d"] for r in plain}):
            points = sorted((n, ms) for (dd, n), ms in means.items() if dd == d)
            ax.plot([p[0] for p in points], [p[1] for p in points],
                    marker="o", label=f"d={d}")
        ax.set_xscale("log", base=2)
        ax.set_xlabel("composition length n")
        ax.set_ylabel("reasoning time (ms)")
        ax.set_title("Reasoning time by composition length")
        ax.legend()
        path = os.path.join(out_dir, "reasoning_vs_n.png")
        fig.savefig(path, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    dummy_rows = [r for r in rows if r["dummies"] > 0]
    if dummy_rows:
        baseline = {(r["n"], r["d"]) for r in dummy_rows}
        sweep = [r for r in rows if (r["n"], r["d"]) in baseline]
        means = _means(sweep, ("dummies",), "reason_ms")
        points = sorted(means.items())
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot([p[0][0] for p in points], [p[1] for p in points], marker="o")
        ax.set_xlabel("dummy descriptions n'")
        ax.set_ylabel("reasoning time (ms)")
        ax.set_title("Reasoning time by dummy count")
        path = os.path.join(out_dir, "reasoning_vs_dummies.png")
        fig.savefig(path, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    return written
