"""Append-only result persistence with idempotent, resumable sweeps.

A sweep writes records in canonical order (grid order, then trial index)
and flushes after every line, so an interrupted run leaves a prefix of the
final log; resuming appends the remainder and the final store is
byte-identical to an uninterrupted run at any worker count.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

from .bounds import log_concave_bound, tensor_deviation_bound
from .experiments import ExperimentPlan, GridSummary, TrialRecord, _run_grid_point, summarize

__all__ = ["ResultStore", "StoreConflictError", "run_sweep", "sig6"]


class StoreConflictError(RuntimeError):
    """A resume attempt found a store written under a different plan."""


def sig6(x: float) -> str:
    """Round-half-even to 6 significant digits; shared by tables and CSVs."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.6g}"


def _plan_hash(plan_dict: dict) -> str:
    canonical = json.dumps(plan_dict, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ResultStore:
    """One directory per experiment: plan.json, trials.jsonl, summary.csv."""

    def __init__(self, root: Path | str, experiment_id: str):
        self.dir = Path(root) / experiment_id
        self.plan_path = self.dir / "plan.json"
        self.log_path = self.dir / "trials.jsonl"
        self.summary_path = self.dir / "summary.csv"
        self.plot_path = self.dir / "summary.svg"

    def prepare(self, plan: ExperimentPlan, resume: bool) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        plan_dict = plan.to_dict()
        if self.plan_path.exists():
            existing = json.loads(self.plan_path.read_text())
            if _plan_hash(existing) != _plan_hash(plan_dict):
                raise StoreConflictError(
                    f"store {self.dir} was written under a different plan "
                    "(payload hash mismatch); use a fresh output directory")
            if not resume and self.log_path.exists() and self.log_path.stat().st_size > 0:
                raise StoreConflictError(
                    f"store {self.dir} already holds trials; pass resume=True "
                    "(--resume) to continue it")
        else:
            self.plan_path.write_text(json.dumps(plan_dict, indent=2, sort_keys=True) + "\n")

    def existing_keys(self) -> set[tuple[int, int]]:
        if not self.log_path.exists():
            return set()
        keys = set()
        for line in self.log_path.read_text().splitlines():
            if line.strip():
                keys.add(TrialRecord.from_json_line(line).key)
        return keys

    def load_records(self) -> list[TrialRecord]:
        if not self.log_path.exists():
            return []
        return [TrialRecord.from_json_line(line)
                for line in self.log_path.read_text().splitlines() if line.strip()]

    def write_summary(self, plan: ExperimentPlan, summaries: list[GridSummary]) -> list[dict]:
        rows = []
        spectra = [e.spectrum for e in plan.ensembles]
        all_laplace = bool(plan.ensembles) and all(
            e.family == "laplace_isotropic" for e in plan.ensembles)
        for s in summaries:
            bound = ratio = None
            if plan.statistic == "deviation_norm" and len(spectra) >= 2:
                if all_laplace:
                    bound = log_concave_bound([e.dim for e in plan.ensembles], s.n)
                else:
                    bound = tensor_deviation_bound(spectra, s.n)
                ratio = s.mean / bound
            rows.append({
                "experiment_id": plan.experiment_id,
                "N": s.n,
                "statistic": plan.statistic,
                "mean": sig6(s.mean),
                "stderr": sig6(s.stderr),
                "bound": sig6(bound) if bound is not None else "",
                "ratio": sig6(ratio) if ratio is not None else "",
                "converged_fraction": sig6(s.converged_fraction),
            })
        with self.summary_path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        return rows

    def write_plot(self, plan: ExperimentPlan, summaries: list[GridSummary],
                   bounds: list[float] | None) -> None:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        ns = [s.n for s in summaries]
        means = [s.mean for s in summaries]
        errs = [s.stderr for s in summaries]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.errorbar(ns, means, yerr=errs, fmt="o-", capsize=3, label="MC mean")
        if bounds:
            ax.plot(ns, bounds, "s--", label="bound (constant 1)")
        ax.set_xscale("log", base=2)
        ax.set_yscale("log")
        ax.set_xlabel("N")
        ax.set_ylabel(plan.statistic)
        ax.set_title(plan.experiment_id)
        ax.legend()
        fig.tight_layout()
        fig.savefig(self.plot_path, format="svg")
        plt.close(fig)


def run_sweep(plan: ExperimentPlan, root: Path | str, workers: int = 1,
              resume: bool = False, plot: bool = True) -> list[dict]:
    """Run (or resume) a sweep, persisting records in canonical order.

    Completed (n, trial_index) keys are skipped, so a resumed run produces
    the identical final store as an uninterrupted one.
    """
    store = ResultStore(root, plan.experiment_id)
    store.prepare(plan, resume)
    done = store.existing_keys() if resume else set()
    with store.log_path.open("a") as log:
        for n in plan.n_grid:
            pending = [i for i in range(plan.trials) if (n, i) not in done]
            if not pending:
                continue
            records = {r.trial_index: r for r in _run_grid_point(plan, n, workers, pending)}
            for i in sorted(records):
                log.write(records[i].to_json_line() + "\n")
                log.flush()
    all_records = store.load_records()
    summaries = summarize(plan, all_records)
    rows = store.write_summary(plan, summaries)
    if plot:
        bounds = [float(r["bound"]) for r in rows] if rows and rows[0]["bound"] else None
        store.write_plot(plan, summaries, bounds)
    return rows
