"""Leave-one-patient-out evaluation across seeds and ablation arms.

Each fold holds one patient out, trains the remaining cohort, selects the
decision threshold on training-fold predictions only, and scores the held
out patient. The four arms toggle adversarial training and the BiLSTM
stage; arms sharing a stage-1 configuration reuse one stage-1 run per
(fold, seed), which keeps the comparison paired as well as halving cost.

Tasks are independent per (fold, seed); with workers > 1 they run in
spawned processes whose initializer loads the cohort from a cache file.
Completed tasks are journaled under the output directory together with a
manifest keyed by a config hash, so interrupted runs resume.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from .data import WindowedSequence
from .exceptions import DataError
from .io import load_sequences, save_sequences
from .metrics import (
    auc_pr,
    auc_roc,
    confusion_counts,
    confusion_metrics,
    detect,
    pr_curve_points,
    roc_curve_points,
    select_threshold,
)
from .networks import predict_sequence_probabilities, predict_window_probabilities
from .training import (
    SourceDataset,
    Stage1Config,
    Stage2Config,
    stage1_train,
    stage2_train,
)

__all__ = [
    "ARMS",
    "EvalReport",
    "run_fold",
    "lopo",
    "write_results_csv",
    "write_aggregate_csv",
    "format_float",
]

ARMS = ("cnn", "cnn_at", "cnn_bilstm", "cnn_bilstm_at")
METRICS = ("sensitivity", "specificity", "mcc", "auc_roc", "auc_pr")


def format_float(x: float) -> str:
    """Shortest decimal that round-trips the float64 (stable CSV bytes)."""
    return repr(float(x))


@dataclass
class EvalReport:
    rows: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)
    arms: tuple = ARMS
    seeds: tuple = ()

    def sort(self) -> None:
        self.rows.sort(key=lambda r: (r["patient"], r["seed"], ARMS.index(r["arm"])))

    def aggregate(self) -> list[dict]:
        """Per arm: mean over seeds within patient, then mean +- SD across
        patients (sample SD; 0.0 for a single patient)."""
        out = []
        for arm in self.arms:
            arm_rows = [r for r in self.rows if r["arm"] == arm]
            if not arm_rows:
                continue
            patients = sorted({r["patient"] for r in arm_rows})
            per_patient = {
                m: [
                    float(np.mean([r[m] for r in arm_rows if r["patient"] == p]))
                    for p in patients
                ]
                for m in METRICS
            }
            entry: dict = {"arm": arm, "n_patients": len(patients)}
            for m in METRICS:
                vals = np.array(per_patient[m])
                entry[f"{m}_mean"] = float(vals.mean())
                entry[f"{m}_sd"] = (
                    float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
                )
            out.append(entry)
        return out


def _evaluate_split(train_probs, train_labels, test_probs, test_labels) -> dict:
    tau = select_threshold(train_probs, train_labels)
    decisions = detect(test_probs, tau)
    row = dict(confusion_metrics(confusion_counts(decisions, test_labels)))
    row["tau"] = tau
    row["auc_roc"] = auc_roc(test_probs, test_labels)
    row["auc_pr"] = auc_pr(test_probs, test_labels)
    return row


def run_fold(
    sequences: list[WindowedSequence],
    holdout_id: str,
    stage1_cfg: Stage1Config,
    stage2_cfg: Stage2Config,
    seed: int,
    arms: tuple = ARMS,
) -> dict:
    """Train and score every requested arm for one (fold, seed) pair.

    Returns {"rows": [...], "curves": {(arm): {"roc": pts, "pr": pts}}}.
    """
    train_seqs = [s for s in sequences if s.patient_id != holdout_id]
    test_candidates = [s for s in sequences if s.patient_id == holdout_id]
    if len(test_candidates) != 1:
        raise DataError(f"holdout patient {holdout_id!r} not found exactly once")
    test_seq = test_candidates[0]
    if len(train_seqs) < 2:
        raise DataError("LOPO fold needs at least 2 training patients")
    ds = SourceDataset.from_sequences(train_seqs)

    rows = []
    curves = {}
    for adversarial in (False, True):
        cnn_arm = "cnn_at" if adversarial else "cnn"
        seq_arm = "cnn_bilstm_at" if adversarial else "cnn_bilstm"
        if cnn_arm not in arms and seq_arm not in arms:
            continue
        cfg1 = Stage1Config(
            lr=stage1_cfg.lr,
            batch_size=stage1_cfg.batch_size,
            epochs=stage1_cfg.epochs,
            adversarial=adversarial,
        )
        stage1 = stage1_train(ds, cfg1, seed)
        if cnn_arm in arms:
            train_probs = predict_window_probabilities(
                stage1.features, stage1.label_head, ds.windows
            )
            test_probs = predict_window_probabilities(
                stage1.features, stage1.label_head, test_seq.windows
            )
            row = _evaluate_split(train_probs, ds.labels, test_probs, test_seq.labels)
            row.update(
                patient=holdout_id, seed=seed, arm=cnn_arm,
                n_windows=test_seq.n_windows, n_positive=test_seq.n_positive,
            )
            rows.append(row)
            curves[cnn_arm] = {
                "roc": roc_curve_points(test_probs, test_seq.labels),
                "pr": pr_curve_points(test_probs, test_seq.labels),
            }
        if seq_arm in arms:
            stage2 = stage2_train(ds, stage1, stage2_cfg, seed)
            train_probs = np.concatenate(
                [
                    predict_sequence_probabilities(stage2.model, ds.patient_slice(k)[0])
                    for k in range(ds.n_domains)
                ]
            )
            test_probs = predict_sequence_probabilities(stage2.model, test_seq.windows)
            row = _evaluate_split(train_probs, ds.labels, test_probs, test_seq.labels)
            row.update(
                patient=holdout_id, seed=seed, arm=seq_arm,
                n_windows=test_seq.n_windows, n_positive=test_seq.n_positive,
            )
            rows.append(row)
            curves[seq_arm] = {
                "roc": roc_curve_points(test_probs, test_seq.labels),
                "pr": pr_curve_points(test_probs, test_seq.labels),
            }
    return {"rows": rows, "curves": curves}


# -- parallel worker plumbing ----------------------------------------------------

_WORKER_SEQUENCES: list[WindowedSequence] | None = None


def _init_worker(cache_path: str) -> None:
    global _WORKER_SEQUENCES
    _WORKER_SEQUENCES, _ = load_sequences(cache_path)


def _worker_task(args: tuple) -> tuple[str, int, dict]:
    holdout_id, seed, cfg1_kw, cfg2_kw, arms = args
    outcome = run_fold(
        _WORKER_SEQUENCES,
        holdout_id,
        Stage1Config(**cfg1_kw),
        Stage2Config(**cfg2_kw),
        seed,
        tuple(arms),
    )
    return holdout_id, seed, outcome


def _config_tag(stage1_cfg, stage2_cfg, seeds, arms, patient_ids) -> str:
    payload = json.dumps(
        {
            "stage1": asdict(stage1_cfg),
            "stage2": asdict(stage2_cfg),
            "seeds": list(seeds),
            "arms": list(arms),
            "patients": list(patient_ids),
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def _write_json_atomic(path: Path, payload) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=1))
    os.replace(tmp, path)


def _write_curve_files(out_dir: Path, holdout: str, seed: int, curves: dict) -> None:
    cdir = out_dir / "curves"
    cdir.mkdir(parents=True, exist_ok=True)
    headers = {"roc": "fpr,tpr,threshold", "pr": "recall,precision,threshold"}
    for arm, pair in curves.items():
        for kind, points in pair.items():
            lines = [headers[kind]]
            lines += [
                ",".join(format_float(v) for v in point) for point in points
            ]
            path = cdir / f"{kind}_{holdout}_s{seed}_{arm}.csv"
            path.write_text("\n".join(lines) + "\n")


def lopo(
    sequences: list[WindowedSequence],
    stage1_cfg: Stage1Config | None = None,
    stage2_cfg: Stage2Config | None = None,
    seeds=range(15),
    arms: tuple = ARMS,
    workers: int = 1,
    out_dir: str | Path | None = None,
    config_tag: str | None = None,
    progress=None,
) -> EvalReport:
    """Full LOPO x seeds x arms grid.

    With out_dir set, writes results.csv, aggregate.csv, per-fold curve
    files, and a manifest; a rerun with the same config resumes from the
    journaled tasks. progress, if given, is called with one status string
    per completed task.
    """
    stage1_cfg = stage1_cfg or Stage1Config()
    stage2_cfg = stage2_cfg or Stage2Config()
    seeds = list(seeds)
    arms = tuple(arms)
    unknown_arms = set(arms) - set(ARMS)
    if unknown_arms:
        raise DataError(f"unknown arms: {sorted(unknown_arms)} (choose from {ARMS})")
    if len(sequences) < 3:
        raise DataError(f"LOPO needs >= 3 patients, got {len(sequences)}")

    report = EvalReport(arms=arms, seeds=tuple(seeds))
    eligible = []
    for seq in sequences:
        if seq.n_positive == 0:
            message = (
                f"patient {seq.patient_id} has no positive windows; fold skipped"
            )
            warnings.warn(message, stacklevel=2)
            report.skipped.append({"patient": seq.patient_id, "reason": message})
        else:
            eligible.append(seq.patient_id)

    tag = config_tag or _config_tag(
        stage1_cfg, stage2_cfg, seeds, arms, [s.patient_id for s in sequences]
    )
    tasks = [(pid, seed) for pid in eligible for seed in seeds]

    journal_dir = manifest_path = None
    completed: dict[tuple[str, int], dict] = {}
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        journal_dir = out_dir / "partial"
        journal_dir.mkdir(exist_ok=True)
        manifest_path = out_dir / "manifest.json"
        if manifest_path.exists():
            manifest = json.loads(manifest_path.read_text())
            if manifest.get("config_hash") == tag:
                for pid, seed in map(tuple, manifest.get("completed", [])):
                    part = journal_dir / f"{pid}_s{seed}.json"
                    if part.exists():
                        completed[(pid, seed)] = json.loads(part.read_text())

    def record(pid: str, seed: int, outcome: dict) -> None:
        completed[(pid, seed)] = outcome
        if out_dir is not None:
            _write_json_atomic(
                journal_dir / f"{pid}_s{seed}.json",
                {"rows": outcome["rows"]},
            )
            _write_curve_files(out_dir, pid, seed, outcome.get("curves", {}))
            _write_json_atomic(
                manifest_path,
                {
                    "config_hash": tag,
                    "seeds": seeds,
                    "arms": list(arms),
                    "patients": eligible,
                    "completed": sorted([list(k) for k in completed]),
                },
            )
        if progress is not None:
            progress(f"fold {pid} seed {seed}: done ({len(completed)}/{len(tasks)})")

    pending = [t for t in tasks if t not in completed]
    if pending and progress is not None and len(completed):
        progress(f"resuming: {len(completed)} of {len(tasks)} tasks already journaled")

    if workers <= 1:
        for pid, seed in pending:
            outcome = run_fold(sequences, pid, stage1_cfg, stage2_cfg, seed, arms)
            record(pid, seed, outcome)
    elif pending:
        # Spawned workers re-import everything and read the cohort from a
        # cache file, avoiding fork/BLAS thread-state hazards.
        cache_path = None
        own_cache = False
        if out_dir is not None:
            cache_path = out_dir / "cohort_cache.szw"
        else:
            fd, name = tempfile.mkstemp(suffix=".szw")
            os.close(fd)
            cache_path = Path(name)
            own_cache = True
        try:
            save_sequences(
                cache_path, sequences,
                fs=0.0, window_len=sequences[0].windows.shape[2],
            )
            cfg1_kw, cfg2_kw = asdict(stage1_cfg), asdict(stage2_cfg)
            ctx = get_context("spawn")
            with ProcessPoolExecutor(
                max_workers=workers,
                mp_context=ctx,
                initializer=_init_worker,
                initargs=(str(cache_path),),
            ) as pool:
                futures = {
                    pool.submit(
                        _worker_task, (pid, seed, cfg1_kw, cfg2_kw, list(arms))
                    ): (pid, seed)
                    for pid, seed in pending
                }
                for future in as_completed(futures):
                    pid, seed, outcome = future.result()
                    record(pid, seed, outcome)
        finally:
            if own_cache and cache_path.exists():
                cache_path.unlink()

    for (pid, seed), outcome in completed.items():
        report.rows.extend(outcome["rows"])
    report.sort()

    if out_dir is not None:
        write_results_csv(report, out_dir / "results.csv")
        write_aggregate_csv(report, out_dir / "aggregate.csv")
    return report


RESULT_COLUMNS = (
    "patient", "seed", "arm", "tau",
    "sensitivity", "specificity", "mcc", "auc_roc", "auc_pr",
    "n_windows", "n_positive",
)


def write_results_csv(report: EvalReport, path: str | Path) -> None:
    lines = [",".join(RESULT_COLUMNS)]
    for row in report.rows:
        cells = []
        for col in RESULT_COLUMNS:
            v = row[col]
            cells.append(format_float(v) if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def write_aggregate_csv(report: EvalReport, path: str | Path) -> None:
    # Metric order mirrors the headline results table: sensitivity,
    # specificity, MCC, AUC-ROC, AUC-PR, each as mean then SD.
    cols = ["arm", "n_patients"]
    for m in METRICS:
        cols += [f"{m}_mean", f"{m}_sd"]
    lines = [",".join(cols)]
    for entry in report.aggregate():
        cells = [str(entry["arm"]), str(entry["n_patients"])]
        for m in METRICS:
            cells.append(format_float(entry[f"{m}_mean"]))
            cells.append(format_float(entry[f"{m}_sd"]))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")
