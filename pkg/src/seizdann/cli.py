"""Command-line interface: synth, train, eval, infer, curves.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
failure (non-finite loss). Every command writes only inside its declared
output location and is reproducible for a fixed config + seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig
from .data import WindowedSequence
from .evaluation import ARMS, format_float, lopo
from .exceptions import ConfigError, DataError, NumericError
from .io import (
    annotation_path_for,
    load_recording,
    load_sequences,
    load_weights,
    save_recording,
    save_sequences,
    save_weights,
)
from .metrics import detect, select_threshold
from .networks import (
    FeatureExtractor,
    LabelPredictor,
    SequenceModel,
    predict_sequence_probabilities,
    predict_window_probabilities,
)
from .preprocessing import preprocess_recording
from .svg import curve_svg, probability_trace_svg
from .synthesis import CohortSpec, synthesize_cohort
from .training import SourceDataset, stage1_train, stage2_train

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seizdann",
        description="Cross-patient EEG seizure detection with domain-adversarial training",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic EEG cohort")
    p.add_argument("--out", required=True, help="output directory for recording files")
    p.add_argument("--patients", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fs", type=float, default=500.0)
    p.add_argument("--duration-mean", type=float, default=320.0)
    p.add_argument("--duration-sd", type=float, default=45.0)
    p.add_argument("--seizure-mean", type=float, default=47.0)
    p.add_argument("--seizure-sd", type=float, default=23.0)
    p.add_argument("--shift", type=float, default=1.0, help="domain-shift strength")
    p.add_argument("--outlier-patient", action="store_true")

    p = sub.add_parser("train", help="run the two-stage training procedure")
    p.add_argument("--config", required=True)
    p.add_argument("--no-adversarial", action="store_true",
                   help="train stage 1 with the reversal weight held at 0")
    p.add_argument("--cnn-only", action="store_true", help="skip stage 2")

    p = sub.add_parser("eval", help="leave-one-patient-out evaluation grid")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=None,
                   help="override eval.workers from the config")

    p = sub.add_parser("infer", help="per-window probabilities for one recording")
    p.add_argument("--weights", required=True)
    p.add_argument("--recording", required=True, help="signal CSV path")
    p.add_argument("--annotations", default=None,
                   help="sidecar JSON (default: recording path with .json)")
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--svg", default=None, help="optional probability trace SVG")
    p.add_argument("--config", default=None,
                   help="config supplying preprocessing parameters")

    p = sub.add_parser("curves", help="render ROC/PR point files to SVG")
    p.add_argument("files", nargs="+", help="curve CSV files from eval")
    p.add_argument("--out", required=True, help="output SVG path")
    p.add_argument("--title", default=None)
    return parser


# -- data loading ------------------------------------------------------------


def _load_cohort(cfg: RunConfig) -> list[WindowedSequence]:
    """Sequences from the cache when present, else preprocessed recordings."""
    data = cfg["data"]
    pre = cfg["preprocess"]
    cache = data["cache_file"]
    if cache and Path(cache).exists():
        sequences, _ = load_sequences(cache)
        return sequences
    cohort_dir = data["cohort_dir"]
    if not cohort_dir:
        raise ConfigError(
            "config needs data.cohort_dir (or an existing data.cache_file)"
        )
    signal_paths = sorted(Path(cohort_dir).glob("*.csv"))
    if not signal_paths:
        raise DataError(f"no recording CSV files found in {cohort_dir}")
    sequences = []
    fs = 0.0
    for k, path in enumerate(signal_paths):
        rec = load_recording(path)
        fs = rec.fs
        seq = preprocess_recording(
            rec,
            low_hz=pre["band_low_hz"],
            high_hz=pre["band_high_hz"],
            filter_order=pre["filter_order"],
            window_len=pre["window_len"],
        )
        seq.domain = k
        sequences.append(seq)
    if cache:
        Path(cache).parent.mkdir(parents=True, exist_ok=True)
        save_sequences(cache, sequences, fs=fs, window_len=pre["window_len"])
    return sequences


def _write_loss_csv(path: Path, history: list[dict], columns: tuple) -> None:
    lines = [",".join(columns)]
    for row in history:
        cells = [
            format_float(row[c]) if isinstance(row[c], float) else str(row[c])
            for c in columns
        ]
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


# -- commands ------------------------------------------------------------------


def _cmd_synth(args) -> int:
    spec = CohortSpec(
        n_patients=args.patients,
        seed=args.seed,
        fs=args.fs,
        duration_mean_s=args.duration_mean,
        duration_sd_s=args.duration_sd,
        seizure_mean_s=args.seizure_mean,
        seizure_sd_s=args.seizure_sd,
        shift_strength=args.shift,
        outlier_patient=args.outlier_patient,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for rec in synthesize_cohort(spec):
        save_recording(rec, out / f"{rec.patient_id}.csv")
        print(
            f"{rec.patient_id}: {rec.duration_s:.1f}s, seizure "
            f"{rec.seizure_intervals[0][0]:.1f}-{rec.seizure_intervals[0][1]:.1f}s"
        )
    print(f"wrote {spec.n_patients} recordings to {out}")
    return 0


def _cmd_train(args) -> int:
    cfg = RunConfig.from_file(args.config)
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    sequences = _load_cohort(cfg)
    holdout = cfg["train"]["holdout"]
    if holdout is not None:
        kept = [s for s in sequences if s.patient_id != holdout]
        if len(kept) == len(sequences):
            raise DataError(f"train.holdout patient {holdout!r} not in cohort")
        sequences = kept
    seed = cfg["train"]["seed"]
    dataset = SourceDataset.from_sequences(sequences)
    adversarial = not args.no_adversarial

    stage1 = stage1_train(dataset, cfg.stage1_config(adversarial), seed)
    stage1_arrays = {}
    for prefix, net in (
        ("features", stage1.features),
        ("label_head", stage1.label_head),
        ("domain_head", stage1.domain_head),
    ):
        for name, arr in net.state_arrays().items():
            stage1_arrays[f"{prefix}.{name}"] = arr
    save_weights(stage1_arrays, out / "stage1.szw")
    _write_loss_csv(
        out / "stage1_losses.csv", stage1.history,
        ("epoch", "label_loss", "domain_loss"),
    )
    print(
        f"stage 1 done: {len(stage1.history)} epochs, final label loss "
        f"{stage1.history[-1]['label_loss']:.4f}, domain loss "
        f"{stage1.history[-1]['domain_loss']:.4f}"
    )

    if args.cnn_only:
        arm = "cnn_at" if adversarial else "cnn"
        train_probs = predict_window_probabilities(
            stage1.features, stage1.label_head, dataset.windows
        )
    else:
        stage2 = stage2_train(dataset, stage1, cfg.stage2_config(), seed)
        save_weights(stage2.model, out / "stage2.szw")
        _write_loss_csv(
            out / "stage2_losses.csv", stage2.history, ("epoch", "label_loss")
        )
        print(
            f"stage 2 done: {len(stage2.history)} epochs, final label loss "
            f"{stage2.history[-1]['label_loss']:.4f}"
        )
        arm = "cnn_bilstm_at" if adversarial else "cnn_bilstm"
        train_probs = np.concatenate(
            [
                predict_sequence_probabilities(stage2.model, dataset.patient_slice(k)[0])
                for k in range(dataset.n_domains)
            ]
        )
    tau = select_threshold(train_probs, dataset.labels)
    (out / "threshold.json").write_text(
        json.dumps({"arm": arm, "seed": seed, "tau": tau}, indent=1)
    )
    print(f"arm {arm}: selected threshold {tau:.6f} -> {out}")
    return 0


def _cmd_eval(args) -> int:
    cfg = RunConfig.from_file(args.config)
    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_resolved.json").write_text(json.dumps(cfg.as_dict(), indent=1))
    sequences = _load_cohort(cfg)
    ev = cfg["eval"]
    workers = args.workers if args.workers is not None else ev["workers"]
    report = lopo(
        sequences,
        stage1_cfg=cfg.stage1_config(True),
        stage2_cfg=cfg.stage2_config(),
        seeds=ev["seeds"],
        arms=tuple(ev["arms"]),
        workers=workers,
        out_dir=out,
        config_tag=cfg.config_hash(),
        progress=print,
    )
    for entry in report.aggregate():
        print(
            f"{entry['arm']}: MCC {entry['mcc_mean']:.4f} +- {entry['mcc_sd']:.4f}, "
            f"AUC-ROC {entry['auc_roc_mean']:.4f}"
        )
    for skip in report.skipped:
        print(f"skipped: {skip['reason']}")
    print(f"results in {out}")
    return 0


def _split_prefixed(arrays: dict, prefix: str) -> dict:
    head = prefix + "."
    return {k[len(head):]: v for k, v in arrays.items() if k.startswith(head)}


def _cmd_infer(args) -> int:
    if not 0.0 < args.tau < 1.0:
        raise ConfigError(f"--tau must lie in (0,1), got {args.tau}")
    cfg = RunConfig.from_file(args.config) if args.config else RunConfig()
    pre = cfg["preprocess"]
    annotations = args.annotations or annotation_path_for(args.recording)
    rec = load_recording(args.recording, annotations)
    seq = preprocess_recording(
        rec,
        low_hz=pre["band_low_hz"],
        high_hz=pre["band_high_hz"],
        filter_order=pre["filter_order"],
        window_len=pre["window_len"],
    )
    arrays = load_weights(args.weights)
    rng = np.random.default_rng(0)
    if any(k.startswith("bilstm.") for k in arrays):
        model = SequenceModel(rng)
        model.load_state_arrays(arrays)
        probs = predict_sequence_probabilities(model, seq.windows)
    else:
        features = FeatureExtractor(rng)
        label_head = LabelPredictor(rng)
        features.load_state_arrays(_split_prefixed(arrays, "features"))
        label_head.load_state_arrays(_split_prefixed(arrays, "label_head"))
        probs = predict_window_probabilities(features, label_head, seq.windows)
    decisions = detect(probs, args.tau)

    window_s = pre["window_len"] / rec.fs
    lines = ["window_index,start_s,probability,decision"]
    for i, (p, d) in enumerate(zip(probs, decisions)):
        lines.append(f"{i},{format_float(i * window_s)},{format_float(p)},{d}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")
    if args.svg:
        svg = probability_trace_svg(
            probs, args.tau, labels=seq.labels,
            title=f"{rec.patient_id}: per-window seizure probability",
        )
        Path(args.svg).write_text(svg)
    print(
        f"{seq.n_windows} windows, {int(decisions.sum())} flagged at "
        f"tau={args.tau} -> {out}"
    )
    return 0


def _cmd_curves(args) -> int:
    headers = {
        "fpr,tpr,threshold": ("fpr", "tpr", True),
        "recall,precision,threshold": ("recall", "precision", False),
    }
    curves = []
    axes = None
    for path in args.files:
        text = Path(path).read_text().strip().splitlines()
        if not text:
            raise DataError(f"{path}: empty curve file")
        header = text[0].strip()
        if header not in headers:
            raise DataError(
                f"{path}: unrecognized curve header {header!r}; expected one of "
                f"{sorted(headers)}"
            )
        if axes is None:
            axes = headers[header]
        elif headers[header] != axes:
            raise DataError("cannot mix ROC and PR files in one plot")
        xs, ys = [], []
        for lineno, line in enumerate(text[1:], start=2):
            parts = line.split(",")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns")
            xs.append(float(parts[0]))
            ys.append(float(parts[1]))
        curves.append((Path(path).stem, np.array(xs), np.array(ys)))
    x_label, y_label, diagonal = axes
    title = args.title or f"{y_label} vs {x_label}"
    svg = curve_svg(curves, x_label, y_label, title, diagonal=diagonal)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(svg)
    print(f"wrote {out} ({len(curves)} curve(s))")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "infer": _cmd_infer,
    "curves": _cmd_curves,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
