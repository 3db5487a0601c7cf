"""File formats: recording CSV + annotation sidecar, binary weights
container, and the windowed-sequence cache.

Weights container layout (all integers little-endian):

    magic   4 bytes  b"SZDW"
    version u16      currently 1
    nblocks u32
    blocks, each:
        name_len u16, name utf-8 bytes
        ndim     u8,  dims ndim x u32
        data     float32 little-endian, C order
    trailer u64      byte length of the block region (integrity check)

The sequence cache reuses the same container with blocks named
"{patient_id}/windows", "{patient_id}/labels", "{patient_id}/domain" plus
"_meta/fs" and "_meta/window_len"; every value is float32, which is exact
for labels, domain indices, and the window data (quantized to float32 at
segmentation).
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np
import pandas as pd

from .data import EegRecording, WindowedSequence
from .exceptions import (
    AnnotationRangeError,
    DataError,
    MalformedRecordingError,
    WeightsFormatError,
)

__all__ = [
    "save_recording",
    "load_recording",
    "save_weights",
    "load_weights",
    "save_sequences",
    "load_sequences",
    "annotation_path_for",
]

MAGIC = b"SZDW"
VERSION = 1


def annotation_path_for(signal_path: str | Path) -> Path:
    return Path(signal_path).with_suffix(".json")


# -- recordings ----------------------------------------------------------------


def save_recording(
    rec: EegRecording,
    signal_path: str | Path,
    annotation_path: str | Path | None = None,
) -> None:
    """Write the signal CSV (one column per channel, one row per sample,
    microvolt values) and the JSON annotation sidecar."""
    signal_path = Path(signal_path)
    if annotation_path is None:
        annotation_path = annotation_path_for(signal_path)
    frame = pd.DataFrame(rec.data.T, columns=rec.channels)
    frame.to_csv(signal_path, index=False)
    sidecar = {
        "patient_id": rec.patient_id,
        "fs": rec.fs,
        "seizure_intervals": [
            {"onset_s": onset, "offset_s": offset}
            for onset, offset in rec.seizure_intervals
        ],
    }
    Path(annotation_path).write_text(json.dumps(sidecar, indent=1))


def load_recording(
    signal_path: str | Path,
    annotation_path: str | Path | None = None,
    expected_fs: float | None = None,
) -> EegRecording:
    signal_path = Path(signal_path)
    if annotation_path is None:
        annotation_path = annotation_path_for(signal_path)
    annotation_path = Path(annotation_path)
    if not signal_path.exists():
        raise MalformedRecordingError(f"signal file not found: {signal_path}")
    if not annotation_path.exists():
        raise MalformedRecordingError(f"annotation file not found: {annotation_path}")

    try:
        frame = pd.read_csv(signal_path)
    except Exception as exc:  # pandas raises several parser error types
        raise MalformedRecordingError(f"{signal_path}: {exc}") from exc
    if frame.shape[1] < 1 or frame.shape[0] < 1:
        raise MalformedRecordingError(f"{signal_path}: no data rows or columns")
    non_numeric = [
        c for c in frame.columns if not np.issubdtype(frame[c].dtype, np.number)
    ]
    if non_numeric:
        raise MalformedRecordingError(
            f"{signal_path}: non-numeric values in column(s) {non_numeric}"
        )
    data = frame.to_numpy(dtype=np.float64).T
    bad = np.argwhere(~np.isfinite(data))
    if bad.size:
        ch, row = bad[0]
        raise MalformedRecordingError(
            f"{signal_path}: non-finite value at data row {row + 1}, "
            f"column {frame.columns[ch]!r}"
        )

    try:
        sidecar = json.loads(annotation_path.read_text())
    except json.JSONDecodeError as exc:
        raise MalformedRecordingError(f"{annotation_path}: {exc}") from exc
    for key in ("patient_id", "fs", "seizure_intervals"):
        if key not in sidecar:
            raise MalformedRecordingError(f"{annotation_path}: missing field {key!r}")
    fs = float(sidecar["fs"])
    if fs <= 0:
        raise MalformedRecordingError(f"{annotation_path}: fs must be positive, got {fs}")
    if expected_fs is not None and abs(fs - expected_fs) > 1e-9:
        raise MalformedRecordingError(
            f"{annotation_path}: fs {fs} does not match expected {expected_fs}"
        )
    intervals = []
    for i, item in enumerate(sidecar["seizure_intervals"]):
        try:
            intervals.append((float(item["onset_s"]), float(item["offset_s"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecordingError(
                f"{annotation_path}: seizure_intervals[{i}] needs numeric "
                f"onset_s/offset_s fields"
            ) from exc
    try:
        return EegRecording(
            patient_id=str(sidecar["patient_id"]),
            fs=fs,
            channels=[str(c) for c in frame.columns],
            data=data,
            seizure_intervals=intervals,
        )
    except AnnotationRangeError:
        raise
    except DataError as exc:
        raise MalformedRecordingError(f"{signal_path}: {exc}") from exc


# -- weights container ---------------------------------------------------------


def _pack_blocks(arrays: dict[str, np.ndarray]) -> bytes:
    parts = []
    for name, arr in arrays.items():
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise WeightsFormatError(f"block name too long: {name[:40]}...")
        a = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<B", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}I", *a.shape) if a.ndim else b"")
        parts.append(a.tobytes())
    return b"".join(parts)


def save_weights(model_or_arrays, path: str | Path) -> None:
    """Serialize named float arrays (or a Module's state) to the container.

    The file is written to a temporary sibling and atomically renamed, so a
    failure mid-write never leaves a partial weights file behind.
    """
    if hasattr(model_or_arrays, "state_arrays"):
        arrays = model_or_arrays.state_arrays()
    else:
        arrays = dict(model_or_arrays)
    payload = _pack_blocks(arrays)
    blob = (
        MAGIC
        + struct.pack("<HI", VERSION, len(arrays))
        + payload
        + struct.pack("<Q", len(payload))
    )
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(blob)
    os.replace(tmp, path)


def load_weights(path: str | Path) -> dict[str, np.ndarray]:
    """Parse the container back into {name: float32 array}, verifying the
    magic, version, and trailing length checksum."""
    blob = Path(path).read_bytes()
    head = struct.calcsize("<4sHI")
    if len(blob) < head + 8:
        raise WeightsFormatError(f"{path}: file too short to be a weights container")
    magic, version, nblocks = struct.unpack_from("<4sHI", blob, 0)
    if magic != MAGIC:
        raise WeightsFormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise WeightsFormatError(
            f"{path}: unsupported format version {version} (expected {VERSION})"
        )
    payload = blob[head:-8]
    (declared,) = struct.unpack("<Q", blob[-8:])
    if declared != len(payload):
        raise WeightsFormatError(
            f"{path}: length checksum mismatch (declared {declared} bytes, "
            f"found {len(payload)}); file is truncated or corrupt"
        )
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for _ in range(nblocks):
        try:
            (name_len,) = struct.unpack_from("<H", payload, offset)
            offset += 2
            name = payload[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<B", payload, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", payload, offset)
            offset += 4 * ndim
            count = int(np.prod(shape)) if ndim else 1
            data = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
            offset += 4 * count
        except (struct.error, ValueError, UnicodeDecodeError) as exc:
            raise WeightsFormatError(f"{path}: corrupt block structure: {exc}") from exc
        if name in arrays:
            raise WeightsFormatError(f"{path}: duplicate block {name!r}")
        arrays[name] = data.reshape(shape).copy()
    if offset != len(payload):
        raise WeightsFormatError(
            f"{path}: {len(payload) - offset} unexpected trailing bytes after blocks"
        )
    return arrays


# -- windowed-sequence cache -----------------------------------------------------


def save_sequences(
    path: str | Path, sequences: list[WindowedSequence], fs: float, window_len: int
) -> None:
    arrays: dict[str, np.ndarray] = {
        "_meta/fs": np.array([fs], dtype=np.float32),
        "_meta/window_len": np.array([window_len], dtype=np.float32),
    }
    for seq in sequences:
        if "/" in seq.patient_id:
            raise DataError(f"patient id may not contain '/': {seq.patient_id!r}")
        arrays[f"{seq.patient_id}/windows"] = seq.windows
        arrays[f"{seq.patient_id}/labels"] = seq.labels.astype(np.float32)
        arrays[f"{seq.patient_id}/domain"] = np.array([seq.domain], dtype=np.float32)
    save_weights(arrays, path)


def load_sequences(path: str | Path) -> tuple[list[WindowedSequence], dict]:
    arrays = load_weights(path)
    try:
        meta = {
            "fs": float(arrays.pop("_meta/fs")[0]),
            "window_len": int(arrays.pop("_meta/window_len")[0]),
        }
    except KeyError as exc:
        raise WeightsFormatError(f"{path}: sequence cache missing meta block {exc}")
    by_patient: dict[str, dict[str, np.ndarray]] = {}
    for name, arr in arrays.items():
        pid, _, kind = name.partition("/")
        if kind not in ("windows", "labels", "domain"):
            raise WeightsFormatError(f"{path}: unexpected cache block {name!r}")
        by_patient.setdefault(pid, {})[kind] = arr
    sequences = []
    for pid in sorted(by_patient):
        parts = by_patient[pid]
        missing = {"windows", "labels", "domain"} - set(parts)
        if missing:
            raise WeightsFormatError(
                f"{path}: patient {pid!r} cache is missing {sorted(missing)}"
            )
        sequences.append(
            WindowedSequence(
                patient_id=pid,
                windows=parts["windows"],
                labels=parts["labels"].astype(np.int64),
                domain=int(parts["domain"][0]),
            )
        )
    return sequences, meta
