"""On-disk formats: FMAT feature matrices, 16-bit PCM WAV, and CSV ingest.

FMAT layout: magic b"FMAT", little-endian u32 rows, u32 cols, then
rows*cols little-endian float32 values in row-major order. Writing float64
data narrows it to float32.
"""

import csv
import struct
import wave
from pathlib import Path

import numpy as np

from .errors import ParseError

FMAT_MAGIC = b"FMAT"


def write_fmat(path, matrix: np.ndarray) -> None:
    arr = np.ascontiguousarray(matrix, dtype="<f4")
    if arr.ndim != 2:
        raise ValueError(f"FMAT stores 2-D matrices, got shape {arr.shape}")
    with open(path, "wb") as fh:
        fh.write(FMAT_MAGIC)
        fh.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
        fh.write(arr.tobytes())


def read_fmat(path) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12 or head[:4] != FMAT_MAGIC:
            raise ParseError(f"{path}: not an FMAT file")
        rows, cols = struct.unpack("<II", head[4:])
        payload = fh.read(rows * cols * 4)
        if len(payload) != rows * cols * 4:
            raise ParseError(f"{path}: truncated FMAT payload ({rows}x{cols})")
        extra = fh.read(1)
        if extra:
            raise ParseError(f"{path}: trailing bytes after FMAT payload")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, cols).copy()


def read_csv_matrix(path) -> np.ndarray:
    """CSV feature matrix; a non-numeric first row is treated as a header."""
    path = Path(path)
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ParseError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ParseError(f"{path}: ragged rows")
    return np.asarray(rows, dtype=np.float64)


def read_feature_matrix(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_csv_matrix(path)
    return read_fmat(path)


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read mono 16-bit PCM; returns (samples in [-1, 1), sample_rate)."""
    path = Path(path)
    with wave.open(str(path), "rb") as wf:
        if wf.getnchannels() != 1:
            raise ParseError(f"{path}: expected mono, got {wf.getnchannels()} channels")
        if wf.getsampwidth() != 2:
            raise ParseError(f"{path}: expected 16-bit samples")
        rate = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def write_wav(path, samples: np.ndarray, sample_rate: int) -> None:
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 32767 / 32768)
    pcm = np.round(clipped * 32768.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(sample_rate))
        wf.writeframes(pcm.tobytes())
