"""Output-peak timing analysis across modalities.

Trained recognizers concentrate each unit's probability in a short burst of
frames. This module extracts those bursts as peak records, pairs the i-th
occurrence of a unit in one system with the i-th occurrence of the same unit
(or its viseme image) in another, and aggregates the frame offsets into a
lag report.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .avcorpus import VisemeMap
from .ctc import _probs
from .errors import DataError, NoMatchedPairs
from .svgplot import timing_rows

DEFAULT_PEAK_THRESHOLD = 0.5


@dataclass(frozen=True)
class PeakRecord:
    utt_id: str
    unit_id: int
    peak_frame: int  # 1-based
    peak_prob: float
    occurrence_index: int  # ordinal of this unit's runs within the utterance
    modality: str = ""

    def __post_init__(self):
        if self.peak_frame < 1:
            raise DataError("peak_frame is 1-based")
        if not 0.0 < self.peak_prob <= 1.0:
            raise DataError("peak_prob must lie in (0, 1]")


@dataclass(frozen=True)
class MatchedPair:
    unit_id: int  # in the shared (possibly viseme) space
    a: PeakRecord
    b: PeakRecord

    @property
    def offset_frames(self) -> int:
        return self.a.peak_frame - self.b.peak_frame


@dataclass
class MatchResult:
    pairs: list[MatchedPair]
    dropped_a: int
    dropped_b: int


@dataclass
class OffsetReport:
    per_unit: dict[int, tuple[float, float, int]]  # unit -> (mean, std, count)
    global_mean_frames: float
    global_std_frames: float
    count: int
    frame_ms: float
    corrected_by_frames: float = 0.0

    @property
    def global_mean_ms(self) -> float:
        return self.global_mean_frames * self.frame_ms


def extract_peaks(
    y,
    threshold: float = DEFAULT_PEAK_THRESHOLD,
    utt_id: str = "",
    modality: str = "",
) -> list[PeakRecord]:
    """One record per maximal run of frames where a unit's posterior exceeds
    the threshold, placed at the run's argmax frame (earliest on ties)."""
    if not 0.0 < threshold < 1.0:
        raise DataError("threshold must lie in (0, 1)")
    probs = _probs(y)
    T, K1 = probs.shape
    records = []
    for unit in range(1, K1):
        col = probs[:, unit]
        above = col > threshold
        occurrence = 0
        t = 0
        while t < T:
            if not above[t]:
                t += 1
                continue
            start = t
            while t < T and above[t]:
                t += 1
            run = col[start:t]
            peak = start + int(np.argmax(run))
            records.append(
                PeakRecord(
                    utt_id=utt_id,
                    unit_id=unit,
                    peak_frame=peak + 1,
                    peak_prob=float(col[peak]),
                    occurrence_index=occurrence,
                    modality=modality,
                )
            )
            occurrence += 1
    records.sort(key=lambda r: (r.peak_frame, r.unit_id))
    return records


def _image_keys(records, vmap: VisemeMap | None, is_phonemes: bool):
    """(shared unit, occurrence-in-shared-space) key per record, frame order."""
    ordered = sorted(records, key=lambda r: (r.peak_frame, r.unit_id))
    counts: dict[int, int] = {}
    keyed = []
    for rec in ordered:
        unit = vmap.viseme_of(rec.unit_id) if (vmap is not None and is_phonemes) else rec.unit_id
        occ = counts.get(unit, 0)
        counts[unit] = occ + 1
        keyed.append(((unit, occ), rec))
    return keyed


def match_occurrences(
    a: list[PeakRecord],
    b: list[PeakRecord],
    ref=None,
    viseme_map: VisemeMap | None = None,
    a_is_phonemes: bool = True,
    b_is_phonemes: bool = True,
) -> MatchResult:
    """Pair the i-th occurrence of each unit in `a` with the i-th occurrence
    of the same unit in `b`; with a viseme map, phoneme-side records are
    first mapped into viseme space and re-counted in frame order.

    `ref` optionally restricts matching to units present in the reference
    (its ids are mapped too when a map is given). Unmatched records and
    out-of-reference records are dropped and counted.
    """
    keyed_a = _image_keys(a, viseme_map, a_is_phonemes)
    keyed_b = _image_keys(b, viseme_map, b_is_phonemes)
    allowed = None
    if ref is not None:
        ids = ref.ids if hasattr(ref, "ids") else tuple(ref)
        allowed = set(viseme_map.map_ids(ids)) if viseme_map is not None else set(ids)
        keyed_a = [(k, r) for k, r in keyed_a if k[0] in allowed]
        keyed_b = [(k, r) for k, r in keyed_b if k[0] in allowed]
    index_b = {key: rec for key, rec in keyed_b}
    pairs = []
    matched_keys = set()
    for key, rec in keyed_a:
        if key in index_b:
            pairs.append(MatchedPair(unit_id=key[0], a=rec, b=index_b[key]))
            matched_keys.add(key)
    return MatchResult(
        pairs=pairs,
        dropped_a=len(keyed_a) - len(pairs),
        dropped_b=len(keyed_b) - len(matched_keys),
    )


def offset_report(
    pairs: list[MatchedPair],
    frame_ms: float,
    technical_delay_frames: float = 0.0,
) -> OffsetReport:
    """Per-unit and global mean/std of (a - b) peak offsets in frames.

    A constant technical-delay correction is subtracted from every offset
    before aggregation. Averaging is per occurrence, not per utterance.
    """
    if not pairs:
        raise NoMatchedPairs("no matched peak pairs to aggregate")
    by_unit: dict[int, list[float]] = {}
    for p in pairs:
        by_unit.setdefault(p.unit_id, []).append(p.offset_frames - technical_delay_frames)
    per_unit = {}
    for unit, offs in sorted(by_unit.items()):
        arr = np.asarray(offs)
        per_unit[unit] = (float(arr.mean()), float(arr.std()), len(offs))
    all_offs = np.asarray([p.offset_frames - technical_delay_frames for p in pairs], dtype=float)
    return OffsetReport(
        per_unit=per_unit,
        global_mean_frames=float(all_offs.mean()),
        global_std_frames=float(all_offs.std()),
        count=len(pairs),
        frame_ms=frame_ms,
        corrected_by_frames=technical_delay_frames,
    )


# --- emission ------------------------------------------------------------------

RECORD_COLUMNS = ("utt", "unit", "modality", "occurrence", "peak_frame", "peak_prob")


def emit_alignment_csv(records: list[PeakRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow(
                [r.utt_id, r.unit_id, r.modality, r.occurrence_index, r.peak_frame,
                 repr(r.peak_prob)]
            )


def read_alignment_csv(path) -> list[PeakRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out.append(
                PeakRecord(
                    utt_id=row["utt"],
                    unit_id=int(row["unit"]),
                    peak_frame=int(row["peak_frame"]),
                    peak_prob=float(row["peak_prob"]),
                    occurrence_index=int(row["occurrence"]),
                    modality=row["modality"],
                )
            )
    return out


def emit_report_csv(report: OffsetReport, path, names: dict[int, str] | None = None) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("unit", "mean_offset_frames", "std", "count"))
        for unit, (mean, std, count) in report.per_unit.items():
            label = names[unit] if names else unit
            writer.writerow((label, f"{mean:.6f}", f"{std:.6f}", count))
        writer.writerow(("GLOBAL", f"{report.global_mean_frames:.6f}",
                         f"{report.global_std_frames:.6f}", report.count))


def emit_alignment_svg(
    path,
    mean_positions: dict[str, dict[int, float]],
    frame_ms: float,
    names: dict[int, str] | None = None,
    title: str = "mean output-peak position per unit",
) -> None:
    """mean_positions: {system: {unit: mean peak frame}}; one mark per unit
    per system on a shared millisecond axis."""
    units = sorted({u for marks in mean_positions.values() for u in marks})
    rows = {}
    for u in units:
        label = names[u] if names else str(u)
        rows[label] = {
            system: marks[u] * frame_ms
            for system, marks in mean_positions.items()
            if u in marks
        }
    timing_rows(path, rows, systems=list(mean_positions), title=title)


def mean_peak_positions(records: list[PeakRecord]) -> dict[int, float]:
    """Average peak frame per unit over every occurrence in the record list."""
    sums: dict[int, list[float]] = {}
    for r in records:
        sums.setdefault(r.unit_id, []).append(float(r.peak_frame))
    return {u: float(np.mean(v)) for u, v in sorted(sums.items())}
