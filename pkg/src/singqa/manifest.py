"""Dataset manifests: one CSV row per utterance.

Columns: utt_id,system_id,wav_path,mos,emb_path,spec_path,pitch_path.
Empty cells mean absent. Relative paths are resolved against the
manifest's directory.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path

MANIFEST_COLUMNS = ["utt_id", "system_id", "wav_path", "mos", "emb_path", "spec_path", "pitch_path"]

_FEATURE_COLUMNS = {"emb_path": "embedding", "spec_path": "spectral", "pitch_path": "pitch"}


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class UtteranceRecord:
    utt_id: str
    system_id: str
    wav_path: Path | None = None
    feature_paths: dict = field(default_factory=dict)  # kind name -> Path
    mos_label: float | None = None


def load_manifest(path) -> list[UtteranceRecord]:
    """Load manifest rows in file order, validating ids and label range."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    base = path.parent
    records: list[UtteranceRecord] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_COLUMNS:
            raise ManifestError(f"{path}: header must be {','.join(MANIFEST_COLUMNS)}, got {header}")
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise ManifestError(
                    f"{path} row {row_num}: expected {len(MANIFEST_COLUMNS)} cells, got {len(row)}"
                )
            cells = dict(zip(MANIFEST_COLUMNS, (c.strip() for c in row)))
            utt_id = cells["utt_id"]
            if not utt_id:
                raise ManifestError(f"{path} row {row_num}: empty utt_id")
            if utt_id in seen:
                raise ManifestError(f"{path} row {row_num}: duplicate utt_id {utt_id!r}")
            seen.add(utt_id)
            if not cells["system_id"]:
                raise ManifestError(f"{path} row {row_num}: empty system_id")

            mos = None
            if cells["mos"]:
                try:
                    mos = float(cells["mos"])
                except ValueError:
                    raise ManifestError(f"{path} row {row_num}: malformed mos {cells['mos']!r}") from None
                if not (1.0 <= mos <= 5.0):
                    raise ManifestError(f"{path} row {row_num}: mos_label {mos} outside [1, 5]")

            def resolve(cell: str) -> Path:
                p = Path(cell)
                return p if p.is_absolute() else base / p

            wav_path = resolve(cells["wav_path"]) if cells["wav_path"] else None
            feature_paths = {
                kind: resolve(cells[col]) for col, kind in _FEATURE_COLUMNS.items() if cells[col]
            }
            if wav_path is None and not feature_paths:
                raise ManifestError(
                    f"{path} row {row_num}: needs a wav_path or at least one feature path"
                )
            records.append(
                UtteranceRecord(
                    utt_id=utt_id,
                    system_id=cells["system_id"],
                    wav_path=wav_path,
                    feature_paths=feature_paths,
                    mos_label=mos,
                )
            )
    return records


def write_manifest(records, path) -> None:
    """Write records back out, storing paths relative to the manifest."""
    path = Path(path)
    base = path.parent

    def rel(p: Path | None) -> str:
        if p is None:
            return ""
        return os.path.relpath(p, base)

    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for rec in records:
            writer.writerow(
                [
                    rec.utt_id,
                    rec.system_id,
                    rel(rec.wav_path),
                    repr(float(rec.mos_label)) if rec.mos_label is not None else "",
                    rel(rec.feature_paths.get("embedding")),
                    rel(rec.feature_paths.get("spectral")),
                    rel(rec.feature_paths.get("pitch")),
                ]
            )
