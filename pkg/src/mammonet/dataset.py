"""Dataset discovery and the manifest CSV that pins sample order and splits."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field, replace

from .errors import ConfigurationError, FormatError, InputError

log = logging.getLogger("mammonet")

LABELS = ("normal", "benign", "malignant")
IMAGE_EXTENSIONS = (".png", ".pgm")
MANIFEST_HEADER = ("path", "label", "patient_id", "view", "laterality", "split")
SPLITS = ("", "train", "val")
UNKNOWN = "unknown"


def label_index(label: str) -> int:
    try:
        return LABELS.index(label)
    except ValueError:
        raise InputError(f"unknown class label {label!r}; expected one of {LABELS}")


@dataclass(frozen=True)
class SampleRecord:
    path: str
    label: str
    patient_id: str = UNKNOWN
    view: str = UNKNOWN
    laterality: str = UNKNOWN
    split: str = ""


@dataclass
class DatasetManifest:
    records: list[SampleRecord] = field(default_factory=list)

    def counts(self) -> dict[str, int]:
        out = {label: 0 for label in LABELS}
        for rec in self.records:
            out[rec.label] += 1
        return out

    def subset(self, split: str) -> list[SampleRecord]:
        return [rec for rec in self.records if rec.split == split]


def parse_filename(name: str) -> tuple[str, str, str]:
    """(patient_id, laterality, view) from `<patient>_<L|R>_<CC|MLO>.<ext>`.

    Returns ("unknown",)*3 when the stem does not match.
    """
    stem = os.path.splitext(name)[0]
    parts = stem.split("_")
    if len(parts) >= 3:
        patient = "_".join(parts[:-2])
        laterality, view = parts[-2], parts[-1]
        if patient and laterality in ("L", "R") and view in ("CC", "MLO"):
            return patient, laterality, view
    return UNKNOWN, UNKNOWN, UNKNOWN


def scan_directory(root: str | os.PathLike) -> DatasetManifest:
    """Build a manifest from `root`, which must hold one directory per class.

    Records come out sorted by (label order, path); files whose names do not
    match the metadata pattern are kept with unknown fields and counted in a
    single warning.
    """
    root = os.fspath(root)
    if not os.path.isdir(root):
        raise ConfigurationError(f"dataset root {root!r} is not a directory")
    missing = [label for label in LABELS
               if not os.path.isdir(os.path.join(root, label))]
    if missing:
        raise ConfigurationError(
            f"dataset root {root!r} is missing class directories: {', '.join(missing)}")

    records = []
    unmatched = 0
    for label in LABELS:
        class_dir = os.path.join(root, label)
        names = sorted(n for n in os.listdir(class_dir)
                       if os.path.splitext(n)[1].lower() in IMAGE_EXTENSIONS
                       and os.path.isfile(os.path.join(class_dir, n)))
        for name in names:
            patient, laterality, view = parse_filename(name)
            if patient == UNKNOWN:
                unmatched += 1
            records.append(SampleRecord(
                path=os.path.join(class_dir, name), label=label,
                patient_id=patient, view=view, laterality=laterality))
    if not records:
        raise ConfigurationError(f"dataset root {root!r} contains no images")
    if unmatched:
        log.warning("%d file name(s) did not match <patient>_<L|R>_<CC|MLO>; "
                    "metadata recorded as unknown", unmatched)
    return DatasetManifest(records=records)


def validate_manifest(manifest: DatasetManifest) -> None:
    """Raise InputError naming the first offending row on any bad field."""
    if not manifest.records:
        raise InputError("manifest has no records")
    for i, rec in enumerate(manifest.records, start=1):
        if not rec.path:
            raise InputError(f"manifest row {i}: empty path")
        if rec.label not in LABELS:
            raise InputError(
                f"manifest row {i}: unknown label {rec.label!r}; expected one of {LABELS}")
        if rec.split not in SPLITS:
            raise InputError(
                f"manifest row {i}: unknown split {rec.split!r}; expected one of {SPLITS}")


def write_manifest(manifest: DatasetManifest, path: str | os.PathLike) -> None:
    """Write the manifest as UTF-8 CSV with LF line endings."""
    validate_manifest(manifest)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for rec in manifest.records:
            writer.writerow([rec.path, rec.label, rec.patient_id,
                             rec.view, rec.laterality, rec.split])


def read_manifest(path: str | os.PathLike) -> DatasetManifest:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty manifest file", 0)
        if tuple(header) != MANIFEST_HEADER:
            raise FormatError(
                f"{path}: bad manifest header {header!r}; "
                f"expected {','.join(MANIFEST_HEADER)}", 0)
        records = []
        for row in reader:
            if len(row) != len(MANIFEST_HEADER):
                raise FormatError(
                    f"{path}: row {reader.line_num} has {len(row)} fields, "
                    f"expected {len(MANIFEST_HEADER)}", 0)
            records.append(SampleRecord(*row))
    manifest = DatasetManifest(records=records)
    validate_manifest(manifest)
    return manifest


def assign_splits(manifest: DatasetManifest,
                  assignment: dict[str, str]) -> DatasetManifest:
    """New manifest with split fields taken from a path -> split mapping."""
    records = [replace(rec, split=assignment.get(rec.path, rec.split))
               for rec in manifest.records]
    return DatasetManifest(records=records)
