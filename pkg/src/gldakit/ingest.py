"""Cohort and outcome file loading, validation, and within-subject scaling.

File format: delimiter-separated UTF-8 text with a header row. Cohort files
carry a ``subject`` column, an optional ``timestamp`` column (RFC 3339 or
epoch seconds), and one numeric column per variable, in header order.
Outcome files carry ``subject`` plus numeric outcome columns.
"""

import csv
import warnings
from dataclasses import dataclass
from datetime import datetime, timezone

import numpy as np

from .core import CohortDataset, _readonly
from .errors import DataValidationError

SUBJECT_COL = "subject"
TIMESTAMP_COL = "timestamp"


@dataclass(frozen=True)
class OutcomeTable:
    """Subject-level outcome scores, one row per subject."""

    subject_ids: tuple
    outcome_names: tuple
    values: np.ndarray   # (S, C), NaN = missing

    def __post_init__(self):
        values = _readonly(np.asarray(self.values, dtype=float))
        object.__setattr__(self, "values", values)
        if values.shape != (len(self.subject_ids), len(self.outcome_names)):
            raise DataValidationError("outcome table shape mismatch")
        if len(set(self.subject_ids)) != len(self.subject_ids):
            raise DataValidationError("duplicate subject keys in outcome table")

    def column(self, name):
        return self.values[:, self.outcome_names.index(name)]


def _parse_timestamp(text, row_no):
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise DataValidationError(
            f"row {row_no}, column '{TIMESTAMP_COL}': "
            f"unparseable timestamp {text!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _read_rows(path, delimiter):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = list(reader)
    if not rows:
        raise DataValidationError(f"{path}: empty file")
    return rows


def load_cohort(path, delimiter=","):
    """Load a cohort observation file into a validated ``CohortDataset``.

    Subject identifiers are mapped to dense indices in first-appearance
    order; the mapping is retained on the dataset for output.
    """
    rows = _read_rows(path, delimiter)
    header = [h.strip() for h in rows[0]]
    if SUBJECT_COL not in header:
        raise DataValidationError(f"{path}: missing '{SUBJECT_COL}' column")
    subj_idx = header.index(SUBJECT_COL)
    ts_idx = header.index(TIMESTAMP_COL) if TIMESTAMP_COL in header else None
    var_cols = [(i, name) for i, name in enumerate(header)
                if i not in (subj_idx, ts_idx)]
    if not var_cols:
        raise DataValidationError(f"{path}: no variable columns")

    subject_ids = []
    subject_map = {}
    subjects, values, timestamps = [], [], []
    for row_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataValidationError(
                f"row {row_no}: expected {len(header)} cells, got {len(row)}")
        sid = row[subj_idx].strip()
        if not sid:
            raise DataValidationError(f"row {row_no}: empty subject identifier")
        if sid not in subject_map:
            subject_map[sid] = len(subject_ids)
            subject_ids.append(sid)
        subjects.append(subject_map[sid])
        vec = np.empty(len(var_cols))
        for j, (i, name) in enumerate(var_cols):
            cell = row[i].strip()
            try:
                vec[j] = float(cell)
            except ValueError:
                raise DataValidationError(
                    f"row {row_no}, column '{name}': "
                    f"non-numeric value {cell!r}") from None
            if not np.isfinite(vec[j]):
                raise DataValidationError(
                    f"row {row_no}, column '{name}': non-finite value")
        values.append(vec)
        if ts_idx is not None:
            timestamps.append(_parse_timestamp(row[ts_idx], row_no))

    if not values:
        raise DataValidationError(f"{path}: no observation rows")
    return CohortDataset(
        values=np.asarray(values),
        subjects=np.asarray(subjects),
        n_subjects=len(subject_ids),
        subject_ids=tuple(subject_ids),
        var_names=tuple(name for _, name in var_cols),
        timestamps=np.asarray(timestamps) if ts_idx is not None else None,
    )


def standardize_within_subject(data):
    """Z-score each variable within each subject (sample sd, n-1 denominator).

    Returns the standardized dataset plus a side table
    ``{subject_id: {var: {"mean": m, "sd": s}}}`` enabling the inverse map.
    Any (subject, variable) pair with fewer than 2 observations or zero
    variance is a hard error listing the offending pairs.
    """
    out = np.array(data.values, dtype=float)
    stats = {}
    bad = []
    for m, sid in enumerate(data.subject_ids):
        mask = data.subjects == m
        block = data.values[mask]
        stats[sid] = {}
        for j, name in enumerate(data.var_names):
            col = block[:, j]
            if col.size < 2:
                bad.append((sid, name, "fewer than 2 observations"))
                continue
            mean = float(col.mean())
            sd = float(col.std(ddof=1))
            if sd == 0.0:
                bad.append((sid, name, "zero variance"))
                continue
            stats[sid][name] = {"mean": mean, "sd": sd}
            out[mask, j] = (col - mean) / sd
    if bad:
        detail = "; ".join(f"({s}, {v}): {why}" for s, v, why in bad)
        raise DataValidationError(
            f"cannot standardize, degenerate (subject, variable) pairs: {detail}")
    std = CohortDataset(
        values=out, subjects=data.subjects, n_subjects=data.n_subjects,
        subject_ids=data.subject_ids, var_names=data.var_names,
        timestamps=data.timestamps)
    return std, stats


def destandardize(data, stats):
    """Invert ``standardize_within_subject`` using its side table."""
    out = np.array(data.values, dtype=float)
    for m, sid in enumerate(data.subject_ids):
        mask = data.subjects == m
        for j, name in enumerate(data.var_names):
            entry = stats[sid][name]
            out[mask, j] = out[mask, j] * entry["sd"] + entry["mean"]
    return CohortDataset(
        values=out, subjects=data.subjects, n_subjects=data.n_subjects,
        subject_ids=data.subject_ids, var_names=data.var_names,
        timestamps=data.timestamps)


def load_outcomes(path, cohort=None, delimiter=","):
    """Load a subject-level outcome table; empty cells become NaN.

    Subjects absent from ``cohort`` (when given) are reported as warnings;
    cohort subjects absent from the table are fine and simply excluded from
    downstream regressions.
    """
    rows = _read_rows(path, delimiter)
    header = [h.strip() for h in rows[0]]
    if SUBJECT_COL not in header:
        raise DataValidationError(f"{path}: missing '{SUBJECT_COL}' column")
    subj_idx = header.index(SUBJECT_COL)
    outcome_cols = [(i, n) for i, n in enumerate(header) if i != subj_idx]
    if not outcome_cols:
        raise DataValidationError(f"{path}: no outcome columns")

    subject_ids, values = [], []
    seen = set()
    for row_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataValidationError(
                f"row {row_no}: expected {len(header)} cells, got {len(row)}")
        sid = row[subj_idx].strip()
        if sid in seen:
            raise DataValidationError(
                f"row {row_no}: duplicate subject key {sid!r}")
        seen.add(sid)
        subject_ids.append(sid)
        vec = np.empty(len(outcome_cols))
        for j, (i, name) in enumerate(outcome_cols):
            cell = row[i].strip()
            if cell == "":
                vec[j] = np.nan
                continue
            try:
                vec[j] = float(cell)
            except ValueError:
                raise DataValidationError(
                    f"row {row_no}, column '{name}': "
                    f"non-numeric value {cell!r}") from None
        values.append(vec)
    if not values:
        raise DataValidationError(f"{path}: no outcome rows")

    table = OutcomeTable(tuple(subject_ids), tuple(n for _, n in outcome_cols),
                         np.asarray(values))
    if cohort is not None:
        unknown = [s for s in table.subject_ids if s not in cohort.subject_ids]
        if unknown:
            warnings.warn(f"outcome subjects not in cohort: {unknown}")
    return table


def _fmt(x):
    return repr(int(x)) if float(x).is_integer() else repr(float(x))


def save_cohort(data, path, delimiter=","):
    """Write a cohort file in the exact format ``load_cohort`` reads."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        header = [SUBJECT_COL]
        if data.timestamps is not None:
            header.append(TIMESTAMP_COL)
        header.extend(data.var_names)
        writer.writerow(header)
        for n in range(data.n_obs):
            row = [data.subject_ids[data.subjects[n]]]
            if data.timestamps is not None:
                row.append(_fmt(data.timestamps[n]))
            row.extend(_fmt(v) for v in data.values[n])
            writer.writerow(row)


def save_outcomes(table, path, delimiter=","):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow([SUBJECT_COL, *table.outcome_names])
        for i, sid in enumerate(table.subject_ids):
            row = [sid]
            row.extend("" if np.isnan(v) else repr(float(v))
                       for v in table.values[i])
            writer.writerow(row)
