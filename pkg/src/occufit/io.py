"""Reading and writing study data as flat CSV files.

One row per site. Detection histories occupy one binary column per
visit; site covariates occupy one column each; a survey covariate that
changes between visits occupies a named group of one column per visit.
:class:`CsvSchema` names these roles, and the loader assembles the
design matrices (including intercepts) from them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import (
    EmptyFile,
    InvalidConfig,
    MissingColumn,
    NonBinaryDetection,
    RaggedSurveyGroup,
)
from .model import Dataset

__all__ = ["CsvSchema", "load_dataset_csv", "save_dataset_csv"]


@dataclass(frozen=True)
class CsvSchema:
    """Mapping from CSV columns to model roles.

    ``det_visit_groups`` is a tuple of ``(name, columns)`` pairs; each
    group must supply exactly one column per visit, in visit order.
    With ``visit_intercepts`` the detection design gets one leading
    indicator column per visit instead of a single intercept. With
    ``standardize`` every covariate is centred and scaled (survey
    groups are standardised jointly, so one covariate keeps one scale
    across visits).
    """

    detect_cols: tuple[str, ...]
    occ_cols: tuple[str, ...] = ()
    det_site_cols: tuple[str, ...] = ()
    det_visit_groups: tuple = ()
    visit_intercepts: bool = False
    standardize: bool = False
    site_label_col: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "detect_cols", tuple(self.detect_cols))
        object.__setattr__(self, "occ_cols", tuple(self.occ_cols))
        object.__setattr__(self, "det_site_cols", tuple(self.det_site_cols))
        object.__setattr__(
            self,
            "det_visit_groups",
            tuple((str(n), tuple(cols)) for n, cols in self.det_visit_groups),
        )
        if len(self.detect_cols) < 2:
            raise InvalidConfig(
                f"need at least 2 detection columns, got {len(self.detect_cols)}"
            )
        t = len(self.detect_cols)
        for name, cols in self.det_visit_groups:
            if len(cols) != t:
                raise RaggedSurveyGroup(
                    f"survey covariate {name!r} has {len(cols)} columns "
                    f"for {t} visits"
                )


def _numeric(df: pd.DataFrame, col: str) -> np.ndarray:
    try:
        return df[col].to_numpy(dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InvalidConfig(f"column {col!r} is not numeric: {exc}") from exc


def _standardized(x: np.ndarray) -> np.ndarray:
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    if sd == 0.0:
        raise InvalidConfig("cannot standardize a constant covariate column")
    return (x - float(np.mean(x))) / sd


def load_dataset_csv(path, schema: CsvSchema) -> Dataset:
    """Load one dataset according to ``schema``.

    Raises :class:`EmptyFile` for a file with no rows,
    :class:`MissingColumn` for absent columns, and
    :class:`NonBinaryDetection` when a detection entry is not exactly
    0 or 1 (missing visits are not supported).
    """
    try:
        df = pd.read_csv(path)
    except pd.errors.EmptyDataError as exc:
        raise EmptyFile(f"{path} contains no data") from exc
    if df.shape[0] == 0:
        raise EmptyFile(f"{path} contains no rows")

    needed = list(schema.detect_cols) + list(schema.occ_cols) + list(schema.det_site_cols)
    for _, cols in schema.det_visit_groups:
        needed.extend(cols)
    if schema.site_label_col is not None:
        needed.append(schema.site_label_col)
    for col in needed:
        if col not in df.columns:
            raise MissingColumn(f"column {col!r} not found in {path}")

    t = len(schema.detect_cols)
    s = df.shape[0]
    y = np.empty((s, t))
    for j, col in enumerate(schema.detect_cols):
        vals = df[col].to_numpy()
        try:
            vals = vals.astype(np.float64)
        except (TypeError, ValueError) as exc:
            raise NonBinaryDetection(
                f"detection column {col!r} is not numeric"
            ) from exc
        bad = ~((vals == 0.0) | (vals == 1.0))
        if bad.any():
            row = int(np.argmax(bad))
            raise NonBinaryDetection(
                f"detection column {col!r} row {row} holds {vals[row]!r}, "
                "expected 0 or 1"
            )
        y[:, j] = vals

    def site_cov(col: str) -> np.ndarray:
        x = _numeric(df, col)
        return _standardized(x) if schema.standardize else x

    occ_parts = [np.ones(s)] + [site_cov(c) for c in schema.occ_cols]
    occ_design = np.column_stack(occ_parts)
    occ_names = ("(Intercept)",) + schema.occ_cols

    det_parts = []
    det_names = []
    if schema.visit_intercepts:
        for j in range(t):
            ind = np.zeros((s, t))
            ind[:, j] = 1.0
            det_parts.append(ind)
            det_names.append(f"visit{j + 1}")
    else:
        det_parts.append(np.ones((s, t)))
        det_names.append("(Intercept)")
    for col in schema.det_site_cols:
        det_parts.append(np.broadcast_to(site_cov(col)[:, None], (s, t)).copy())
        det_names.append(col)
    for name, cols in schema.det_visit_groups:
        block = np.column_stack([_numeric(df, c) for c in cols])
        if schema.standardize:
            sd = float(np.std(block, ddof=1))
            if sd == 0.0:
                raise InvalidConfig(
                    f"cannot standardize constant survey covariate {name!r}"
                )
            block = (block - float(np.mean(block))) / sd
        det_parts.append(block)
        det_names.append(name)
    det_design = np.stack(det_parts, axis=2)

    site_labels = None
    if schema.site_label_col is not None:
        site_labels = tuple(str(v) for v in df[schema.site_label_col])

    return Dataset(
        detections=y,
        occ_design=occ_design,
        det_design=det_design,
        site_labels=site_labels,
        occ_names=occ_names,
        det_names=tuple(det_names),
    )


def save_dataset_csv(data: Dataset, path) -> CsvSchema:
    """Write a dataset to CSV and return the schema that reloads it.

    The intercept structure of the detection design (single intercept
    or per-visit indicators) is recognised and reconstructed by the
    loader instead of being written out.
    """
    s, t = data.n_sites, data.n_visits
    df = {}
    detect_cols = tuple(f"y{j + 1}" for j in range(t))
    for j, col in enumerate(detect_cols):
        df[col] = data.detections[:, j].astype(np.int64)

    occ_names = data.occ_names or ("(Intercept)",) + tuple(
        f"c{i}" for i in range(1, data.n_occ_coefs)
    )
    occ_cols = []
    for i in range(data.n_occ_coefs):
        col = data.occ_design[:, i]
        if i == 0 and np.all(col == 1.0):
            continue
        name = occ_names[i] if i < len(occ_names) else f"c{i}"
        df[name] = col
        occ_cols.append(name)

    u = data.det_design
    det_names = data.det_names or tuple(f"d{k}" for k in range(data.n_det_coefs))
    start = 0
    visit_intercepts = False
    if data.n_det_coefs >= t:
        ident = np.zeros((s, t, t))
        for j in range(t):
            ident[:, j, j] = 1.0
        if np.array_equal(u[:, :, :t], ident):
            visit_intercepts = True
            start = t
    if not visit_intercepts and data.n_det_coefs >= 1 and np.all(u[:, :, 0] == 1.0):
        start = 1

    det_site_cols = []
    det_visit_groups = []
    for k in range(start, data.n_det_coefs):
        name = det_names[k] if k < len(det_names) else f"d{k}"
        block = u[:, :, k]
        if np.all(block == block[:, :1]):
            df[name] = block[:, 0]
            det_site_cols.append(name)
        else:
            cols = tuple(f"{name}_{j + 1}" for j in range(t))
            for j, col in enumerate(cols):
                df[col] = block[:, j]
            det_visit_groups.append((name, cols))

    label_col = None
    if data.site_labels is not None:
        label_col = "site"
        df = {"site": list(data.site_labels), **df}

    pd.DataFrame(df).to_csv(path, index=False)
    return CsvSchema(
        detect_cols=detect_cols,
        occ_cols=tuple(occ_cols),
        det_site_cols=tuple(det_site_cols),
        det_visit_groups=tuple(det_visit_groups),
        visit_intercepts=visit_intercepts,
        site_label_col=label_col,
    )
