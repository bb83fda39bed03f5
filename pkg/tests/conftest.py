"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from occufit import Dataset, SimConfig, generate_dataset


def small_dataset(seed: int = 0, n_sites: int = 60, n_visits: int = 3) -> Dataset:
    """A small simulated dataset with detections guaranteed present."""
    cfg = SimConfig(
        n_sites=n_sites,
        n_visits=n_visits,
        alpha=(0.8, 0.9),
        beta=(-0.4, 0.5, -0.3),
        n_reps=1,
        seed=seed,
    )
    data = generate_dataset(cfg, 0)
    assert data.n_detected > 0
    return data


def history_dataset(histories, det_cols: int = 1) -> Dataset:
    """Dataset from explicit detection histories with intercept-only
    designs (detection design optionally widened with zeros)."""
    y = np.asarray(histories, dtype=np.float64)
    s, t = y.shape
    occ = np.ones((s, 1))
    det = np.zeros((s, t, det_cols))
    det[:, :, 0] = 1.0
    return Dataset(detections=y, occ_design=occ, det_design=det)


@pytest.fixture
def dataset():
    return small_dataset()
