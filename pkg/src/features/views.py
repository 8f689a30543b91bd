"""Source-view selection for the multi-view consistency term."""

from collections.abc import Sequence

import numpy as np

from src.features.camera import Camera
from src.utils.errors import RejectedInputError


def select_source_views(ref: int, cameras: Sequence[Camera], n_views: int) -> list[int]:
    """The ``n_views`` cameras whose optical axes are closest in angle to ``ref``'s.

    Ties are broken by lower view index.

    Raises:
        RejectedInputError: If fewer than ``n_views + 1`` cameras exist or
            ``ref`` is not a valid index.
    """
    if len(cameras) < n_views + 1:
        raise RejectedInputError(f"need at least {n_views + 1} views, got {len(cameras)}")
    if not 0 <= ref < len(cameras):
        raise RejectedInputError(f"reference view {ref} out of range")

    axis = cameras[ref].optical_axis
    candidates = [i for i in range(len(cameras)) if i != ref]
    angles = np.array(
        [np.arccos(np.clip(np.dot(axis, cameras[i].optical_axis), -1.0, 1.0)) for i in candidates]
    )
    order = np.argsort(angles, kind="stable")
    return [candidates[k] for k in order[:n_views]]


def source_view_table(cameras: Sequence[Camera], n_views: int) -> list[list[int]]:
    """Source views for every reference view, computed once per run."""
    return [select_source_views(ref, cameras, n_views) for ref in range(len(cameras))]
