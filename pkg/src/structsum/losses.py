"""Sequence negative log-likelihood over extended-vocabulary distributions."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .decoder import PROB_FLOOR


def sequence_loss(dists: list, targets: np.ndarray, mask: np.ndarray | None = None) -> Var:
    """Mean of ``-log P(target)`` over (unmasked) target steps.

    ``dists`` holds one ``(B, E)`` distribution per step and ``targets`` the
    ``(B, T)`` extended ids.  Probabilities are floored at 1e-12.
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=np.int64))
    if len(dists) != targets.shape[1]:
        raise ValueError(f"sequence_loss: {len(dists)} steps but {targets.shape[1]} targets")
    if not dists:
        raise ValueError("sequence_loss: no target steps")
    mask = np.ones(targets.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    b, e = dists[0].value.shape
    if targets.shape[0] != b or mask.shape != targets.shape:
        raise ValueError("sequence_loss: batch size mismatch")
    t_idx, b_idx = np.nonzero(mask.T)
    stacked = ad.concat(dists, axis=0)  # (T * B, E), step-major
    picked = ad.pick(stacked, (t_idx * b + b_idx) * e + targets[b_idx, t_idx])
    return ad.scale(ad.total(ad.log(picked, floor=PROB_FLOOR)), -1.0 / mask.sum())
