"""Column-oriented sample traces shared by all samplers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KIND_CODES = {"reject": 0, "accept": 1, "bounce": 2, "refresh": 3, "skeleton": 4, "pole": 5}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}


@dataclass
class Trace:
    """Rows of a sampler run.

    Attributes:
        t: step index (discrete samplers) or time (continuous skeletons).
        x: Euclidean samples, shape ``(n, d)``.
        latitude: last sphere coordinate ``z_{d+1}`` for each row.
        kind: per-row codes from ``KIND_CODES``.
        epoch: adaptation epoch the rows belong to.
        z, v: optional sphere position / velocity rows.
        info: run-level counters (acceptances, shrink iterations, ...).
    """

    t: np.ndarray
    x: np.ndarray
    latitude: np.ndarray
    kind: np.ndarray
    epoch: int = 0
    z: np.ndarray | None = None
    v: np.ndarray | None = None
    extras: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def x1(self):
        return self.x[:, 0]

    def kind_names(self):
        return [KIND_NAMES[int(k)] for k in self.kind]


def concat_traces(traces):
    """Stack traces into one (epoch becomes a per-row array in ``extras``)."""
    traces = [tr for tr in traces if len(tr)]
    if not traces:
        raise ValueError("no rows to concatenate")
    out = Trace(
        t=np.concatenate([tr.t for tr in traces]),
        x=np.concatenate([tr.x for tr in traces]),
        latitude=np.concatenate([tr.latitude for tr in traces]),
        kind=np.concatenate([tr.kind for tr in traces]),
        epoch=traces[-1].epoch,
    )
    out.extras["epoch"] = np.concatenate([np.full(len(tr), tr.epoch) for tr in traces])
    return out
