"""Time-stamped path records and their CSV / JSON serialization."""
from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np


@dataclass
class PathRecord:
    """One replicate's recorded frequency path.

    fixation is "heart", "spade" or None (censored); fixation_time is the
    first time the population became monomorphic, if observed.
    """

    replicate: int
    times: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    z3: np.ndarray
    env: np.ndarray
    fixation: str | None = None
    fixation_time: float | None = None
    snapshots: list | None = None  # optional per-individual snapshots

    def rows(self):
        for i in range(len(self.times)):
            yield (self.replicate, self.times[i], self.z1[i], self.z2[i],
                   self.z3[i], int(self.env[i]))


CSV_HEADER = "replicate,t,z1,z2,z3,env"


def paths_to_csv(records: list[PathRecord]) -> str:
    """CSV with columns replicate,t,z1,z2,z3,env, replicates in index order."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for rec in records:
        for (rep, t, z1, z2, z3, env) in rec.rows():
            buf.write(f"{rep},{t!r},{z1!r},{z2!r},{z3!r},{env}\n")
    return buf.getvalue()


def record_to_json(rec: PathRecord) -> str:
    """Full JSON dump of one record, including snapshots when present."""
    obj = {
        "replicate": rec.replicate,
        "times": list(map(float, rec.times)),
        "z1": list(map(float, rec.z1)),
        "z2": list(map(float, rec.z2)),
        "z3": list(map(float, rec.z3)),
        "env": list(map(int, rec.env)),
        "fixation": rec.fixation,
        "fixation_time": rec.fixation_time,
    }
    if rec.snapshots is not None:
        obj["snapshots"] = rec.snapshots
    return json.dumps(obj, sort_keys=True)
