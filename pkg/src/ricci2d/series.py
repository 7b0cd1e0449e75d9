"""Per-run scalar monitor series and their CSV formats."""

from dataclasses import dataclass, field

import numpy as np

COLUMNS = (
    "t", "supR", "supGradR2", "supGrad2R2", "supGradF2g", "supF",
    "area", "u0", "aperture",
)


@dataclass
class TimeSeries:
    """Monitors recorded at the (geometrically spaced) record times.

    The nine canonical columns go to the run CSV; auxiliary per-time
    quantities used by checks and reports live in ``extras``.
    """

    rows: list = field(default_factory=list)       # dicts keyed by COLUMNS
    extras: dict = field(default_factory=dict)     # name -> list of floats

    def append(self, row: dict, **extra):
        self.rows.append({k: float(row.get(k, np.nan)) for k in COLUMNS})
        for k, v in extra.items():
            self.extras.setdefault(k, []).append(float(v))

    def column(self, name: str) -> np.ndarray:
        if name in COLUMNS:
            return np.array([r[name] for r in self.rows])
        return np.array(self.extras[name])

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    def __len__(self):
        return len(self.rows)

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(COLUMNS) + "\n")
            for r in self.rows:
                fh.write(",".join(f"{r[k]:.17g}" for k in COLUMNS) + "\n")

    @classmethod
    def read_csv(cls, path) -> "TimeSeries":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if tuple(header) != COLUMNS:
                raise ValueError(f"unexpected series header in {path}")
            ts = cls()
            for line in fh:
                vals = [float(x) for x in line.split(",")]
                ts.rows.append(dict(zip(COLUMNS, vals)))
        return ts


def write_pair_csv(path, name_a, a, name_b, b):
    with open(path, "w") as fh:
        fh.write(f"{name_a},{name_b}\n")
        for x, y in zip(a, b):
            fh.write(f"{x:.17g},{y:.17g}\n")


def read_pair_csv(path):
    with open(path) as fh:
        fh.readline()
        rows = [tuple(float(x) for x in line.split(",")) for line in fh if line.strip()]
    a = np.array([r[0] for r in rows])
    b = np.array([r[1] for r in rows])
    return a, b
