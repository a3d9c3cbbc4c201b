"""Run configuration: flat key-value files, hashed into manifests."""

from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass


@dataclass
class RunConfig:
    alpha: float = 0.01      # weight of the topological discrepancy term
    beta: float = 1.0        # weight of the mixture-prior regularizer
    gamma: float = 0.01      # anti-collapse penalty on prior widths
    lambda0: float = 1.0     # dim-0 scaling factor (initial value)
    tau: float = 1.0         # gate sampling temperature
    lr: float = 1e-3
    epochs: int = 20
    batch: int = 128
    hidden: int = 64
    layers: int = 2
    dropout: float = 0.3
    k: int = 8               # structure elements per dimension
    threshold: float = 0.5   # partition threshold
    seed: int = 0
    c_mode: str = "fixed"    # "fixed" (C = c_const) or "batch" (C = 2 n_max)
    c_const: float = 2.0

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            lines.append(f"{f.name}={getattr(self, f.name)}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]


def parse_config(path) -> RunConfig:
    """Parse a flat key=value config file; unknown keys are rejected."""
    fields = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    kw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in fields:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            typ = fields[key]
            if typ in ("int", int):
                kw[key] = int(val)
            elif typ in ("float", float):
                kw[key] = float(val)
            else:
                kw[key] = val
    return RunConfig(**kw)
