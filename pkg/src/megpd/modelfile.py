"""Versioned on-disk representation of a fitted model.

The file is human-readable JSON with a ``format_version`` field.  Floats are
serialized with full shortest-repr fidelity, so save/load round trips are
lossless for every numeric field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .angular import EquicorrMatrix, MegpdModel
from .bernstein import BernsteinDensity
from .egpd import EgpdParams
from .splines import DeltaFunction, basis_from_knots

__all__ = ["ModelFile", "FORMAT_VERSION"]

FORMAT_VERSION = 1


@dataclass
class ModelFile:
    """Everything needed to reuse a fit: parameters, scale function, metadata."""

    params: EgpdParams
    delta: DeltaFunction
    rho: float | None
    d: int
    n: int
    columns: tuple[str, ...]
    preprocess: dict | None = None
    seeds: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    def megpd_model(self) -> MegpdModel:
        corr = EquicorrMatrix(max(self.d - 1, 1),
                              self.rho if self.rho is not None else 0.0)
        return MegpdModel(radial=self.params, delta=self.delta, corr=corr, d=self.d)

    def to_dict(self) -> dict:
        b = self.params.b
        if not isinstance(b, BernsteinDensity):
            raise TypeError("only Bernstein-based radial fits are persistable")
        return {
            "format_version": self.format_version,
            "d": self.d,
            "n": self.n,
            "columns": list(self.columns),
            "radial": {
                "kappa": float(self.params.kappa),
                "xi": float(self.params.xi),
                "m": int(b.m),
                "weights": np.asarray(b.weights).tolist(),
                "corrected": bool(b.corrected),
                "fallback": bool(b.fallback),
            },
            "angular": {
                "K": int(self.delta.basis.K),
                "knots": np.asarray(self.delta.basis.knots).tolist(),
                "gamma": np.asarray(self.delta.gamma).tolist(),
                "lambda": float(self.delta.lam),
                "rho": None if self.rho is None else float(self.rho),
            },
            "preprocess": self.preprocess,
            "seeds": self.seeds,
            "report": self.report,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ModelFile":
        version = payload.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported model file version {version!r}")
        rad = payload["radial"]
        ang = payload["angular"]
        density = BernsteinDensity(m=int(rad["m"]),
                                   weights=np.asarray(rad["weights"], dtype=float),
                                   corrected=bool(rad["corrected"]),
                                   fallback=bool(rad["fallback"]))
        params = EgpdParams(kappa=float(rad["kappa"]), xi=float(rad["xi"]), b=density)
        basis = basis_from_knots(np.asarray(ang["knots"], dtype=float))
        delta = DeltaFunction(basis=basis,
                              gamma=np.asarray(ang["gamma"], dtype=float),
                              lam=float(ang["lambda"]))
        return cls(params=params, delta=delta,
                   rho=None if ang["rho"] is None else float(ang["rho"]),
                   d=int(payload["d"]), n=int(payload["n"]),
                   columns=tuple(payload["columns"]),
                   preprocess=payload.get("preprocess"),
                   seeds=payload.get("seeds", {}),
                   report=payload.get("report", {}),
                   format_version=version)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ModelFile":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
