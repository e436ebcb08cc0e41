"""Experiment configuration.

A config is one JSON object whose keys are exactly the fields of
:class:`ExperimentConfig`.  ``lam`` is either a positive float or
``{"dyadic_level": N0}`` meaning ln2 * 2^-N0; ``symbol`` is a default
symbol name (see :func:`bergschatten.symbols.named_symbol`) or a term list
``[[a, b, re, im(, k)], ...]``; ``D`` is a degree cap or an explicit sweep.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DomainError
from .quadrature import QuadratureSpec
from .symbols import Symbol, named_symbol

LN2 = math.log(2.0)


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 1
    gamma: float = 0.0
    lam: object = field(default_factory=lambda: {"dyadic_level": 3})
    depth: int = 8
    R: float = 0.5
    M: object = field(default_factory=lambda: [2, 4, 8])
    p_list: tuple = (1.5,)
    symbol: object = "zbar"
    quadrature: dict = field(default_factory=dict)
    D: object = 128
    outputs: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if int(self.n) < 1:
            raise ConfigError("n must be >= 1")
        if not self.gamma > -1:
            raise ConfigError(f"gamma must exceed -1, got {self.gamma}")
        if any(not p > 0 for p in self.p_list):
            raise ConfigError("every p must be positive")
        if int(self.depth) < 0:
            raise ConfigError("depth must be >= 0")
        if not self.lambda_value > 0:
            raise ConfigError("lambda must be positive")
        if not self.R > 0:
            raise ConfigError("R must be positive")
        if any(m < 1 for m in self.M_values):
            raise ConfigError("M must be >= 1")
        if any(d < 1 for d in self.D_sweep):
            raise ConfigError("D must be >= 1")
        unknown = set(self.quadrature) - {f.name for f in dataclasses.fields(QuadratureSpec)}
        if unknown:
            raise ConfigError(f"unknown quadrature keys {sorted(unknown)}")
        try:
            self.symbol_obj
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc

    # ------------------------------------------------------------ derived

    @property
    def lambda_value(self) -> float:
        if isinstance(self.lam, dict):
            if set(self.lam) != {"dyadic_level"}:
                raise ConfigError("lam as a mapping must be {'dyadic_level': N0}")
            return LN2 * 2.0 ** (-int(self.lam["dyadic_level"]))
        return float(self.lam)

    @property
    def M_values(self) -> list[int]:
        return [int(self.M)] if isinstance(self.M, (int, float)) else [int(m) for m in self.M]

    @property
    def D_sweep(self) -> list[int]:
        """Degree caps for sweeps: D/8, D/4, D/2, D unless a list is given."""
        if isinstance(self.D, (int, float)):
            D = int(self.D)
            return sorted({max(1, D // 8), max(1, D // 4), max(1, D // 2), D})
        return [int(d) for d in self.D]

    @property
    def D_max(self) -> int:
        return max(self.D_sweep)

    @property
    def symbol_obj(self) -> Symbol:
        if isinstance(self.symbol, str):
            return named_symbol(self.symbol, self.n)
        return Symbol.from_config(self.symbol, self.n)

    @property
    def symbol_label(self) -> str:
        return self.symbol if isinstance(self.symbol, str) else repr(self.symbol_obj)

    @property
    def quad(self) -> QuadratureSpec:
        return QuadratureSpec(**{"seed": self.seed, **self.quadrature})

    @property
    def cutoff(self) -> float:
        """2n / (n + 1 + gamma)."""
        return 2 * self.n / (self.n + 1 + self.gamma)

    def delta(self, p: float) -> float:
        """Margin p(n + 1 + gamma) - 2n; positive exactly above the cutoff."""
        return p * (self.n + 1 + self.gamma) - 2 * self.n

    def p_table(self) -> list[dict]:
        return [{"p": p, "cutoff": self.cutoff, "delta": self.delta(p), "above_cutoff": self.delta(p) > 0} for p in self.p_list]

    # ------------------------------------------------------------ io

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["p_list"] = list(self.p_list)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        d = dict(d)
        if "p_list" in d:
            p = d["p_list"]
            d["p_list"] = tuple(p) if isinstance(p, (list, tuple)) else (p,)
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


__all__ = ["ExperimentConfig"]
