"""Observation and action space descriptions.

A space is an ordered list of scalar dimensions, each either continuous
(a bounded real interval) or discrete (a finite set 0..cardinality-1).
Values are plain tuples with a float per continuous dim and an int per
discrete dim; tuples keep values hashable and cheap to store verbatim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np


@dataclass(frozen=True)
class Continuous:
    """Bounded real dimension; bounds are finite and min < max."""

    min: float
    max: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ValueError(f"continuous bounds must be finite, got [{self.min}, {self.max}]")
        if not self.min < self.max:
            raise ValueError(f"continuous dimension needs min < max, got [{self.min}, {self.max}]")

    @property
    def range(self) -> float:
        return self.max - self.min


@dataclass(frozen=True)
class Discrete:
    """Finite dimension with values 0..cardinality-1."""

    cardinality: int

    def __post_init__(self) -> None:
        if self.cardinality < 1:
            raise ValueError(f"cardinality must be >= 1, got {self.cardinality}")


DimSpec = Union[Continuous, Discrete]


@dataclass(frozen=True)
class SpaceSpec:
    """Ordered, immutable list of dimensions. Fixed for a model's lifetime."""

    dims: tuple[DimSpec, ...]

    def __init__(self, dims: Iterable[DimSpec]) -> None:
        object.__setattr__(self, "dims", tuple(dims))

    @property
    def ndims(self) -> int:
        return len(self.dims)

    def validate(self, value: tuple) -> None:
        """Raise ValueError unless ``value`` conforms to this space."""
        if len(value) != len(self.dims):
            raise ValueError(f"expected {len(self.dims)} dims, got {len(value)}")
        for i, (dim, v) in enumerate(zip(self.dims, value)):
            if isinstance(dim, Continuous):
                if not math.isfinite(v):
                    raise ValueError(f"dim {i}: non-finite value {v!r}")
                if not dim.min <= v <= dim.max:
                    raise ValueError(f"dim {i}: {v!r} outside [{dim.min}, {dim.max}]")
            else:
                iv = int(v)
                if iv != v or not 0 <= iv < dim.cardinality:
                    raise ValueError(f"dim {i}: {v!r} not in 0..{dim.cardinality - 1}")

    def contains(self, value: tuple) -> bool:
        try:
            self.validate(value)
        except (ValueError, TypeError):
            return False
        return True

    def clamp(self, value: tuple) -> tuple:
        """Clamp continuous dims into bounds; discrete dims must already be valid."""
        if len(value) != len(self.dims):
            raise ValueError(f"expected {len(self.dims)} dims, got {len(value)}")
        out = []
        for i, (dim, v) in enumerate(zip(self.dims, value)):
            if isinstance(dim, Continuous):
                if not math.isfinite(v):
                    raise ValueError(f"dim {i}: non-finite value {v!r}")
                out.append(min(max(float(v), dim.min), dim.max))
            else:
                iv = int(v)
                if iv != v or not 0 <= iv < dim.cardinality:
                    raise ValueError(f"dim {i}: {v!r} not in 0..{dim.cardinality - 1}")
                out.append(iv)
        return tuple(out)

    def sample(self, rng: np.random.Generator) -> tuple:
        """Uniform random value, one rng draw per dimension."""
        out = []
        for dim in self.dims:
            if isinstance(dim, Continuous):
                out.append(float(rng.uniform(dim.min, dim.max)))
            else:
                out.append(int(rng.integers(dim.cardinality)))
        return tuple(out)

    def to_json(self) -> list:
        return [
            {"kind": "continuous", "min": d.min, "max": d.max}
            if isinstance(d, Continuous)
            else {"kind": "discrete", "cardinality": d.cardinality}
            for d in self.dims
        ]

    @classmethod
    def from_json(cls, data: list) -> "SpaceSpec":
        dims: list[DimSpec] = []
        for entry in data:
            if entry["kind"] == "continuous":
                dims.append(Continuous(float(entry["min"]), float(entry["max"])))
            elif entry["kind"] == "discrete":
                dims.append(Discrete(int(entry["cardinality"])))
            else:
                raise ValueError(f"unknown dim kind {entry['kind']!r}")
        return cls(dims)
