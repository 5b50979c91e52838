"""Multi-resolution uniform quantization.

Level 0 is the coarsest resolution: its step covers a dimension's whole
range, so every in-range value lands in one bin (total information loss).
Each finer level halves the step by default. Steps must nest (each step an
exact integer multiple of the next finer one) so that two values equal
under a fine quantizer are also equal under every coarser one.
"""

from __future__ import annotations

import math
from functools import cached_property
from typing import Sequence

from .spaces import Continuous, Discrete, SpaceSpec

DEFAULT_LEVELS = 4  # max level K; K+1 quantizers per continuous dim
DEFAULT_ORDER = 3  # max action-history length N

_NEST_TOL = 1e-9


def _floor_div(x: float, step: float) -> int:
    """Largest integer b with step*b <= x, evaluated in double precision.

    Plain floor(x/step) can land one bin off when the division rounds
    across a bin edge (e.g. 0.3/0.1 rounds up to 3.0); correcting against
    the product makes quantization exactly idempotent.
    """
    b = math.floor(x / step)
    while step * b > x:
        b -= 1
    while step * (b + 1) <= x:
        b += 1
    return b


def uniform_quantize(x: float, step: float) -> tuple[int, float]:
    """Quantize ``x`` with a uniform step: bin = floor(x/step).

    Returns ``(bin, value)`` with ``value = step * bin``, so that
    ``value <= x < value + step``. Floor, not truncation: -0.6 -> -1.
    The bin follows the exact quotient of the double inputs, so
    re-quantizing a quantized value is an identity.
    """
    if not (isinstance(step, (int, float)) and math.isfinite(step)) or step <= 0:
        raise ValueError(f"step must be a positive finite real, got {step!r}")
    if not (isinstance(x, (int, float)) and math.isfinite(x)):
        raise ValueError(f"x must be finite, got {x!r}")
    b = _floor_div(x, step)
    return b, step * b


class _DimLadder:
    """Quantizer ladder for one continuous dimension.

    Values are shifted so the dimension minimum maps to 0 and clamped into
    [0, range] before binning. The top edge folds into the last covering
    bin so that the whole legal range occupies exactly ``nbins[j]`` bins;
    bin counts follow the integer chain B_j = ceil(B_{j+1} / c_j), which
    keeps fine-to-coarse bin refinement exact regardless of float noise.
    """

    __slots__ = ("offset", "range", "steps", "nbins", "_ratios")

    def __init__(self, offset: float, rng: float, steps: Sequence[float]) -> None:
        steps = tuple(float(s) for s in steps)
        if not steps:
            raise ValueError("a dimension ladder needs at least one step")
        if any(not math.isfinite(s) or s <= 0 for s in steps):
            raise ValueError(f"steps must be positive finite reals, got {steps}")
        if any(a <= b for a, b in zip(steps, steps[1:])):
            raise ValueError(f"steps must be strictly decreasing, got {steps}")
        if steps[0] < rng - _NEST_TOL * rng:
            raise ValueError(
                f"coarsest step {steps[0]} must cover the dimension range {rng}"
            )
        ratios = []
        for a, b in zip(steps, steps[1:]):
            c = round(a / b)
            if c < 2 or abs(a / b - c) > _NEST_TOL * c:
                raise ValueError(
                    f"steps must nest (each an exact integer multiple of the next), got {a}/{b}"
                )
            ratios.append(c)
        self.offset = float(offset)
        self.range = float(rng)
        self.steps = steps
        self._ratios = tuple(ratios)
        # Bin counts, finest first computed, coarsest forced to a single bin.
        nbins = [0] * len(steps)
        nbins[-1] = max(1, math.ceil(rng / steps[-1] - _NEST_TOL))
        for j in range(len(steps) - 2, -1, -1):
            nbins[j] = math.ceil(nbins[j + 1] / ratios[j])
        self.nbins = tuple(nbins)
        assert self.nbins[0] == 1, "coarsest level must collapse the range to one bin"

    def bin(self, x: float, level: int) -> int:
        """Clamped, top-folded bin index of raw value ``x`` at ``level``."""
        shifted = x - self.offset
        if shifted < 0.0:
            shifted = 0.0
        elif shifted > self.range:
            shifted = self.range
        b = _floor_div(shifted, self.steps[level])
        last = self.nbins[level] - 1
        return b if b < last else last

    def reconstruct(self, bin_index: int, level: int) -> float:
        """Raw-coordinate left edge of a bin (the quantized value)."""
        return self.offset + self.steps[level] * bin_index


class QuantizationSchema:
    """Nested per-dimension quantizer ladders for an (obs, action) space pair.

    All continuous dims share the same number of levels K+1; discrete dims
    pass through unchanged at every level. Instances are immutable.
    """

    def __init__(
        self,
        obs_space: SpaceSpec,
        action_space: SpaceSpec,
        obs_ladders: Sequence[_DimLadder | None],
        action_ladders: Sequence[_DimLadder | None],
        k: int,
    ) -> None:
        self.obs_space = obs_space
        self.action_space = action_space
        self._obs_ladders = tuple(obs_ladders)
        self._action_ladders = tuple(action_ladders)
        self.k = int(k)

    @classmethod
    def from_spaces(
        cls,
        obs_space: SpaceSpec,
        action_space: SpaceSpec,
        k: int = DEFAULT_LEVELS,
        factor: int = 2,
    ) -> "QuantizationSchema":
        """Default ladder: sigma_0 = dim range, sigma_j = sigma_0 / factor^j."""
        if k < 0:
            raise ValueError(f"k must be >= 0, got {k}")
        if factor < 2:
            raise ValueError(f"factor must be >= 2, got {factor}")

        def ladders(space: SpaceSpec) -> list[_DimLadder | None]:
            out: list[_DimLadder | None] = []
            for dim in space.dims:
                if isinstance(dim, Continuous):
                    steps = [dim.range / factor**j for j in range(k + 1)]
                    out.append(_DimLadder(dim.min, dim.range, steps))
                else:
                    out.append(None)
            return out

        return cls(obs_space, action_space, ladders(obs_space), ladders(action_space), k)

    @classmethod
    def from_steps(
        cls,
        obs_space: SpaceSpec,
        action_space: SpaceSpec,
        obs_steps: Sequence[Sequence[float] | None],
        action_steps: Sequence[Sequence[float] | None],
    ) -> "QuantizationSchema":
        """Explicit ladders; every continuous dim must supply the same K."""

        def ladders(space: SpaceSpec, steps_per_dim) -> tuple[list[_DimLadder | None], int | None]:
            if len(steps_per_dim) != space.ndims:
                raise ValueError("one step ladder (or None) required per dimension")
            out: list[_DimLadder | None] = []
            k_seen: int | None = None
            for dim, steps in zip(space.dims, steps_per_dim):
                if isinstance(dim, Continuous):
                    if steps is None:
                        raise ValueError("continuous dims need a step ladder")
                    if k_seen is not None and len(steps) != k_seen + 1:
                        raise ValueError("K must be identical across continuous dimensions")
                    k_seen = len(steps) - 1
                    out.append(_DimLadder(dim.min, dim.range, steps))
                else:
                    if steps is not None:
                        raise ValueError("discrete dims take no ladder")
                    out.append(None)
            return out, k_seen

        obs_l, k_obs = ladders(obs_space, obs_steps)
        act_l, k_act = ladders(action_space, action_steps)
        ks = {k for k in (k_obs, k_act) if k is not None}
        if len(ks) > 1:
            raise ValueError("K must be identical across continuous dimensions")
        k = ks.pop() if ks else 0
        return cls(obs_space, action_space, obs_l, act_l, k)

    @property
    def levels(self) -> int:
        return self.k + 1

    def obs_bins(self, obs: tuple, level: int) -> tuple[int, ...]:
        """Bin/pass-through indices for an observation at ``level``."""
        return self._bins(self._obs_ladders, obs, level)

    def action_bins(self, action: tuple, level: int) -> tuple[int, ...]:
        return self._bins(self._action_ladders, action, level)

    @staticmethod
    def _bins(ladders, value: tuple, level: int) -> tuple[int, ...]:
        if len(value) != len(ladders):
            raise ValueError(f"expected {len(ladders)} dims, got {len(value)}")
        return tuple(
            lad.bin(v, level) if lad is not None else int(v)
            for lad, v in zip(ladders, value)
        )

    def quantize_obs(self, obs: tuple, level: int) -> tuple:
        """Reconstructed (quantized) observation values at ``level``."""
        return tuple(
            lad.reconstruct(lad.bin(v, level), level) if lad is not None else int(v)
            for lad, v in zip(self._obs_ladders, obs)
        )

    def quantize_action(self, action: tuple, level: int) -> tuple:
        return tuple(
            lad.reconstruct(lad.bin(v, level), level) if lad is not None else int(v)
            for lad, v in zip(self._action_ladders, action)
        )

    def _params(self) -> tuple:
        def lad_params(ladders):
            return tuple(
                (l.offset, l.range, l.steps) if l is not None else None for l in ladders
            )

        return (
            self.obs_space,
            self.action_space,
            lad_params(self._obs_ladders),
            lad_params(self._action_ladders),
            self.k,
        )

    def __eq__(self, other: object) -> bool:
        return isinstance(other, QuantizationSchema) and self._params() == other._params()

    def __hash__(self) -> int:
        return hash(self._params())

    def __repr__(self) -> str:
        return f"QuantizationSchema(k={self.k}, obs={self.obs_space.ndims} dims, action={self.action_space.ndims} dims)"

    @cached_property
    def encoder(self):
        # Local import: keys.py depends on this module.
        from .keys import KeyEncoder

        return KeyEncoder(self)


def quantize_episode(
    steps: Sequence[tuple[tuple, tuple]], schema: QuantizationSchema
) -> list[list[tuple[tuple, tuple]]]:
    """Multi-resolution representation of an (obs, action) sequence.

    Returns one quantized copy of the sequence per level, coarsest first:
    component-wise reconstructed values for both observations and actions.
    """
    return [
        [(schema.quantize_obs(o, j), schema.quantize_action(a, j)) for o, a in steps]
        for j in range(schema.levels)
    ]
