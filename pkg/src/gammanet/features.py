"""Hashing tile coder over normalized inputs.

Produces sparse binary features: one active index per tiling, across a
stack of layers with different tile widths, plus an optional bias unit.
Inputs are normalized scalars in [0, 1]; tilings are joint over all
input dimensions so a linear learner can generalize across both state
and timescale inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_FNV_OFFSET = np.uint64(14695981039346656037)
_FNV_PRIME = np.uint64(1099511628211)


@dataclass(frozen=True)
class TileLayerSpec:
    n_tilings: int
    tile_width: float

    def __post_init__(self):
        if self.n_tilings < 1:
            raise ValueError(f"n_tilings must be >= 1, got {self.n_tilings}")
        if self.tile_width <= 0:
            raise ValueError(f"tile_width must be > 0, got {self.tile_width}")


@dataclass(frozen=True)
class SparseFeatures:
    """Sorted active indices of a binary feature vector of size `dim`."""

    active_indices: np.ndarray
    dim: int

    def dot(self, weights: np.ndarray) -> float:
        return float(weights[self.active_indices].sum())

    def to_dense(self) -> np.ndarray:
        v = np.zeros(self.dim)
        v[self.active_indices] = 1.0
        return v


def _fnv1a(values: np.ndarray) -> np.uint64:
    h = _FNV_OFFSET
    with np.errstate(over="ignore"):
        for v in values.astype(np.uint64):
            h = np.uint64(h ^ v) * _FNV_PRIME
    return h


class TileCoder:
    """Immutable after construction; `encode` is pure.

    When `index_space` is None the coder uses the exact, collision-free
    grid index for every (layer, tiling, tile) cell.  With a finite
    `index_space` each cell is hashed into the space; within a single
    encoding, collisions are resolved by linear probing so the active
    count always equals the total number of tilings (+ bias).
    """

    def __init__(self, layers, input_dim, index_space=None, include_bias=False,
                 rng: np.random.Generator | None = None):
        if not layers:
            raise ValueError("at least one tile layer is required")
        if input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {input_dim}")
        self.layers = tuple(layers)
        self.input_dim = int(input_dim)
        self.include_bias = bool(include_bias)
        self.n_tilings_total = sum(l.n_tilings for l in self.layers)
        rng = rng if rng is not None else np.random.default_rng(0)

        # offsets[i]: (n_tilings, input_dim), uniform in [0, tile_width)
        self.offsets = tuple(
            rng.uniform(0.0, l.tile_width, size=(l.n_tilings, self.input_dim))
            for l in self.layers
        )
        # Inputs live in [0, 1]; shifted coords span [0, floor(1/w) + 1].
        self._tiles_per_dim = tuple(
            int(np.floor(1.0 / l.tile_width)) + 2 for l in self.layers
        )

        if index_space is None:
            self.hashed = False
            base = 0
            self._bases = []
            for l, tpd in zip(self.layers, self._tiles_per_dim):
                self._bases.append(base)
                base += l.n_tilings * tpd**self.input_dim
            self._feature_space = base
        else:
            min_space = self.n_tilings_total
            if index_space < min_space:
                raise ValueError(
                    f"index_space {index_space} smaller than the "
                    f"{min_space} simultaneously active features"
                )
            self.hashed = True
            self._feature_space = int(index_space)
        self.dim = self._feature_space + (1 if self.include_bias else 0)

    def _check_inputs(self, inputs: np.ndarray):
        if inputs.shape[-1] != self.input_dim:
            raise ValueError(
                f"expected {self.input_dim} inputs, got {inputs.shape[-1]}"
            )
        if np.any(inputs < 0.0) or np.any(inputs > 1.0):
            raise ValueError("inputs must be normalized to [0, 1]")

    def encode(self, inputs) -> SparseFeatures:
        """Encode one input vector. Exactly one active index per tiling."""
        return self.encode_batch(np.asarray(inputs, dtype=float)[None, :])[0]

    def encode_batch(self, inputs: np.ndarray) -> list[SparseFeatures]:
        """Encode a batch of input vectors, shape (batch, input_dim)."""
        inputs = np.asarray(inputs, dtype=float)
        self._check_inputs(inputs)
        batch = inputs.shape[0]
        per_row: list[list[np.ndarray]] = [[] for _ in range(batch)]
        for li, (layer, offs, tpd) in enumerate(
            zip(self.layers, self.offsets, self._tiles_per_dim)
        ):
            # coords: (batch, n_tilings, input_dim)
            coords = np.floor(
                (inputs[:, None, :] + offs[None, :, :]) / layer.tile_width
            ).astype(np.int64)
            if self.hashed:
                for b in range(batch):
                    per_row[b].append(self._hash_layer(li, coords[b]))
            else:
                # row-major cell index within each tiling's grid
                cell = coords[:, :, 0]
                for d in range(1, self.input_dim):
                    cell = cell * tpd + coords[:, :, d]
                tiling_base = self._bases[li] + np.arange(
                    layer.n_tilings, dtype=np.int64
                ) * tpd**self.input_dim
                idx = tiling_base[None, :] + cell
                for b in range(batch):
                    per_row[b].append(idx[b])
        out = []
        for b in range(batch):
            idx = np.concatenate(per_row[b])
            if self.hashed:
                idx = self._resolve_collisions(idx)
            if self.include_bias:
                idx = np.append(idx, self.dim - 1)
            out.append(SparseFeatures(np.sort(idx), self.dim))
        return out

    def _hash_layer(self, layer_i: int, coords: np.ndarray) -> np.ndarray:
        n_tilings = coords.shape[0]
        idx = np.empty(n_tilings, dtype=np.int64)
        for t in range(n_tilings):
            key = np.concatenate(([layer_i, t], coords[t]))
            idx[t] = int(_fnv1a(key) % np.uint64(self._feature_space))
        return idx

    def _resolve_collisions(self, idx: np.ndarray) -> np.ndarray:
        # Deterministic per-encoding linear probing keeps one distinct
        # index per tiling even when the hash space is crowded.
        seen = set()
        out = np.empty_like(idx)
        for i, v in enumerate(idx):
            v = int(v)
            while v in seen:
                v = (v + 1) % self._feature_space
            seen.add(v)
            out[i] = v
        return out


def build_tile_coder(layers, input_dim, index_space=None, include_bias=False,
                     rng: np.random.Generator | None = None) -> TileCoder:
    """Construct a tile coder with randomly shifted tilings."""
    return TileCoder(layers, input_dim, index_space, include_bias, rng)


class OneHotCoder:
    """Tabular stand-in for the tile coder: one-hot over a state index.

    Expects the first input scalar to be `state / (n_states - 1)` and
    ignores any further inputs (e.g. timescale encodings), so the
    learner's update reduces to the tabular TD(0) rule.
    """

    def __init__(self, n_states: int, include_bias: bool = False):
        if n_states < 1:
            raise ValueError("n_states must be >= 1")
        self.n_states = int(n_states)
        self.include_bias = bool(include_bias)
        self.dim = self.n_states + (1 if include_bias else 0)
        self.n_tilings_total = 1

    def encode(self, inputs) -> SparseFeatures:
        inputs = np.asarray(inputs, dtype=float)
        scale = max(self.n_states - 1, 1)
        state = int(round(float(inputs[0]) * scale))
        if not 0 <= state < self.n_states:
            raise ValueError(f"state index {state} out of range")
        idx = [state] + ([self.dim - 1] if self.include_bias else [])
        return SparseFeatures(np.array(idx, dtype=np.int64), self.dim)

    def encode_batch(self, inputs: np.ndarray) -> list[SparseFeatures]:
        return [self.encode(row) for row in np.asarray(inputs, dtype=float)]
