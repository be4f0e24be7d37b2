"""Mixed continuous/ordinal/count datasets."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DataError

VariableKind = Literal["continuous", "ordinal", "count"]
VARIABLE_KINDS: tuple[VariableKind, ...] = ("continuous", "ordinal", "count")


@dataclass(frozen=True)
class MixedDataset:
    """Rows of observations with a declared kind per column.

    Ordinal columns hold 1-based category indices; count columns hold
    nonnegative integers; continuous columns hold finite reals.

    Attributes:
        values: Array of shape (n, d).
        kinds: Kind per column.
        names: Column names.
        notes: Ingestion notes (re-indexing, re-orientation).
    """

    values: np.ndarray
    kinds: tuple[VariableKind, ...]
    names: tuple[str, ...] = ()
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DataError(f"Dataset must be two-dimensional, got shape {values.shape}")
        kinds = tuple(self.kinds)
        if len(kinds) != values.shape[1]:
            raise DataError(f"Got {len(kinds)} kinds for {values.shape[1]} columns")
        names = tuple(self.names) or tuple(f"y{j + 1}" for j in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise DataError(f"Got {len(names)} names for {values.shape[1]} columns")
        for j, kind in enumerate(kinds):
            if kind not in VARIABLE_KINDS:
                raise DataError(f"Column {names[j]!r} has unknown kind {kind!r}")
            column = values[:, j]
            if not np.all(np.isfinite(column)):
                raise DataError(f"Column {names[j]!r} has missing or non-finite values")
            if kind != "continuous" and np.any(column != np.round(column)):
                raise DataError(f"Column {names[j]!r} of kind {kind} must hold integers")
            if kind == "ordinal" and np.any(column < 1):
                raise DataError(f"Column {names[j]!r} has ordinal categories below 1")
            if kind == "count" and np.any(column < 0):
                raise DataError(f"Column {names[j]!r} has negative counts")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kinds", kinds)
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def d(self) -> int:
        return int(self.values.shape[1])

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j]

    def rows(self, index: Sequence[int] | np.ndarray) -> MixedDataset:
        return MixedDataset(self.values[np.asarray(index)], self.kinds, self.names, self.notes)

    def permute(self, order: Sequence[int]) -> MixedDataset:
        order = list(order)
        return MixedDataset(
            self.values[:, order],
            tuple(self.kinds[j] for j in order),
            tuple(self.names[j] for j in order),
            self.notes,
        )
