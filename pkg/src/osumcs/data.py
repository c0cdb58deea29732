"""Dataset container with a guarded response column.

Responses sit behind :class:`ResponseOracle`; every read is logged so that tests can
check that only pilot and selected units were ever measured.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray


class ResponseOracle:
    def __init__(self, y):
        self._y = np.asarray(y, dtype=float).ravel()
        self._seen = np.zeros(self._y.shape[0], dtype=bool)

    def __len__(self) -> int:
        return self._y.shape[0]

    def fetch(self, idx) -> NDArray:
        idx = np.asarray(idx, dtype=np.intp).ravel()
        self._seen[idx] = True
        return self._y[idx].copy()

    @property
    def accessed(self) -> NDArray:
        """Indices whose response has been read at least once."""
        return np.flatnonzero(self._seen)

    def reset_log(self) -> None:
        self._seen[:] = False

    def reveal_all(self) -> NDArray:
        """Full response vector for evaluation code; logged as a full read."""
        self._seen[:] = True
        return self._y.copy()


@dataclass
class Dataset:
    X: NDArray
    S: NDArray
    responses: ResponseOracle

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.S = np.asarray(self.S, dtype=float).ravel()
        if self.X.ndim != 2:
            raise ValueError("X must be 2-d")
        if not (self.X.shape[0] == self.S.shape[0] == len(self.responses)):
            raise ValueError("X, S and responses must have the same number of rows")

    @classmethod
    def from_arrays(cls, X, S, Y) -> "Dataset":
        return cls(X=X, S=S, responses=ResponseOracle(Y))

    @property
    def N(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]
