"""Deterministic response functions lambda: x -> a."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

ENUMERATION_CAP = 10 ** 6


class EnumerationCapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class DeterministicStrategySet:
    """All functions assigning an outcome ``a < outcomes[x]`` to each setting ``x``.

    Strategy ``lam`` is stored as a row of ``table`` (shape ``(|Lambda|, m)``),
    in lexicographic order with the last setting varying fastest.
    """

    outcomes: tuple
    table: np.ndarray

    def __init__(self, outcomes, cap: int = ENUMERATION_CAP):
        outs = tuple(int(o) for o in outcomes)
        if any(o < 1 for o in outs):
            raise ValueError("outcome counts must be positive")
        count = int(np.prod(outs, dtype=object)) if outs else 1
        if count > cap:
            raise EnumerationCapExceeded(
                f"{count} deterministic strategies exceed the enumeration cap of {cap}")
        table = np.array(list(itertools.product(*[range(o) for o in outs])), dtype=int).reshape(count, len(outs))
        object.__setattr__(self, "outcomes", outs)
        object.__setattr__(self, "table", table)

    def __len__(self):
        return self.table.shape[0]

    @property
    def settings(self) -> int:
        return len(self.outcomes)

    def response(self, x: int) -> np.ndarray:
        """``v[a, lam] = 1`` iff ``lam(x) = a``; shape ``(outcomes[x], |Lambda|)``."""
        v = np.zeros((self.outcomes[x], len(self)))
        v[self.table[:, x], np.arange(len(self))] = 1.0
        return v

    def tensor(self) -> np.ndarray:
        """Zero-padded ``v[x, a, lam]`` on the rectangular outcome grid."""
        omax = max(self.outcomes)
        v = np.zeros((self.settings, omax, len(self)))
        for x in range(self.settings):
            v[x, self.table[:, x], np.arange(len(self))] = 1.0
        return v
