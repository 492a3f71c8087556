"""Input checks shared by the estimators."""

from __future__ import annotations

from typing import Iterable, Optional

import numpy as np

from .domain import FactorDomain, check_outcome


def check_situations(X, domain: Optional[FactorDomain] = None) -> list[frozenset]:
    """Coerce ``X`` to a list of factor-id frozensets.

    Accepts an iterable of iterables of ids, or a 2-D 0/1 array whose columns
    follow ``domain`` order.
    """
    if isinstance(X, np.ndarray):
        if X.ndim != 2:
            raise ValueError(f"expected a 2-D indicator array, got shape {X.shape}")
        if domain is None:
            raise ValueError("an indicator array needs a factor domain for its columns")
        if X.shape[1] != len(domain):
            raise ValueError(f"indicator array has {X.shape[1]} columns, domain has {len(domain)}")
        if not np.isin(X, (0, 1)).all():
            raise ValueError("indicator array must contain only 0/1")
        ids = domain.ids
        return [frozenset(ids[j] for j in np.flatnonzero(row)) for row in X]
    if isinstance(X, (str, bytes)):
        raise TypeError("expected a collection of factor sets, got a string")
    out = []
    for row in X:
        if isinstance(row, (str, bytes)):
            raise TypeError(f"each sample must be a collection of factor ids, got {row!r}")
        s = frozenset(row)
        if domain is not None:
            s = domain.situation(s)
        out.append(s)
    return out


def check_outcomes(y: Iterable, n_samples: Optional[int] = None) -> list[int]:
    y = [check_outcome(int(v) if isinstance(v, (np.integer,)) else v) for v in y]
    if n_samples is not None and len(y) != n_samples:
        raise ValueError(f"got {n_samples} samples but {len(y)} outcomes")
    return y


def check_texts(X: Iterable) -> list[str]:
    texts = list(X)
    for t in texts:
        if not isinstance(t, str) or not t.strip():
            raise ValueError("case descriptions must be non-empty strings")
    return texts
