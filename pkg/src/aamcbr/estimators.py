"""scikit-learn style classifiers wrapping AA-CBR and AAM-CBR."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .agents import DEFAULT_CONCURRENCY, DEFAULT_RETRIES, AamResult, run_aam_cbr
from .domain import CREDIT_DOMAIN, Case, CaseBase, check_outcome
from .reasoner import CbrVerdict, aacbr_outcome, dispute_tree
from .validation import check_outcomes, check_situations, check_texts


class AACBRClassifier(ClassifierMixin, BaseEstimator):
    """AA-CBR over factorized cases.

    Parameters
    ----------
    default_outcome : {0, 1}
        Outcome of the empty situation.
    domain : FactorDomain or None
        When set, factor ids are validated against it and 0/1 indicator arrays
        are accepted as input.

    Examples
    --------
    >>> clf = AACBRClassifier(default_outcome=0).fit([{"n4"}, {"p2", "n3", "n4"}], [0, 1])
    >>> clf.predict([{"n4", "p5"}]).tolist()
    [0]
    """

    def __init__(self, default_outcome=0, domain=None):
        self.default_outcome = default_outcome
        self.domain = domain

    def fit(self, X, y):
        X = check_situations(X, self.domain)
        y = check_outcomes(y, len(X))
        self.default_outcome_ = check_outcome(self.default_outcome)
        self.case_base_ = CaseBase(Case(x, o) for x, o in zip(X, y))
        self.classes_ = np.array([0, 1])
        return self

    def decide(self, x) -> CbrVerdict:
        check_is_fitted(self, "case_base_")
        (x,) = check_situations([x], self.domain)
        return aacbr_outcome(self.case_base_, self.default_outcome_, x)

    def predict(self, X):
        check_is_fitted(self, "case_base_")
        X = check_situations(X, self.domain)
        return np.array(
            [aacbr_outcome(self.case_base_, self.default_outcome_, x).outcome for x in X], dtype=int
        )

    def explain(self, x):
        """Dispute tree for a single new case."""
        check_is_fitted(self, "case_base_")
        (x,) = check_situations([x], self.domain)
        return dispute_tree(self.case_base_, self.default_outcome_, x)


class AAMCBRClassifier(ClassifierMixin, BaseEstimator):
    """AAM-CBR: AA-CBR over previous cases known only by their text.

    ``fit`` stores (description, outcome) pairs; ``predict`` takes factorized
    new cases and lets one agent per stored case decide coverage and extract
    factors through ``backend``.
    """

    def __init__(
        self,
        backend=None,
        default_outcome=0,
        domain=CREDIT_DOMAIN,
        concurrency=DEFAULT_CONCURRENCY,
        max_retries=DEFAULT_RETRIES,
        prompts=None,
    ):
        self.backend = backend
        self.default_outcome = default_outcome
        self.domain = domain
        self.concurrency = concurrency
        self.max_retries = max_retries
        self.prompts = prompts

    def fit(self, X, y):
        if self.backend is None:
            raise ValueError("AAMCBRClassifier needs a backend")
        texts = check_texts(X)
        y = check_outcomes(y, len(texts))
        self.default_outcome_ = check_outcome(self.default_outcome)
        self.previous_ = list(zip(texts, y))
        self.classes_ = np.array([0, 1])
        return self

    def run(self, x) -> AamResult:
        check_is_fitted(self, "previous_")
        (x,) = check_situations([x], self.domain)
        return run_aam_cbr(
            self.backend,
            self.previous_,
            x,
            self.default_outcome_,
            domain=self.domain,
            concurrency=self.concurrency,
            max_retries=self.max_retries,
            prompts=self.prompts,
        )

    def predict(self, X):
        check_is_fitted(self, "previous_")
        X = check_situations(X, self.domain)
        return np.array([self.run(x).outcome for x in X], dtype=int)
