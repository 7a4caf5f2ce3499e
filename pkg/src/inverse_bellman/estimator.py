"""scikit-learn style wrapper around value-based dynamics inference."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DimensionError, ValidationError
from .inference import infer_model
from .mdp import Policy, TabularMDP, ValueTable


class InverseBellmanDynamics(BaseEstimator):
    """Deterministic dynamics model read off a trained action-value table.

    Parameters
    ----------
    gamma : float
        Discount factor the table was trained with, in (0, 1).
    selector : "greedy" or Policy
        How state values are formed from the table.
    ambiguity_margin : float or None
        Runner-up margin below which a prediction is flagged ambiguous.
        ``None`` uses ``2 * certified_epsilon / gamma``.
    certified_epsilon : float or None
        Known sup-norm accuracy of the table passed to :meth:`fit`.

    Attributes
    ----------
    next_state_ : (n_states, n_actions) int array
    scanned_ : (n_states, n_actions) array of scanned values
    ambiguous_ : (n_states, n_actions) bool array
    model_ : InferredModel
    """

    def __init__(self, gamma=0.99, selector="greedy", ambiguity_margin=None,
                 certified_epsilon=None):
        self.gamma = gamma
        self.selector = selector
        self.ambiguity_margin = ambiguity_margin
        self.certified_epsilon = certified_epsilon

    def fit(self, Q, reward):
        """Fit from an action-value table ``Q`` and its reward table.

        ``reward`` may be per ``(state, action)`` or a per-state vector.
        """
        if isinstance(Q, ValueTable):
            eps = Q.certified_epsilon if self.certified_epsilon is None else self.certified_epsilon
            Q = Q.q
        else:
            eps = self.certified_epsilon
        Q = check_array(Q, dtype=np.float64)
        reward = np.asarray(reward, dtype=np.float64)
        if reward.ndim == 1:
            reward = np.repeat(reward[:, None], Q.shape[1], axis=1)
        reward = check_array(reward, dtype=np.float64)
        if reward.shape != Q.shape:
            raise DimensionError(f"reward shape {reward.shape} != Q shape {Q.shape}")
        if not isinstance(self.selector, (str, Policy)):
            raise ValidationError("selector must be 'greedy' or a Policy")
        # transitions are never read by inference; self-loops keep the MDP valid
        placeholder = np.zeros(Q.shape, dtype=np.int64)
        mdp = TabularMDP(placeholder, reward, self.gamma)
        self.model_ = infer_model(ValueTable(Q, eps), mdp, self.selector,
                                  self.ambiguity_margin)
        self.next_state_ = self.model_.next_state
        self.scanned_ = self.model_.scanned
        self.ambiguous_ = self.model_.ambiguous
        self.n_states_, self.n_actions_ = Q.shape
        return self

    def _pairs(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=None)
        if X.shape[1] != 2:
            raise DimensionError("X must have two columns: state, action")
        if not np.issubdtype(X.dtype, np.integer):
            if not np.all(np.equal(np.mod(X, 1), 0)):
                raise ValidationError("state and action indices must be integers")
            X = X.astype(np.int64)
        s, a = X[:, 0], X[:, 1]
        if s.min() < 0 or s.max() >= self.n_states_ or a.min() < 0 or a.max() >= self.n_actions_:
            raise ValidationError("state-action index out of range")
        return s, a

    def predict(self, X):
        """Predicted successor state for each ``(state, action)`` row of ``X``."""
        s, a = self._pairs(X)
        return self.next_state_[s, a]

    def transform(self, X):
        """Scanned values for each ``(state, action)`` row of ``X``."""
        s, a = self._pairs(X)
        return self.scanned_[s, a]

    def score(self, X, y):
        return float(np.mean(self.predict(X) == np.asarray(y)))

    def all_pairs(self):
        check_is_fitted(self, "model_")
        s, a = np.meshgrid(np.arange(self.n_states_), np.arange(self.n_actions_),
                           indexing="ij")
        return np.column_stack([s.ravel(), a.ravel()])
