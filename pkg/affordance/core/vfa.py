# affordance/core/vfa.py
"""
Linear value function approximation: V(s) = θ·x(s) and Q(s,a) = θ_a·x(s).
"""
import json
import logging
import os
from typing import Optional

import numpy as np

from affordance.constants import MODEL_FORMAT_VERSION, MODEL_MAGIC
from affordance.exceptions import (
    CorruptModelError,
    InvalidArgumentError,
    ModelVersionError,
    NumericOverflowError,
)

logger = logging.getLogger(__name__)


class LinearVfa:
    """
    Weights for a linear state-value (n_actions == 0) or action-value predictor.

    Action-value form keeps one weight vector per action, stored as the rows
    of a (n_actions, dim) array.
    """

    def __init__(self, dim: int, n_actions: int = 0, name: str = '', seed: int = 0):
        if dim < 1:
            raise InvalidArgumentError(f"dim must be positive, got {dim}")
        if n_actions < 0:
            raise InvalidArgumentError(f"n_actions must be >= 0, got {n_actions}")
        self.dim = int(dim)
        self.n_actions = int(n_actions)
        self.name = name
        self.seed = int(seed)
        shape = (self.n_actions, self.dim) if self.n_actions else (self.dim,)
        self._weights = np.zeros(shape, dtype=np.float64)

    @property
    def weights(self) -> np.ndarray:
        view = self._weights.view()
        view.setflags(write=False)
        return view

    @property
    def is_action_value(self) -> bool:
        return self.n_actions > 0

    def set_weights(self, weights) -> None:
        weights = np.array(weights, dtype=np.float64)
        if weights.shape != self._weights.shape:
            raise InvalidArgumentError(f"Expected weights of shape {self._weights.shape}, got {weights.shape}")
        if not np.all(np.isfinite(weights)):
            raise NumericOverflowError("Weights must be finite")
        self._weights = weights

    def copy(self) -> 'LinearVfa':
        clone = LinearVfa(self.dim, self.n_actions, self.name, self.seed)
        clone._weights = self._weights.copy()
        return clone

    def _check_features(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise InvalidArgumentError(f"Feature vector has shape {x.shape}, expected ({self.dim},)")
        return x

    def _check_action(self, a) -> int:
        if not self.is_action_value:
            raise InvalidArgumentError("State-value approximator takes no action")
        if a is None or not 0 <= a < self.n_actions:
            raise InvalidArgumentError(f"Action {a} out of range for {self.n_actions} actions")
        return int(a)

    def predict_v(self, x) -> float:
        x = self._check_features(x)
        if self.is_action_value:
            raise InvalidArgumentError("predict_v needs a state-value approximator")
        return float(self._weights @ x)

    def predict_q(self, x, a: int) -> float:
        x = self._check_features(x)
        a = self._check_action(a)
        return float(self._weights[a] @ x)

    def predict_all(self, x) -> np.ndarray:
        """All action values at x"""
        x = self._check_features(x)
        if not self.is_action_value:
            raise InvalidArgumentError("predict_all needs an action-value approximator")
        return self._weights @ x

    def predict(self, x, a: Optional[int] = None) -> float:
        return self.predict_q(x, a) if self.is_action_value else self.predict_v(x)

    def gradient(self, x, a: Optional[int] = None) -> np.ndarray:
        """∇_θ of the prediction: x itself, placed in action a's block for Q."""
        x = self._check_features(x)
        if not self.is_action_value:
            return x.copy()
        a = self._check_action(a)
        grad = np.zeros_like(self._weights)
        grad[a] = x
        return grad

    def apply_update(self, scaled_gradient, step_size: float) -> None:
        """θ ← θ − step_size · scaled_gradient; weights unchanged if the result is not finite."""
        scaled_gradient = np.asarray(scaled_gradient, dtype=np.float64)
        if scaled_gradient.shape != self._weights.shape:
            raise InvalidArgumentError(
                f"Gradient shape {scaled_gradient.shape} does not match weights {self._weights.shape}"
            )
        with np.errstate(over='ignore', invalid='ignore'):
            updated = self._weights - step_size * scaled_gradient
        if not np.all(np.isfinite(updated)):
            raise NumericOverflowError(f"Update for '{self.name}' produced non-finite weights")
        self._weights = updated

    def save(self, path: str) -> None:
        """
        Write the model file: magic line, JSON header line, then weights as
        contiguous little-endian float64.
        """
        header = {
            'format_version': MODEL_FORMAT_VERSION,
            'name': self.name,
            'dim': self.dim,
            'n_actions': self.n_actions,
            'seed': self.seed,
            'n_weights': int(self._weights.size),
        }
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'wb') as f:
            f.write(MODEL_MAGIC + b'\n')
            f.write(json.dumps(header, sort_keys=True).encode('utf-8') + b'\n')
            f.write(self._weights.astype('<f8').tobytes(order='C'))
        logger.info(f"Saved model '{self.name}' to {path}")

    @classmethod
    def load(cls, path: str) -> 'LinearVfa':
        with open(path, 'rb') as f:
            raw = f.read()

        magic, sep, rest = raw.partition(b'\n')
        if magic != MODEL_MAGIC or not sep:
            raise CorruptModelError(f"{path} is not a model file")
        header_line, sep, payload = rest.partition(b'\n')
        if not sep:
            raise CorruptModelError(f"{path}: missing header terminator")
        try:
            header = json.loads(header_line.decode('utf-8'))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CorruptModelError(f"{path}: unreadable header ({e})")

        version = header.get('format_version')
        if version != MODEL_FORMAT_VERSION:
            raise ModelVersionError(f"{path}: format_version {version}, expected {MODEL_FORMAT_VERSION}")

        try:
            dim, n_actions, n_weights = int(header['dim']), int(header['n_actions']), int(header['n_weights'])
        except (KeyError, TypeError, ValueError) as e:
            raise CorruptModelError(f"{path}: incomplete header ({e})")
        expected = dim * max(n_actions, 1)
        if n_weights != expected or len(payload) != 8 * n_weights:
            raise CorruptModelError(f"{path}: expected {expected} weights, file holds {len(payload)} bytes")

        vfa = cls(dim, n_actions, header.get('name', ''), header.get('seed', 0))
        weights = np.frombuffer(payload, dtype='<f8').astype(np.float64)
        vfa._weights = weights.reshape(vfa._weights.shape).copy()
        return vfa


def predict_v(vfa: LinearVfa, x) -> float:
    return vfa.predict_v(x)


def predict_q(vfa: LinearVfa, x, a: int) -> float:
    return vfa.predict_q(x, a)


def gradient(vfa: LinearVfa, x, a: Optional[int] = None) -> np.ndarray:
    return vfa.gradient(x, a)


def apply_update(vfa: LinearVfa, scaled_gradient, step_size: float) -> None:
    vfa.apply_update(scaled_gradient, step_size)


def save(vfa: LinearVfa, path: str) -> None:
    vfa.save(path)


def load(path: str) -> LinearVfa:
    return LinearVfa.load(path)
