"""Estimator-style wrappers around training and Hurst estimation.

These classes follow the scikit-learn conventions (constructor stores
hyperparameters verbatim, ``fit`` returns self, fitted attributes carry a
trailing underscore) so the learners compose with sklearn tooling such as
``clone`` and ``get_params``.  The functional API in :mod:`fracsde.train`
remains the primitive layer.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .fields import CoefficientField
from .hurst import estimate_hurst
from .net import net_forward, positive_diffusion
from .sde import Dataset, load_dataset
from .train import TrainConfig, evaluate, train

__all__ = ["DriftDiffusionLearner", "IncrementRatioHurst"]


def _as_dataset(data) -> Dataset:
    if isinstance(data, Dataset):
        return data
    if isinstance(data, (str, bytes)) or hasattr(data, "__fspath__"):
        return load_dataset(data)
    raise ValueError(
        "expected a Dataset instance or a dataset directory path, "
        f"got {type(data).__name__}"
    )


class DriftDiffusionLearner(BaseEstimator):
    """Learn drift and diffusion coefficients from discretely observed paths.

    The learner fits two single-hidden-layer tanh networks by minimizing the
    mean fractional path norm between model rollouts and the observed coarse
    trajectories, with validation-based early stopping.  The smoothness
    exponent alpha defaults to the midpoint of the admissible interval for
    the Hurst exponent estimated from the training observations.

    Parameters mirror :class:`fracsde.train.TrainConfig`; ``random_state``
    maps to its ``seed``.
    """

    def __init__(
        self,
        width: int = 128,
        alpha: float | None = None,
        learning_rate: float = 2e-3,
        weight_decay: float = 1e-4,
        clip_bound: float = 5.0,
        max_epochs: int = 800,
        patience: int = 100,
        group_size: int = 20,
        noise_mode: str = "oracle",
        random_state: int = 0,
    ):
        self.width = width
        self.alpha = alpha
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.clip_bound = clip_bound
        self.max_epochs = max_epochs
        self.patience = patience
        self.group_size = group_size
        self.noise_mode = noise_mode
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            width=self.width,
            alpha=self.alpha,
            learning_rate=self.learning_rate,
            weight_decay=self.weight_decay,
            clip_bound=self.clip_bound,
            max_epochs=self.max_epochs,
            patience=self.patience,
            group_size=self.group_size,
            noise_mode=self.noise_mode,
            seed=self.random_state,
        )

    def fit(self, X, y=None):
        """Fit on a Dataset instance or a dataset directory path.

        The y argument is ignored; it exists for signature compatibility.
        """
        dataset = _as_dataset(X)
        result = train(dataset, self._config())
        self.result_ = result
        self.drift_ = result.drift
        self.diffusion_ = result.diffusion
        self.history_ = result.history
        self.hurst_ = result.history.hurst_estimate
        self.alpha_ = result.history.alpha
        self.n_features_in_ = dataset.dimension
        return self

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise ValueError("this DriftDiffusionLearner instance is not fitted yet")

    @property
    def coefficients_(self) -> CoefficientField:
        self._check_fitted()
        return self.result_.field()

    def predict_drift(self, t, x) -> np.ndarray:
        """Learned drift at times t and states x (shape (n, d) or (d,))."""
        self._check_fitted()
        return net_forward(self.drift_, t, x)

    def predict_diffusion(self, t, x) -> np.ndarray:
        """Learned (positive) diffusion at times t and states x."""
        self._check_fitted()
        return positive_diffusion(net_forward(self.diffusion_, t, x))

    def score(self, X, y=None, split: str = "test") -> float:
        """Negative mean fractional path loss on a dataset split.

        Returned negated so that larger is better, per sklearn convention.
        """
        self._check_fitted()
        dataset = _as_dataset(X)
        report = evaluate(
            self.coefficients_,
            dataset,
            split=split,
            alpha=self.alpha_,
            noise_mode=self.noise_mode,
        )
        return -report.loss_mean

    def evaluate(self, X, split: str = "test", field_true=None):
        """Full evaluation report on a dataset split; see fracsde.train.evaluate."""
        self._check_fitted()
        return evaluate(
            self.coefficients_,
            _as_dataset(X),
            split=split,
            alpha=self.alpha_,
            field_true=field_true,
            noise_mode=self.noise_mode,
        )


class IncrementRatioHurst(BaseEstimator):
    """Hurst exponent estimator from second-order increment ratios.

    Compares the sum of squared second differences of a series on its full
    grid against the stride-2 subsample; the log2 ratio determines the
    estimate, clipped to the open interval (1/2, 0.99).
    """

    def __init__(self, component: int | None = None):
        self.component = component

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        est = estimate_hurst(X, component=self.component)
        self.hurst_ = est.value
        self.raw_ = est.raw
        self.n_ = est.n
        self.clipped_ = est.clipped
        self.n_features_in_ = 1 if X.ndim == 1 else X.shape[1]
        return self

    def fit_predict(self, X, y=None) -> float:
        return self.fit(X).hurst_
