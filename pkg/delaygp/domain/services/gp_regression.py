"""Exact GP regression per output dimension with incremental add/delete.

All n output dimensions share the same inputs; one Cholesky factor of
K + σ_o² I is kept per distinct noise level, so a single factor serves every
dimension when the σ_{o,i} are equal.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from ..exceptions import DomainViolationException, InvalidArgumentException
from ..models.entities import KernelParams

logger = logging.getLogger(__name__)

REFACTOR_TOLERANCE = 1e-8
# Incremental updates between full reconstruction checks
RECHECK_INTERVAL = 100
PIVOT_FLOOR = 1e-12


def kernel_eval(x: np.ndarray, x_prime: np.ndarray, params: KernelParams) -> float:
    """Evaluate k(x, x′) = σ_f² exp(−‖x − x′‖² / (2 l²))."""
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if x.shape != x_prime.shape:
        raise InvalidArgumentException(
            f"Kernel arguments differ in shape: {x.shape} vs {x_prime.shape}"
        )
    sq_dist = float(np.sum((x - x_prime) ** 2))
    return params.signal_std**2 * float(np.exp(-0.5 * sq_dist / params.lengthscale**2))


def kernel_matrix(X: np.ndarray, Y: np.ndarray, params: KernelParams) -> np.ndarray:
    """Compute the squared-exponential Gram matrix between two point sets."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise InvalidArgumentException(
            f"Point sets differ in dimension: {X.shape[1]} vs {Y.shape[1]}"
        )
    sq_dist = cdist(X, Y, "sqeuclidean")
    return params.signal_std**2 * np.exp(-0.5 * sq_dist / params.lengthscale**2)


def _cholesky_rank_one_update(L: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Return the factor of L Lᵀ + v vᵀ."""
    L = L.copy()
    v = v.copy()
    size = v.shape[0]
    for k in range(size):
        r = np.hypot(L[k, k], v[k])
        c = r / L[k, k]
        s = v[k] / L[k, k]
        L[k, k] = r
        if k + 1 < size:
            L[k + 1 :, k] = (L[k + 1 :, k] + s * v[k + 1 :]) / c
            v[k + 1 :] = c * v[k + 1 :] - s * L[k + 1 :, k]
    return L


class GpModel:
    """Vector-valued exact GP: n independent scalar GPs on shared inputs.

    Instances are never mutated after construction; ``add_sample`` and
    ``delete_sample`` return new models. Reading from several threads is
    safe, building new models from one model must be serialised by the
    caller.
    """

    def __init__(
        self,
        params: KernelParams,
        noise_std: Sequence[float],
        domain_box: Sequence[Tuple[float, float]],
        inputs: Optional[np.ndarray] = None,
        targets: Optional[np.ndarray] = None,
        factors: Optional[Dict[float, np.ndarray]] = None,
        updates: int = 0,
    ):
        self.params = params
        self.noise_std = np.asarray(noise_std, dtype=float)
        self.domain_box = np.asarray(domain_box, dtype=float)
        if np.any(self.noise_std <= 0):
            raise InvalidArgumentException("Noise standard deviations must be positive")

        state_dim = self.domain_box.shape[0]
        out_dim = self.noise_std.shape[0]
        self.inputs = (
            np.empty((0, state_dim))
            if inputs is None
            else np.atleast_2d(np.asarray(inputs, dtype=float))
        )
        self.targets = (
            np.empty((0, out_dim))
            if targets is None
            else np.asarray(targets, dtype=float).reshape(-1, out_dim)
        )
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise InvalidArgumentException(
                f"{self.inputs.shape[0]} inputs but {self.targets.shape[0]} targets"
            )
        if self.inputs.shape[1] != state_dim:
            raise InvalidArgumentException(
                f"Inputs have dimension {self.inputs.shape[1]}, domain has {state_dim}"
            )

        self._updates = updates if factors is not None else 0
        self._factors = factors if factors is not None else self._factorize()
        if self.size and factors is not None and self._needs_refactor():
            logger.debug("Incremental factor drifted, refactorizing from scratch")
            self._factors = self._factorize()
            self._updates = 0
        self._weights = self._solve_weights()

    # --- construction -----------------------------------------------------

    @classmethod
    def fit(
        cls,
        inputs: np.ndarray,
        targets: np.ndarray,
        params: KernelParams,
        noise_std: Sequence[float],
        domain_box: Sequence[Tuple[float, float]],
    ) -> "GpModel":
        """Batch fit on a full training set."""
        model = cls(params, noise_std, domain_box, inputs, targets)
        for x in model.inputs:
            model._require_in_domain(x)
        return model

    @classmethod
    def empty(
        cls,
        params: KernelParams,
        noise_std: Sequence[float],
        domain_box: Sequence[Tuple[float, float]],
    ) -> "GpModel":
        """Create a model without data (the prior)."""
        return cls(params, noise_std, domain_box)

    def _noise_levels(self) -> List[float]:
        return sorted({float(s) for s in self.noise_std})

    def _gram(self, noise: float) -> np.ndarray:
        K = kernel_matrix(self.inputs, self.inputs, self.params)
        K[np.diag_indices_from(K)] += noise**2
        return K

    def _factorize(self) -> Dict[float, np.ndarray]:
        if self.size == 0:
            return {noise: np.empty((0, 0)) for noise in self._noise_levels()}
        return {
            noise: cholesky(self._gram(noise), lower=True)
            for noise in self._noise_levels()
        }

    def _needs_refactor(self) -> bool:
        """O(N) pivot check on every update, full L Lᵀ check every RECHECK_INTERVAL."""
        for noise, L in self._factors.items():
            diagonal = np.diag(L)
            broken = diagonal <= noise * PIVOT_FLOOR
            if not np.all(np.isfinite(diagonal)) or np.any(broken):
                return True
        if self._updates % RECHECK_INTERVAL:
            return False
        return self._reconstruction_error() > REFACTOR_TOLERANCE

    def _reconstruction_error(self) -> float:
        worst = 0.0
        for noise, L in self._factors.items():
            K = self._gram(noise)
            worst = max(worst, np.linalg.norm(L @ L.T - K) / np.linalg.norm(K))
        return worst

    def _solve_weights(self) -> np.ndarray:
        weights = np.zeros_like(self.targets)
        if self.size == 0:
            return weights
        for i, noise in enumerate(self.noise_std):
            L = self._factors[float(noise)]
            weights[:, i] = cho_solve((L, True), self.targets[:, i])
        return weights

    def _require_in_domain(self, x: np.ndarray, tol: float = 1e-12) -> None:
        low, high = self.domain_box[:, 0], self.domain_box[:, 1]
        if np.any(x < low - tol) or np.any(x > high + tol):
            raise DomainViolationException(f"Sample {x.tolist()} lies outside the domain")

    # --- properties -------------------------------------------------------

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def state_dim(self) -> int:
        return self.domain_box.shape[0]

    @property
    def out_dim(self) -> int:
        return self.noise_std.shape[0]

    @property
    def updates_since_factorization(self) -> int:
        return self._updates

    def factor(self, dim: int = 0) -> np.ndarray:
        """Get the lower Cholesky factor used by output dimension dim."""
        return self._factors[float(self.noise_std[dim])]

    # --- inference --------------------------------------------------------

    def posterior_batch(self, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Posterior mean and std at each row of X, both of shape (P, n)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.state_dim:
            raise InvalidArgumentException(
                f"Query dimension {X.shape[1]} does not match {self.state_dim}"
            )
        prior_var = self.params.signal_std**2
        count = X.shape[0]
        if self.size == 0:
            return (
                np.zeros((count, self.out_dim)),
                np.full((count, self.out_dim), self.params.signal_std),
            )

        k_star = kernel_matrix(self.inputs, X, self.params)
        mean = k_star.T @ self._weights
        std = np.empty((count, self.out_dim))
        reduction: Dict[float, np.ndarray] = {}
        for noise, L in self._factors.items():
            v = solve_triangular(L, k_star, lower=True)
            reduction[noise] = np.sum(v * v, axis=0)
        for i, noise in enumerate(self.noise_std):
            variance = prior_var - reduction[float(noise)]
            std[:, i] = np.sqrt(np.clip(variance, 0.0, None))
        return mean, std

    def posterior(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Posterior mean and std at a single state, both n-vectors."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise InvalidArgumentException("posterior expects a single state vector")
        mean, std = self.posterior_batch(x[None, :])
        return mean[0], std[0]

    # --- updates ----------------------------------------------------------

    def add_sample(self, x: np.ndarray, y: np.ndarray) -> "GpModel":
        """Condition on one more sample via a rank-one factor extension."""
        x = np.asarray(x, dtype=float).reshape(-1)
        y = np.asarray(y, dtype=float).reshape(-1)
        if x.shape[0] != self.state_dim or y.shape[0] != self.out_dim:
            raise InvalidArgumentException(
                f"Sample shapes {x.shape}, {y.shape} do not match "
                f"({self.state_dim},), ({self.out_dim},)"
            )
        self._require_in_domain(x)

        k_vec = kernel_matrix(self.inputs, x[None, :], self.params)[:, 0]
        k_self = self.params.signal_std**2
        factors = {}
        for noise, L in self._factors.items():
            size = L.shape[0]
            extended = np.zeros((size + 1, size + 1))
            if size:
                row = solve_triangular(L, k_vec, lower=True)
                extended[:size, :size] = L
                extended[size, :size] = row
                pivot = k_self + noise**2 - float(row @ row)
            else:
                pivot = k_self + noise**2
            extended[size, size] = np.sqrt(max(pivot, 0.0))
            factors[noise] = extended

        return GpModel(
            self.params,
            self.noise_std,
            self.domain_box,
            np.vstack([self.inputs, x[None, :]]),
            np.vstack([self.targets, y[None, :]]),
            factors,
            self._updates + 1,
        )

    def delete_sample(self, index: int) -> "GpModel":
        """Remove the sample at index via a rank-one factor downdate."""
        if not 0 <= index < self.size:
            raise InvalidArgumentException(
                f"Index {index} out of range for {self.size} samples"
            )
        keep = np.arange(self.size) != index
        factors = {}
        for noise, L in self._factors.items():
            head = L[:index, :index]
            tail = L[index + 1 :, index + 1 :]
            column = L[index + 1 :, index]
            reduced = np.zeros((self.size - 1, self.size - 1))
            reduced[:index, :index] = head
            reduced[index:, :index] = L[index + 1 :, :index]
            if tail.size:
                reduced[index:, index:] = _cholesky_rank_one_update(tail, column)
            factors[noise] = reduced

        return GpModel(
            self.params,
            self.noise_std,
            self.domain_box,
            self.inputs[keep],
            self.targets[keep],
            factors,
            self._updates + 1,
        )


def posterior(model: GpModel, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Posterior mean and std of the model at x."""
    return model.posterior(x)


def add_sample(model: GpModel, x: np.ndarray, y: np.ndarray) -> GpModel:
    """Return the model conditioned on one more sample."""
    return model.add_sample(x, y)


def delete_sample(model: GpModel, index: int) -> GpModel:
    """Return the model without the sample at index."""
    return model.delete_sample(index)
