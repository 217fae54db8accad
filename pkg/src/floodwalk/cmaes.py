"""Self-contained (mu/mu_w, lambda)-CMA-ES minimizer.

Weighted recombination, rank-one + rank-mu covariance update and cumulative
step-size adaptation, with an ask/tell interface so fitness evaluations can
run in parallel. Deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CmaError(RuntimeError):
    pass


def default_popsize(n: int) -> int:
    return 4 + int(3 * np.log(n))


@dataclass
class CmaConfig:
    dimension: int
    x0: np.ndarray
    sigma0: float
    popsize: int | None = None  # default 4 + floor(3 ln n)
    max_evals: int = 100_000
    target_f: float | None = None
    seed: int = 0

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=np.float64)
        if self.dimension < 1 or len(self.x0) != self.dimension:
            raise CmaError("bad dimension / x0 length")
        if self.sigma0 <= 0:
            raise CmaError("sigma0 must be > 0")
        if self.popsize is None:
            self.popsize = default_popsize(self.dimension)
        if self.popsize < 4:
            raise CmaError("population size must be >= 4")


class CmaState:
    """Full optimizer state; mutated only by tell (and resample)."""

    def __init__(self, cfg: CmaConfig):
        self.cfg = cfg
        n = cfg.dimension
        lam = cfg.popsize
        self.n = n
        self.lam = lam
        mu = lam // 2
        w = np.log(lam / 2 + 0.5) - np.log(np.arange(1, mu + 1))
        self.weights = w / w.sum()
        self.mu = mu
        self.mueff = float(self.weights.sum() ** 2 / (self.weights**2).sum())

        self.c_sigma = (self.mueff + 2) / (n + self.mueff + 5)
        self.d_sigma = (
            1 + 2 * max(0.0, np.sqrt((self.mueff - 1) / (n + 1)) - 1) + self.c_sigma
        )
        self.c_c = (4 + self.mueff / n) / (n + 4 + 2 * self.mueff / n)
        self.c_1 = 2 / ((n + 1.3) ** 2 + self.mueff)
        self.c_mu = min(
            1 - self.c_1,
            2 * (self.mueff - 2 + 1 / self.mueff) / ((n + 2) ** 2 + self.mueff),
        )
        self.chi_n = np.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

        self.mean = cfg.x0.copy()
        self.sigma = float(cfg.sigma0)
        self.cov = np.eye(n)
        self.p_sigma = np.zeros(n)
        self.p_c = np.zeros(n)
        self.generation = 0
        self.evals = 0
        self.best_x = cfg.x0.copy()
        self.best_f = np.inf
        self.degenerated = False
        self.rng = np.random.Generator(np.random.PCG64(cfg.seed))

        self._eigen_up_to_date = False
        self._pending: np.ndarray | None = None
        self._pending_z: np.ndarray | None = None
        self._decompose()

    def _decompose(self) -> None:
        cov = (self.cov + self.cov.T) / 2.0
        vals, vecs = np.linalg.eigh(cov)
        if not np.all(np.isfinite(vals)) or vals[0] <= 0:
            self.degenerated = True
            vals = np.maximum(vals, 1e-20)
        self.eigvals = vals
        self.eigvecs = vecs
        self._sqrt_d = np.sqrt(vals)
        self._eigen_up_to_date = True

    def _sample_one(self) -> tuple[np.ndarray, np.ndarray]:
        z = self.rng.standard_normal(self.n)
        y = self.eigvecs @ (self._sqrt_d * z)
        return self.mean + self.sigma * y, y

    def ask(self) -> np.ndarray:
        if self._pending is not None:
            raise CmaError("ask called twice without tell")
        if not self._eigen_up_to_date:
            self._decompose()
        xs = np.empty((self.lam, self.n))
        ys = np.empty((self.lam, self.n))
        for i in range(self.lam):
            xs[i], ys[i] = self._sample_one()
        self._pending = xs
        self._pending_y = ys
        return xs.copy()

    def resample(self, i: int) -> np.ndarray:
        """Redraw candidate i of the pending batch (non-finite fitness handling)."""
        if self._pending is None:
            raise CmaError("no pending batch to resample")
        x, y = self._sample_one()
        self._pending[i] = x
        self._pending_y[i] = y
        return x.copy()

    def tell(self, candidates: np.ndarray, fitnesses) -> None:
        fitnesses = np.asarray(fitnesses, dtype=np.float64)
        if self._pending is None:
            raise CmaError("tell without matching ask")
        candidates = np.asarray(candidates, dtype=np.float64)
        if candidates.shape != (self.lam, self.n) or not np.allclose(
            candidates, self._pending, equal_nan=True
        ):
            raise CmaError("tell batch does not match the last asked batch")
        if len(fitnesses) != self.lam:
            raise CmaError(
                f"got {len(fitnesses)} fitnesses for {self.lam} candidates"
            )

        ys = self._pending_y
        self._pending = None
        self._pending_y = None
        self.evals += self.lam

        order = np.argsort(fitnesses, kind="stable")
        if fitnesses[order[0]] < self.best_f:
            self.best_f = float(fitnesses[order[0]])
            self.best_x = candidates[order[0]].copy()

        sel_y = ys[order[: self.mu]]
        y_w = self.weights @ sel_y
        self.mean = self.mean + self.sigma * y_w

        # cumulative step-size adaptation (C^{-1/2} y_w via the eigen system)
        inv_sqrt_y = self.eigvecs @ (
            (self.eigvecs.T @ y_w) / self._sqrt_d
        )
        self.p_sigma = (1 - self.c_sigma) * self.p_sigma + np.sqrt(
            self.c_sigma * (2 - self.c_sigma) * self.mueff
        ) * inv_sqrt_y
        ps_norm = float(np.linalg.norm(self.p_sigma))
        h_sigma = ps_norm / np.sqrt(
            1 - (1 - self.c_sigma) ** (2 * (self.generation + 1))
        ) < (1.4 + 2 / (self.n + 1)) * self.chi_n

        self.p_c = (1 - self.c_c) * self.p_c + (
            np.sqrt(self.c_c * (2 - self.c_c) * self.mueff) * y_w if h_sigma else 0.0
        )

        rank_one = np.outer(self.p_c, self.p_c)
        rank_mu = (self.weights[:, None] * sel_y).T @ sel_y
        delta_h = (1 - h_sigma) * self.c_c * (2 - self.c_c)
        self.cov = (
            (1 - self.c_1 - self.c_mu) * self.cov
            + self.c_1 * (rank_one + delta_h * self.cov)
            + self.c_mu * rank_mu
        )
        self.sigma *= float(
            np.exp((self.c_sigma / self.d_sigma) * (ps_norm / self.chi_n - 1))
        )
        self.generation += 1
        self._eigen_up_to_date = False
        self._decompose()

    def should_stop(self) -> str | None:
        if self.degenerated:
            return "covariance degenerated"
        if self.cfg.target_f is not None and self.best_f <= self.cfg.target_f:
            return "target fitness reached"
        if self.evals >= self.cfg.max_evals:
            return "evaluation budget exhausted"
        if self.sigma * float(np.sqrt(self.eigvals[-1])) < 1e-12:
            return "step size collapsed"
        return None


def minimize(f, cfg: CmaConfig):
    """Minimize f; returns (x_best, f_best, history).

    history is the per-generation best fitness. Non-finite fitness values are
    resampled up to 10 times, then scored +inf.
    """
    state = CmaState(cfg)
    history: list[float] = []
    while state.should_stop() is None:
        xs = state.ask()
        fits = np.empty(state.lam)
        for i in range(state.lam):
            fi = float(f(xs[i]))
            tries = 0
            while not np.isfinite(fi) and tries < 10:
                xs[i] = state.resample(i)
                fi = float(f(xs[i]))
                tries += 1
            fits[i] = fi if np.isfinite(fi) else np.inf
        state.tell(xs, fits)
        history.append(float(np.min(fits)))
    return state.best_x.copy(), float(state.best_f), history
