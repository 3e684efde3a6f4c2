"""Damped Newton search for explicit tableaux with gridded abscissae.

The unknown vector x packs b followed by the strictly-lower rows of a.
The residual F stacks every order condition up to the target order with
the deviation of each nontrivial abscissa from a prescribed equally
spaced grid, giving an overdetermined system solved iteratively by
x <- x - gamma * pinv(J) F with a finite-difference Jacobian and an
SVD pseudoinverse. Converged floating roots are only trusted after
rationalization reproduces the order conditions exactly.

Roots of this system form manifolds, so the Jacobian carries genuinely
tiny singular values away from noise level; a plain truncated
pseudoinverse takes enormous steps along those directions and strands
the iteration in least-squares local minima. The pseudoinverse is
therefore Tikhonov-filtered (sigma / (sigma^2 + lambda^2) in place of
1/sigma) with the regularization lambda adapted multiplicatively on
step acceptance, Levenberg-Marquardt style, on top of the hard
relative cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .order_conditions import density, enumerate_trees, order_residuals
from .tableau import Tableau

DIVERGENCE_NORM = 1e6
QUADRATIC_PHASE_NORM = 1e-3
PINV_RCOND = 1e-10
LAMBDA_INIT = 1e-2
LAMBDA_MIN = 1e-12
LAMBDA_MAX = 1e8
LAMBDA_SHRINK = 3.0
LAMBDA_GROW = 4.0


def uniform_c_pattern(stages: int, delta_c: Fraction) -> tuple[Fraction, ...]:
    """Strictly increasing abscissa targets 0, dc, 2*dc, ..."""
    return tuple(k * delta_c for k in range(stages))


@dataclass(frozen=True)
class SearchConfig:
    """Problem definition and iteration knobs for one search."""

    stages: int
    target_order: int
    delta_c: Fraction
    c_pattern: tuple[Fraction, ...] | None = None
    damping: float = 0.5
    max_iters: int = 500
    residual_tol: float = 1e-12
    rng_seed: int = 0
    init_scale: float = 0.5
    # Give up when the best residual over the last stall_window iterations
    # is no better than stall_factor times the best seen before it.
    stall_window: int = 30
    stall_factor: float = 0.9

    def __post_init__(self):
        if self.stages < 1:
            raise ValueError("stages must be >= 1")
        if self.target_order < 1:
            raise ValueError("target_order must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must be in (0, 1]")
        pattern = self.c_pattern
        if pattern is None:
            pattern = uniform_c_pattern(self.stages, self.delta_c)
        pattern = tuple(Fraction(ci) for ci in pattern)
        if len(pattern) != self.stages:
            raise ValueError("c_pattern length must equal stages")
        if pattern[0] != 0:
            raise ValueError("c_pattern must start at 0")
        for lo, hi in zip(pattern, pattern[1:]):
            if hi - lo not in (Fraction(0), Fraction(self.delta_c)):
                raise ValueError("c_pattern increments must be 0 or delta_c")
        object.__setattr__(self, "c_pattern", pattern)
        object.__setattr__(self, "delta_c", Fraction(self.delta_c))

    @property
    def n_unknowns(self) -> int:
        return self.stages + self.stages * (self.stages - 1) // 2

    @property
    def n_residuals(self) -> int:
        return len(enumerate_trees(self.target_order)) + self.stages - 1


class FloatTableau(NamedTuple):
    """Floating-point rendering of tableau coefficients."""

    a: np.ndarray
    b: np.ndarray

    @property
    def c(self) -> np.ndarray:
        return self.a.sum(axis=1)


@dataclass(frozen=True)
class SearchState:
    """Current iterate: packed coefficients, residual norm, regularization."""

    x: np.ndarray
    residual_norm: float
    iters: int
    reg_lambda: float = LAMBDA_INIT


@dataclass(frozen=True)
class SearchResult:
    status: str  # converged | stalled | diverged
    tableau: FloatTableau | None
    history: tuple[float, ...]
    rng_seed: int = 0


@lru_cache(maxsize=None)
def _tree_program(target_order: int):
    """Topologically ordered unique subtrees plus per-condition 1/density."""
    trees = enumerate_trees(target_order)
    node_children: list[tuple[int, ...]] = []
    node_index: dict = {}

    def intern(t):
        if t in node_index:
            return node_index[t]
        kids = tuple(intern(c) for c in t.children)
        node_index[t] = len(node_children)
        node_children.append(kids)
        return node_index[t]

    condition_nodes = tuple(intern(t) for t in trees)
    inv_gamma = np.array([1.0 / float(density(t)) for t in trees])
    return tuple(node_children), condition_nodes, inv_gamma


def unpack(x: np.ndarray, stages: int) -> FloatTableau:
    """Split a packed vector into (a, b); inverse of pack."""
    x = np.asarray(x, dtype=float)
    b = x[:stages].copy()
    a = np.zeros((stages, stages))
    rows, cols = np.tril_indices(stages, k=-1)
    a[rows, cols] = x[stages:]
    return FloatTableau(a=a, b=b)


def pack(tab: FloatTableau) -> np.ndarray:
    """Flatten (b, strictly-lower a) into the search vector."""
    stages = tab.b.shape[0]
    rows, cols = np.tril_indices(stages, k=-1)
    return np.concatenate([tab.b, tab.a[rows, cols]])


def _residual_batch(xs: np.ndarray, cfg: SearchConfig) -> np.ndarray:
    """Residuals for a batch of packed vectors, shape (batch, n_residuals)."""
    s = cfg.stages
    xs = np.asarray(xs, dtype=float)
    nbatch = xs.shape[0]
    b = xs[:, :s]
    a = np.zeros((nbatch, s, s))
    rows, cols = np.tril_indices(s, k=-1)
    a[:, rows, cols] = xs[:, s:]

    node_children, condition_nodes, inv_gamma = _tree_program(cfg.target_order)
    phi: list[np.ndarray] = []
    ones = np.ones((nbatch, s))
    for kids in node_children:
        if not kids:
            phi.append(ones)
            continue
        acc = np.einsum("bij,bj->bi", a, phi[kids[0]])
        for kid in kids[1:]:
            acc = acc * np.einsum("bij,bj->bi", a, phi[kid])
        phi.append(acc)
    weights = np.stack([np.einsum("bi,bi->b", b, phi[node]) for node in condition_nodes],
                       axis=1)
    f_trees = weights - inv_gamma

    pattern = np.array([float(ci) for ci in cfg.c_pattern])
    f_absc = a.sum(axis=2)[:, 1:] - pattern[1:]
    return np.concatenate([f_trees, f_absc], axis=1)


def residual_vector(x: np.ndarray, cfg: SearchConfig) -> np.ndarray:
    """Order-condition residuals stacked with abscissa-grid deviations."""
    x = np.asarray(x, dtype=float)
    if x.shape != (cfg.n_unknowns,):
        raise ValueError(f"expected {cfg.n_unknowns} unknowns, got shape {x.shape}")
    return _residual_batch(x[None, :], cfg)[0]


def jacobian(x: np.ndarray, cfg: SearchConfig) -> np.ndarray:
    """Central-difference Jacobian of the residual, step 1e-6*max(1, |x_m|)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (cfg.n_unknowns,):
        raise ValueError(f"expected {cfg.n_unknowns} unknowns, got shape {x.shape}")
    dim = x.shape[0]
    h = 1e-6 * np.maximum(1.0, np.abs(x))
    perturb = np.diag(h)
    batch = np.concatenate([x[None, :] + perturb, x[None, :] - perturb], axis=0)
    f = _residual_batch(batch, cfg)
    return ((f[:dim] - f[dim:]) / (2.0 * h[:, None])).T


def _filtered_step(svd, f: np.ndarray, reg_lambda: float) -> np.ndarray:
    """Regularized pseudoinverse applied to f from a precomputed SVD."""
    u, sigma, vt = svd
    if sigma.size == 0 or sigma[0] == 0.0:
        return np.zeros(vt.shape[1])
    keep = sigma >= PINV_RCOND * sigma[0]
    lam = reg_lambda * sigma[0]
    gains = sigma[keep] / (sigma[keep] ** 2 + lam ** 2)
    return vt[keep].T @ (gains * (u[:, keep].T @ f))


def newton_step(state: SearchState, cfg: SearchConfig) -> SearchState:
    """One damped regularized-pseudoinverse Newton update.

    Damping switches to 1 once the residual is below 1e-3 (local
    quadratic phase). The regularization of the returned state shrinks
    when the residual improved and grows otherwise. SVD failures
    propagate as LinAlgError; search() reports them as a stalled run.
    """
    f = residual_vector(state.x, cfg)
    j = jacobian(state.x, cfg)
    gamma = 1.0 if np.linalg.norm(f, np.inf) < QUADRATIC_PHASE_NORM else cfg.damping
    delta = _filtered_step(np.linalg.svd(j, full_matrices=False), f, state.reg_lambda)
    x_new = state.x - gamma * delta
    norm = float(np.linalg.norm(residual_vector(x_new, cfg), np.inf))
    if norm < state.residual_norm:
        lam = max(state.reg_lambda / LAMBDA_SHRINK, LAMBDA_MIN)
    else:
        lam = min(state.reg_lambda * LAMBDA_GROW, LAMBDA_MAX)
    return SearchState(x=x_new, residual_norm=norm, iters=state.iters + 1,
                       reg_lambda=lam)


def search(cfg: SearchConfig) -> SearchResult:
    """Iterate from one Gaussian initial guess until convergence or give-up.

    Steps that fail to reduce the residual norm are rejected: the
    regularization is grown and the step retried from the same point
    (reusing the SVD), up to the lambda ceiling. One iteration means one
    Jacobian evaluation.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    x = cfg.init_scale * rng.standard_normal(cfg.n_unknowns)
    resid = float(np.linalg.norm(residual_vector(x, cfg), np.inf))
    reg_lambda = LAMBDA_INIT
    history = [resid]
    iters = 0
    status = "stalled"
    while True:
        if resid <= cfg.residual_tol:
            status = "converged"
            break
        if np.linalg.norm(x) > DIVERGENCE_NORM:
            status = "diverged"
            break
        if iters >= cfg.max_iters:
            status = "stalled"
            break
        if len(history) > cfg.stall_window:
            recent = min(history[-cfg.stall_window:])
            before = min(history[:-cfg.stall_window])
            if recent > cfg.stall_factor * before:
                status = "stalled"
                break
        try:
            f = residual_vector(x, cfg)
            svd = np.linalg.svd(jacobian(x, cfg), full_matrices=False)
        except np.linalg.LinAlgError:
            status = "stalled"
            break
        gamma = 1.0 if resid < QUADRATIC_PHASE_NORM else cfg.damping
        accepted = False
        while reg_lambda <= LAMBDA_MAX:
            x_new = x - gamma * _filtered_step(svd, f, reg_lambda)
            norm_new = float(np.linalg.norm(residual_vector(x_new, cfg), np.inf))
            if norm_new < resid:
                x, resid = x_new, norm_new
                reg_lambda = max(reg_lambda / LAMBDA_SHRINK, LAMBDA_MIN)
                accepted = True
                break
            reg_lambda *= LAMBDA_GROW
        iters += 1
        history.append(resid)
        if not accepted:
            status = "stalled"
            break
    tableau = unpack(x, cfg.stages) if status == "converged" else None
    return SearchResult(status=status, tableau=tableau, history=tuple(history),
                        rng_seed=cfg.rng_seed)


def multi_start_search(cfg: SearchConfig, n_seeds: int) -> list[SearchResult]:
    """Independent searches from n_seeds deterministic seeds.

    Per-seed seeds are drawn from a SeedSequence on cfg.rng_seed, so the
    result list is reproducible regardless of execution order.
    """
    seeds = np.random.SeedSequence(cfg.rng_seed).generate_state(n_seeds)
    return [search(replace(cfg, rng_seed=int(seed))) for seed in seeds]


def rationalize(tab: FloatTableau, max_denominator: int, order: int) -> Tableau | None:
    """Snap float coefficients to small rationals and verify exactly.

    Each coefficient is replaced by its best rational approximation with
    denominator at most max_denominator (continued-fraction convergents).
    Returns the exact tableau only if it satisfies every order condition
    up to `order` exactly; otherwise None.
    """
    stages = tab.b.shape[0]
    a = [[Fraction(0)] * stages for _ in range(stages)]
    for i in range(stages):
        for j in range(i):
            a[i][j] = Fraction(float(tab.a[i, j])).limit_denominator(max_denominator)
    b = [Fraction(float(x)).limit_denominator(max_denominator) for x in tab.b]
    exact = Tableau(tuple(tuple(row) for row in a), tuple(b))
    if all(cond.residual == 0 for cond in order_residuals(exact, order)):
        return exact
    return None
