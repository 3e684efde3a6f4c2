"""Pseudo-spectral 2D incompressible Navier-Stokes benchmark (vorticity form).

The flow lives on the periodic box [0, 2pi)^2 with integer wavenumbers,
forced by the body force sin(4y) x_hat (vorticity forcing -4 cos 4y) at
viscosity nu. Diffusion is the diagonal stiff operator with eigenvalues
-nu*(kx^2 + ky^2) and is handled exactly by the Lawson propagator; the
advection term is evaluated pseudo-spectrally with 2/3-rule dealiasing.

Transform convention: unnormalized forward FFT, 1/n^2 inverse (numpy's
default), with axis 0 = x and axis 1 = y. The vorticity state is a
complex (n, n) coefficient array that stays Hermitian-symmetric with a
zero mean mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linop
from .integrator import NonFiniteStateError, OdeProblem, make_plan, slrk_step
from .tableau import Tableau, rk4_tableau, rk6_tableau

# Initial vorticity: four plane waves without any symmetry.
# Tuples of (amplitude, kx, ky, phase, is_sine).
_INITIAL_MODES = (
    (4.0, 2, 0, 0.0, True),
    (3.0, 1, 3, 0.13, False),
    (2.0, 4, 2, 0.31, True),
    (1.0, 5, 6, 1.23, True),
)

FORCING_WAVENUMBER = 4


@dataclass(frozen=True)
class SpectralGrid:
    """Wavenumber layout and dealias mask for an n-by-n periodic grid."""

    n: int
    kx: np.ndarray
    ky: np.ndarray
    dealias_mask: np.ndarray

    @property
    def k_squared(self) -> np.ndarray:
        return self.kx ** 2 + self.ky ** 2


def make_grid(n: int) -> SpectralGrid:
    """Build the grid; n must be a power of two, at least 16."""
    if n < 16 or n & (n - 1):
        raise ValueError(f"grid size must be a power of two >= 16, got {n}")
    k = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    kx = k[:, None] * np.ones(n, dtype=int)[None, :]
    ky = np.ones(n, dtype=int)[:, None] * k[None, :]
    mask = (np.abs(kx) <= n / 3) & (np.abs(ky) <= n / 3)
    return SpectralGrid(n=n, kx=kx, ky=ky, dealias_mask=mask)


def hermitian_project(field_hat: np.ndarray) -> np.ndarray:
    """Average with its reflected conjugate so the physical field is real."""
    n = field_hat.shape[0]
    rev = (-np.arange(n)) % n
    return 0.5 * (field_hat + np.conj(field_hat[np.ix_(rev, rev)]))


def initial_condition(grid: SpectralGrid) -> np.ndarray:
    """Spectral coefficients of the analytic initial vorticity.

    Exactly four conjugate mode pairs are populated; every coefficient is
    amp * n^2 * exp(i*phase) / (2i) for sines (over 2 for cosines).
    """
    n = grid.n
    w_hat = np.zeros((n, n), dtype=complex)
    for amp, kx, ky, phase, is_sine in _INITIAL_MODES:
        coeff = amp * n * n * np.exp(1j * phase)
        coeff = coeff / 2j if is_sine else coeff / 2
        w_hat[kx % n, ky % n] += coeff
        w_hat[(-kx) % n, (-ky) % n] += np.conj(coeff)
    return w_hat


def forcing_spectrum(grid: SpectralGrid) -> np.ndarray:
    """Transform of the vorticity forcing -4 cos(4y), the curl of sin(4y) x_hat."""
    n = grid.n
    f_hat = np.zeros((n, n), dtype=complex)
    kf = FORCING_WAVENUMBER
    f_hat[0, kf % n] = -kf / 2 * n * n
    f_hat[0, (-kf) % n] = -kf / 2 * n * n
    return f_hat


def linear_operator(grid: SpectralGrid, nu: float) -> linop.LinearOperator:
    """Diffusion: diagonal spectrum -nu*(kx^2 + ky^2); zero on the mean mode."""
    if nu <= 0:
        raise ValueError(f"nu must be positive, got {nu}")
    return linop.diagonal_operator(-nu * grid.k_squared.astype(float))


def nonlinear_rhs(grid: SpectralGrid, omega_hat: np.ndarray,
                  include_forcing: bool = True) -> np.ndarray:
    """Advection plus forcing in spectral space: -FFT(u . grad omega) + f_hat.

    The streamfunction solves lap(psi) = -omega, the velocity is
    (d psi/dy, -d psi/dx), and the quadratic product is formed in
    physical space then dealiased. The output is projected to Hermitian
    symmetry and zero mean.
    """
    if not np.all(np.isfinite(omega_hat)):
        raise NonFiniteStateError("non-finite vorticity coefficients (blow-up?)")
    kx, ky = grid.kx, grid.ky
    k2 = grid.k_squared.astype(float)
    inv_k2 = np.zeros_like(k2)
    nonzero = k2 > 0
    inv_k2[nonzero] = 1.0 / k2[nonzero]

    # Overflow here just means blow-up; the finite check on the next call raises.
    with np.errstate(over="ignore", invalid="ignore"):
        psi_hat = omega_hat * inv_k2
        u = np.fft.ifft2(1j * ky * psi_hat).real
        v = np.fft.ifft2(-1j * kx * psi_hat).real
        wx = np.fft.ifft2(1j * kx * omega_hat).real
        wy = np.fft.ifft2(1j * ky * omega_hat).real
        advection_hat = np.fft.fft2(u * wx + v * wy) * grid.dealias_mask
    out = -advection_hat
    if include_forcing:
        out = out + forcing_spectrum(grid)
    out = hermitian_project(out)
    out[0, 0] = 0.0
    return out


def vorticity_field(omega_hat: np.ndarray) -> np.ndarray:
    """Physical-space vorticity (real part of the inverse transform)."""
    return np.fft.ifft2(omega_hat).real


def enstrophy(omega_hat: np.ndarray) -> float:
    """Mean-square vorticity, sum |w_hat|^2 / n^4."""
    n = omega_hat.shape[0]
    return float(np.sum(np.abs(omega_hat) ** 2)) / n ** 4


def make_problem(grid: SpectralGrid, nu: float,
                 include_forcing: bool = True) -> OdeProblem:
    """Vorticity dynamics as g(w) + A w for the Lawson steppers."""
    def g(omega_hat):
        return nonlinear_rhs(grid, omega_hat, include_forcing=include_forcing)

    return OdeProblem(g=g, A=linear_operator(grid, nu), n=grid.n ** 2)


def _final_vorticity(grid: SpectralGrid, nu: float, tableau: Tableau,
                     t_final: float, n_steps: int) -> np.ndarray:
    plan = make_plan(make_problem(grid, nu), tableau, t_final / n_steps)
    w = initial_condition(grid)
    for _ in range(n_steps):
        w = slrk_step(plan, w)
    return vorticity_field(w)


@dataclass(frozen=True)
class ConvergenceCell:
    scheme: str
    n_steps: int
    linf_error: float  # nan marks an unstable (non-finite) run

    @property
    def stable(self) -> bool:
        return np.isfinite(self.linf_error)


@dataclass(frozen=True)
class ConvergenceResult:
    cells: tuple[ConvergenceCell, ...]
    slopes: dict
    fit_points: dict
    floor: float
    reference_steps: int

    def errors(self, scheme: str) -> dict:
        return {c.n_steps: c.linf_error for c in self.cells if c.scheme == scheme}


def convergence_study(grid: SpectralGrid, nu: float, t_final: float,
                      step_counts: list[int], schemes: list[Tableau] | None = None,
                      reference_steps: int | None = None) -> ConvergenceResult:
    """Max pointwise error at t_final versus step count, per scheme.

    The ground truth is the sixth-order scheme run at reference_steps
    (default 4x the largest tested count; must be at least that). The
    log-log slope fit uses points that are finite, below 1% of the
    reference field amplitude (past the pre-asymptotic regime), and above
    ten times the smallest error in the table (the empirical floor).
    """
    if sorted(step_counts) != list(step_counts) or len(set(step_counts)) != len(step_counts):
        raise ValueError("step_counts must be strictly increasing")
    if reference_steps is None:
        reference_steps = 4 * max(step_counts)
    if reference_steps < 4 * max(step_counts):
        raise ValueError("reference step count must be >= 4x the largest tested")
    if schemes is None:
        schemes = [rk4_tableau(), rk6_tableau()]

    w_ref = _final_vorticity(grid, nu, rk6_tableau(), t_final, reference_steps)
    ref_scale = float(np.max(np.abs(w_ref)))

    cells = []
    for tab in schemes:
        for m in step_counts:
            try:
                w = _final_vorticity(grid, nu, tab, t_final, m)
                err = float(np.max(np.abs(w - w_ref)))
                if not np.isfinite(err):
                    err = float("nan")
            except NonFiniteStateError:
                err = float("nan")
            cells.append(ConvergenceCell(scheme=tab.name, n_steps=m, linf_error=err))

    finite = [c.linf_error for c in cells if c.stable]
    floor = min(finite) if finite else float("nan")

    slopes = {}
    fit_points = {}
    for tab in schemes:
        usable = [c for c in cells
                  if c.scheme == tab.name and c.stable
                  and c.linf_error <= 0.01 * ref_scale
                  and c.linf_error > 10.0 * floor]
        fit_points[tab.name] = [c.n_steps for c in usable]
        if len(usable) >= 2:
            logm = np.log([c.n_steps for c in usable])
            loge = np.log([c.linf_error for c in usable])
            slopes[tab.name] = float(-np.polyfit(logm, loge, 1)[0])
        else:
            slopes[tab.name] = float("nan")
    return ConvergenceResult(cells=tuple(cells), slopes=slopes, fit_points=fit_points,
                             floor=floor, reference_steps=reference_steps)
