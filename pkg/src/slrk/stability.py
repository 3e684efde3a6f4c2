"""Linear stability analysis of explicit Runge-Kutta and Lawson stepping.

One step on du/dt = lambda*u multiplies u by the stability polynomial
Phi(z), z = h*lambda. Splitting a second rate lambda_2 into the exact
propagator multiplies that by exp(z_2), so the Lawson amplification is
exp(z_2)*Phi(z_1) and a purely imaginary z_2 cannot change stability.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .tableau import Tableau


@dataclass(frozen=True)
class StabilityPolynomial:
    """Phi(z) = sum coeffs[k] * z**k with exact rational coefficients."""

    coeffs: tuple[Fraction, ...]

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, z: complex) -> complex:
        acc = 0j
        for ck in reversed(self.coeffs):
            acc = acc * z + float(ck)
        return acc

    def eval_many(self, z: np.ndarray) -> np.ndarray:
        acc = np.zeros_like(np.asarray(z, dtype=complex))
        for ck in reversed(self.coeffs):
            acc = acc * z + float(ck)
        return acc


def stability_polynomial(tab: Tableau) -> StabilityPolynomial:
    """Exact coefficients: coeffs[0] = 1 and coeffs[k] = b . A^(k-1) . 1.

    Trailing zero coefficients are dropped, so the degree can be below
    the stage count.
    """
    s = tab.s
    coeffs = [Fraction(1)]
    v = [Fraction(1)] * s
    for _ in range(s):
        coeffs.append(sum((bi * vi for bi, vi in zip(tab.b, v)), Fraction(0)))
        v = [sum((tab.a[i][j] * v[j] for j in range(i)), Fraction(0)) for i in range(s)]
    while len(coeffs) > 1 and coeffs[-1] == 0:
        coeffs.pop()
    return StabilityPolynomial(tuple(coeffs))


def slrk_amplification(phi: StabilityPolynomial, z1: complex, z2: complex) -> complex:
    """Amplification of one Lawson step with explicit rate z1 and stiff rate z2."""
    return cmath.exp(z2) * phi(z1)


@dataclass(frozen=True)
class RegionBoundary:
    """Polyline |exp(z2)*Phi(z)| = 1, one point per ray that crosses."""

    points: np.ndarray
    z2: complex
    skipped_angles: tuple[float, ...] = field(default_factory=tuple)


def _radius_bound(phi: StabilityPolynomial, z2: complex) -> float:
    # Beyond ~(e^{-Re z2}/|lead|)^{1/deg} the leading term dominates and
    # |Phi_eff| > 1, so double it for a safe outer bracket.
    lead = abs(float(phi.coeffs[-1]))
    deg = phi.degree
    if deg == 0 or lead == 0.0:
        return 4.0
    r = (np.exp(-z2.real) / lead) ** (1.0 / deg)
    return 2.0 * r + 4.0


def _effective_magnitude(phi: StabilityPolynomial, z2: complex, z: np.ndarray) -> np.ndarray:
    return np.exp(z2.real) * np.abs(phi.eval_many(z))


def region_boundary(phi: StabilityPolynomial, z2: complex = 0j,
                    angular_samples: int = 256) -> RegionBoundary:
    """Outermost |exp(z2)*Phi(z)| = 1 crossing along rays from the origin.

    Each ray is scanned inward from a radius bound where the leading term
    dominates; the outermost sign change is bisected down to a unit-modulus
    residual of 1e-10. Rays with no crossing are recorded in skipped_angles.
    """
    if angular_samples < 16:
        raise ValueError(f"angular_samples must be >= 16, got {angular_samples}")
    z2 = complex(z2)
    rmax = _radius_bound(phi, z2)
    n_scan = 512
    points = []
    skipped = []
    for theta in 2.0 * np.pi * np.arange(angular_samples) / angular_samples:
        direction = cmath.exp(1j * theta)
        radii = np.linspace(rmax, 0.0, n_scan + 1)
        mags = _effective_magnitude(phi, z2, radii * direction)
        inside = mags <= 1.0
        if not inside.any():
            skipped.append(float(theta))
            continue
        first_in = int(np.argmax(inside))
        if first_in == 0:
            # Entire ray is stable out to the bound: no crossing to bracket.
            skipped.append(float(theta))
            continue
        lo, hi = radii[first_in], radii[first_in - 1]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            m = np.exp(z2.real) * abs(phi(mid * direction))
            if abs(m - 1.0) <= 1e-10:
                lo = mid
                break
            if m <= 1.0:
                lo = mid
            else:
                hi = mid
        points.append(lo * direction)
    return RegionBoundary(points=np.array(points), z2=z2, skipped_angles=tuple(skipped))


def real_axis_boundary(phi: StabilityPolynomial, z2: float = 0.0) -> float:
    """Most negative real z1 with |exp(z2)*Phi| <= 1 on all of [z1, 0].

    Scans left from the origin for the first exit of the stable interval,
    then bisects the crossing to 1e-6.
    """
    if complex(z2).imag != 0.0:
        z2 = complex(z2).real  # imaginary part has no effect on magnitudes
    z2 = float(z2)
    if z2 > 0.0:
        raise ValueError("real_axis_boundary requires z2 <= 0")
    rmax = _radius_bound(phi, complex(z2))
    xs = np.linspace(0.0, -rmax, 4097)
    mags = _effective_magnitude(phi, complex(z2), xs.astype(complex))
    outside = mags > 1.0
    if not outside.any():
        return float(xs[-1])
    first_out = int(np.argmax(outside))
    if first_out == 0:
        return 0.0
    lo, hi = xs[first_out - 1], xs[first_out]  # lo stable, hi unstable, lo > hi
    while abs(lo - hi) > 1e-6:
        mid = 0.5 * (lo + hi)
        if np.exp(z2) * abs(phi(complex(mid))) <= 1.0:
            lo = mid
        else:
            hi = mid
    return float(lo)
