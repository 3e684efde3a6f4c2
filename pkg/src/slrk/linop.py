"""Stiff linear operators and their exponential propagators.

Two operator variants: a diagonal spectrum (cheap elementwise
exponentials, used by the spectral benchmark) and a dense matrix
(exponentiated by scaling-and-squaring with a degree-13 diagonal Pade
approximant).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Pade-13 numerator coefficients for (exp approximant) U/V split.
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0,
    670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
    960960.0, 16380.0, 182.0, 1.0,
)


@dataclass(frozen=True)
class LinearOperator:
    """The stiff operator: kind 'diagonal' (spectrum array) or 'dense' (matrix)."""

    kind: str
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if self.kind == "diagonal":
            pass
        elif self.kind == "dense":
            if data.ndim != 2 or data.shape[0] != data.shape[1]:
                raise ValueError("dense operator requires a square matrix")
        else:
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if not np.all(np.isfinite(data)):
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "data", data)

    @property
    def n(self) -> int:
        """State dimension (total mode count for grid-shaped spectra)."""
        return self.data.size if self.kind == "diagonal" else self.data.shape[0]


def diagonal_operator(spectrum) -> LinearOperator:
    """Operator that is diagonal in the state basis.

    The spectrum array may have any shape; it is applied elementwise to
    states of the same shape (e.g. a 2D grid of Fourier modes).
    """
    return LinearOperator("diagonal", np.asarray(spectrum))


def dense_operator(matrix) -> LinearOperator:
    """General dense square operator."""
    return LinearOperator("dense", np.asarray(matrix))


def zero_operator(n: int) -> LinearOperator:
    """Diagonal zero operator of dimension n (propagators are identity)."""
    return diagonal_operator(np.zeros(n))


@dataclass(frozen=True)
class Propagator:
    """Precomputed action of exp(tau * A) on state vectors."""

    kind: str
    data: np.ndarray
    tau: float


def expm(m: np.ndarray) -> np.ndarray:
    """Dense matrix exponential, scaling-and-squaring + Pade 13.

    The matrix is scaled by 2**-s so its 1-norm is at most 0.5 before
    the rational approximant, then squared back s times.
    """
    m = np.asarray(m)
    n = m.shape[0]
    norm = np.linalg.norm(m, 1) if n else 0.0
    squarings = max(0, int(np.ceil(np.log2(norm / 0.5)))) if norm > 0.5 else 0
    a = m / (2.0 ** squarings)

    ident = np.eye(n, dtype=a.dtype if np.iscomplexobj(a) else float)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    b = _PADE13
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(squarings):
        r = r @ r
    return r


def make_propagator(A: LinearOperator, tau: float) -> Propagator:
    """Encode exp(tau * A): elementwise for diagonal A, expm for dense."""
    if not np.isfinite(tau):
        raise ValueError("tau must be finite")
    if A.kind == "diagonal":
        return Propagator("diagonal", np.exp(tau * A.data), float(tau))
    return Propagator("dense", expm(tau * A.data), float(tau))


def apply(e: Propagator, v: np.ndarray) -> np.ndarray:
    """Apply the propagator to a state vector (or grid-shaped state)."""
    v = np.asarray(v)
    if e.kind == "diagonal":
        if v.shape != e.data.shape:
            raise ValueError(f"state shape {v.shape} != spectrum shape {e.data.shape}")
        return e.data * v
    if v.shape != (e.data.shape[0],):
        raise ValueError(f"state shape {v.shape} incompatible with {e.data.shape} propagator")
    return e.data @ v
