"""Complex and split-real forms of the discrete scattering system.

Complex form:  ``(C - M - iB) E = s_R + i s_I``.
Split form:    ``[[C - M, B], [B, -(C - M)]] [E_R; E_I] = [s_R; -s_I]``,
ordered as all real parts followed by all imaginary parts.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import AssembledProblem

__all__ = [
    "ComplexSystem",
    "SplitSystem",
    "ZeroRhsWarning",
    "build_complex",
    "build_split",
    "split_to_complex",
    "complex_to_split",
    "complex_residual",
    "split_residual",
    "relative_residual",
]


class ZeroRhsWarning(RuntimeWarning):
    """The right-hand side vanishes; an absolute residual is reported."""


@dataclass(eq=False)
class ComplexSystem:
    A: sp.csr_matrix
    b: np.ndarray

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(eq=False)
class SplitSystem:
    A_hat: sp.csr_matrix
    rhs: np.ndarray

    @property
    def n(self) -> int:
        return self.A_hat.shape[0] // 2


def build_complex(ap: AssembledProblem) -> ComplexSystem:
    A = (ap.C - ap.M).astype(complex) - 1j * ap.B
    A = sp.csr_matrix(A)
    A.sort_indices()
    return ComplexSystem(A=A, b=ap.s_R + 1j * ap.s_I)


def build_split(ap: AssembledProblem) -> SplitSystem:
    K = (ap.C - ap.M).tocsr()
    A_hat = sp.bmat([[K, ap.B], [ap.B, -K]], format="csr")
    A_hat.sort_indices()
    return SplitSystem(A_hat=A_hat, rhs=np.concatenate([ap.s_R, -ap.s_I]))


def split_to_complex(x) -> np.ndarray:
    x = np.asarray(x)
    n = x.shape[0] // 2
    return x[:n] + 1j * x[n:]


def complex_to_split(z) -> np.ndarray:
    z = np.asarray(z)
    return np.concatenate([z.real, z.imag])


def relative_residual(A, b, x) -> float:
    """``||b - A x|| / ||b||`` (absolute, with a warning, when ``b = 0``)."""
    r = np.linalg.norm(b - A @ x)
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        warnings.warn("right-hand side is zero; returning the absolute residual", ZeroRhsWarning, stacklevel=2)
        return float(r)
    return float(r / bnorm)


def complex_residual(sys: ComplexSystem, x) -> float:
    if np.shape(x)[0] != sys.n:
        raise ValueError("solution length does not match the system")
    return relative_residual(sys.A, sys.b, x)


def split_residual(sys: SplitSystem, x) -> float:
    if np.shape(x)[0] != 2 * sys.n:
        raise ValueError("solution length does not match the system")
    return relative_residual(sys.A_hat, sys.rhs, x)
