"""Interaction linear system and its circulant cross-check.

At total energy E the on-diagonal scattering amplitudes x_m solve

    sum_m (2 pi delta_{lm} - U G(E, l - m)) x_m = rhs_l,   -L <= l, m <= L,

a complex *symmetric* (not Hermitian) Toeplitz system: the coefficients
t(n) = 2 pi [n = 0] - U G(E, n) are even in n because the pair Green's
function is.  Sizes stay in the hundreds, so a dense LU with partial
pivoting is the reference (and only) solve path.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import SingularSystemError
from .green import green_table
from .params import TWO_PI, InteractionConfig

# scaled-pivot threshold below which the system is reported as resonant
PIVOT_TOL = 1e-12


@dataclass(frozen=True)
class PlaneWaveVector:
    """Components e^{-iPl}, l = -L..L, of a total-momentum plane wave."""

    total_momentum: float
    half_width: int
    components: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        l = np.arange(-self.half_width, self.half_width + 1)
        object.__setattr__(self, "components", np.exp(-1j * self.total_momentum * l))


def plane_wave(total_momentum: float, half_width: int) -> np.ndarray:
    """Convenience: just the component array of :class:`PlaneWaveVector`."""
    return PlaneWaveVector(total_momentum, half_width).components


class InteractionKernel:
    """Factorized Toeplitz system t(n) = 2 pi delta_{n0} - U G(E, n).

    Immutable after construction; the LU factorization is computed eagerly so
    instances can be shared freely between threads.
    """

    def __init__(self, energy: float, config: InteractionConfig):
        self.energy = float(energy)
        self.U = float(config.U)
        self.L = int(config.L)
        n = np.arange(0, 2 * self.L + 1)
        table = green_table(self.energy, 2 * self.L)
        first = TWO_PI * (n == 0) - self.U * table.coefficients()
        # symmetric Toeplitz: first row equals first column (no conjugation)
        self._matrix = scipy.linalg.toeplitz(first, first)
        self._lu, self._piv = scipy.linalg.lu_factor(self._matrix)
        diag = np.abs(np.diag(self._lu))
        scale = max(diag.max(), np.abs(first).max())
        if diag.min() <= PIVOT_TOL * scale:
            raise SingularSystemError(
                f"interaction system singular at E={self.energy}, U={self.U}, L={self.L}"
                " (resonance)"
            )
        self.coefficients = first

    @property
    def size(self) -> int:
        return 2 * self.L + 1

    def matrix(self) -> np.ndarray:
        """Dense copy of the system matrix (for tests and diagnostics)."""
        return self._matrix.copy()

    def solve(self, rhs) -> np.ndarray:
        """Solution x of T x = rhs; accepts a vector, matrix of columns, or
        :class:`PlaneWaveVector`."""
        if isinstance(rhs, PlaneWaveVector):
            rhs = rhs.components
        rhs = np.asarray(rhs, dtype=complex)
        if rhs.shape[0] != self.size:
            raise ValueError(f"rhs length {rhs.shape[0]} != system size {self.size}")
        return scipy.linalg.lu_solve((self._lu, self._piv), rhs)

    def quadratic_form(self, out_sum: float, in_sum: float) -> complex:
        """c_K^dag T^{-1} c_P for plane waves of the given total momenta."""
        x = self.solve(plane_wave(in_sum, self.L))
        return complex(np.vdot(plane_wave(out_sum, self.L), x))


def build_kernel(energy: float, config: InteractionConfig) -> InteractionKernel:
    """Assemble (and factorize) the interaction system at total energy E."""
    return InteractionKernel(energy, config)


class _KernelCache:
    """Read-mostly cache keyed by (quantized E, U, L); insert-if-absent."""

    def __init__(self, maxsize: int = 4096):
        self._store: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        self._maxsize = maxsize

    @staticmethod
    def _key(energy: float, config: InteractionConfig):
        return (int(round(energy * 1e12)), config.U, config.L)

    def get(self, energy: float, config: InteractionConfig) -> InteractionKernel:
        key = self._key(energy, config)
        with self._lock:
            kern = self._store.get(key)
            if kern is not None:
                self._store.move_to_end(key)
                return kern
        kern = InteractionKernel(energy, config)
        with self._lock:
            self._store.setdefault(key, kern)
            self._store.move_to_end(key)
            while len(self._store) > self._maxsize:
                self._store.popitem(last=False)
        return kern

    def clear(self):
        with self._lock:
            self._store.clear()


_cache = _KernelCache()


def cached_kernel(energy: float, config: InteractionConfig) -> InteractionKernel:
    """Shared kernel cache; E is quantized to 1e-12 for the key."""
    return _cache.get(energy, config)


def clear_kernel_cache():
    _cache.clear()


def circulant_eigenvalues(energy: float, config: InteractionConfig) -> np.ndarray:
    """Closed-form large-N circulant eigenvalues, index l = -L..L.

    lambda_l = 2 pi - 2 pi U / sqrt(E^2 - 16 cos^2(pi l / N)) with the square
    root taking a positive imaginary part on negative radicand.  For U > 0
    the evanescent modes therefore acquire a positive imaginary part.  Used
    only as a cross-check of the exact Toeplitz solve.
    """
    energy = float(energy)
    if not math.isfinite(energy) or abs(energy) >= 4.0:
        from .errors import OutOfBandError

        raise OutOfBandError(f"|E| must be < 4, got {energy}")
    n_sites = config.n_sites
    l = np.arange(-config.L, config.L + 1)
    radicand = energy * energy - 16.0 * np.cos(np.pi * l / n_sites) ** 2
    root = np.where(radicand >= 0.0, np.sqrt(np.abs(radicand)), 0.0) + 1j * np.where(
        radicand < 0.0, np.sqrt(np.abs(radicand)), 0.0
    )
    return TWO_PI - TWO_PI * config.U / root


def circulant_quadratic_form(
    energy: float, config: InteractionConfig, out_sum: float, in_sum: float
) -> complex:
    """c_K^dag F^dag diag(lambda)^{-1} F c_P with the closed-form eigenvalues.

    Large-L approximation of :meth:`InteractionKernel.quadratic_form`.
    """
    L = config.L
    n_sites = config.n_sites
    l = np.arange(-L, L + 1)
    fmat = np.exp(-2j * np.pi * np.outer(l, l) / n_sites) / math.sqrt(n_sites)
    lam = circulant_eigenvalues(energy, config)
    x = fmat.conj().T @ ((fmat @ plane_wave(in_sum, L)) / lam)
    return complex(np.vdot(plane_wave(out_sum, L), x))
