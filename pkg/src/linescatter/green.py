"""Lattice pair Green's-function coefficients.

The central object is the retarded two-particle Green's function of the free
walk, projected onto the double-occupancy sites:

    G(E, n) = (1/2pi) lim_{eps->0+} int int_{[-pi,pi]^2}
              e^{-i(k1+k2) n} / (E - 2 cos k1 - 2 cos k2 + i eps) dk1 dk2.

Inside the band (|E| < 4, E != 0) it reduces to complete elliptic integrals
of modulus k = sqrt(16 / (16 - E^2)) > 1, analytically continued with the
convention that every square root of a negative real number takes a positive
imaginary part (the retarded +i eps prescription; confirmed against the
direct quadrature oracle below).

Two independent routes are provided:

* :func:`green_coefficient` / :func:`green_table` -- the elliptic closed form
  plus a numerically neutral three-term recurrence for large ``n``.
* :func:`green_quadrature` / :func:`green_quadrature_limit` -- brute-force
  2-D quadrature at finite broadening, Richardson-extrapolated to eps -> 0.
  This is the ground-truth oracle; it shares no code with the elliptic route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import (
    BandCenterError,
    DegenerateModulusError,
    NonFiniteError,
    OutOfBandError,
    QuadratureConvergenceError,
)

# |k^2 - 1| below this is refused: K(k) diverges logarithmically at the band
# center E = 0 and the closed form loses all accuracy there.
TOL_DEGENERATE = 1e-8

# The alternating Chebyshev-coefficient sum loses ~0.6 digits per order n
# (coefficients grow like 4^n while the result stays O(1)); it is accurate to
# ~1e-10 through this order, beyond which the neutral three-term recurrence
# in n takes over.
_CLOSED_FORM_MAX_N = 8


def _validate_energy(energy: float) -> float:
    energy = float(energy)
    if not math.isfinite(energy):
        raise NonFiniteError(f"energy must be finite, got {energy}")
    if abs(energy) >= 4.0:
        raise OutOfBandError(f"|E| must be < 4 inside the two-particle band, got E = {energy}")
    k2 = 16.0 / (16.0 - energy * energy)
    if abs(k2 - 1.0) <= TOL_DEGENERATE:
        raise BandCenterError(
            f"E = {energy} is too close to the band center; K(k) diverges as E -> 0"
        )
    return energy


@dataclass(frozen=True)
class EllipticModulus:
    """Elliptic parameter k^2 = 16 / (16 - E^2) attached to a band energy.

    For 0 < |E| < 4 the parameter is real and exceeds 1, which forces the
    complete elliptic integrals onto a complex branch.
    """

    k_squared: float
    energy: float

    @classmethod
    def from_energy(cls, energy: float) -> "EllipticModulus":
        energy = _validate_energy(energy)
        return cls(k_squared=16.0 / (16.0 - energy * energy), energy=energy)


def _agm_ke(m: float) -> tuple[float, float]:
    """Complete elliptic integrals K, E for real parameter m = k^2 in [0, 1).

    Arithmetic-geometric mean; converges to machine precision in <= 9 steps.
    """
    if m == 0.0:
        return math.pi / 2.0, math.pi / 2.0
    a, b = 1.0, math.sqrt(1.0 - m)
    c = math.sqrt(m)
    csum = 0.5 * c * c
    power = 0.5
    for _ in range(60):
        if abs(c) <= 2.0 * np.finfo(float).eps * a:
            break
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        power *= 2.0
        csum += power * c * c
    else:  # pragma: no cover - AGM converges quadratically
        raise NonFiniteError(f"AGM failed to converge for m = {m}")
    big_k = math.pi / (2.0 * a)
    big_e = big_k * (1.0 - csum)
    return big_k, big_e


def elliptic_ke(k_squared: float) -> tuple[complex, complex]:
    """K(k) and E(k) for parameter k^2, continued to k > 1.

    For 0 <= k^2 < 1 both values are real and positive.  For k^2 > 1 the
    integrals split at the turning point sin(p) = 1/k into a real piece and a
    piece over negative radicand; with the positive-imaginary-part root
    convention,

        K(k) = [K(1/k) - i K(k1')] / k,          k1' = sqrt(1 - 1/k^2),
        E(k) = k [E(1/k) - (1 - 1/k^2) K(1/k)]
             + i k [E(k1') - (1/k^2) K(k1')].

    Raises
    ------
    DegenerateModulusError
        If |k^2 - 1| <= 1e-8 (logarithmic divergence).
    """
    m = float(k_squared)
    if not math.isfinite(m) or m < 0.0:
        raise NonFiniteError(f"elliptic parameter must be finite and nonnegative, got {m}")
    if abs(m - 1.0) <= TOL_DEGENERATE:
        raise DegenerateModulusError(f"elliptic parameter {m} too close to 1")
    if m < 1.0:
        big_k, big_e = _agm_ke(m)
        return complex(big_k), complex(big_e)
    k = math.sqrt(m)
    m1 = 1.0 / m
    k1p2 = 1.0 - m1
    ka, ea = _agm_ke(m1)
    kb, eb = _agm_ke(k1p2)
    big_k = complex(ka, -kb) / k
    big_e = complex(k * (ea - k1p2 * ka), k * (eb - m1 * kb))
    if not (np.isfinite(big_k) and np.isfinite(big_e)):
        raise NonFiniteError(f"elliptic evaluation overflowed at k^2 = {m}")
    return big_k, big_e


@dataclass(frozen=True)
class EllipticMoments:
    """Moments C_n = int_0^{pi/2} cos^{2n} p (1 - k^2 sin^2 p)^{-1/2} dp.

    Evaluated on the positive-imaginary-root branch for k > 1.  C_0 = K(k) and
    C_1 = (E(k) - (1 - k^2) K(k)) / k^2; higher orders follow the three-term
    recurrence

        (2n-1) k^2 C_n = (2n-2)(2k^2-1) C_{n-1} + (2n-3)(1-k^2) C_{n-2}.

    The recurrence has characteristic roots 1 and (E/4)^2, so the forward
    direction is numerically neutral (the wanted solution is dominant).
    """

    modulus: EllipticModulus
    values: tuple[complex, ...]


def _wallis(nmax: int) -> tuple[complex, ...]:
    vals = [math.pi / 2.0]
    for n in range(1, nmax + 1):
        vals.append(vals[-1] * (2 * n - 1) / (2 * n))
    return tuple(complex(v) for v in vals)


def elliptic_cosine_moments(k_squared: float, nmax: int) -> tuple[complex, ...]:
    """C_0 .. C_nmax for the given elliptic parameter.

    ``k_squared == 0`` removes the root and reduces to the Wallis integrals
    pi/2 (2n-1)!!/(2n)!!.
    """
    if nmax < 0:
        raise ValueError("nmax must be nonnegative")
    m = float(k_squared)
    if m == 0.0:
        return _wallis(nmax)
    big_k, big_e = elliptic_ke(m)
    vals = [big_k]
    if nmax >= 1:
        vals.append((big_e - (1.0 - m) * big_k) / m)
    for n in range(2, nmax + 1):
        num = (2 * n - 2) * (2.0 * m - 1.0) * vals[n - 1] + (2 * n - 3) * (1.0 - m) * vals[n - 2]
        vals.append(num / ((2 * n - 1) * m))
    return tuple(vals[: nmax + 1])


def cn_sequence(modulus: EllipticModulus, nmax: int) -> EllipticMoments:
    """Moment sequence attached to a validated band-energy modulus."""
    return EllipticMoments(modulus=modulus, values=elliptic_cosine_moments(modulus.k_squared, nmax))


def _closed_form_coeffs(n: int) -> list[float]:
    # Chebyshev expansion of cos(2np): exact integer arithmetic before the
    # float conversion keeps the coefficients clean.
    out = []
    for m in range(n + 1):
        num = factorial(2 * n - m - 1)
        den = (4 ** m) * factorial(m) * factorial(2 * n - 2 * m)
        out.append(((-1) ** m) * (num / den))
    return out


def _sequence_nonneg(energy: float, nmax: int) -> np.ndarray:
    """G(E, n) for E > 0 and n = 0..nmax.

    Orders up to _CLOSED_FORM_MAX_N use the elliptic closed form; the tail is
    continued with the three-term recurrence

        (2n+1) G_{n+1} = 8 n ((E/4)^2 - 1/2) G_n - (2n-1) G_{n-1},

    whose characteristic roots are unimodular inside the band, so roundoff is
    not amplified.
    """
    modulus = EllipticModulus.from_energy(energy)
    k = math.sqrt(modulus.k_squared)
    n_closed = min(nmax, _CLOSED_FORM_MAX_N)
    moments = np.conj(np.asarray(elliptic_cosine_moments(modulus.k_squared, n_closed)))

    out = np.empty(nmax + 1, dtype=complex)
    out[0] = -1j * k * moments[0]
    for n in range(1, n_closed + 1):
        coeffs = _closed_form_coeffs(n)
        acc = 0.0 + 0.0j
        for m, c in enumerate(coeffs):
            acc += c * moments[n - m]
        out[n] = -1j * k * (4.0 ** n) * n * acc
    s = (energy / 4.0) ** 2
    for n in range(n_closed, nmax):
        out[n + 1] = (8.0 * n * (s - 0.5) * out[n] - (2 * n - 1) * out[n - 1]) / (2 * n + 1)
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"Green coefficient sequence overflowed at E = {energy}")
    return out


@dataclass(frozen=True)
class GreenTable:
    """Cached coefficients G(E, n) for one energy and |n| <= nmax.

    Values are stored once for n >= 0 and mirrored on lookup, so the evenness
    in n holds exactly.
    """

    energy: float
    _values: tuple[complex, ...]

    @property
    def nmax(self) -> int:
        return len(self._values) - 1

    def __getitem__(self, n: int) -> complex:
        return self._values[abs(int(n))]

    def coefficients(self) -> np.ndarray:
        """Array of G(E, n) for n = 0..nmax."""
        return np.asarray(self._values)


def green_table(energy: float, nmax: int) -> GreenTable:
    """All coefficients G(E, n) for |n| <= nmax from one moment evaluation."""
    energy = _validate_energy(energy)
    if nmax < 0:
        raise ValueError("nmax must be nonnegative")
    if energy >= 0.0:
        seq = _sequence_nonneg(energy, nmax)
    else:
        seq = -np.conj(_sequence_nonneg(-energy, nmax))
    return GreenTable(energy=energy, _values=tuple(seq))


def green_coefficient(energy: float, n: int) -> complex:
    """Single coefficient G(E, n).

    Negative ``n`` and negative ``E`` are resolved through the exact
    symmetries G(E, -n) = G(E, n) and G(-E, n) = -conj(G(E, n)).
    """
    return green_table(energy, abs(int(n)))[n]


# ---------------------------------------------------------------------------
# Quadrature oracle
# ---------------------------------------------------------------------------

def _quadrature_grid(energy: float, ns: np.ndarray, eps: float, m: int) -> np.ndarray:
    """Periodic-trapezoid value of the broadened integral on an m x m grid.

    Evaluated in row blocks so memory stays O(m) regardless of grid size.
    """
    k = -np.pi + 2.0 * np.pi * np.arange(m) / m
    cosk = 2.0 * np.cos(k)
    phase = np.exp(-1j * np.outer(ns, k))  # (n, m)
    acc = np.zeros(len(ns), dtype=complex)
    block = 256
    for i0 in range(0, m, block):
        rows = slice(i0, min(i0 + block, m))
        denom = (energy + 1j * eps) - cosk[rows][:, None] - cosk[None, :]
        recip = 1.0 / denom
        partial = recip @ phase.T  # (rows, n)
        acc += np.einsum("nr,rn->n", phase[:, rows], partial)
    return acc * (2.0 * np.pi / m) ** 2 / (2.0 * np.pi)


def green_quadrature(
    energy: float,
    n: int | np.ndarray,
    eps: float,
    rel_tol: float = 1e-9,
    max_grid: int = 32768,
) -> complex | np.ndarray:
    """Direct 2-D quadrature of the broadened integral at fixed eps > 0.

    The integrand is smooth and periodic, so the tensor trapezoid rule
    converges spectrally; the grid is doubled until two successive passes
    agree to ``rel_tol``.

    Raises
    ------
    QuadratureConvergenceError
        If the largest allowed grid still disagrees with its predecessor.
    """
    energy = float(energy)
    if not math.isfinite(energy) or abs(energy) >= 4.0:
        raise OutOfBandError(f"|E| must be < 4, got {energy}")
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    scalar = np.isscalar(n)
    ns = np.atleast_1d(np.asarray(n, dtype=int))
    # pole distance from the real grid scales with eps; start near the
    # resolution that makes the trapezoid tail negligible
    m = int(2 ** math.ceil(math.log2(max(256, 16.0 / eps))))
    prev = None
    while m <= max_grid:
        cur = _quadrature_grid(energy, ns, eps, m)
        if prev is not None:
            scale = max(1.0, float(np.max(np.abs(cur))))
            if float(np.max(np.abs(cur - prev))) < rel_tol * scale:
                return complex(cur[0]) if scalar else cur
        prev = cur
        m *= 2
    raise QuadratureConvergenceError(
        f"grid refinement did not converge at E={energy}, eps={eps} (max grid {max_grid})"
    )


def broadening_ladder(energy: float, rungs: int = 7) -> tuple[float, ...]:
    """Halving eps schedule anchored below the band-edge distance.

    The eps-expansion of the broadened integral has convergence radius of
    order 4 - |E|, so near a band edge the ladder must start lower to keep
    the polynomial extrapolation inside it.
    """
    anchor = min(0.2, (4.0 - abs(energy)) / 2.0)
    return tuple(anchor * 0.5 ** k for k in range(rungs))


def green_quadrature_limit(
    energy: float,
    n: int | np.ndarray,
    eps_ladder: tuple[float, ...] | None = None,
    stop_tol: float = 1e-7,
    rel_tol: float = 1e-9,
    max_grid: int = 32768,
) -> complex | np.ndarray:
    """Broadening limit of :func:`green_quadrature` by Richardson extrapolation.

    Polynomial (Neville) extrapolation in eps over a halving ladder; stops
    early once consecutive extrapolants differ by less than ``stop_tol``
    relative to the result's magnitude.  If the ladder runs out first, the
    head is still accepted when the geometric trend of the tableau deltas
    certifies the remaining error at an order of magnitude below failure.
    """
    scalar = np.isscalar(n)
    ns = np.atleast_1d(np.asarray(n, dtype=int))
    if eps_ladder is None:
        eps_ladder = broadening_ladder(energy)
    xs: list[float] = []
    rows: list[list[np.ndarray]] = []  # Neville tableau, rows[i][j]
    deltas: list[float] = []
    last_extrap = None
    for eps in eps_ladder:
        xs.append(float(eps))
        vals = green_quadrature(energy, ns, eps, rel_tol=rel_tol, max_grid=max_grid)
        rows.append([np.asarray(vals)])
        # extend each previous row with the new point
        for j in range(1, len(xs)):
            i = len(xs) - 1 - j
            num = (0.0 - xs[i + j]) * rows[i][j - 1] + xs[i] * rows[i + 1][j - 1]
            rows[i].append(num / (xs[i] - xs[i + j]))
        extrap = rows[0][-1]
        if last_extrap is not None:
            scale = max(1.0, float(np.max(np.abs(extrap))))
            delta = float(np.max(np.abs(extrap - last_extrap)))
            deltas.append(delta)
            if delta < stop_tol * scale:
                return complex(extrap[0]) if scalar else extrap
        last_extrap = extrap
    if last_extrap is None:  # pragma: no cover
        raise QuadratureConvergenceError("empty eps ladder")
    scale = max(1.0, float(np.max(np.abs(last_extrap))))
    if len(deltas) >= 2 and deltas[-2] > 0.0:
        projected = deltas[-1] * (deltas[-1] / deltas[-2])
        if projected < 10.0 * stop_tol * scale:
            return complex(last_extrap[0]) if scalar else last_extrap
    raise QuadratureConvergenceError(
        f"eps extrapolation did not settle below {stop_tol} at E={energy}"
    )
