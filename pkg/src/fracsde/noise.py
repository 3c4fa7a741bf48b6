"""Fractional Brownian motion sampling and Hurst-coupled path pairs.

Three generators are provided:

* ``fbm_davies_harte``: exact stationary sampling of fBm increments by
  circulant embedding of the increment covariance, O(m log m).
* ``fbm_cholesky``: direct factorization of the path covariance, O(m^3);
  slow but independent of the circulant route, used as a cross-check oracle.
* ``mvn_coupled_pair``: two fBm paths with different Hurst parameters driven
  by the SAME white noise through the truncated, Riemann-discretized
  moving-average kernel (t-s)_+^{H-1/2} - (-s)_+^{H-1/2}, each scaled by
  ``mvn_constant``.  The coupling makes the pathwise difference between the
  two paths meaningful, which neither exact sampler can offer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

from .seeding import derive_seed
from .serialize import write_csv

__all__ = [
    "FbmPath",
    "CoupledPair",
    "CirculantEmbeddingError",
    "fbm_covariance",
    "fgn_autocovariance",
    "circulant_eigenvalues",
    "fbm_davies_harte",
    "davies_harte_increments",
    "fbm_cholesky",
    "cholesky_paths",
    "mvn_constant",
    "cross_factor",
    "cross_increment_variance",
    "MvnCoupledSampler",
    "mvn_coupled_pair",
]

CHOLESKY_MAX_STEPS = 2048


class CirculantEmbeddingError(RuntimeError):
    """Raised when the circulant embedding is not nonnegative definite."""


def _check_hurst(hurst: float, name: str = "hurst") -> float:
    hurst = float(hurst)
    if not 0.0 < hurst < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {hurst}")
    return hurst


def _check_grid(m: int, dt: float) -> tuple[int, float]:
    if m != int(m) or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    dt = float(dt)
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    return int(m), dt


@dataclass(frozen=True)
class FbmPath:
    """A sampled path on the uniform grid 0, dt, ..., m*dt with values[0] = 0."""

    hurst: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        _check_hurst(self.hurst)
        if not self.dt > 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size < 2:
            raise ValueError("values must be a 1-d array with at least 2 entries")
        if values[0] != 0.0:
            raise ValueError(f"values[0] must be 0, got {values[0]}")
        if not np.all(np.isfinite(values)):
            raise ValueError("values contain non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.size)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def to_csv(self, path) -> None:
        write_csv(path, ["t", "value"], zip(self.times, self.values))


@dataclass(frozen=True)
class CoupledPair:
    """Two fBm paths on the same grid built from shared white noise."""

    path_a: FbmPath
    path_b: FbmPath
    seed: int

    def __post_init__(self):
        if self.path_a.dt != self.path_b.dt:
            raise ValueError("coupled paths must share the same dt")
        if self.path_a.values.size != self.path_b.values.size:
            raise ValueError("coupled paths must share the same grid length")


def fbm_covariance(hurst: float, t, s):
    """Cov(B_t, B_s) = 0.5 (t^{2H} + s^{2H} - |t-s|^{2H}) for t, s >= 0."""
    hurst = _check_hurst(hurst)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0.0) or np.any(s < 0.0):
        raise ValueError("covariance is defined for nonnegative times")
    h2 = 2.0 * hurst
    out = 0.5 * (t**h2 + s**h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def fgn_autocovariance(hurst: float, m: int, dt: float = 1.0) -> np.ndarray:
    """Autocovariance gamma(k), k = 0..m, of spacing-dt fBm increments."""
    hurst = _check_hurst(hurst)
    m, dt = _check_grid(m, dt)
    k = np.arange(m + 1, dtype=float)
    h2 = 2.0 * hurst
    return 0.5 * dt**h2 * ((k + 1.0) ** h2 - 2.0 * k**h2 + np.abs(k - 1.0) ** h2)


def circulant_eigenvalues(autocov: np.ndarray) -> np.ndarray:
    """Eigenvalues of the circulant embedding of a stationary covariance.

    ``autocov`` holds gamma(0..m).  The embedding row is
    [gamma(0), ..., gamma(m), gamma(m-1), ..., gamma(1)] of length 2m.
    Eigenvalues within roundoff of zero (1e-12 of the largest) are truncated
    at zero; materially negative ones raise CirculantEmbeddingError.
    """
    autocov = np.asarray(autocov, dtype=float)
    if autocov.ndim != 1 or autocov.size < 2:
        raise ValueError("autocov must be a 1-d array gamma(0..m) with m >= 1")
    m = autocov.size - 1
    row = np.concatenate([autocov[:m], autocov[m:], autocov[1:m][::-1]])
    eig = np.fft.fft(row).real
    tol = 1e-12 * np.abs(eig).max()
    if eig.min() < -tol:
        raise CirculantEmbeddingError(
            f"circulant embedding has negative eigenvalue {eig.min():.3e}; "
            "increase the number of steps m or use the Cholesky oracle"
        )
    return np.maximum(eig, 0.0)


def davies_harte_increments(
    hurst: float, m: int, dt: float, seed: int, n_paths: int = 1
) -> np.ndarray:
    """(n_paths, m) exact fBm increments via circulant embedding."""
    hurst = _check_hurst(hurst)
    m, dt = _check_grid(m, dt)
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    eig = circulant_eigenvalues(fgn_autocovariance(hurst, m, 1.0))
    rng = np.random.default_rng(seed)
    n2 = 2 * m
    coeff = np.zeros((n_paths, n2), dtype=complex)
    coeff[:, 0] = math.sqrt(eig[0] / n2) * rng.standard_normal(n_paths)
    coeff[:, m] = math.sqrt(eig[m] / n2) * rng.standard_normal(n_paths)
    if m > 1:
        re = rng.standard_normal((n_paths, m - 1))
        im = rng.standard_normal((n_paths, m - 1))
        coeff[:, 1:m] = np.sqrt(eig[1:m] / (2.0 * n2)) * (re + 1j * im)
        coeff[:, m + 1 :] = np.conj(coeff[:, 1:m][:, ::-1])
    fgn = np.fft.fft(coeff, axis=1).real[:, :m]
    return fgn * dt**hurst


def fbm_davies_harte(hurst: float, m: int, dt: float, seed: int) -> FbmPath:
    """Exact fBm path on 0..m*dt via the circulant embedding method."""
    fgn = davies_harte_increments(hurst, m, dt, seed, n_paths=1)[0]
    values = np.concatenate([[0.0], np.cumsum(fgn)])
    return FbmPath(hurst=hurst, dt=dt, values=values)


def covariance_zscores(values: np.ndarray, hurst: float, dt: float) -> np.ndarray:
    """Entrywise z-scores of an empirical path covariance against fbm_covariance.

    ``values`` has one replica per row with column 0 identically zero; the
    comparison runs over grid points 1..m.  Standard errors use the Gaussian
    fourth-moment identity Var(B_t B_s) = C_tt C_ss + C_ts^2.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] < 2:
        raise ValueError("values must be (n_replicas, m+1) with m >= 1")
    n = values.shape[0]
    if n < 2:
        raise ValueError("need at least 2 replicas for an empirical covariance")
    obs = values[:, 1:]
    emp = obs.T @ obs / n
    t = dt * np.arange(1, values.shape[1])
    exact = fbm_covariance(hurst, t[:, None], t[None, :])
    var = np.diag(exact)
    se = np.sqrt((np.outer(var, var) + exact**2) / n)
    return (emp - exact) / se


def cholesky_paths(
    hurst: float, m: int, dt: float, seed: int, n_paths: int = 1
) -> np.ndarray:
    """(n_paths, m+1) exact fBm paths via Cholesky of the path covariance."""
    hurst = _check_hurst(hurst)
    m, dt = _check_grid(m, dt)
    if m > CHOLESKY_MAX_STEPS:
        raise ValueError(
            f"m={m} exceeds the Cholesky cost guard ({CHOLESKY_MAX_STEPS}); "
            "use fbm_davies_harte for long paths"
        )
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    t = dt * np.arange(1, m + 1)
    cov = fbm_covariance(hurst, t[:, None], t[None, :])
    try:
        factor = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"fBm covariance is not positive definite: {exc}") from exc
    z = np.random.default_rng(seed).standard_normal((n_paths, m))
    paths = np.zeros((n_paths, m + 1))
    paths[:, 1:] = z @ factor.T
    return paths


def fbm_cholesky(hurst: float, m: int, dt: float, seed: int) -> FbmPath:
    """Exact fBm path via Cholesky factorization (oracle, m <= 2048)."""
    values = cholesky_paths(hurst, m, dt, seed, n_paths=1)[0]
    return FbmPath(hurst=hurst, dt=dt, values=values)


def mvn_constant(hurst: float) -> float:
    """Normalization C_H of the moving-average kernel so Var B_1 = 1.

    C_H = sqrt(sin(pi H) Gamma(1 + 2H)) / Gamma(H + 1/2); equals 1 at H = 1/2.
    """
    hurst = _check_hurst(hurst)
    return math.sqrt(math.sin(math.pi * hurst) * math.gamma(1.0 + 2.0 * hurst)) / math.gamma(
        hurst + 0.5
    )


def _check_hurst_upper(hurst: float, name: str) -> float:
    hurst = float(hurst)
    if not 0.5 < hurst < 1.0:
        raise ValueError(f"{name} must lie in (1/2, 1), got {hurst}")
    return hurst


def cross_factor(hurst_a: float, hurst_b: float) -> float:
    """Correlation factor f(H1, H2) of unit increments of a coupled pair.

    f = -Gamma(-H1-H2) C_{H1} C_{H2} (Gamma(1/2+H1)/Gamma(1/2-H2)
        + Gamma(1/2+H2)/Gamma(1/2-H1)); symmetric, in (0, 1], and f(H, H) = 1.
    """
    h1 = _check_hurst_upper(hurst_a, "hurst_a")
    h2 = _check_hurst_upper(hurst_b, "hurst_b")
    if h1 == h2:
        return 1.0
    value = (
        -math.gamma(-h1 - h2)
        * mvn_constant(h1)
        * mvn_constant(h2)
        * (
            math.gamma(0.5 + h1) / math.gamma(0.5 - h2)
            + math.gamma(0.5 + h2) / math.gamma(0.5 - h1)
        )
    )
    return value


def cross_increment_variance(hurst_a: float, hurst_b: float, v: float) -> float:
    """E[(increment of B^{H1} - increment of B^{H2})^2] over a window of length v.

    Equals v^{2H1} + v^{2H2} - 2 v^{H1+H2} f(H1, H2); nonnegative, zero iff
    H1 = H2, and of order |H1 - H2|^2 log^2 v for close Hurst parameters.
    """
    v = float(v)
    if not v > 0.0:
        raise ValueError(f"window length v must be positive, got {v}")
    h1 = _check_hurst_upper(hurst_a, "hurst_a")
    h2 = _check_hurst_upper(hurst_b, "hurst_b")
    f = cross_factor(h1, h2)
    return v ** (2.0 * h1) + v ** (2.0 * h2) - 2.0 * v ** (h1 + h2) * f


@dataclass(frozen=True)
class _MvnKernel:
    """Discretized moving-average kernel for one Hurst exponent."""

    hurst: float
    fine_spectrum: np.ndarray
    far_weights: np.ndarray
    scale: float


class MvnCoupledSampler:
    """Coupled fBm pair sampler via the discretized moving-average kernel.

    The white noise lives on a grid that does not depend on the Hurst
    parameters, so two kernels applied to the same draw give a genuinely
    coupled pair, and hurst_a == hurst_b reproduces identical paths bitwise.

    The grid has two blocks: uniform cells of width dt/refinement covering
    [-A, m*dt] with A = truncation_factor * m * dt, and geometrically grown
    cells (ratio far_ratio) extending the kernel tail to far_factor * m * dt.
    Kernels are evaluated at cell midpoints.  The far block costs only
    O(log far_factor) extra cells but removes the tail-truncation bias that
    would otherwise dominate the small cross-increment variance.
    """

    def __init__(
        self,
        hurst_a: float,
        hurst_b: float,
        m: int,
        dt: float,
        truncation_factor: float = 50.0,
        refinement: int = 8,
        far_factor: float = 1e5,
        far_ratio: float = 1.05,
    ):
        self.hurst_a = _check_hurst_upper(hurst_a, "hurst_a")
        self.hurst_b = _check_hurst_upper(hurst_b, "hurst_b")
        self.m, self.dt = _check_grid(m, dt)
        if truncation_factor < 1.0:
            raise ValueError(
                f"truncation_factor must be >= 1, got {truncation_factor}"
            )
        if refinement != int(refinement) or refinement < 1:
            raise ValueError(f"refinement must be a positive integer, got {refinement}")
        if far_factor < truncation_factor:
            raise ValueError(
                f"far_factor ({far_factor}) must be >= truncation_factor "
                f"({truncation_factor})"
            )
        if not far_ratio > 1.0:
            raise ValueError(f"far_ratio must exceed 1, got {far_ratio}")
        self.truncation_factor = float(truncation_factor)
        self.refinement = int(refinement)
        self.far_factor = float(far_factor)
        self.far_ratio = float(far_ratio)

        horizon = self.m * self.dt
        self._h = self.dt / self.refinement
        self._lead = int(math.ceil(self.truncation_factor * horizon / self._h))
        self._n_fine = self._lead + self.m * self.refinement

        # far-block cell edges as positive distances to the left of -A
        edges = [self._lead * self._h]
        limit = self.far_factor * horizon
        while edges[-1] < limit:
            edges.append(edges[-1] * self.far_ratio)
        edges = np.asarray(edges)
        self._far_widths = np.diff(edges)
        self._far_mid = 0.5 * (edges[:-1] + edges[1:])

        self._nfft = _fft.next_fast_len(2 * self._n_fine - 1, real=True)
        self._out_idx = np.arange(self.m + 1) * self.refinement + self._lead - 1
        self._kernel_a = self._kernel_for(self.hurst_a)
        self._kernel_b = (
            self._kernel_a
            if self.hurst_b == self.hurst_a
            else self._kernel_for(self.hurst_b)
        )

    @property
    def n_cells(self) -> int:
        return self._n_fine + self._far_widths.size

    def _kernel_for(self, hurst: float) -> _MvnKernel:
        hurst = _check_hurst_upper(hurst, "hurst")
        a = hurst - 0.5
        lag = self._h * (np.arange(1, self._n_fine + 1) - 0.5)
        fine_spectrum = _fft.rfft(lag**a, self._nfft)
        t = self.dt * np.arange(self.m + 1)
        far = (t[:, None] + self._far_mid[None, :]) ** a - self._far_mid[None, :] ** a
        return _MvnKernel(
            hurst=hurst,
            fine_spectrum=fine_spectrum,
            far_weights=far,
            scale=mvn_constant(hurst),
        )

    def _noise_chunk(self, seed: int, start: int, count: int) -> tuple[np.ndarray, np.ndarray]:
        n_far = self._far_widths.size
        fine = np.empty((count, self._n_fine))
        far = np.empty((count, n_far))
        for i in range(count):
            rng = np.random.default_rng(derive_seed(seed, "mvn-noise", start + i))
            fine[i] = rng.standard_normal(self._n_fine)
            far[i] = rng.standard_normal(n_far)
        return fine * math.sqrt(self._h), far * np.sqrt(self._far_widths)

    def _noise_spectrum(self, seed: int) -> tuple[np.ndarray, np.ndarray]:
        """rfft of one replica's fine noise plus its raw far-block noise."""
        fine, far = self._noise_chunk(seed, 0, 1)
        return _fft.rfft(fine, self._nfft, axis=1), far

    def _apply_kernel(self, noise: tuple[np.ndarray, np.ndarray], kernel: _MvnKernel | None = None) -> np.ndarray:
        """(count, m+1) path values of the given kernel on a noise spectrum."""
        if kernel is None:
            kernel = self._kernel_a
        spec, far = noise
        conv = _fft.irfft(spec * kernel.fine_spectrum, self._nfft, axis=1)[:, self._out_idx]
        vals = conv - conv[:, :1]
        vals += far @ kernel.far_weights.T
        vals *= kernel.scale
        vals[:, 0] = 0.0
        return vals

    def sample_batch(
        self, seed: int, n_paths: int, chunk: int | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Two (n_paths, m+1) arrays of coupled path values.

        Row i draws its noise from the stream (seed, "mvn-noise", i)
        regardless of chunking, so any chunk size reproduces the same rows up
        to floating-point rounding (the FFT backend may group rows
        differently, which moves the last bit).
        """
        if n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {n_paths}")
        if chunk is None:
            chunk = max(1, min(n_paths, int(3.0e7 / self._nfft)))
        out_a = np.empty((n_paths, self.m + 1))
        out_b = np.empty((n_paths, self.m + 1))
        same = self._kernel_b is self._kernel_a
        for start in range(0, n_paths, chunk):
            count = min(chunk, n_paths - start)
            fine, far = self._noise_chunk(seed, start, count)
            noise = (_fft.rfft(fine, self._nfft, axis=1), far)
            vals_a = self._apply_kernel(noise, self._kernel_a)
            out_a[start : start + count] = vals_a
            out_b[start : start + count] = vals_a if same else self._apply_kernel(noise, self._kernel_b)
        return out_a, out_b

    def sample(self, seed: int) -> CoupledPair:
        values_a, values_b = self.sample_batch(seed, n_paths=1)
        return CoupledPair(
            path_a=FbmPath(hurst=self.hurst_a, dt=self.dt, values=values_a[0]),
            path_b=FbmPath(hurst=self.hurst_b, dt=self.dt, values=values_b[0]),
            seed=int(seed),
        )


def mvn_coupled_pair(
    hurst_a: float,
    hurst_b: float,
    m: int,
    dt: float,
    seed: int,
    truncation_factor: float = 50.0,
    refinement: int = 8,
    far_factor: float = 1e5,
    far_ratio: float = 1.05,
) -> CoupledPair:
    """One coupled pair (B^{H1}, B^{H2}) from shared white noise."""
    sampler = MvnCoupledSampler(
        hurst_a,
        hurst_b,
        m,
        dt,
        truncation_factor=truncation_factor,
        refinement=refinement,
        far_factor=far_factor,
        far_ratio=far_ratio,
    )
    return sampler.sample(seed)
