"""HRTF datasets, order-weighted Tikhonov SH fitting, and a rigid-sphere
surrogate head for desk-scale testing.

The surrogate replaces a measured/BEM pipeline: ear-drum pressures are the
classical scattering solution on an acoustically rigid sphere, which gives
analytic ground truth for every rendering oracle in the package.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .special import num_coeffs, orders_degrees, sh_matrix, sph_hankel2, sph_hankel2_deriv
from .utils import cart2sph, sph2cart

SQRT_4PI = math.sqrt(4.0 * math.pi)


@dataclass(frozen=True)
class HrtfSet:
    """Grid-sampled HRTFs: left/right responses on a sphere of radius R_s.

    responses has shape (2, n_freqs, n_directions) with ear index 0 = left,
    1 = right; directions are (zenith, azimuth) pairs in radians.
    """

    radius: float
    directions: np.ndarray
    freqs: np.ndarray
    responses: np.ndarray
    sample_rate: float

    def __post_init__(self):
        directions = np.asarray(self.directions, dtype=float)
        freqs = np.asarray(self.freqs, dtype=float)
        responses = np.asarray(self.responses, dtype=complex)
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if directions.ndim != 2 or directions.shape[1] != 2:
            raise ValueError("directions must be (J, 2) zenith/azimuth pairs")
        if np.any(np.diff(freqs) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        if responses.shape != (2, freqs.size, directions.shape[0]):
            raise ValueError("responses must have shape (2, n_freqs, n_directions)")
        for a in (directions, freqs, responses):
            a.flags.writeable = False
        object.__setattr__(self, "directions", directions)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "responses", responses)

    @property
    def n_directions(self):
        return self.directions.shape[0]


@dataclass(frozen=True)
class HrtfShSpectrum:
    """Per-frequency SH coefficients of an HrtfSet, shape (2, F, (N+1)^2)."""

    order: int
    radius: float
    freqs: np.ndarray
    coeffs: np.ndarray
    sample_rate: float

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != (2, freqs.size, num_coeffs(self.order)):
            raise ValueError("coeffs must have shape (2, n_freqs, (order+1)^2)")
        freqs.flags.writeable = False
        coeffs.flags.writeable = False
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "coeffs", coeffs)

    def at_index(self, freq_index):
        """(2, (N+1)^2) coefficient slice for one frequency bin."""
        return self.coeffs[:, freq_index, :]

    def interpolated(self, freq):
        """Linear per-coefficient interpolation along the frequency axis."""
        f = np.asarray(self.freqs)
        if freq <= f[0]:
            return self.coeffs[:, 0, :]
        if freq >= f[-1]:
            return self.coeffs[:, -1, :]
        i = int(np.searchsorted(f, freq)) - 1
        w = (freq - f[i]) / (f[i + 1] - f[i])
        return (1.0 - w) * self.coeffs[:, i, :] + w * self.coeffs[:, i + 1, :]

    def evaluate(self, theta, phi):
        """Resynthesize responses at directions from the fitted spectrum."""
        y = np.conj(sh_matrix(self.order, theta, phi))
        return np.einsum("efq,jq->efj", self.coeffs, y)


def fit_sh(hrtf_set: HrtfSet, order, gamma="auto") -> HrtfShSpectrum:
    """Least-squares SH spectrum with order-weighted Tikhonov regularization.

    Solves psi = (Y^H Y + gamma Q)^{-1} Y^H h per frequency and ear, where
    Y holds conjugated spherical harmonics at the grid directions and Q is
    diagonal with entries 1 + n(n + 1) for order n. The normal matrix is
    frequency-independent and factorized once.

    gamma = "auto" uses 1e-6 * trace(Y^H Y) / (N+1)^2, which keeps behavior
    invariant under grid-size changes. gamma = 0 requests a plain
    least-squares fit and raises if the normal matrix is singular.
    """
    ncoef = num_coeffs(order)
    if hrtf_set.n_directions < ncoef:
        raise ValueError(
            f"need at least {ncoef} directions to fit order {order}, "
            f"got {hrtf_set.n_directions}"
        )
    theta = hrtf_set.directions[:, 0]
    phi = hrtf_set.directions[:, 1]
    y = np.conj(sh_matrix(order, theta, phi))
    normal = y.conj().T @ y
    if gamma == "auto":
        gamma = 1e-6 * np.real(np.trace(normal)) / ncoef
    n_all, _ = orders_degrees(order)
    a = normal + gamma * np.diag(1.0 + n_all * (n_all + 1.0))
    try:
        factor = cho_factor(a)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "singular normal matrix in SH fit; the grid does not support "
            f"order {order} at gamma={gamma}"
        ) from exc
    rhs = np.einsum("jq,efj->efq", y.conj(), hrtf_set.responses)
    coeffs = cho_solve(factor, rhs.reshape(-1, ncoef).T).T.reshape(rhs.shape)
    return HrtfShSpectrum(
        order=order,
        radius=hrtf_set.radius,
        freqs=hrtf_set.freqs,
        coeffs=coeffs,
        sample_rate=hrtf_set.sample_rate,
    )


# ---------------------------------------------------------------------------
# Rigid-sphere surrogate head
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticHead:
    """Rigid-sphere head model with ear points on the sphere surface."""

    radius: float = 0.0875
    ear_azimuths: tuple = (math.pi / 2.0, -math.pi / 2.0)  # (left, right)
    ear_zenith: float = math.pi / 2.0

    def ear_direction(self, ear):
        return sph2cart(1.0, self.ear_zenith, self.ear_azimuths[ear])


def rigid_sphere_pressure(radius, cos_gamma, source_distance, k, tol=1e-12, cap_order=400):
    """Total pressure on a rigid sphere's surface due to a unit point source.

    ``cos_gamma`` is the cosine of the angle between the surface point and
    the source direction (scalar or array); ``source_distance`` is the source
    range from the sphere center (must exceed ``radius``). Evaluates

        p = -1 / (4 pi k a^2) sum_n (2n+1) h_n(k d) / h_n'(k a) P_n(cos g)

    adaptively; raises RuntimeError if the series has not converged by
    ``cap_order`` terms.
    """
    if source_distance <= radius:
        raise ValueError("source must lie outside the sphere")
    cos_gamma = np.asarray(cos_gamma, dtype=float)
    ka = k * radius
    kd = k * source_distance

    n_start = int(math.ceil(math.e * ka / 2.0)) + 16
    p_prev = np.ones_like(cos_gamma)  # P_0
    p_curr = cos_gamma.copy()  # P_1
    total = np.zeros(cos_gamma.shape, dtype=complex)
    n = 0
    ref = 0.0
    while True:
        if n == 0:
            pn = p_prev
        elif n == 1:
            pn = p_curr
        else:
            p_next = ((2 * n - 1) * cos_gamma * p_curr - (n - 1) * p_prev) / n
            p_prev, p_curr = p_curr, p_next
            pn = p_curr
        coef = (2 * n + 1) * sph_hankel2(n, kd) / sph_hankel2_deriv(n, ka)
        term = coef * pn
        total += term
        ref = max(ref, float(np.max(np.abs(total))))
        if n >= n_start and float(np.max(np.abs(term))) < tol * max(ref, 1e-300):
            break
        n += 1
        if n > cap_order:
            raise RuntimeError(
                f"rigid-sphere scattering series did not converge within {cap_order} terms"
            )
    return -total / (4.0 * math.pi * k * radius**2)


def ear_pressure(head: SyntheticHead, source_pos, k):
    """Left/right total pressures at the head's ear points for a point source."""
    source_pos = np.asarray(source_pos, dtype=float)
    d = np.linalg.norm(source_pos)
    src_dir = source_pos / d
    cos_g = np.array([head.ear_direction(ear) @ src_dir for ear in (0, 1)])
    return rigid_sphere_pressure(head.radius, cos_g, d, k)


def rigid_sphere_hrtf_spectrum(head: SyntheticHead, freqs, measure_radius,
                               order, sample_rate=48000.0, sound_speed=346.2) -> HrtfShSpectrum:
    """Analytic SH spectrum of the rigid-sphere head's HRTFs.

    For a source on the measurement sphere of radius R_s the surface-pressure
    series separates, giving exactly

        H_n^m(k) = -h_n(k R_s) conj(Y_n^m(ear direction))
                   / (k a^2 h_n'(k a))

    This closed form is both the fast path for rendering oracles and the
    reference the grid-fit route is tested against.
    """
    freqs = np.asarray(freqs, dtype=float)
    n_all, _ = orders_degrees(order)
    ears = np.stack([head.ear_direction(0), head.ear_direction(1)])
    _, theta, phi = cart2sph(ears)
    y_ear = sh_matrix(order, theta, phi)  # (2, ncoef), unconjugated ear factor
    coeffs = np.empty((2, freqs.size, num_coeffs(order)), dtype=complex)
    for fi, f in enumerate(freqs):
        k = 2.0 * math.pi * f / sound_speed
        radial = sph_hankel2(np.arange(order + 1), k * measure_radius)
        gain = -radial[n_all] / (k * head.radius**2 * sph_hankel2_deriv(n_all, k * head.radius))
        coeffs[:, fi, :] = gain[None, :] * y_ear
    return HrtfShSpectrum(
        order=order,
        radius=measure_radius,
        freqs=freqs,
        coeffs=coeffs,
        sample_rate=sample_rate,
    )


def synth_rigid_sphere_hrtf(head: SyntheticHead, grid, freqs, measure_radius,
                            sample_rate=48000.0, sound_speed=346.2) -> HrtfSet:
    """Synthesize a grid-sampled HrtfSet from the rigid-sphere head.

    ``grid`` is an array of (zenith, azimuth) source directions on the
    measurement sphere. Left/right responses are symmetric whenever the ear
    azimuths are mirror images.
    """
    grid = np.asarray(grid, dtype=float)
    if head.radius >= measure_radius:
        raise ValueError("head radius must be smaller than the measurement radius")
    freqs = np.asarray(freqs, dtype=float)
    src_dirs = sph2cart(np.ones(grid.shape[0]), grid[:, 0], grid[:, 1])
    responses = np.empty((2, freqs.size, grid.shape[0]), dtype=complex)
    for ear in (0, 1):
        cos_g = src_dirs @ head.ear_direction(ear)
        for fi, f in enumerate(freqs):
            k = 2.0 * math.pi * f / sound_speed
            responses[ear, fi] = rigid_sphere_pressure(head.radius, cos_g, measure_radius, k)
    return HrtfSet(
        radius=measure_radius,
        directions=grid,
        freqs=freqs,
        responses=responses,
        sample_rate=sample_rate,
    )


# ---------------------------------------------------------------------------
# Direction grids
# ---------------------------------------------------------------------------

def equiangular_grid(zenith_step_deg=5.0, zenith_range=(10.0, 160.0), azimuth_step_deg=5.0):
    """Equiangular measurement grid, default matching a 2232-point layout."""
    zeniths = np.deg2rad(np.arange(zenith_range[0], zenith_range[1] + 1e-9, zenith_step_deg))
    azimuths = np.deg2rad(np.arange(0.0, 360.0, azimuth_step_deg))
    th, ph = np.meshgrid(zeniths, azimuths, indexing="ij")
    return np.column_stack([th.ravel(), ph.ravel()])


def fibonacci_grid(n_points):
    """Quasi-uniform spiral grid of n_points (zenith, azimuth) pairs."""
    i = np.arange(n_points)
    golden = (1.0 + 5.0**0.5) / 2.0
    theta = np.arccos(1.0 - 2.0 * (i + 0.5) / n_points)
    phi = (2.0 * np.pi * i / golden) % (2.0 * np.pi)
    return np.column_stack([theta, phi])


# ---------------------------------------------------------------------------
# CSV import (small hand-made datasets)
# ---------------------------------------------------------------------------

def read_hrtf_csv(path, radius, sample_rate=48000.0) -> HrtfSet:
    """Read a direction-table CSV with per-frequency magnitude/phase columns.

    Expected header: theta,phi followed by four columns per frequency f:
    L_mag_<f>,L_phase_<f>,R_mag_<f>,R_phase_<f> (phase in radians, any
    frequency order; rows are directions).
    """
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    header, data = rows[0], rows[1:]
    if header[:2] != ["theta", "phi"]:
        raise ValueError("HRTF CSV must start with theta,phi columns")
    freqs = []
    for name in header[2::4]:
        if not name.startswith("L_mag_"):
            raise ValueError(f"unexpected column {name}; expected L_mag_<freq>")
        freqs.append(float(name[len("L_mag_"):]))
    freqs = np.array(freqs)
    directions = np.array([[float(r[0]), float(r[1])] for r in data])
    responses = np.empty((2, freqs.size, len(data)), dtype=complex)
    for j, r in enumerate(data):
        vals = np.array([float(x) for x in r[2:]]).reshape(freqs.size, 4)
        responses[0, :, j] = vals[:, 0] * np.exp(1j * vals[:, 1])
        responses[1, :, j] = vals[:, 2] * np.exp(1j * vals[:, 3])
    order = np.argsort(freqs)
    return HrtfSet(
        radius=radius,
        directions=directions,
        freqs=freqs[order],
        responses=responses[:, order, :],
        sample_rate=sample_rate,
    )
