"""Spherical-array audio: framing, steered-response beamforming, and
projection of the steering grid onto the Mercator panorama."""
from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.special import spherical_jn, spherical_yn

try:
    from scipy.special import sph_harm_y as _sph_harm_y

    def _sph_harm(m, n, az, colat):
        return _sph_harm_y(n, m, colat, az)
except ImportError:  # scipy < 1.15
    from scipy.special import sph_harm as _sph_harm_legacy

    def _sph_harm(m, n, az, colat):
        return _sph_harm_legacy(m, n, az, colat)

from .core import AUDIO, DataError, FeatureMap
from .kernels import sample_wrap_bilinear

SAMPLE_RATE = 44100
FRAME_SAMPLES = 4410
SPEED_OF_SOUND = 343.0
DEFAULT_RADIUS = 0.1016  # 8-inch-diameter rigid sphere
DEFAULT_ORDER = 6
BAND_HZ = (300.0, 6500.0)
TIKHONOV_EPS = 1e-2
# Mercator is singular at the poles; elevations outside this range clamp.
ELEVATION_CLAMP = (np.pi / 12.0, 11.0 * np.pi / 12.0)


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

def _dirs_from_angles(az, el):
    az = np.asarray(az, dtype=np.float64)
    el = np.asarray(el, dtype=np.float64)
    return np.stack([np.sin(el) * np.cos(az),
                     np.sin(el) * np.sin(az),
                     np.cos(el)], axis=-1)


@dataclass
class MicArrayGeometry:
    """64 unit directions on a rigid sphere plus its radius in meters."""

    directions: np.ndarray
    radius: float = DEFAULT_RADIUS

    def __post_init__(self):
        self.directions = np.asarray(self.directions, dtype=np.float64)
        if self.directions.shape != (64, 3):
            raise DataError("geometry must contain exactly 64 microphones")
        norms = np.linalg.norm(self.directions, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-6):
            raise DataError("microphone directions must be unit vectors")
        if self.radius <= 0:
            raise DataError("sphere radius must be positive")

    @property
    def azimuths(self):
        return np.arctan2(self.directions[:, 1], self.directions[:, 0]) % (2 * np.pi)

    @property
    def elevations(self):
        return np.arccos(np.clip(self.directions[:, 2], -1.0, 1.0))

    @classmethod
    def fibonacci(cls, radius: float = DEFAULT_RADIUS) -> "MicArrayGeometry":
        """Deterministic near-uniform 64-point layout (Fibonacci spiral)."""
        k = np.arange(64)
        z = 1.0 - (2.0 * k + 1.0) / 64.0
        phi = np.pi * (3.0 - np.sqrt(5.0)) * k
        r = np.sqrt(1.0 - z * z)
        dirs = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
        return cls(dirs, radius)

    @classmethod
    def from_file(cls, path, radius: float = DEFAULT_RADIUS) -> "MicArrayGeometry":
        """Load 'azimuth elevation' pairs in radians, one per line, 64 lines."""
        rows = []
        for line in Path(path).read_text().splitlines():
            line = line.split("#")[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"bad geometry line: {line!r}")
            rows.append((float(parts[0]), float(parts[1])))
        if len(rows) != 64:
            raise DataError(f"geometry file must have 64 entries, got {len(rows)}")
        az = np.array([r[0] for r in rows])
        el = np.array([r[1] for r in rows])
        return cls(_dirs_from_angles(az, el), radius)

    @classmethod
    def default(cls) -> "MicArrayGeometry":
        with importlib.resources.as_file(
                importlib.resources.files("avsm.data") / "mic_geometry_64.txt") as p:
            return cls.from_file(p)

    def to_file(self, path):
        az, el = self.azimuths, self.elevations
        lines = [f"{a:.12f} {e:.12f}" for a, e in zip(az, el)]
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass
class SteeringGrid:
    """128 azimuths at 2*pi/128 and 64 elevation-band centers over (0, pi)."""

    n_az: int = 128
    n_el: int = 64

    @property
    def azimuths(self):
        return np.arange(self.n_az) * 2.0 * np.pi / self.n_az

    @property
    def elevations(self):
        return (np.arange(self.n_el) + 0.5) * np.pi / self.n_el

    def directions(self):
        az, el = np.meshgrid(self.azimuths, self.elevations, indexing="ij")
        return _dirs_from_angles(az.ravel(), el.ravel())


@dataclass
class AudioFrame:
    samples: np.ndarray  # (64, FRAME_SAMPLES) in [-1, 1]
    sample_rate: int = SAMPLE_RATE
    t: int = 0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 2 or self.samples.shape[0] != 64:
            raise DataError("audio frame must be 64 x N")


def frame_audio(stream: np.ndarray, t: int) -> AudioFrame:
    """Return non-overlapping frame t: samples [t*4410, (t+1)*4410)."""
    stream = np.asarray(stream)
    start = t * FRAME_SAMPLES
    stop = start + FRAME_SAMPLES
    if t < 0 or stop > stream.shape[1]:
        raise DataError("audio exhausted")
    return AudioFrame(stream[:, start:stop], t=t)


def n_frames(stream: np.ndarray) -> int:
    return stream.shape[1] // FRAME_SAMPLES


# ---------------------------------------------------------------------------
# spherical-harmonic machinery
# ---------------------------------------------------------------------------

def sh_matrix(order: int, az, colat) -> np.ndarray:
    """Complex spherical harmonics Y_n^m stacked (n=0..order, m=-n..n)."""
    az = np.asarray(az, dtype=np.float64).ravel()
    colat = np.asarray(colat, dtype=np.float64).ravel()
    cols = []
    for n in range(order + 1):
        for m in range(-n, n + 1):
            cols.append(_sph_harm(m, n, az, colat))
    return np.stack(cols, axis=-1)


def mode_strength(order: int, ka: np.ndarray, model: str = "rigid") -> np.ndarray:
    """Plane-wave mode coefficients b_n(ka) for an open or rigid sphere."""
    ka = np.atleast_1d(np.asarray(ka, dtype=np.float64))
    out = np.zeros((ka.size, order + 1), dtype=np.complex128)
    for n in range(order + 1):
        jn = spherical_jn(n, ka)
        if model == "open":
            bn = jn.astype(np.complex128)
        elif model == "rigid":
            jnp = spherical_jn(n, ka, derivative=True)
            hn = jn + 1j * spherical_yn(n, ka)
            hnp = jnp + 1j * spherical_yn(n, ka, derivative=True)
            bn = jn - (jnp / hnp) * hn
        else:
            raise ValueError(f"unknown sphere model {model!r}")
        out[:, n] = 4.0 * np.pi * (1j ** n) * bn
    return out


class Beamformer:
    """Steered-response power over the grid via spherical-harmonic
    plane-wave decomposition.

    All frequency-independent factors (the least-squares spherical-harmonic
    transform of the mic layout and the grid synthesis matrix) are
    precomputed; per frame only the windowed FFT and two matrix products run.
    """

    def __init__(self, geom: MicArrayGeometry, grid: SteeringGrid | None = None,
                 order: int = DEFAULT_ORDER, band_hz=BAND_HZ,
                 reg_eps: float = TIKHONOV_EPS, model: str = "rigid",
                 sample_rate: int = SAMPLE_RATE, frame_samples: int = FRAME_SAMPLES,
                 speed_of_sound: float = SPEED_OF_SOUND):
        self.geom = geom
        self.grid = grid or SteeringGrid()
        self.order = int(order)
        self.model = model
        self.sample_rate = sample_rate
        self.frame_samples = frame_samples

        d = geom.directions
        gram = d @ d.T
        np.fill_diagonal(gram, 0.0)
        if gram.max() > 1.0 - 1e-9:
            raise DataError("ill-conditioned array")

        Ymic = sh_matrix(self.order, geom.azimuths, geom.elevations)
        self._sht = np.linalg.pinv(Ymic)  # (ncoef, 64)

        az, el = np.meshgrid(self.grid.azimuths, self.grid.elevations, indexing="ij")
        self._ygrid = sh_matrix(self.order, az.ravel(), el.ravel())  # (naz*nel, ncoef)

        freqs = np.fft.rfftfreq(frame_samples, 1.0 / sample_rate)
        lo = int(np.rint(band_hz[0] * frame_samples / sample_rate))
        hi = int(np.rint(band_hz[1] * frame_samples / sample_rate))
        self.bin_slice = slice(lo, hi + 1)
        self.band_freqs = freqs[self.bin_slice]

        ka = 2.0 * np.pi * self.band_freqs / speed_of_sound * geom.radius
        b = mode_strength(self.order, ka, model)  # (nb, order+1)
        orders = np.concatenate([[n] * (2 * n + 1) for n in range(self.order + 1)])
        bfull = b[:, orders]
        lam = (reg_eps * np.abs(b).max(axis=1)) ** 2
        self._equalizer = (np.conj(bfull) / (np.abs(bfull) ** 2 + lam[:, None])).T
        self._window = np.hanning(frame_samples)

    def spectra(self, frame: AudioFrame) -> np.ndarray:
        x = frame.samples * self._window[None, :]
        return np.fft.rfft(x, axis=1)[:, self.bin_slice]

    def map(self, frame: AudioFrame) -> np.ndarray:
        """(n_az, n_el) steered power summed over the analysis band."""
        if frame.samples.shape[1] != self.frame_samples:
            raise DataError("unexpected audio frame length")
        X = self.spectra(frame)                       # (64, nb)
        coeffs = self._equalizer * (self._sht @ X)    # (ncoef, nb)
        steered = self._ygrid @ coeffs                # (ndirs, nb)
        power = (steered.real ** 2 + steered.imag ** 2).sum(axis=1)
        return power.reshape(self.grid.n_az, self.grid.n_el)


def beamform(frame: AudioFrame, geom: MicArrayGeometry,
             grid: SteeringGrid | None = None, **kwargs) -> np.ndarray:
    """One-shot steered-response map (constructs a Beamformer)."""
    return Beamformer(geom, grid, **kwargs).map(frame)


# ---------------------------------------------------------------------------
# Mercator panorama mapping
# ---------------------------------------------------------------------------

def _mercator_y(latitude: np.ndarray) -> np.ndarray:
    return np.log(np.tan(np.pi / 4.0 + latitude / 2.0))


def _y_max(clamp=ELEVATION_CLAMP) -> float:
    return float(_mercator_y(np.pi / 2.0 - clamp[0]))


def mercator_pixel(az, el, panorama_shape, clamp=ELEVATION_CLAMP):
    """Map (azimuth, elevation) to fractional (col, row) panorama coordinates.

    Azimuth maps linearly to columns; elevation maps through the Mercator
    ordinate with latitude = pi/2 - elevation, clamped away from the poles.
    Shared by the audio projection and the synthetic-scene ground truth so
    both land on identical pixels.
    """
    az = np.asarray(az, dtype=np.float64)
    el = np.clip(np.asarray(el, dtype=np.float64), clamp[0], clamp[1])
    h, w = panorama_shape
    ym = _y_max(clamp)
    col = (az % (2.0 * np.pi)) / (2.0 * np.pi) * w
    row = (ym - _mercator_y(np.pi / 2.0 - el)) / (2.0 * ym) * (h - 1)
    return col, row


def elevation_of_row(rows, panorama_shape, clamp=ELEVATION_CLAMP):
    h = panorama_shape[0]
    ym = _y_max(clamp)
    y = ym - np.asarray(rows, dtype=np.float64) / (h - 1) * 2.0 * ym
    lat = 2.0 * np.arctan(np.exp(y)) - np.pi / 2.0
    return np.pi / 2.0 - lat


def project_to_panorama(power_grid: np.ndarray, panorama_shape,
                        grid: SteeringGrid | None = None,
                        clamp=ELEVATION_CLAMP, t: int = 0) -> FeatureMap:
    """Resample the (n_az, n_el) steered-power grid onto the panorama.

    Each panorama pixel bilinearly samples the grid at its own azimuth
    (wrapping) and Mercator elevation (edge-clamped), so a uniform grid stays
    uniform and peaks land where mercator_pixel puts them.
    """
    h, w = int(panorama_shape[0]), int(panorama_shape[1])
    if h < 1 or w < 1:
        raise DataError("panorama dimensions must be positive")
    grid = grid or SteeringGrid()
    if power_grid.shape != (grid.n_az, grid.n_el):
        raise DataError("steered grid has unexpected shape")
    az = np.arange(w) / w * 2.0 * np.pi  # column c reads azimuth c/w * 2pi
    el = elevation_of_row(np.arange(h), (h, w), clamp)
    azq = np.broadcast_to(az[None, :] / (2.0 * np.pi / grid.n_az), (h, w))
    elq = np.broadcast_to((el[:, None] / (np.pi / grid.n_el)) - 0.5, (h, w))
    # transpose to (el, az) so the cyclic azimuth axis is the one that wraps
    pano = sample_wrap_bilinear(np.ascontiguousarray(power_grid.T), azq, elq)
    return FeatureMap(pano, AUDIO, scale=1, t=t)


# ---------------------------------------------------------------------------
# multichannel WAV I/O
# ---------------------------------------------------------------------------

def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a multichannel RIFF WAV (PCM 16/24-bit or float32) as a
    (channels, samples) float array in [-1, 1]."""
    try:
        rate, data = wavfile.read(path)
    except (ValueError, FileNotFoundError) as exc:
        raise DataError(f"cannot read WAV: {exc}") from exc
    if data.ndim == 1:
        data = data[:, None]
    if data.dtype == np.int16:
        out = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        out = data.astype(np.float64) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        out = data.astype(np.float64)
    elif data.dtype == np.uint8:
        out = (data.astype(np.float64) - 128.0) / 128.0
    else:
        raise DataError(f"unsupported WAV sample format {data.dtype}")
    return out.T.copy(), int(rate)


def write_wav(path, stream: np.ndarray, rate: int = SAMPLE_RATE):
    """Write a (channels, samples) float array as float32 WAV."""
    wavfile.write(path, rate, np.ascontiguousarray(stream.T, dtype=np.float32))
