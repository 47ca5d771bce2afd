"""Geometric single-path channel synthesis.

Each base-station/user link is reduced to one line-of-sight path with a
free-space power gain, a carrier phase, a propagation delay, and a pair
of departure angles in the station's local frame. The per-subcarrier
channel vector for an N-element uniform linear array is

    h[k] = sqrt(gain / K) * exp(j * (phase + (2*pi*k/K) * delay * bandwidth))
           * a(azimuth, elevation),   k = 1..K

with a(.,.) the unit-modulus array response. Blocked mmWave links are
removed outright (zero gain, zero channel); blocked sub-6GHz links keep
their geometry and lose a fixed number of dB instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import ConfigurationError, DataFormatError
from .scene import BaseStation, Scene, is_blocked

SPEED_OF_LIGHT = 299_792_458.0

# Floor applied to received power when converted to dB (blocked links
# have zero gain and would otherwise map to -inf).
POWER_FLOOR_DB = -200.0


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array along one axis of the BS local frame."""

    n_elements: int
    spacing_wavelengths: float = 0.5
    axis: tuple[float, float, float] = (1.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        if self.n_elements < 1:
            raise ConfigurationError("array needs at least one element")
        if self.spacing_wavelengths <= 0:
            raise ConfigurationError("element spacing must be positive")


@dataclass(frozen=True)
class BandConfig:
    """One carrier: OFDM layout, power levels, and the blockage rule.

    ``subcarrier_limit`` is the number of leading subcarriers actually
    synthesized out of ``n_subcarriers_total``. ``blocked_attenuation_db``
    selects the blockage model: ``None`` removes the path entirely
    (mmWave), a value keeps the path and attenuates its power gain by
    that many dB (sub-6GHz diffraction proxy).
    """

    name: str
    carrier_frequency: float
    bandwidth: float
    n_subcarriers_total: int = 1024
    sampling_factor: int = 1
    subcarrier_limit: int = 64
    tx_power: float = 1.0
    noise_variance: float = 1.0
    blocked_attenuation_db: float | None = None

    def __post_init__(self) -> None:
        if self.carrier_frequency <= 0 or self.bandwidth <= 0:
            raise ConfigurationError(f"band {self.name!r}: frequencies must be positive")
        if self.n_subcarriers_total < 1 or self.sampling_factor < 1:
            raise ConfigurationError(f"band {self.name!r}: bad OFDM layout")
        if not 1 <= self.subcarrier_limit <= self.n_subcarriers_total:
            raise ConfigurationError(
                f"band {self.name!r}: subcarrier_limit {self.subcarrier_limit} "
                f"outside 1..{self.n_subcarriers_total}"
            )
        if self.tx_power <= 0 or self.noise_variance <= 0:
            raise ConfigurationError(f"band {self.name!r}: powers must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency


@dataclass(frozen=True)
class PathParams:
    """Single-path parameters of one BS/user link."""

    gain: float            # linear power gain, >= 0
    phase: float           # carrier phase in [0, 2*pi)
    delay: float           # propagation delay, seconds
    azimuth: float         # radians in (-pi, pi], BS local frame
    elevation: float       # radians in [-pi/2, pi/2]
    blocked: bool

    def __post_init__(self) -> None:
        if self.gain < 0 or self.delay < 0:
            raise ValueError("path gain and delay must be non-negative")
        if not (-math.pi < self.azimuth <= math.pi):
            raise ValueError(f"azimuth {self.azimuth} outside (-pi, pi]")
        if not (-math.pi / 2 <= self.elevation <= math.pi / 2):
            raise ValueError(f"elevation {self.elevation} outside [-pi/2, pi/2]")


def array_response(geometry: ArrayGeometry, azimuth: float, elevation: float) -> np.ndarray:
    """Unit-modulus steering vector of the ULA for one ray direction.

    Element n carries phase 2*pi*spacing*n*cos(elevation)*sin(azimuth),
    n = 0..N-1, with spacing in wavelengths.
    """
    n = np.arange(geometry.n_elements)
    freq = geometry.spacing_wavelengths * math.cos(elevation) * math.sin(azimuth)
    return np.exp(2j * math.pi * freq * n)


def path_from_geometry(bs: BaseStation, user, band: BandConfig,
                       scene: Scene) -> PathParams:
    """Derive the link's single-path parameters from scene geometry.

    Free-space power gain (wavelength / 4*pi*d)^2, carrier phase
    -2*pi*d/wavelength wrapped to [0, 2*pi), delay d/c, and angles of the
    BS-to-user ray in the BS local frame. The blockage rule of ``band``
    is applied to the gain.
    """
    user = np.asarray(user, dtype=float)
    d = float(np.linalg.norm(user - np.asarray(bs.position)))
    if d == 0.0:
        raise ValueError(f"user coincides with {bs.tier} BS {bs.index}")
    lam = band.wavelength
    gain = (lam / (4.0 * math.pi * d)) ** 2
    blocked = is_blocked(scene, bs.position, user)
    if blocked:
        if band.blocked_attenuation_db is None:
            gain = 0.0
        else:
            gain *= 10.0 ** (-band.blocked_attenuation_db / 10.0)
    dx, dy, dz = bs.local_direction(user)
    azimuth = math.atan2(dx, dy)
    if azimuth <= -math.pi:
        azimuth = math.pi
    elevation = math.asin(max(-1.0, min(1.0, dz)))
    phase = (-2.0 * math.pi * d / lam) % (2.0 * math.pi)
    return PathParams(gain=gain, phase=phase, delay=d / SPEED_OF_LIGHT,
                      azimuth=azimuth, elevation=elevation, blocked=blocked)


def channel_vectors(path: PathParams, geometry: ArrayGeometry,
                    band: BandConfig) -> np.ndarray:
    """Per-subcarrier channel vectors, shape (subcarrier_limit, n_elements).

    Row i holds subcarrier k = i + 1. A removed path (zero gain) yields
    the all-zero array. Frequency selectivity enters only through the
    delay-bandwidth phase ramp; with zero delay all rows are equal.
    """
    k_count = band.subcarrier_limit
    n = geometry.n_elements
    if path.gain == 0.0:
        return np.zeros((k_count, n), dtype=np.complex128)
    k = np.arange(1, k_count + 1)
    phases = path.phase + (2.0 * math.pi * k / k_count) * path.delay * band.bandwidth
    scale = math.sqrt(path.gain / k_count)
    a = array_response(geometry, path.azimuth, path.elevation)
    return (scale * np.exp(1j * phases))[:, None] * a[None, :]


# ---------------------------------------------------------------------------
# bulk container + serialization
# ---------------------------------------------------------------------------

_CHANNELSET_MAGIC = "beamsel-channelset"
_CHANNELSET_VERSION = 1


@dataclass(frozen=True)
class ChannelSet:
    """Channel vectors for every (BS, user) link of one band.

    ``channels`` has shape (n_bs, n_users, subcarrier_limit, n_elements).
    """

    band: BandConfig
    geometry: ArrayGeometry
    scene_hash: str
    channels: np.ndarray

    def __post_init__(self) -> None:
        if self.channels.ndim != 4:
            raise ValueError("channels must be a 4-d array")
        if self.channels.shape[2] != self.band.subcarrier_limit:
            raise ValueError("subcarrier axis disagrees with band config")
        if self.channels.shape[3] != self.geometry.n_elements:
            raise ValueError("element axis disagrees with array geometry")


def save_channels(cs: ChannelSet, path) -> None:
    """Write a :class:`ChannelSet` as a JSON header line plus raw bytes."""
    header = {
        "format": _CHANNELSET_MAGIC,
        "version": _CHANNELSET_VERSION,
        "scene_hash": cs.scene_hash,
        "band": asdict(cs.band),
        "geometry": asdict(cs.geometry),
        "shape": list(cs.channels.shape),
        "dtype": "<c16",
    }
    data = np.ascontiguousarray(cs.channels, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(data.tobytes())


def load_channels(path) -> ChannelSet:
    """Read a file written by :func:`save_channels`."""
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    try:
        header = json.loads(header_line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: invalid channel set header") from exc
    if header.get("format") != _CHANNELSET_MAGIC:
        raise DataFormatError(f"{path}: not a channel set file")
    if header.get("version") != _CHANNELSET_VERSION:
        raise DataFormatError(f"{path}: unsupported version {header.get('version')}")
    shape = tuple(header["shape"])
    expected = int(np.prod(shape)) * 16
    if len(blob) != expected:
        raise DataFormatError(
            f"{path}: payload holds {len(blob)} bytes, expected {expected}"
        )
    band_d = dict(header["band"])
    geom_d = dict(header["geometry"])
    geom_d["axis"] = tuple(geom_d.get("axis", (1.0, 0.0, 0.0)))
    channels = np.frombuffer(blob, dtype="<c16").reshape(shape)
    return ChannelSet(band=BandConfig(**band_d),
                      geometry=ArrayGeometry(**geom_d),
                      scene_hash=header["scene_hash"],
                      channels=channels)
