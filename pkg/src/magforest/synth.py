"""Synthetic survey flights with known ground truth.

A generated flight carries the same column vocabulary as the real survey
data (scalar magnetometers ``mag_k_uc``/``mag_k_c``, fluxgates, INS,
avionics, current and voltage channels) and adds exact truth columns: the
crustal anomaly along the path (``anomaly_nt``) and the aircraft position in
local metres (``utm_x``, ``utm_y``, ``utm_z``).

Every scalar magnetometer reading is assembled as::

    core(x, y) + diurnal(t) + anomaly(x, y) + A(flux_b) @ beta_k
        + sum_j coupling_kj * device_j(t) + white noise

where ``A`` is the Tolles-Lawson design matrix of the recorded fluxgate B
series and ``beta_k`` the magnetometer's true coefficients.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np
from scipy import signal

from .dataset import FlightFrame, write_flight
from .tolles_lawson import TERM_NAMES, TLCoefficients, compensate, fit_tl, tl_design_matrix

GRAVITY = 9.80665

# Default positioning feature set: compensated magnetometers plus the two
# pressure channels.
POSITION_FEATURES = ("mag_1_c", "mag_2_c", "mag_3_c", "mag_4_c", "mag_5_c", "static_p", "total_p")
EARTH_RADIUS = 6_371_000.0

# Independent random streams, one per part of the construction.
_STREAMS = {
    "map": 0, "terrain": 1, "attitude": 2, "devices": 3, "noise": 4,
    "beta": 5, "ins": 6, "diurnal": 7, "weather": 8,
}


def _rng(seed: int, stream: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(_STREAMS[stream],)))


@dataclass(frozen=True)
class MapSpec:
    extent_m: float = 30_000.0
    correlation_length_m: float = 3_000.0
    amplitude_nt: float = 100.0
    n_waves: int = 200


@dataclass(frozen=True)
class TrajectorySpec:
    speed_mps: float = 60.0
    n_lines: int = 2
    line_length_m: float = 3_000.0
    line_spacing_m: float = 800.0
    altitude_m: float = 400.0
    terrain_amplitude_m: float = 30.0
    terrain_length_m: float = 4_000.0
    maneuver_deg: float = 4.0
    maneuver_period_s: tuple[float, float] = (3.0, 9.0)
    roll_smoothing_s: float = 2.0


@dataclass(frozen=True)
class DeviceSpec:
    name: str
    profile: str = "ar1"          # ar1, tones or spiky
    level: float = 10.0           # channel baseline, A or V
    scale: float = 1.0            # channel swing, A or V
    coupling_nt: float = 60.0     # rms contribution to a cabin magnetometer


DEFAULT_DEVICES = (
    DeviceSpec("cur_com_1", "spiky", 2.0, 0.5, 40.0),
    DeviceSpec("cur_ac_hi", "ar1", 15.0, 2.0, 120.0),
    DeviceSpec("cur_ac_lo", "tones", 8.0, 1.5, 150.0),
    DeviceSpec("cur_tank", "ar1", 3.0, 0.4, 60.0),
    DeviceSpec("cur_flap", "spiky", 0.5, 0.2, 30.0),
    DeviceSpec("cur_strb", "tones", 1.2, 0.3, 80.0),
    DeviceSpec("cur_srvo_o", "ar1", 4.0, 0.6, 90.0),
    DeviceSpec("vol_srvo", "tones", 28.0, 0.5, 50.0),
    DeviceSpec("vol_bat_1", "ar1", 24.0, 0.3, 40.0),
)


@dataclass(frozen=True)
class SynthConfig:
    """Everything needed to regenerate a flight bit-for-bit."""

    seed: int = 1002
    flight_id: str = "1002"
    duration_s: float = 1_800.0
    sample_period_s: float = 0.1
    map: MapSpec = MapSpec()
    trajectory: TrajectorySpec = TrajectorySpec()
    core_field_nt: float = 50_000.0
    core_gradient_nt_per_km: tuple[float, float] = (0.6, -0.4)
    inclination_deg: float = 70.0
    declination_deg: float = -12.0
    diurnal_amplitude_nt: float = 0.3
    devices: tuple[DeviceSpec, ...] = DEFAULT_DEVICES
    interference_scale: float = 1.0
    tail_interference_scale: float = 0.001
    permanent_nt: float = 300.0
    induced_scale: float = 2e-3
    eddy_scale_s: float = 2e-3
    tail_beta_scale: float = 0.05
    mag_noise_nt: float = 0.05
    fluxgate_noise_nt: float = 0.5
    calibration_ridge: float = 0.0
    wind_mps: tuple[float, float] = (6.0, -3.0)
    latitude_deg: float = 45.3
    weather_drift_hpa: float = 0.03
    wander_drift_rad: float = 1e-8

    @property
    def n_samples(self) -> int:
        return int(round(self.duration_s / self.sample_period_s))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "SynthConfig":
        data = dict(data)
        if "map" in data:
            data["map"] = MapSpec(**data["map"])
        if "trajectory" in data:
            traj = dict(data["trajectory"])
            if "maneuver_period_s" in traj:
                traj["maneuver_period_s"] = tuple(traj["maneuver_period_s"])
            data["trajectory"] = TrajectorySpec(**traj)
        if "devices" in data:
            data["devices"] = tuple(DeviceSpec(**d) for d in data["devices"])
        for key in ("core_gradient_nt_per_km", "wind_mps"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def quiet(self) -> "SynthConfig":
        """Same flight with every interference and noise source switched off."""
        return replace(self, interference_scale=0.0, tail_interference_scale=0.0,
                       permanent_nt=0.0, induced_scale=0.0, eddy_scale_s=0.0,
                       mag_noise_nt=0.0, fluxgate_noise_nt=0.0)


class AnomalyMap:
    """Smooth Gaussian random field built from a fixed set of random-phase cosines.

    With wavevectors drawn from N(0, 1/L^2) per axis the field has covariance
    ``amplitude^2 * exp(-r^2 / (2 L^2))`` over realisations.
    """

    def __init__(self, spec: MapSpec, seed: int):
        if spec.correlation_length_m <= 0 or spec.extent_m <= 0:
            raise ValueError("map extent and correlation length must be positive")
        if spec.n_waves < 1:
            raise ValueError("need at least one wave")
        self.spec = spec
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.wavevectors = rng.normal(0.0, 1.0 / spec.correlation_length_m, size=(spec.n_waves, 2))
        self.phases = rng.uniform(0.0, 2 * np.pi, size=spec.n_waves)
        self.weight = spec.amplitude_nt * math.sqrt(2.0 / spec.n_waves)

    def __call__(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        arg = np.multiply.outer(x, self.wavevectors[:, 0]) + np.multiply.outer(y, self.wavevectors[:, 1])
        return self.weight * np.cos(arg + self.phases).sum(axis=-1)


def gen_anomaly_map(spec: MapSpec, seed: int) -> AnomalyMap:
    return AnomalyMap(spec, seed)


# --- trajectory -------------------------------------------------------------

def _loop_segments(spec: TrajectorySpec) -> list[tuple]:
    """Closed lawnmower loop: north/south lines joined by half turns plus a return leg.

    Segments are ``("line", x0, y0, heading, length)`` or
    ``("arc", cx, cy, radius, start_angle, sweep)`` with heading and angles in
    radians measured from the east axis, counter-clockwise.
    """
    n, L, d = spec.n_lines, spec.line_length_m, spec.line_spacing_m
    if n < 2 or n % 2:
        raise ValueError("n_lines must be even and at least 2")
    r = d / 2.0
    north, south = np.pi / 2, -np.pi / 2
    segs = []
    for i in range(n):
        x = i * d
        if i % 2 == 0:
            segs.append(("line", x, 0.0, north, L))
            if i < n - 1:
                segs.append(("arc", x + r, L, r, np.pi, -np.pi))
        else:
            segs.append(("line", x, L, south, L))
            if i < n - 1:
                segs.append(("arc", x + r, 0.0, r, np.pi, np.pi))
    x_end = (n - 1) * d
    segs.append(("arc", x_end - r, 0.0, r, 0.0, -np.pi / 2))
    segs.append(("line", x_end - r, -r, np.pi, x_end - 2 * r))
    segs.append(("arc", r, 0.0, r, -np.pi / 2, -np.pi / 2))
    return segs


def _segment_length(seg) -> float:
    return seg[4] if seg[0] == "line" else abs(seg[5]) * seg[3]


def trace_loop(spec: TrajectorySpec, s) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Position, heading and signed curvature at arc lengths ``s`` around the loop."""
    segs = _loop_segments(spec)
    lengths = np.array([_segment_length(g) for g in segs])
    edges = np.concatenate([[0.0], np.cumsum(lengths)])
    s = np.mod(np.asarray(s, dtype=np.float64), edges[-1])
    which = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(segs) - 1)
    x = np.empty_like(s)
    y = np.empty_like(s)
    heading = np.empty_like(s)
    curvature = np.zeros_like(s)
    for k, seg in enumerate(segs):
        m = which == k
        if not m.any():
            continue
        u = s[m] - edges[k]
        if seg[0] == "line":
            _, x0, y0, h, _ = seg
            x[m] = x0 + u * np.cos(h)
            y[m] = y0 + u * np.sin(h)
            heading[m] = h
        else:
            _, cx, cy, rad, a0, sweep = seg
            turn = np.sign(sweep)
            a = a0 + turn * u / rad
            x[m] = cx + rad * np.cos(a)
            y[m] = cy + rad * np.sin(a)
            heading[m] = a + turn * np.pi / 2
            curvature[m] = turn / rad
    return x, y, np.unwrap(heading), curvature


def _rotation(roll, pitch, yaw) -> np.ndarray:
    """Body-to-local rotation matrices, ``Rz(yaw) @ Ry(pitch) @ Rx(roll)``."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    R = np.empty(roll.shape + (3, 3))
    R[..., 0, 0] = cy * cp
    R[..., 0, 1] = cy * sp * sr - sy * cr
    R[..., 0, 2] = cy * sp * cr + sy * sr
    R[..., 1, 0] = sy * cp
    R[..., 1, 1] = sy * sp * sr + cy * cr
    R[..., 1, 2] = sy * sp * cr - cy * sr
    R[..., 2, 0] = -sp
    R[..., 2, 1] = cp * sr
    R[..., 2, 2] = cp * cr
    return R


def _smooth(x: np.ndarray, width: float) -> np.ndarray:
    """Gaussian smoothing with a wrap-free edge (reflect padding)."""
    if width <= 0:
        return x
    half = int(4 * width) + 1
    k = np.exp(-0.5 * (np.arange(-half, half + 1) / width) ** 2)
    k /= k.sum()
    padded = np.pad(x, half, mode="reflect")
    return np.convolve(padded, k, mode="valid")


# --- signal pieces ------------------------------------------------------------

def _device_signal(dev: DeviceSpec, n: int, dt: float, rng: np.random.Generator) -> np.ndarray:
    """Zero-mean, unit-rms device waveform with its own dynamics."""
    if dev.profile == "ar1":
        phi = math.exp(-dt / rng.uniform(5.0, 30.0))
        z = signal.lfilter([1.0], [1.0, -phi], rng.normal(size=n))
        tones = np.zeros(n)
    elif dev.profile == "tones":
        t = np.arange(n) * dt
        tones = sum(
            rng.uniform(0.5, 1.0) * np.sin(2 * np.pi * rng.uniform(0.02, 1.5) * t + rng.uniform(0, 2 * np.pi))
            for _ in range(3)
        )
        phi = math.exp(-dt / 10.0)
        z = 0.3 * signal.lfilter([1.0], [1.0, -phi], rng.normal(size=n)) * math.sqrt(1 - phi * phi)
    elif dev.profile == "spiky":
        z = np.zeros(n)
        n_events = max(1, int(n * dt / 60.0))
        starts = rng.integers(0, n, size=n_events)
        for s0 in starts:
            z[s0:s0 + rng.integers(5, 60)] += rng.uniform(3.0, 8.0)
        tones = 0.05 * rng.normal(size=n)
    else:
        raise ValueError(f"unknown device profile {dev.profile!r}")
    w = z + tones
    w = w - w.mean()
    rms = w.std()
    return w / rms if rms > 0 else w


def _random_beta(rng: np.random.Generator, perm: float, induced: float, eddy: float) -> TLCoefficients:
    """Random coefficients with a trace-free induced part.

    The isotropic induced component scales the Earth's own field and cannot
    be told apart from it, so the generator leaves it at zero.
    """
    p = rng.normal(0.0, perm, size=3)
    ind = rng.normal(0.0, induced, size=6)
    diag = [0, 3, 5]
    ind[diag] -= ind[diag].mean()
    e = rng.normal(0.0, eddy, size=9)
    return TLCoefficients(p, ind, e)


@dataclass
class SynthFlight:
    frame: FlightFrame
    beta: dict[str, TLCoefficients]
    config: SynthConfig
    anomaly_map: AnomalyMap = field(repr=False)

    def truth(self) -> dict:
        return {
            "flight_id": self.config.flight_id,
            "seed": self.config.seed,
            "map_seed": self.anomaly_map.seed,
            "config": self.config.to_dict(),
            "beta": {k: v.to_dict() for k, v in self.beta.items()},
        }

    def write(self, directory: str | Path) -> tuple[Path, Path]:
        """Write ``flight_<id>.csv`` and the ``flight_<id>.truth.json`` sidecar."""
        directory = Path(directory)
        csv_path = write_flight(self.frame, directory / f"flight_{self.config.flight_id}.csv")
        truth_path = directory / f"flight_{self.config.flight_id}.truth.json"
        truth_path.write_text(json.dumps(self.truth(), indent=2, sort_keys=True) + "\n")
        return csv_path, truth_path


def map_seed(seed: int) -> int:
    return int(np.random.SeedSequence(int(seed), spawn_key=(_STREAMS["map"],)).generate_state(1)[0])


def gen_flight(config: SynthConfig = SynthConfig(), calibrate: bool = True) -> SynthFlight:
    """Generate one flight; the output depends only on ``config``.

    With ``calibrate`` the compensated ``mag_k_c`` columns are produced from
    coefficients fitted on a companion calibration flight.
    """
    dt = config.sample_period_s
    n = config.n_samples
    if dt <= 0:
        raise ValueError("sample period must be positive")
    if n < 10:
        raise ValueError(f"duration gives {n} samples; need at least 10")
    traj = config.trajectory
    t = np.arange(n) * dt

    # Ground track and attitude.
    x, y, heading, curvature = trace_loop(traj, traj.speed_mps * t)
    terrain = AnomalyMap(MapSpec(config.map.extent_m, traj.terrain_length_m,
                                 traj.terrain_amplitude_m), int(_rng(config.seed, "terrain").integers(2**32)))
    z = traj.altitude_m + terrain(x, y)
    climb = np.gradient(z, dt)
    turn_rate = curvature * traj.speed_mps

    rng_att = _rng(config.seed, "attitude")
    amp = np.radians(traj.maneuver_deg)
    lo, hi = traj.maneuver_period_s

    def wiggle():
        return amp * np.sin(2 * np.pi * t / rng_att.uniform(lo, hi) + rng_att.uniform(0, 2 * np.pi))

    bank = np.arctan(traj.speed_mps * turn_rate / GRAVITY)
    roll = _smooth(bank, traj.roll_smoothing_s / dt) + wiggle()
    pitch = np.arctan2(climb, traj.speed_mps) + wiggle()
    yaw = heading + wiggle()
    R = _rotation(roll, -pitch, yaw)

    # Earth's field: scalar magnitude along a fixed direction.
    amap = gen_anomaly_map(config.map, map_seed(config.seed))
    anomaly = amap(x, y)
    gx, gy = config.core_gradient_nt_per_km
    core = config.core_field_nt + (gx * x + gy * y) / 1000.0
    rng_d = _rng(config.seed, "diurnal")
    slow = _smooth(rng_d.normal(size=n), 600.0 / dt)
    slow = slow / (slow.std() or 1.0)
    diurnal = config.diurnal_amplitude_nt * (
        np.sin(2 * np.pi * t / 86_400.0 + rng_d.uniform(0, 2 * np.pi)) + 0.5 * slow
    )
    total = core + diurnal + anomaly
    inc, dec = np.radians(config.inclination_deg), np.radians(config.declination_deg)
    direction = np.array([np.cos(inc) * np.sin(dec), np.cos(inc) * np.cos(dec), -np.sin(inc)])
    earth_local = total[:, None] * direction

    # Interference devices.
    rng_dev = _rng(config.seed, "devices")
    waves = np.column_stack([_device_signal(d, n, dt, rng_dev) for d in config.devices]) if config.devices else np.zeros((n, 0))
    couplings = rng_dev.normal(size=(6, len(config.devices)))
    couplings /= np.linalg.norm(couplings, axis=1, keepdims=True) / math.sqrt(len(config.devices) or 1)
    strengths = np.array([d.coupling_nt for d in config.devices])

    rng_n = _rng(config.seed, "noise")
    body = np.einsum("nji,nj->ni", R, earth_local)
    flux_b = body + config.fluxgate_noise_nt * rng_n.normal(size=(n, 3))
    tilt = np.radians(rng_n.normal(0, 1.5, size=3))
    mount_c = _rotation(tilt[0:1], tilt[1:2], tilt[2:3])[0]
    flux_c = body @ mount_c + rng_n.normal(0, 20.0, size=3) + config.fluxgate_noise_nt * rng_n.normal(size=(n, 3))
    flux_c += 0.05 * config.interference_scale * (waves * strengths) @ rng_dev.normal(size=(len(config.devices), 3)) / max(1, len(config.devices))

    # Scalar magnetometers: 1 is the quiet tail stinger, 2-5 sit in the cabin.
    A = tl_design_matrix(flux_b, dt)
    rng_b = _rng(config.seed, "beta")
    columns: dict[str, np.ndarray] = {}
    beta: dict[str, TLCoefficients] = {}
    for k in range(1, 6):
        s = 1.0 if k > 1 else config.tail_beta_scale
        b = _random_beta(rng_b, s * config.permanent_nt, s * config.induced_scale, s * config.eddy_scale_s)
        level = config.interference_scale if k > 1 else config.tail_interference_scale
        interference = level * (waves * strengths) @ couplings[k]
        reading = total + A @ b.vector + interference + config.mag_noise_nt * rng_n.normal(size=n)
        columns[f"mag_{k}_uc"] = reading
        beta[f"mag_{k}_uc"] = b
    if calibrate:
        fitted = calibration_coefficients(config)
        for k in range(1, 6):
            columns[f"mag_{k}_c"] = compensate(columns[f"mag_{k}_uc"], flux_b, fitted[f"mag_{k}_uc"], dt)

    for i, axis in enumerate("xyz"):
        columns[f"flux_b_{axis}"] = flux_b[:, i]
    columns["flux_b_t"] = np.linalg.norm(flux_b, axis=1)
    for i, axis in enumerate("xyz"):
        columns[f"flux_c_{axis}"] = flux_c[:, i]
    columns["flux_c_t"] = np.linalg.norm(flux_c, axis=1)
    columns["diurnal"] = diurnal + 0.05 * rng_n.normal(size=n)
    columns["igrf"] = core

    # INS channels; the wander angle follows longitude.
    rng_i = _rng(config.seed, "ins")
    v_east = np.gradient(x, dt)
    v_north = np.gradient(y, dt)
    lat0 = np.radians(config.latitude_deg)
    walk = np.cumsum(rng_i.normal(0, 1.0, size=(n, 4)), axis=0)
    columns["ins_vn"] = v_north + 0.02 * walk[:, 0] * dt
    columns["ins_vw"] = -v_east + 0.02 * walk[:, 1] * dt
    columns["ins_vu"] = climb + 0.01 * rng_i.normal(size=n)
    columns["ins_wander"] = -np.tan(lat0) * x / EARTH_RADIUS + config.wander_drift_rad * walk[:, 2]
    columns["ins_roll"] = np.degrees(roll) + 0.01 * rng_i.normal(size=n)
    columns["ins_pitch"] = np.degrees(pitch) + 0.01 * rng_i.normal(size=n)
    columns["ins_yaw"] = np.degrees(np.mod(yaw, 2 * np.pi)) + 0.01 * rng_i.normal(size=n)
    drift = 0.05 * np.cumsum(rng_i.normal(size=(n, 3)), axis=0) * math.sqrt(dt)
    columns["ins_lat"] = np.degrees(lat0 + (y + drift[:, 1]) / EARTH_RADIUS)
    columns["ins_lon"] = np.degrees((x + drift[:, 0]) / (EARTH_RADIUS * np.cos(lat0)))
    columns["ins_alt"] = z + drift[:, 2]

    # Avionics pressures from the standard atmosphere plus a slow weather drift.
    rng_w = _rng(config.seed, "weather")
    weather = _smooth(rng_w.normal(size=n), 300.0 / dt)
    p0 = 1013.25 + config.weather_drift_hpa * weather / (weather.std() or 1.0)
    static = p0 * (1.0 - 2.25577e-5 * z) ** 5.25588
    wx, wy = config.wind_mps
    airspeed = np.hypot(v_east - wx, v_north - wy)
    rho = 1.225 * (static / 1013.25)
    columns["static_p"] = static + 0.01 * rng_w.normal(size=n)
    columns["total_p"] = static + 0.5 * rho * airspeed**2 / 100.0 + 0.01 * rng_w.normal(size=n)
    columns["baro"] = z + 0.5 * rng_w.normal(size=n)

    for j, dev in enumerate(config.devices):
        columns[dev.name] = dev.level + dev.scale * waves[:, j] + 0.01 * dev.scale * rng_dev.normal(size=n)

    columns["anomaly_nt"] = anomaly
    columns["utm_x"] = x
    columns["utm_y"] = y
    columns["utm_z"] = z
    columns = {"tt": t, **columns}
    frame = FlightFrame(columns, dt, config.flight_id)
    return SynthFlight(frame, beta, config, amap)


def calibration_coefficients(config: SynthConfig) -> dict[str, TLCoefficients]:
    """Coefficients fitted on a quiet calibration flight of the same aircraft.

    The calibration flight shares the aircraft (coefficients) and the sensor
    noise levels of ``config`` but flies strong maneuvers in a constant field
    with all devices off, which is how survey compensation is normally set up.
    """
    cal_config = replace(tl_calibration_config(config),
                         mag_noise_nt=config.mag_noise_nt,
                         fluxgate_noise_nt=config.fluxgate_noise_nt)
    cal = gen_flight(cal_config, calibrate=False)
    flux = cal.frame.matrix(["flux_b_x", "flux_b_y", "flux_b_z"])
    return {
        name: fit_tl(cal.frame[name], flux, config.sample_period_s, ridge=config.calibration_ridge)
        for name in cal.beta
    }


def tl_calibration_config(base: SynthConfig | None = None, seed: int = 7,
                          duration_s: float = 300.0) -> SynthConfig:
    """Magnetically quiet calibration flight: constant Earth field, strong maneuvers,
    no interference and no sensor noise.

    Built from ``base`` when given, so the aircraft coefficients match it.
    """
    if base is None:
        base = SynthConfig(seed=seed)
    return replace(
        base,
        flight_id=f"{base.flight_id}_cal",
        duration_s=duration_s,
        map=replace(base.map, amplitude_nt=0.0),
        core_gradient_nt_per_km=(0.0, 0.0),
        diurnal_amplitude_nt=0.0,
        trajectory=replace(base.trajectory, maneuver_deg=10.0, terrain_amplitude_m=0.0),
        interference_scale=0.0,
        tail_interference_scale=0.0,
        mag_noise_nt=0.0,
        fluxgate_noise_nt=0.0,
    )


__all__ = [
    "POSITION_FEATURES", "AnomalyMap", "DeviceSpec", "MapSpec", "SynthConfig", "SynthFlight", "TERM_NAMES",
    "TrajectorySpec", "calibration_coefficients", "gen_anomaly_map", "gen_flight", "tl_calibration_config", "trace_loop",
]
