"""Direct time-domain simulation of the relaxing McKean system.

    tau u_tt + u_t = u_xx + H(u - a) - u - w,     w_t = b u - d w

Central differences in x, an explicit three-level scheme for the
``tau u_tt + u_t`` part (forward Euler when ``tau = 0``), and trapezoidal
kinetics for ``w``. Homogeneous Dirichlet boundaries; the domain is sized so
the localized wave never feels them.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainTooSmall, WaveLost
from .poly import ModelParams
from .profile import WaveProfile

log = logging.getLogger(__name__)

SAFETY = 0.9
BOUNDARY_TOL = 1e-8
SHAPE_ERR_UNSTABLE = 0.25
AMPLITUDE_BAND = (0.5, 2.0)
BLOWUP_FACTOR = 10.0


@dataclass(frozen=True)
class SimConfig:
    L: float
    nx: int
    T: float
    dt: Optional[float] = None
    perturb_eps: float = 0.0
    heaviside_mode: str = "sharp"
    width: float = 1e-2
    front_x0: Optional[float] = None

    def __post_init__(self):
        if self.heaviside_mode not in ("sharp", "smoothed"):
            raise ValueError(f"unknown heaviside_mode {self.heaviside_mode!r}")
        if self.L <= 0 or self.nx < 5 or self.T <= 0:
            raise ValueError("need L > 0, nx >= 5, T > 0")

    @property
    def dx(self) -> float:
        return 2 * self.L / (self.nx - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.nx)

    def max_dt(self, tau: float) -> float:
        if tau > 0:
            return SAFETY * self.dx * math.sqrt(tau)
        return SAFETY * self.dx ** 2 / 2

    def time_step(self, tau: float) -> float:
        limit = self.max_dt(tau)
        if self.dt is None:
            n = math.ceil(self.T / limit)
            return self.T / n
        if self.dt > limit * (1 + 1e-12):
            raise ValueError(f"dt={self.dt} violates the stability limit {limit:.3e}")
        return self.dt

    @classmethod
    def for_profile(cls, profile: WaveProfile, T: Optional[float] = None, nx: int = 8192, **kw) -> "SimConfig":
        """Domain that holds the wave (and its tail) for the whole run."""
        c = profile.params.c
        T = 20.0 / c if T is None else T
        tail = 20.0 * profile.decay_length()
        ahead = 20.0 / profile.alphas.r3.real
        L = max(0.5 * (profile.z1 + tail + c * T + ahead), _required_L(profile, T))
        return cls(L=L, nx=nx, T=T, front_x0=L - profile.z1 - tail, **kw)


@dataclass
class SimState:
    t: float
    u: np.ndarray
    u_prev: np.ndarray
    w: np.ndarray
    dt: float
    blown_up: bool = False

    @property
    def ut(self) -> np.ndarray:
        return (self.u - self.u_prev) / self.dt


@dataclass
class SimRun:
    times: list = field(default_factory=list)
    fronts: list = field(default_factory=list)
    shape_err: list = field(default_factory=list)
    amplitude: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    unstable: bool = False
    reason: str = ""
    speed_est: float = float("nan")
    final: Optional[SimState] = None

    def summary(self) -> dict:
        return {
            "speed_est": self.speed_est,
            "unstable": self.unstable,
            "reason": self.reason,
            "times": list(self.times),
            "shape_err": list(self.shape_err),
            "amplitude_ratio": list(self.amplitude),
        }


def _required_L(profile: WaveProfile, T: float) -> float:
    al = profile.alphas
    ell = max(1.0 / abs(min(al.r1.real, al.r2.real, key=abs)), 1.0 / al.r3.real)
    return 10.0 * ell + profile.params.c * T


def init_from_profile(profile: WaveProfile, config: SimConfig) -> SimState:
    """Sample the wave on the grid, front (``u = a`` crossing) at ``front_x0``.

    ``u_prev`` is the exact wave one step back in time, consistent with
    ``u_t = c u_c'``. ``perturb_eps`` scales the initial amplitude.
    """
    if config.L < _required_L(profile, config.T):
        raise DomainTooSmall(f"L={config.L:.4g} < {_required_L(profile, config.T):.4g}")
    c = profile.params.c
    dt = config.time_step(profile.params.tau)
    x0 = 0.0 if config.front_x0 is None else config.front_x0
    x = config.x
    u, _, w = profile.evaluate(x - x0)
    u_prev = profile.evaluate(x - x0 - c * dt)[0]
    scale = 1.0 + config.perturb_eps
    if max(abs(u[0]), abs(u[-1]), abs(w[0]), abs(w[-1])) >= BOUNDARY_TOL:
        raise DomainTooSmall("wave does not decay to the boundary tolerance inside the domain")
    u, u_prev, w = scale * u, scale * u_prev, scale * w
    for arr in (u, u_prev, w):
        arr[0] = arr[-1] = 0.0
    return SimState(0.0, u, u_prev, w, dt)


def heaviside(u, a: float, config: SimConfig):
    if config.heaviside_mode == "sharp":
        return (u > a).astype(float)
    return 0.5 * (1.0 + np.tanh((u - a) / config.width))


def step(state: SimState, config: SimConfig, params: ModelParams, u_ref: Optional[float] = None) -> SimState:
    """Advance one time step. ``u_ref`` is the blow-up reference amplitude."""
    u, up, w, dt = state.u, state.u_prev, state.w, state.dt
    dx2 = config.dx ** 2
    tau, b, d = params.tau, params.b, params.d
    F = np.zeros_like(u)
    F[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / dx2 + heaviside(u[1:-1], params.a, config) - u[1:-1] - w[1:-1]
    if tau > 0:
        A, B = tau / dt ** 2, 0.5 / dt
        un = (F + 2 * A * u - (A - B) * up) / (A + B)
    else:
        un = u + dt * F
    un[0] = un[-1] = 0.0
    wn = (w * (1 - 0.5 * dt * d) + 0.5 * dt * b * (u + un)) / (1 + 0.5 * dt * d)
    wn[0] = wn[-1] = 0.0
    blown = state.blown_up
    if u_ref is not None and np.max(np.abs(un)) > BLOWUP_FACTOR * u_ref:
        blown = True
    if not np.all(np.isfinite(un)):
        blown = True
    return SimState(state.t + dt, un, u, wn, dt, blown)


def front_position(u: np.ndarray, x: np.ndarray, a: float) -> float:
    """Leftmost upward crossing of the threshold, linearly interpolated."""
    above = np.nonzero(u >= a)[0]
    if len(above) == 0:
        raise WaveLost("no point above threshold")
    i = above[0]
    if i == 0:
        return float(x[0])
    return float(x[i - 1] + (a - u[i - 1]) / (u[i] - u[i - 1]) * (x[i] - x[i - 1]))


def measure(state: SimState, profile: WaveProfile, config: SimConfig) -> dict:
    """Front position, shape error against the best-shifted wave, amplitude ratio."""
    x = config.x
    a = profile.a
    xf = front_position(state.u, x, a)
    norm = np.linalg.norm(profile.evaluate(x - xf)[0])

    def dist(shift):
        return np.linalg.norm(state.u - profile.evaluate(x - shift)[0]) / norm

    span = max(10 * config.dx, 0.5)
    res = minimize_scalar(dist, bounds=(xf - span, xf + span), method="bounded", options={"xatol": 1e-6})
    err = min(float(res.fun), dist(xf))
    u_max = profile.evaluate(np.linspace(0, profile.z1, 2001))[0].max()
    return {"front": xf, "shape_err": err, "amplitude_ratio": float(state.u.max() / u_max)}


def simulate(
    profile: WaveProfile,
    config: SimConfig,
    n_records: int = 40,
    snapshot_times=(),
    stop_on_instability: bool = True,
) -> SimRun:
    """Run from the wave initial data and monitor shape, speed and amplitude."""
    params = profile.params
    state = init_from_profile(profile, config)
    u_ref = float(np.max(np.abs(state.u)))
    n_steps = int(round(config.T / state.dt))
    record_at = set(np.linspace(0, n_steps, n_records + 1).round().astype(int).tolist())
    snap_steps = {int(round(t / state.dt)): t for t in snapshot_times}
    run = SimRun()
    x = config.x

    def record(st):
        try:
            m = measure(st, profile, config)
        except WaveLost:
            run.unstable, run.reason = True, "wave lost"
            return
        run.times.append(st.t)
        run.fronts.append(m["front"])
        run.shape_err.append(m["shape_err"])
        run.amplitude.append(m["amplitude_ratio"])
        lo, hi = AMPLITUDE_BAND
        if m["shape_err"] > SHAPE_ERR_UNSTABLE:
            run.unstable, run.reason = True, f"shape error {m['shape_err']:.3f} at t={st.t:.3f}"
        elif not lo <= m["amplitude_ratio"] <= hi:
            run.unstable, run.reason = True, f"amplitude ratio {m['amplitude_ratio']:.3f} at t={st.t:.3f}"

    for n in range(n_steps + 1):
        if n in snap_steps:
            run.snapshots[snap_steps[n]] = (x.copy(), state.u.copy(), state.w.copy())
        if n in record_at:
            record(state)
        if state.blown_up and not run.unstable:
            run.unstable, run.reason = True, f"blow-up at t={state.t:.3f}"
        if run.unstable and stop_on_instability:
            break
        if n < n_steps:
            state = step(state, config, params, u_ref)
    run.final = state
    if len(run.times) >= 2:
        slope = np.polyfit(run.times, run.fronts, 1)[0]
        run.speed_est = float(-slope)
    return run
