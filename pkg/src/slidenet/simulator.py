"""Planar sliding of a rigid body after an impulse, under Coulomb friction.

The body has three degrees of freedom (x, y, heading). Friction acts at a
set of ground contact points fixed in the body frame, each carrying a share
of the weight. Integration is semi-implicit Euler; the friction impulse of
a step is shortened when applying it in full would overshoot rest, so
friction never adds kinetic energy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .geometry import ContactPatch, MassProperties

GRAVITY = 9.81
MU_OBJECT = 0.7
MU_GROUND = 0.1
MU_DEFAULT = MU_OBJECT * MU_GROUND

# kernel status codes
_OK, _MAX_TIME, _NONFINITE = 0, 1, 2


class SimulationError(RuntimeError):
    pass


@dataclass
class ImpulseSpec:
    J: np.ndarray  # (2,) N*s
    r: np.ndarray  # (2,) application point relative to COM, m

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=float).reshape(2)
        self.r = np.asarray(self.r, dtype=float).reshape(2)


@dataclass
class RigidBodyState:
    pos: np.ndarray
    heading: float
    v: np.ndarray
    omega: float
    t: float = 0.0


@dataclass
class SimConfig:
    mu: float = MU_DEFAULT
    g: float = GRAVITY
    dt: float = 1e-3
    rest_v: float = 1e-3
    rest_omega: float = 1e-3
    max_time: float = 60.0
    slip_eps: float = 1e-6


@dataclass
class SimOutcome:
    final_pos: np.ndarray
    total_rotation: float  # degrees, magnitude
    duration: float
    steps: int
    signed_rotation: float = 0.0  # radians
    hit_max_time: bool = False
    trajectory: np.ndarray | None = None  # (steps+1, 7): t, x, y, heading (rad), vx, vy, omega
    energy: np.ndarray | None = field(default=None, repr=False)


def apply_impulse(mp: MassProperties, imp: ImpulseSpec) -> tuple[np.ndarray, float]:
    """Initial velocities from an impulse: v = J/m, omega = (r x J)/I."""
    if not mp.mass > 0 or not mp.inertia_z > 0:
        raise ValueError(f"mass and inertia must be positive (got m={mp.mass}, I={mp.inertia_z})")
    v = imp.J / mp.mass
    omega = (imp.r[0] * imp.J[1] - imp.r[1] * imp.J[0]) / mp.inertia_z
    return v, float(omega)


@njit(cache=True)
def _wrench(px, py, w, heading, vx, vy, om, mu_mg, eps):
    c, s = math.cos(heading), math.sin(heading)
    fx = fy = tz = 0.0
    for i in range(px.shape[0]):
        qx = c * px[i] - s * py[i]
        qy = s * px[i] + c * py[i]
        ux = vx - om * qy
        uy = vy + om * qx
        un = math.sqrt(ux * ux + uy * uy)
        if un > eps:
            k = -mu_mg * w[i] / un
            gx, gy = k * ux, k * uy
            fx += gx
            fy += gy
            tz += qx * gy - qy * gx
    return fx, fy, tz


@njit(cache=True)
def _integrate(px, py, w, m, inertia, vx, vy, om, mu, g, dt, rest_v, rest_om, max_steps, eps,
               keep_traj, keep_energy):
    x = y = h = 0.0
    mu_mg = mu * m * g
    traj = np.zeros((max_steps + 1 if keep_traj else 1, 7))
    energy = np.zeros(max_steps + 1 if keep_energy else 1)
    if keep_traj:
        traj[0, 4], traj[0, 5], traj[0, 6] = vx, vy, om
    if keep_energy:
        energy[0] = 0.5 * m * (vx * vx + vy * vy) + 0.5 * inertia * om * om
    if math.sqrt(vx * vx + vy * vy) < rest_v and abs(om) < rest_om:
        return x, y, h, 0, _OK, traj, energy
    status = _MAX_TIME
    n = 0
    for n in range(1, max_steps + 1):
        fx, fy, tz = _wrench(px, py, w, h, vx, vy, om, mu_mg, eps)
        dvx, dvy, dom = fx / m * dt, fy / m * dt, tz / inertia * dt
        # friction power is never positive; clip the step at the kinetic-energy minimum
        p = m * (vx * dvx + vy * dvy) + inertia * om * dom
        q = m * (dvx * dvx + dvy * dvy) + inertia * dom * dom
        s = 1.0
        if q > 0.0 and -p < q:
            s = max(-p / q, 0.0)
        vx += s * dvx
        vy += s * dvy
        om_new = om + s * dom
        # friction can stop the spin but never reverse it within one step
        om = 0.0 if om_new * om < 0.0 else om_new
        x += vx * dt
        y += vy * dt
        h += om * dt
        if keep_traj:
            traj[n, 0], traj[n, 1], traj[n, 2], traj[n, 3] = n * dt, x, y, h
            traj[n, 4], traj[n, 5], traj[n, 6] = vx, vy, om
        if keep_energy:
            energy[n] = 0.5 * m * (vx * vx + vy * vy) + 0.5 * inertia * om * om
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(h)
                and math.isfinite(vx) and math.isfinite(vy) and math.isfinite(om)):
            status = _NONFINITE
            break
        if math.sqrt(vx * vx + vy * vy) < rest_v and abs(om) < rest_om:
            status = _OK
            break
    return x, y, h, n, status, traj, energy


def friction_wrench(state: RigidBodyState, patch: ContactPatch, mu: float, m: float,
                    g: float = GRAVITY, slip_eps: float = 1e-6) -> tuple[np.ndarray, float]:
    """Net friction force (world frame) and vertical torque about the COM."""
    if len(patch.points) == 0:
        raise ValueError("contact patch is empty")
    if mu < 0:
        raise ValueError("friction coefficient must be non-negative")
    pts = np.ascontiguousarray(patch.points, dtype=float)
    fx, fy, tz = _wrench(pts[:, 0].copy(), pts[:, 1].copy(), np.asarray(patch.weights, float),
                         float(state.heading), float(state.v[0]), float(state.v[1]),
                         float(state.omega), mu * m * g, slip_eps)
    return np.array([fx, fy]), tz


def run_to_rest(mp: MassProperties, patch: ContactPatch, imp: ImpulseSpec,
                cfg: SimConfig | None = None, trajectory: bool = False,
                energy: bool = False, raise_on_max_time: bool = False) -> SimOutcome:
    """Slide the body from rest after ``imp`` until it stops (or ``max_time``)."""
    v0, om0 = apply_impulse(mp, imp)
    return run_from_velocity(mp, patch, v0, om0, cfg, trajectory, energy, raise_on_max_time)


def run_from_velocity(mp: MassProperties, patch: ContactPatch, v0, omega0: float,
                      cfg: SimConfig | None = None, trajectory: bool = False,
                      energy: bool = False, raise_on_max_time: bool = False) -> SimOutcome:
    """Same as :func:`run_to_rest` but starting from given velocities."""
    cfg = cfg or SimConfig()
    if not cfg.dt > 0 or not cfg.rest_v > 0 or not cfg.rest_omega > 0:
        raise ValueError("dt and rest thresholds must be positive")
    if len(patch.points) == 0:
        raise ValueError("contact patch is empty")
    if not mp.mass > 0 or not mp.inertia_z > 0:
        raise ValueError(f"mass and inertia must be positive (got m={mp.mass}, I={mp.inertia_z})")
    pts = np.asarray(patch.points, dtype=float)
    max_steps = int(math.ceil(cfg.max_time / cfg.dt - 1e-9))
    x, y, h, n, status, traj, en = _integrate(
        np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
        np.ascontiguousarray(patch.weights, dtype=float), float(mp.mass), float(mp.inertia_z),
        float(v0[0]), float(v0[1]), float(omega0), float(cfg.mu), float(cfg.g), float(cfg.dt),
        float(cfg.rest_v), float(cfg.rest_omega), max_steps, float(cfg.slip_eps),
        trajectory, energy,
    )
    if status == _NONFINITE:
        raise SimulationError(f"non-finite state at step {n}")
    hit_max = status == _MAX_TIME
    if hit_max and raise_on_max_time:
        raise SimulationError(f"body still moving after max_time={cfg.max_time} s")
    return SimOutcome(
        final_pos=np.array([x, y]),
        total_rotation=abs(math.degrees(h)),
        duration=n * cfg.dt,
        steps=n,
        signed_rotation=h,
        hit_max_time=hit_max,
        trajectory=traj[: n + 1] if trajectory else None,
        energy=en[: n + 1] if energy else None,
    )


def analytic_oracles(kind: str, **params) -> float:
    """Closed-form stopping distance / spin-down angle.

    - ``translation_stop(v, mu, g)``: v^2 / (2 mu g), meters
    - ``disk_spin_stop(omega, R, mu, g)``: omega^2 R / ((8/3) mu g), radians
    """
    for key, val in params.items():
        if val < 0:
            raise ValueError(f"{key} must be non-negative")
    if kind == "translation_stop":
        v, mu, g = params["v"], params["mu"], params.get("g", GRAVITY)
        return v * v / (2 * mu * g)
    if kind == "disk_spin_stop":
        om, R, mu, g = params["omega"], params["R"], params["mu"], params.get("g", GRAVITY)
        return om * om * R / (8.0 / 3.0 * mu * g)
    raise ValueError(f"unknown oracle {kind!r}")


def write_trajectory_csv(outcome: SimOutcome, path) -> None:
    if outcome.trajectory is None:
        raise ValueError("outcome carries no trajectory; run with trajectory=True")
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "x", "y", "heading_deg", "vx", "vy", "omega"])
        for t, x, y, h, vx, vy, om in outcome.trajectory.tolist():
            wr.writerow([repr(t), repr(x), repr(y), repr(math.degrees(h)), repr(vx), repr(vy), repr(om)])
