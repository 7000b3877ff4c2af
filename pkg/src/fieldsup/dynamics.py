"""Continuous-time layer: robot models, numerical integration, the propeller
mixer, and the three-term distributed swarm control law driving virtual
points.

Conventions: positions are 3-vectors in meters. The UAV uses a north-east-
down frame, so height above ground is the negated third component. UGVs live
in the z = 0 plane with unicycle kinematics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Protocol, Sequence

import numpy as np


class SimulationFault(RuntimeError):
    """A numeric or barrier violation the simulation must not silence."""


class ConfigurationError(ValueError):
    """Nonsensical physical parameters."""


class ActuatorError(RuntimeError):
    """Motor allocation demanded a negative squared speed."""

    def __init__(self, channel: int, value: float):
        super().__init__(f"rotor {channel} would need omega^2 = {value:.6g} < 0")
        self.channel = channel
        self.value = value


UAV = "UAV"
UGV = "UGV"


@dataclass(frozen=True)
class RobotState:
    kind: str
    position: np.ndarray          # (3,) m
    velocity: np.ndarray          # (3,) m/s
    heading: float = 0.0          # rad, UGV only
    nu: float = 0.0               # m/s linear speed, UGV only
    omega: float = 0.0            # rad/s angular speed, UGV only
    mass: float = 1.0             # kg
    inertia_z: float = 0.1        # kg m^2, UGV yaw inertia

    def __post_init__(self):
        if self.mass <= 0 or self.inertia_z <= 0:
            raise ConfigurationError("mass and inertia must be positive")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))

    @property
    def height(self) -> float:
        """Height above ground for the NE-down UAV frame."""
        return -float(self.position[2])

    @property
    def speed(self) -> float:
        return float(np.linalg.norm(self.velocity))


def ugv_state(x: float, y: float, heading: float = 0.0, nu: float = 0.0,
              omega: float = 0.0, mass: float = 20.0, inertia_z: float = 1.0) -> RobotState:
    vel = np.array([nu * math.cos(heading), nu * math.sin(heading), 0.0])
    return RobotState(UGV, np.array([x, y, 0.0]), vel, heading, nu, omega,
                      mass, inertia_z)


def uav_state(x: float, y: float, height: float = 0.0, mass: float = 1.5) -> RobotState:
    return RobotState(UAV, np.array([x, y, -height]), np.zeros(3), mass=mass)


@dataclass(frozen=True)
class VirtualPoint:
    """Kinematic reference point tracked by a robot; carries PID memory."""

    d: np.ndarray                      # (3,) m
    integral_error: np.ndarray = None  # (3,) m*s
    prev_error: np.ndarray = None      # (3,) m, for the backward difference

    def __post_init__(self):
        object.__setattr__(self, "d", np.asarray(self.d, dtype=float))
        ie = np.zeros(3) if self.integral_error is None else np.asarray(self.integral_error, float)
        pe = np.zeros(3) if self.prev_error is None else np.asarray(self.prev_error, float)
        object.__setattr__(self, "integral_error", ie)
        object.__setattr__(self, "prev_error", pe)

    @staticmethod
    def at(robot: RobotState) -> "VirtualPoint":
        """VPs start on their robot."""
        return VirtualPoint(robot.position.copy())


@dataclass(frozen=True)
class SwarmParams:
    formation_distance: float = 1.0   # D_f, m: pairwise spacing target
    d_min: float = 0.3                # m, inner barrier asymptote
    d_max: float = 6.0                # m, outer barrier asymptote
    obstacle_threshold: float = 1.5   # D_o, m
    k_formation: float = 0.25
    k_obstacle: float = 0.4
    kp: float = 1.2
    ki: float = 0.05
    kd: float = 0.0
    comm_radius: float = 3.0          # m
    integral_clamp: float = 2.0       # m*s, anti-windup bound
    vp_speed_max: float = 2.0         # m/s cap on the VP velocity

    def __post_init__(self):
        if min(self.formation_distance, self.d_min, self.d_max,
               self.obstacle_threshold, self.comm_radius) <= 0:
            raise ConfigurationError("distances must be positive")
        if not (self.d_min < self.formation_distance < self.d_max):
            raise ConfigurationError("need d_min < formation_distance < d_max")


class Trajectory(Protocol):
    def point_at(self, t: float) -> np.ndarray: ...

    def finished(self, t: float) -> bool: ...


@dataclass(frozen=True)
class WorldState:
    """Continuous state of the whole team at one instant."""

    time: float
    robots: tuple[RobotState, ...]
    vps: tuple[VirtualPoint, ...]
    obstacles: tuple[np.ndarray, ...] = ()
    targets: tuple[Trajectory | None, ...] = ()
    link_enabled: bool = True

    def __post_init__(self):
        if len(self.robots) != len(self.vps):
            raise ConfigurationError("robot and VP indices must coincide")
        object.__setattr__(
            self, "obstacles", tuple(np.asarray(o, dtype=float) for o in self.obstacles)
        )
        if not self.targets:
            object.__setattr__(self, "targets", (None,) * len(self.robots))

    def check_index(self, i: int):
        if not 0 <= i < len(self.robots):
            raise IndexError(f"robot index {i} out of range")


def neighbor_set(w: WorldState, i: int, params: SwarmParams) -> list[int]:
    """Indices within comm radius of VP i with the network link up."""
    w.check_index(i)
    if not w.link_enabled:
        return []
    di = w.vps[i].d
    out = []
    for j, vp in enumerate(w.vps):
        if j == i:
            continue
        if np.linalg.norm(di - vp.d) <= params.comm_radius:
            out.append(j)
    return out


def formation_potential(r: float, p: SwarmParams) -> float:
    """Pairwise spacing potential: minimum at the formation distance, vertical
    asymptotes at d_min and d_max."""
    poly = (r - p.d_min) * (p.d_max - r)
    if poly <= 0:
        raise SimulationFault(f"formation barrier violated at distance {r:.4f}")
    return p.k_formation * (r - p.formation_distance) ** 2 / poly


def formation_gradient(r: float, p: SwarmParams) -> float:
    """d/dr of the spacing potential (analytic)."""
    poly = (r - p.d_min) * (p.d_max - r)
    if poly <= 0:
        raise SimulationFault(f"formation barrier violated at distance {r:.4f}")
    diff = r - p.formation_distance
    dpoly = p.d_min + p.d_max - 2.0 * r
    return p.k_formation * (2.0 * diff * poly - diff * diff * dpoly) / (poly * poly)


def obstacle_potential(r: float, p: SwarmParams) -> float:
    """Repulsive barrier inside the obstacle threshold; exactly zero beyond
    it, with value and gradient vanishing at the threshold."""
    if r >= p.obstacle_threshold:
        return 0.0
    if r <= 0:
        raise SimulationFault("virtual point coincides with an obstacle")
    return p.k_obstacle * (1.0 / r - 1.0 / p.obstacle_threshold) ** 2


def obstacle_gradient(r: float, p: SwarmParams) -> float:
    if r >= p.obstacle_threshold:
        return 0.0
    if r <= 0:
        raise SimulationFault("virtual point coincides with an obstacle")
    return -2.0 * p.k_obstacle * (1.0 / r - 1.0 / p.obstacle_threshold) / (r * r)


def formation_input(i: int, w: WorldState, params: SwarmParams) -> np.ndarray:
    """Velocity term steering VP i toward the desired spacing from each
    neighbor: zero at the formation distance, attractive beyond, repulsive
    inside, unbounded toward the barrier asymptotes."""
    w.check_index(i)
    u = np.zeros(3)
    di = w.vps[i].d
    for j in neighbor_set(w, i, params):
        delta = di - w.vps[j].d
        r = float(np.linalg.norm(delta))
        if r <= params.d_min or r >= params.d_max:
            raise SimulationFault(
                f"formation barrier violated between VPs {i} and {j}: r={r:.4f}"
            )
        u -= formation_gradient(r, params) * (delta / r)
    return u


def obstacle_input(i: int, w: WorldState, params: SwarmParams) -> np.ndarray:
    """Velocity term pushing VP i away from every obstacle point closer than
    the threshold; exactly zero otherwise."""
    w.check_index(i)
    u = np.zeros(3)
    di = w.vps[i].d
    for obs in w.obstacles:
        delta = di - obs
        r = float(np.linalg.norm(delta))
        if r >= params.obstacle_threshold:
            continue
        if r <= 1e-12:
            raise SimulationFault(f"virtual point {i} coincides with an obstacle")
        u -= obstacle_gradient(r, params) * (delta / r)
    return u


def tracking_input(
    i: int, w: WorldState, params: SwarmParams, dt: float
) -> tuple[np.ndarray, VirtualPoint]:
    """Discrete PID on the target-trajectory error of VP i.

    Trapezoidal integral with clamping, backward-difference derivative.
    Returns the velocity term and the VP carrying updated PID memory.
    """
    w.check_index(i)
    target = w.targets[i]
    if target is None:
        raise ConfigurationError(f"robot {i} has no target trajectory")
    vp = w.vps[i]
    e = target.point_at(w.time) - vp.d
    integral = vp.integral_error + 0.5 * dt * (e + vp.prev_error)
    norm = float(np.linalg.norm(integral))
    if norm > params.integral_clamp:
        integral = integral * (params.integral_clamp / norm)
    derivative = (e - vp.prev_error) / dt if dt > 0 else np.zeros(3)
    u = params.kp * e + params.ki * integral + params.kd * derivative
    return u, replace(vp, integral_error=integral, prev_error=e)


def vp_step(
    i: int,
    w: WorldState,
    enabled: frozenset[str] | set[str],
    params: SwarmParams,
    dt: float,
) -> VirtualPoint:
    """One Euler step of VP i under the enabled velocity terms.

    `enabled` is a subset of {"f", "o", "u"}; the supervisor layer derives it
    from the events it currently allows. The combined command is capped at
    the configured VP speed so barrier gradients cannot overshoot in one step.
    """
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    w.check_index(i)
    vp = w.vps[i]
    u = np.zeros(3)
    if "f" in enabled:
        u = u + formation_input(i, w, params)
    if "o" in enabled:
        u = u + obstacle_input(i, w, params)
    if "u" in enabled:
        uu, vp = tracking_input(i, w, params, dt)
        u = u + uu
    speed = float(np.linalg.norm(u))
    if speed > params.vp_speed_max:
        u = u * (params.vp_speed_max / speed)
    return replace(vp, d=vp.d + u * dt)


# -- low-level robot control -----------------------------------------------------

GRAVITY = 9.81
E3 = np.array([0.0, 0.0, 1.0])  # down


@dataclass(frozen=True)
class UavGains:
    kp: float = 4.0
    kd: float = 3.0
    thrust_max: float = 40.0  # N


@dataclass(frozen=True)
class UgvGains:
    k_rho: float = 1.2
    k_heading: float = 3.0
    nu_max: float = 1.5       # m/s
    omega_max: float = 2.5    # rad/s
    k_nu: float = 8.0         # inner speed loop
    k_omega: float = 8.0      # inner yaw-rate loop
    stop_radius: float = 0.03 # m, deadband around the VP


def rk4_step(fieldfn: Callable[[np.ndarray], np.ndarray], state: np.ndarray,
             dt: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step."""
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    k1 = fieldfn(state)
    k2 = fieldfn(state + 0.5 * dt * k1)
    k3 = fieldfn(state + 0.5 * dt * k2)
    k4 = fieldfn(state + dt * k3)
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise SimulationFault("non-finite derivative in rk4_step")
    return out


def uav_track_vp(robot: RobotState, vp: VirtualPoint, gains: UavGains, dt: float) -> RobotState:
    """Translational UAV step: PD commanded acceleration toward the VP with
    gravity-compensated, saturated thrust."""
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    m = robot.mass

    def deriv(s: np.ndarray) -> np.ndarray:
        p, v = s[:3], s[3:]
        a_cmd = gains.kp * (vp.d - p) + gains.kd * (0.0 - v)
        thrust = m * (a_cmd - GRAVITY * E3)   # desired rotor force vector
        lam = float(np.linalg.norm(thrust))
        if lam > gains.thrust_max:
            thrust = thrust * (gains.thrust_max / lam)
        a = thrust / m + GRAVITY * E3
        return np.concatenate([v, a])

    s = rk4_step(deriv, np.concatenate([robot.position, robot.velocity]), dt)
    pos, vel = s[:3], s[3:]
    if pos[2] > 0.0:  # ground is impenetrable (down is positive)
        pos = pos.copy()
        vel = vel.copy()
        pos[2] = 0.0
        vel[2] = min(vel[2], 0.0)
    return replace(robot, position=pos, velocity=vel)


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def ugv_dynamics_step(robot: RobotState, mu: tuple[float, float], dt: float) -> RobotState:
    """Integrate the UGV inertia model (diagonal D, no Coriolis coupling) and
    the unicycle kinematics one step."""
    if dt <= 0:
        raise ConfigurationError("dt must be positive")
    if robot.mass <= 0 or robot.inertia_z <= 0:
        raise ConfigurationError("nonpositive inertia parameters")
    mu_nu, mu_omega = mu
    m, iz = robot.mass, robot.inertia_z

    def deriv(s: np.ndarray) -> np.ndarray:
        _, _, psi, nu, om = s
        return np.array([
            nu * math.cos(psi),
            nu * math.sin(psi),
            om,
            mu_nu / m,
            mu_omega / iz,
        ])

    s0 = np.array([robot.position[0], robot.position[1], robot.heading,
                   robot.nu, robot.omega])
    x, y, psi, nu, om = rk4_step(deriv, s0, dt)
    vel = np.array([nu * math.cos(psi), nu * math.sin(psi), 0.0])
    return replace(robot, position=np.array([x, y, 0.0]), velocity=vel,
                   heading=_wrap_angle(psi), nu=nu, omega=om)


def ugv_track_vp(robot: RobotState, vp: VirtualPoint, gains: UgvGains, dt: float) -> RobotState:
    """Proportional heading-and-range law toward the planar VP projection,
    realized through saturated torque inputs on the inertia model."""
    dx = float(vp.d[0] - robot.position[0])
    dy = float(vp.d[1] - robot.position[1])
    rho = math.hypot(dx, dy)
    if rho < gains.stop_radius:
        nu_cmd, omega_cmd = 0.0, 0.0
    else:
        bearing = math.atan2(dy, dx)
        err = _wrap_angle(bearing - robot.heading)
        nu_cmd = gains.k_rho * rho * max(0.0, math.cos(err))
        nu_cmd = min(nu_cmd, gains.nu_max)
        omega_cmd = max(-gains.omega_max, min(gains.omega_max, gains.k_heading * err))
    mu_nu = robot.mass * gains.k_nu * (nu_cmd - robot.nu)
    mu_omega = robot.inertia_z * gains.k_omega * (omega_cmd - robot.omega)
    return ugv_dynamics_step(robot, (mu_nu, mu_omega), dt)


def robot_track_vp(i: int, w: WorldState, dt: float,
                   uav_gains: UavGains = UavGains(),
                   ugv_gains: UgvGains = UgvGains()) -> RobotState:
    """Advance robot i one step toward its VP with the kind-specific law."""
    w.check_index(i)
    robot = w.robots[i]
    if robot.kind == UAV:
        return uav_track_vp(robot, w.vps[i], uav_gains, dt)
    return ugv_track_vp(robot, w.vps[i], ugv_gains, dt)


# -- propeller mixer ---------------------------------------------------------------


@dataclass(frozen=True)
class MixerParams:
    kappa: float = 1.0  # thrust per omega^2
    beta: float = 1.0   # yaw torque per omega^2
    arm: float = 1.0    # rotor arm length L

    def __post_init__(self):
        if min(self.kappa, self.beta, self.arm) <= 0:
            raise ConfigurationError("mixer constants must be positive")

    def matrix(self) -> np.ndarray:
        k, b, L = self.kappa, self.beta, self.arm
        return np.array([
            [k, k, k, k],
            [0.0, -L, 0.0, L],
            [L, 0.0, -L, 0.0],
            [b, -b, b, -b],
        ])


def mixer(omega_sq: Sequence[float], p: MixerParams = MixerParams()) -> np.ndarray:
    """Rotor speeds squared -> (thrust, roll, pitch, yaw torques)."""
    w = np.asarray(omega_sq, dtype=float)
    if w.shape != (4,):
        raise ConfigurationError("mixer expects four squared rotor speeds")
    return p.matrix() @ w


def mixer_inverse(wrench: Sequence[float], p: MixerParams = MixerParams()) -> np.ndarray:
    """(thrust, torques) -> rotor speeds squared; rejects infeasible demands."""
    u = np.asarray(wrench, dtype=float)
    if u.shape != (4,):
        raise ConfigurationError("mixer_inverse expects (thrust, 3 torques)")
    w = np.linalg.solve(p.matrix(), u)
    for ch, val in enumerate(w):
        if val < -1e-12:
            raise ActuatorError(ch, float(val))
    return np.clip(w, 0.0, None)
