"""Discrete iteration of the flow-density map and orbit-level experiments.

The advance rule identifies the next density with the current flow:
k(i+1) = v0 * k(i) * ln(kj / k(i)). Orbits are immutable once built, so
independent orbits can be generated concurrently without shared state.
"""

from __future__ import annotations

import math
import warnings

from dataclasses import dataclass

from .errors import ArgumentError, DomainError, EscapeWarning
from .model import TrafficParams, TrafficState, flow_of_density, state_of_density

DEFAULT_ITERATIONS = 300
DEFAULT_SENSITIVITY_DELTA = 1e-3


@dataclass(frozen=True)
class Orbit:
    """A density orbit with its derived flow and velocity values.

    ``states`` holds only in-domain states (length n+1 when nothing escapes).
    When an iterate leaves (0, kj], ``escaped`` is the index that iterate
    would have had and the orbit is truncated just before it.
    """

    params: TrafficParams
    k0: float
    n: int
    states: tuple[TrafficState, ...]
    escaped: int | None = None

    @property
    def densities(self) -> tuple[float, ...]:
        return tuple(s.k for s in self.states)


@dataclass(frozen=True)
class SensitivityResult:
    """Two nearby orbits and their pointwise density separation."""

    orbit_a: Orbit
    orbit_b: Orbit
    threshold: float
    separation: tuple[float, ...]
    first_divergence_index: int | None


def step(k: float, p: TrafficParams) -> TrafficState:
    """One map application: the successor state at density v0 * k * ln(kj / k).

    Successors that leave (0, kj] come back flagged ``escaped``: the absorbing
    boundary 0 keeps its limit values (q = 0, unbounded v), an overshoot past
    kj carries no flow/velocity.
    """
    if not (0.0 < k <= p.kj):
        raise DomainError(f"density must lie in (0, {p.kj}], got {k}")
    nxt = flow_of_density(k, p)
    if nxt == 0.0:
        return TrafficState(k=0.0, q=0.0, v=math.inf, escaped=True)
    if nxt > p.kj:
        return TrafficState(k=nxt, q=math.nan, v=math.nan, escaped=True)
    return state_of_density(nxt, p)


def iterate(k0: float, p: TrafficParams, n: int = DEFAULT_ITERATIONS) -> Orbit:
    """Generate the orbit of length n+1 from k0, truncating on escape.

    Deterministic: identical inputs produce bit-identical orbits. An escape
    is recorded on the orbit and reported as an EscapeWarning, not an error.
    """
    if not (0.0 < k0 < p.kj):
        raise DomainError(f"initial density must lie in (0, {p.kj}), got {k0}")
    if n < 1:
        raise ArgumentError(f"need at least one iteration, got {n}")
    states = [state_of_density(k0, p)]
    escaped: int | None = None
    for i in range(n):
        nxt = step(states[-1].k, p)
        if nxt.escaped:
            escaped = i + 1
            warnings.warn(
                f"orbit left (0, {p.kj}] at iterate {escaped} (density {nxt.k})",
                EscapeWarning,
                stacklevel=2,
            )
            break
        states.append(nxt)
    return Orbit(params=p, k0=k0, n=n, states=tuple(states), escaped=escaped)


def velocity_sequence(orbit: Orbit) -> tuple[float, ...]:
    """Velocities v0 * ln(kj / k_i), aligned index-by-index with the orbit."""
    return tuple(s.v for s in orbit.states)


def map_derivative(k: float, p: TrafficParams) -> float:
    """Slope of the flow-density map: v0 * (ln(kj / k) - 1)."""
    if not (0.0 < k <= p.kj):
        raise DomainError(f"density must lie in (0, {p.kj}], got {k}")
    return p.v0 * (math.log(p.kj / k) - 1.0)


def cobweb_path(orbit: Orbit) -> list[tuple[float, float]]:
    """Staircase vertices (k,k) -> (k,q) -> (q,q) -> ... for the flow-density panel.

    The vertex count is 2 * (len(states) - 1) + 1; for a stationary orbit all
    vertices coincide at the fixed point on the q = k line.
    """
    if len(orbit.states) < 2:
        raise ArgumentError("cobweb path needs an orbit with at least two states")
    first = orbit.states[0]
    path = [(first.k, first.k)]
    for state in orbit.states[:-1]:
        path.append((state.k, state.q))
        path.append((state.q, state.q))
    return path


def sensitivity_experiment(
    k0: float,
    delta: float,
    p: TrafficParams,
    n: int = DEFAULT_ITERATIONS,
    threshold: float = 0.1,
) -> SensitivityResult:
    """Run orbits from k0 and k0 + delta and track their pointwise separation.

    ``first_divergence_index`` is the smallest index whose separation exceeds
    ``threshold``, or None if the orbits never part that far. The separation
    sequence has the length of the shorter orbit.
    """
    if not (threshold > 0.0):
        raise ArgumentError(f"threshold must be positive, got {threshold}")
    orbit_a = iterate(k0, p, n)
    orbit_b = iterate(k0 + delta, p, n)
    m = min(len(orbit_a.states), len(orbit_b.states))
    separation = tuple(
        abs(orbit_a.states[i].k - orbit_b.states[i].k) for i in range(m)
    )
    first_divergence_index = next(
        (i for i, s in enumerate(separation) if s > threshold), None
    )
    return SensitivityResult(
        orbit_a=orbit_a,
        orbit_b=orbit_b,
        threshold=threshold,
        separation=separation,
        first_divergence_index=first_divergence_index,
    )
