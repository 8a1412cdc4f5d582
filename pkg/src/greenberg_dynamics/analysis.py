"""Fixed points, stability, period detection, bifurcation scans and Lyapunov estimates.

Analytic results assume the normalized configuration kj = 1 unless noted.
Sweeps are restricted to v0 <= e: above that the map maximum v0/e exceeds
the jam density and orbits leave (0, kj]; escapes inside the allowed range
are recorded per grid point instead of raised.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence, TypeVar

from .dynamics import map_derivative
from .errors import ArgumentError, DomainError, EscapeError
from .model import TrafficParams, TrafficState, flow_of_density, state_of_density

SINK = "hyperbolic-sink"
SOURCE = "hyperbolic-source"
CENTER = "center"
DEGENERATE = "degenerate"

# Terms with |f'| below this floor would send ln|f'| to -inf; the orbit can
# land on the map maximum kj/e where f' = 0, so they are skipped and counted.
SINGULARITY_FLOOR = 1e-300

THREADS_ENV_VAR = "GREENBERG_DYN_THREADS"

DEFAULT_SCAN_K0 = 0.25
DEFAULT_SCAN_TOTAL = 300
DEFAULT_SCAN_KEEP = 60
DEFAULT_PERIOD_TOLERANCE = 1e-6
DEFAULT_MAX_PERIOD = 64
DEFAULT_LYAPUNOV_TERMS = 10_000
DEFAULT_LYAPUNOV_TRANSIENT = 1_000

_T = TypeVar("_T")


@dataclass(frozen=True)
class FixedPointReport:
    """Analytic fixed point of the map with its multiplier and classification."""

    k_star: float
    multiplier: float
    classification: str
    exponentially_stable: bool


@dataclass(frozen=True)
class StabilityCertificate:
    """Exponential-stability verdict with the claimed (M, beta) pair, if any."""

    stable: bool
    m: float | None = None
    beta: float | None = None


@dataclass(frozen=True)
class ScanSettings:
    """Per-sweep configuration echoed into every emitted artifact."""

    k0: float | None  # None when initial densities were supplied per point
    n_total: int
    n_keep: int
    tolerance: float
    max_period: int


@dataclass(frozen=True)
class BifurcationScan:
    """Post-transient attractor samples and detected periods over a v0 grid."""

    v0_grid: tuple[float, ...]
    k0_values: tuple[float, ...]
    samples: tuple[tuple[TrafficState, ...], ...]
    detected_periods: tuple[int | None, ...]
    escaped: tuple[bool, ...]
    settings: ScanSettings


@dataclass(frozen=True)
class LyapunovSettings:
    k0: float
    n: int
    n_transient: int


@dataclass(frozen=True)
class LyapunovCurve:
    """Per-v0 Lyapunov estimates; points with no finite estimate carry None."""

    v0_grid: tuple[float, ...]
    lambdas: tuple[float | None, ...]
    n_terms: tuple[int, ...]
    skipped_terms: tuple[int, ...]
    settings: LyapunovSettings


def fixed_point(p: TrafficParams) -> float:
    """The positive fixed point kj * exp(-1 / v0) of the flow-density map."""
    if not (p.v0 > 0.0):
        raise DomainError(
            f"no positive fixed point for v0 = {p.v0}; the map collapses to 0"
        )
    return p.kj * math.exp(-1.0 / p.v0)


def classify_fixed_point(p: TrafficParams) -> FixedPointReport:
    """Classify the fixed point from its multiplier 1 - v0.

    Sink for v0 in (0, 2), source for v0 > 2, center at the period-doubling
    boundary v0 = 2. v0 = 0 collapses the map to zero and is reported as
    degenerate rather than classified by the multiplier test. The
    exponential-stability flag mirrors exponential_stability_check.
    """
    multiplier = 1.0 - p.v0
    if p.v0 == 0.0:
        k_star = 0.0
        classification = DEGENERATE
    else:
        k_star = fixed_point(p)
        if p.v0 == 2.0:
            classification = CENTER
        elif p.v0 < 2.0:
            classification = SINK
        else:
            classification = SOURCE
    return FixedPointReport(
        k_star=k_star,
        multiplier=multiplier,
        classification=classification,
        exponentially_stable=p.v0 < 1.0,
    )


def period_doubling_threshold() -> float:
    """The parameter value where the multiplier reaches -1 and a 2-cycle is born."""
    return 2.0


def exponential_stability_check(p: TrafficParams) -> StabilityCertificate:
    """Report the claimed exponential-stability certificate (M=1, beta=v0) for v0 < 1.

    The certificate restates the contraction claim |k_{i+1}| < v0 * |k_i|;
    note that the contraction only holds while k_i >= kj/e, so the claimed
    global bound k_i <= k0 * v0^i is not met by orbits that settle on the
    positive fixed point below kj/e.
    """
    if p.v0 < 1.0:
        return StabilityCertificate(stable=True, m=1.0, beta=p.v0)
    return StabilityCertificate(stable=False)


def detect_period(
    samples: Sequence[float],
    tolerance: float = DEFAULT_PERIOD_TOLERANCE,
    max_period: int = DEFAULT_MAX_PERIOD,
) -> int | None:
    """Smallest period p <= max_period with |x[i+p] - x[i]| < tolerance for all i.

    Returns None when no period fits (aperiodic). Ties resolve to the
    smallest period by construction.
    """
    if not (tolerance > 0.0):
        raise ArgumentError(f"tolerance must be positive, got {tolerance}")
    if max_period < 1:
        raise ArgumentError(f"max_period must be at least 1, got {max_period}")
    if len(samples) < 2 * max_period:
        raise ArgumentError(
            f"need at least {2 * max_period} samples for max_period {max_period}, "
            f"got {len(samples)}"
        )
    n = len(samples)
    for p in range(1, max_period + 1):
        if all(abs(samples[i + p] - samples[i]) < tolerance for i in range(n - p)):
            return p
    return None


def _sweep_workers() -> int:
    """Worker cap for sweeps from the environment; 0 means auto.

    Auto resolves to 1: grid points are pure Python computation, so extra
    threads only add overhead. Explicit values still get a real pool, which
    keeps the setting testable.
    """
    raw = os.environ.get(THREADS_ENV_VAR, "0")
    try:
        cap = int(raw)
    except ValueError:
        raise ArgumentError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}") from None
    if cap < 0:
        raise ArgumentError(f"{THREADS_ENV_VAR} must be non-negative, got {cap}")
    return cap if cap > 0 else 1


def _map_ordered(fn: Callable[[float], _T], grid: Sequence[float]) -> list[_T]:
    """Apply fn over the grid, assembling results in grid order."""
    workers = _sweep_workers()
    if workers == 1 or len(grid) <= 1:
        return [fn(v) for v in grid]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, grid))


def _parameter_grid(v0_min: float, v0_max: float, steps: int) -> list[float]:
    if not (0.0 < v0_min <= v0_max):
        raise ArgumentError(f"need 0 < v0_min <= v0_max, got [{v0_min}, {v0_max}]")
    if v0_max > math.e:
        raise ArgumentError(
            f"v0_max must not exceed e ~ {math.e:.6f}: beyond it the map maximum "
            f"v0*kj/e leaves (0, kj], got {v0_max}"
        )
    if steps < 1:
        raise ArgumentError(f"steps must be at least 1, got {steps}")
    if steps == 1:
        if v0_min != v0_max:
            raise ArgumentError("a single-point grid needs v0_min == v0_max")
        return [v0_min]
    if v0_min == v0_max:
        raise ArgumentError("a multi-point grid needs v0_min < v0_max")
    width = v0_max - v0_min
    return [v0_min + i * width / (steps - 1) for i in range(steps)]


def _attractor_tail(
    p: TrafficParams, k0: float, n_total: int, n_keep: int
) -> tuple[list[float], bool]:
    """Iterate n_total steps and keep the last n_keep densities.

    Returns the retained densities (fewer on escape) and an escape flag.
    """
    if not (0.0 < k0 < p.kj):
        raise DomainError(f"scan initial density must lie in (0, {p.kj}), got {k0}")
    k = k0
    tail: list[float] = []
    for i in range(n_total):
        k = flow_of_density(k, p)
        if not (0.0 < k <= p.kj):
            return tail, True
        if i >= n_total - n_keep:
            tail.append(k)
    return tail, False


def bifurcation_scan(
    v0_min: float,
    v0_max: float,
    steps: int,
    k0: float | Callable[[float], float] = DEFAULT_SCAN_K0,
    n_total: int = DEFAULT_SCAN_TOTAL,
    n_keep: int = DEFAULT_SCAN_KEEP,
    tolerance: float = DEFAULT_PERIOD_TOLERANCE,
    max_period: int = DEFAULT_MAX_PERIOD,
) -> BifurcationScan:
    """Sweep v0 over an ascending grid, sampling each attractor and its period.

    ``k0`` is either one initial density for every grid point or a callable
    v0 -> k0 for per-point overrides. The period search is capped at
    n_keep // 2 so the retained window always satisfies the detector's
    length requirement. Escaped grid points keep their partial samples and
    an aperiodic marker rather than failing the sweep.
    """
    if n_keep < 1 or n_keep >= n_total:
        raise ArgumentError(f"need 1 <= n_keep < n_total, got keep={n_keep} total={n_total}")
    grid = _parameter_grid(v0_min, v0_max, steps)
    k0_of: Callable[[float], float] = k0 if callable(k0) else (lambda _v0: k0)

    def scan_point(v0: float) -> tuple[float, tuple[TrafficState, ...], int | None, bool]:
        p = TrafficParams(v0=v0)
        start = k0_of(v0)
        tail, escaped = _attractor_tail(p, start, n_total, n_keep)
        effective_max = min(max_period, len(tail) // 2)
        period = (
            detect_period(tail, tolerance, effective_max) if effective_max >= 1 else None
        )
        states = tuple(state_of_density(k, p) for k in tail)
        return start, states, period, escaped

    results = _map_ordered(scan_point, grid)
    return BifurcationScan(
        v0_grid=tuple(grid),
        k0_values=tuple(r[0] for r in results),
        samples=tuple(r[1] for r in results),
        detected_periods=tuple(r[2] for r in results),
        escaped=tuple(r[3] for r in results),
        settings=ScanSettings(
            k0=None if callable(k0) else k0,
            n_total=n_total,
            n_keep=n_keep,
            tolerance=tolerance,
            max_period=max_period,
        ),
    )


def _lyapunov_terms(
    p: TrafficParams, k0: float, n: int, n_transient: int
) -> tuple[float, int, int]:
    """Average ln|f'| over n post-transient orbit points.

    Returns (estimate, terms used, terms skipped). Raises EscapeError if the
    orbit leaves (0, kj] before the average is complete. When every term is
    singular (a superstable orbit pinned to the map maximum) the estimate is
    -inf, the true limit value.
    """
    if not (0.0 < k0 < p.kj):
        raise DomainError(f"initial density must lie in (0, {p.kj}), got {k0}")
    k = k0
    for i in range(n_transient):
        k = flow_of_density(k, p)
        if not (0.0 < k <= p.kj):
            raise EscapeError(
                f"orbit left (0, {p.kj}] during transient step {i + 1} at v0={p.v0}"
            )
    acc = 0.0
    skipped = 0
    for j in range(n):
        slope = map_derivative(k, p)
        if abs(slope) < SINGULARITY_FLOOR:
            skipped += 1
        else:
            acc += math.log(abs(slope))
        if j < n - 1:
            k = flow_of_density(k, p)
            if not (0.0 < k <= p.kj):
                raise EscapeError(
                    f"orbit left (0, {p.kj}] after {j + 1} averaged terms at v0={p.v0}"
                )
    used = n - skipped
    if used == 0:
        return -math.inf, 0, skipped
    return acc / used, used, skipped


def lyapunov_exponent(
    p: TrafficParams,
    k0: float,
    n: int = DEFAULT_LYAPUNOV_TERMS,
    n_transient: int = DEFAULT_LYAPUNOV_TRANSIENT,
) -> float:
    """Orbit-averaged ln|f'|: negative on sinks and cycles, positive on chaos.

    At a superstable parameter the whole orbit sits where f' = 0 and the
    exponent diverges; -inf is returned in that case.
    """
    if n < 1000:
        raise ArgumentError(f"need at least 1000 averaged terms, got {n}")
    if n_transient < 0:
        raise ArgumentError(f"transient length must be non-negative, got {n_transient}")
    estimate, _, _ = _lyapunov_terms(p, k0, n, n_transient)
    return estimate


def lyapunov_curve(
    v0_min: float,
    v0_max: float,
    steps: int,
    k0: float = DEFAULT_SCAN_K0,
    n: int = DEFAULT_LYAPUNOV_TERMS,
    n_transient: int = DEFAULT_LYAPUNOV_TRANSIENT,
) -> LyapunovCurve:
    """Lyapunov estimates over an ascending v0 grid; escapes become missing points."""
    if n < 1000:
        raise ArgumentError(f"need at least 1000 averaged terms, got {n}")
    if n_transient < 0:
        raise ArgumentError(f"transient length must be non-negative, got {n_transient}")
    grid = _parameter_grid(v0_min, v0_max, steps)

    def curve_point(v0: float) -> tuple[float | None, int, int]:
        try:
            estimate, used, skipped = _lyapunov_terms(TrafficParams(v0=v0), k0, n, n_transient)
        except EscapeError:
            return None, 0, 0
        if not math.isfinite(estimate):
            return None, used, skipped
        return estimate, used, skipped

    results = _map_ordered(curve_point, grid)
    return LyapunovCurve(
        v0_grid=tuple(grid),
        lambdas=tuple(r[0] for r in results),
        n_terms=tuple(r[1] for r in results),
        skipped_terms=tuple(r[2] for r in results),
        settings=LyapunovSettings(k0=k0, n=n, n_transient=n_transient),
    )
