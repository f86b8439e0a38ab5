"""Clustered geometric wideband MIMO channel model.

Builds time-indexed channel matrices from path clusters (per-ray complex
gains, angles, delays, Doppler shifts), exposes the angular-domain
factorisation H = A_ms @ Hbar @ A_bs^H over overcomplete steering
dictionaries, and evolves realizations step by step for tracking studies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, GridMismatchError, ShapeError

SPEED_OF_LIGHT = 299_792_458.0

# Normalised tap frequency used when collapsing delay taps into a single
# narrowband matrix; the value 1.0 reproduces the plain tap sum.
DEFAULT_TAP_FREQUENCY = 1.0

# Raised-cosine pulses are truncated beyond this many symbol periods.
PULSE_SUPPORT_PERIODS = 4.0

# Angles match a grid point when their sines agree within this tolerance.
GRID_MATCH_TOL = 1e-9

# Broadside-relative angle range covering the full spatial band
# sin(angle) in [-1, 1).
DEFAULT_DOMAIN = (-math.pi / 2.0, math.pi / 2.0)


def steering_vector(n: int, angle: float, wavelength: float, spacing: float) -> np.ndarray:
    """Unit-norm uniform-linear-array response.

    Entry k is exp(j * k * (2*pi/wavelength) * spacing * sin(angle)) / sqrt(n)
    for k = 0..n-1.
    """
    if n < 1:
        raise ShapeError(f"array size must be >= 1, got {n}")
    phase = (2.0 * np.pi / wavelength) * spacing * math.sin(angle)
    return np.exp(1j * phase * np.arange(n)) / math.sqrt(n)


def raised_cosine(t, rolloff: float, period: float):
    """Raised-cosine pulse in time, unit peak, truncated at +/-4 periods."""
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError(f"rolloff must lie in [0, 1], got {rolloff}")
    x = np.asarray(t, dtype=float) / period
    out = np.sinc(x)
    if rolloff > 0.0:
        denom = 1.0 - (2.0 * rolloff * x) ** 2
        # The removable singularity at |x| = 1/(2*rolloff) has the limit
        # (pi/4) * sinc(1/(2*rolloff)).
        singular = np.isclose(np.abs(denom), 0.0, atol=1e-12)
        safe = np.where(singular, 1.0, denom)
        out = out * np.cos(np.pi * rolloff * x) / safe
        out = np.where(singular, (np.pi / 4.0) * np.sinc(1.0 / (2.0 * rolloff)), out)
    out = np.where(np.abs(x) > PULSE_SUPPORT_PERIODS, 0.0, out)
    return out.item() if np.ndim(t) == 0 else out


@dataclass(frozen=True)
class ChannelParams:
    """Static geometry and waveform parameters of the channel model.

    Defaults follow a 28 GHz carrier with half-wavelength uniform linear
    arrays, 0.1 us sampling and a mobile at 120 km/h.
    """

    n_bs: int = 8
    n_ms: int = 8
    n_clusters: int = 2
    rays_per_cluster: int | tuple[int, ...] = 1
    carrier_wavelength: float = SPEED_OF_LIGHT / 28e9
    element_spacing: float | None = None
    sample_period: float = 1e-7
    n_delay_taps: int = 1
    pulse_rolloff: float = 0.3
    angle_spread: float = 0.1
    normalization: int | None = None
    velocity: float = 120.0 / 3.6

    def __post_init__(self):
        if min(self.n_bs, self.n_ms) < 1:
            raise ConfigError("antenna counts must be positive")
        if self.n_clusters < 1:
            raise ConfigError("need at least one cluster")
        if min(self.ray_counts()) < 1:
            raise ConfigError("each cluster needs at least one ray")
        if self.carrier_wavelength <= 0 or self.sample_period <= 0:
            raise ConfigError("wavelength and sample period must be positive")
        if self.element_spacing is not None and self.element_spacing <= 0:
            raise ConfigError("element spacing must be positive")
        if self.n_delay_taps < 1:
            raise ConfigError("need at least one delay tap")
        if not 0.0 <= self.pulse_rolloff <= 1.0:
            raise ConfigError("pulse rolloff must lie in [0, 1]")
        if self.angle_spread < 0:
            raise ConfigError("angle spread must be non-negative")
        if self.normalization is not None and self.normalization < 1:
            raise ConfigError("normalization must be a positive ray count")

    def ray_counts(self, n_clusters: int | None = None) -> tuple[int, ...]:
        """Per-cluster ray counts, broadcasting a scalar setting."""
        n = self.n_clusters if n_clusters is None else n_clusters
        if isinstance(self.rays_per_cluster, int):
            return (self.rays_per_cluster,) * n
        counts = tuple(self.rays_per_cluster)
        if len(counts) != n:
            raise ConfigError(
                f"{len(counts)} ray counts given for {n} clusters"
            )
        return counts

    @property
    def spacing(self) -> float:
        return (
            self.element_spacing
            if self.element_spacing is not None
            else self.carrier_wavelength / 2.0
        )

    def steering_bs(self, angle: float) -> np.ndarray:
        return steering_vector(self.n_bs, angle, self.carrier_wavelength, self.spacing)

    def steering_ms(self, angle: float) -> np.ndarray:
        return steering_vector(self.n_ms, angle, self.carrier_wavelength, self.spacing)


@dataclass(frozen=True)
class Ray:
    """Single propagation path within a cluster."""

    gain: complex
    aoa_offset: float
    aod_offset: float
    delay: float
    doppler: float


@dataclass(frozen=True)
class PathCluster:
    """Scattering cluster: mean angles, mean delay and its rays."""

    mean_aoa: float
    mean_aod: float
    delay: float
    rays: tuple[Ray, ...]

    def __post_init__(self):
        if len(self.rays) < 1:
            raise ConfigError("cluster holds no rays")
        if self.delay < 0:
            raise ConfigError("cluster delay must be non-negative")


@dataclass(frozen=True)
class ChannelRealization:
    """Snapshot of the channel at one time index.

    ``matrix`` caches the narrowband channel (tap sum at the default
    normalised frequency) and is derived, never set by callers.
    """

    params: ChannelParams
    clusters: tuple[PathCluster, ...]
    time_index: int = 0
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrix", channel_matrix(self))

    @property
    def total_rays(self) -> int:
        return sum(len(c.rays) for c in self.clusters)

    def iter_rays(self):
        """Yield (cluster_idx, ray_idx, ray, eff_aoa, eff_aod, delay)."""
        for ci, cluster in enumerate(self.clusters):
            for ri, ray in enumerate(cluster.rays):
                yield (
                    ci,
                    ri,
                    ray,
                    cluster.mean_aoa - ray.aoa_offset,
                    cluster.mean_aod - ray.aod_offset,
                    cluster.delay + ray.delay,
                )


def _ray_scale(real: ChannelRealization) -> float:
    params = real.params
    l_p = params.normalization if params.normalization is not None else real.total_rays
    return math.sqrt(params.n_bs * params.n_ms / l_p)


def delay_tap_matrix(real: ChannelRealization, d: int) -> np.ndarray:
    """Channel matrix of delay tap ``d``.

    Sums scaled per-ray outer products a_ms(aoa) @ a_bs(aod)^H weighted by
    the complex gain and the pulse sampled at d*Ts - delay.
    """
    params = real.params
    if not 0 <= d < params.n_delay_taps:
        raise ShapeError(
            f"tap index {d} outside [0, {params.n_delay_taps})"
        )
    scale = _ray_scale(real)
    h = np.zeros((params.n_ms, params.n_bs), dtype=np.complex128)
    for _, _, ray, aoa, aod, delay in real.iter_rays():
        pulse = raised_cosine(
            d * params.sample_period - delay, params.pulse_rolloff, params.sample_period
        )
        if pulse == 0.0:
            continue
        a_ms = params.steering_ms(aoa)
        a_bs = params.steering_bs(aod)
        h += (scale * ray.gain * pulse) * np.outer(a_ms, a_bs.conj())
    return h


def _tap_weights(real: ChannelRealization, f0: float) -> np.ndarray:
    d = np.arange(real.params.n_delay_taps)
    return np.exp(-2j * np.pi * f0 * d)


def channel_matrix(
    real: ChannelRealization, f0: float = DEFAULT_TAP_FREQUENCY
) -> np.ndarray:
    """Narrowband channel: tap sum weighted by exp(-j*2*pi*f0*d)."""
    weights = _tap_weights(real, f0)
    h = np.zeros((real.params.n_ms, real.params.n_bs), dtype=np.complex128)
    for d, w in enumerate(weights):
        h += w * delay_tap_matrix(real, d)
    return h


@dataclass(frozen=True)
class AngularDictionary:
    """Overcomplete steering dictionaries on sine-uniform angle grids."""

    a_ms: np.ndarray
    a_bs: np.ndarray
    grid_aoa: np.ndarray
    grid_aod: np.ndarray

    @property
    def size_aoa(self) -> int:
        return self.grid_aoa.size

    @property
    def size_aod(self) -> int:
        return self.grid_aod.size


def _sin_grid(domain: tuple[float, float], size: int) -> np.ndarray:
    lo, hi = domain
    if not hi > lo:
        raise ConfigError(f"empty angle domain {domain}")
    candidates = [math.sin(lo), math.sin(hi)]
    if lo <= math.pi / 2 <= hi:
        candidates.append(1.0)
    if lo <= -math.pi / 2 <= hi:
        candidates.append(-1.0)
    smin, smax = min(candidates), max(candidates)
    if smax - smin >= 2.0 - 1e-12:
        # Full band: sines -1 and +1 alias to the same steering vector, so
        # the endpoint is dropped.  At one point per antenna the columns
        # then form an orthonormal DFT basis.
        sins = smin + (smax - smin) * np.arange(size) / size
    else:
        sins = np.linspace(smin, smax, size)
    return np.arcsin(sins)


def make_dictionary(
    params: ChannelParams,
    size_ms: int | None = None,
    size_bs: int | None = None,
    domain: tuple[float, float] = DEFAULT_DOMAIN,
) -> AngularDictionary:
    """Build AoA/AoD steering dictionaries, 2x the antenna count by default.

    Grid points are uniform in sin(angle) over the sine range the domain
    reaches, which makes the columns a uniform spatial-frequency grid.
    """
    l1 = 2 * params.n_ms if size_ms is None else size_ms
    l2 = 2 * params.n_bs if size_bs is None else size_bs
    if l1 < params.n_ms or l2 < params.n_bs:
        raise ConfigError("dictionary grids must be at least the antenna count")
    grid_aoa = _sin_grid(domain, l1)
    grid_aod = _sin_grid(domain, l2)
    a_ms = np.stack([params.steering_ms(a) for a in grid_aoa], axis=1)
    a_bs = np.stack([params.steering_bs(a) for a in grid_aod], axis=1)
    return AngularDictionary(a_ms=a_ms, a_bs=a_bs, grid_aoa=grid_aoa, grid_aod=grid_aod)


def _grid_index(angle: float, grid: np.ndarray) -> int | None:
    dist = np.abs(np.sin(grid) - math.sin(angle))
    idx = int(np.argmin(dist))
    return idx if dist[idx] < GRID_MATCH_TOL else None


def _snap_offset(mean: float, offset: float, grid: np.ndarray) -> float:
    """Adjust an angle offset so mean - offset lands exactly on the grid."""
    dist = np.abs(np.sin(grid) - math.sin(mean - offset))
    return mean - float(grid[int(np.argmin(dist))])


def sample_realization(
    params: ChannelParams,
    rng: np.random.Generator,
    dictionary: AngularDictionary | None = None,
    time_index: int = 0,
    domain: tuple[float, float] = DEFAULT_DOMAIN,
) -> ChannelRealization:
    """Draw a random realization; grid snapping keeps rays on-dictionary.

    Gains are i.i.d. circularly-symmetric unit-variance complex Gaussian,
    Doppler shifts come from uniform aspect angles at ``params.velocity``.
    """
    clusters = []
    occupied: set = set()
    for count in params.ray_counts():
        cluster = _draw_cluster(params, count, rng, dictionary, domain, occupied)
        clusters.append(cluster)
        if dictionary is not None:
            occupied |= _cluster_cells(cluster, dictionary)
    return ChannelRealization(params=params, clusters=tuple(clusters), time_index=time_index)


def _cluster_cells(cluster: PathCluster, dictionary: AngularDictionary) -> set:
    """Grid cells (i, j) occupied by a cluster's snapped rays."""
    cells = set()
    for ray in cluster.rays:
        i = _grid_index(cluster.mean_aoa - ray.aoa_offset, dictionary.grid_aoa)
        j = _grid_index(cluster.mean_aod - ray.aod_offset, dictionary.grid_aod)
        if i is not None and j is not None:
            cells.add((i, j))
    return cells


def _draw_cluster(
    params: ChannelParams,
    n_rays: int,
    rng: np.random.Generator,
    dictionary: AngularDictionary | None,
    domain: tuple[float, float] = DEFAULT_DOMAIN,
    occupied: set | None = None,
) -> PathCluster:
    # Grid-snapped draws reject AoA rows and AoD columns already taken by
    # earlier clusters.  Sharing an axis cell collapses the matrix rank
    # below the ray count, which breaks every rank-based sparsity budget;
    # well-separated clusters are the operating assumption here.
    for _ in range(64):
        cluster = _draw_cluster_once(params, n_rays, rng, dictionary, domain)
        if dictionary is None or not occupied:
            return cluster
        rows = {i for i, _ in occupied}
        cols = {j for _, j in occupied}
        cells = _cluster_cells(cluster, dictionary)
        if not any(i in rows or j in cols for i, j in cells):
            return cluster
    return cluster


def _draw_cluster_once(
    params: ChannelParams,
    n_rays: int,
    rng: np.random.Generator,
    dictionary: AngularDictionary | None,
    domain: tuple[float, float] = DEFAULT_DOMAIN,
) -> PathCluster:
    if dictionary is not None:
        mean_aoa = float(rng.choice(dictionary.grid_aoa))
        mean_aod = float(rng.choice(dictionary.grid_aod))
    else:
        mean_aoa = float(rng.uniform(*domain))
        mean_aod = float(rng.uniform(*domain))
    span = (params.n_delay_taps - 1) * params.sample_period
    delay = float(rng.uniform(0.0, span)) if span > 0 else 0.0
    rays = []
    for _ in range(n_rays):
        aoa_off = float(rng.normal(0.0, params.angle_spread))
        aod_off = float(rng.normal(0.0, params.angle_spread))
        if dictionary is not None:
            aoa_off = _snap_offset(mean_aoa, aoa_off, dictionary.grid_aoa)
            aod_off = _snap_offset(mean_aod, aod_off, dictionary.grid_aod)
        gain = complex(rng.normal(), rng.normal()) / math.sqrt(2.0)
        ray_delay = float(rng.uniform(0.0, 0.25 * params.sample_period))
        aspect = rng.uniform(0.0, 2.0 * np.pi)
        doppler = params.velocity / params.carrier_wavelength * math.cos(aspect)
        rays.append(
            Ray(gain=gain, aoa_offset=aoa_off, aod_offset=aod_off, delay=ray_delay, doppler=doppler)
        )
    return PathCluster(mean_aoa=mean_aoa, mean_aod=mean_aod, delay=delay, rays=tuple(rays))


def angular_factorization(
    real: ChannelRealization,
    dictionary: AngularDictionary,
    f0: float = DEFAULT_TAP_FREQUENCY,
) -> np.ndarray:
    """Sparse angular-domain gain matrix Hbar with one entry per ray.

    Satisfies a_ms @ Hbar @ a_bs^H == channel_matrix(real) when every
    effective ray angle coincides with a grid point; rays landing in the
    same cell accumulate.

    Raises
    ------
    GridMismatchError
        Naming the first cluster/ray whose angle is off the grid.
    """
    params = real.params
    scale = _ray_scale(real)
    weights = _tap_weights(real, f0)
    hbar = np.zeros((dictionary.size_aoa, dictionary.size_aod), dtype=np.complex128)
    for ci, ri, ray, aoa, aod, delay in real.iter_rays():
        i = _grid_index(aoa, dictionary.grid_aoa)
        j = _grid_index(aod, dictionary.grid_aod)
        if i is None or j is None:
            which = "AoA" if i is None else "AoD"
            raise GridMismatchError(
                f"cluster {ci} ray {ri}: {which} off the dictionary grid"
            )
        pulse = raised_cosine(
            np.arange(params.n_delay_taps) * params.sample_period - delay,
            params.pulse_rolloff,
            params.sample_period,
        )
        hbar[i, j] += scale * ray.gain * np.sum(np.atleast_1d(pulse) * weights)
    return hbar


def _evolve_cluster(
    cluster: PathCluster,
    params: ChannelParams,
    rng: np.random.Generator | None,
    angle_walk_std: float,
) -> PathCluster:
    rays = tuple(
        replace(ray, gain=ray.gain * np.exp(2j * np.pi * ray.doppler * params.sample_period))
        for ray in cluster.rays
    )
    mean_aoa, mean_aod = cluster.mean_aoa, cluster.mean_aod
    if angle_walk_std > 0.0:
        if rng is None:
            raise ConfigError("angle walk requires a random generator")
        mean_aoa += float(rng.normal(0.0, angle_walk_std))
        mean_aod += float(rng.normal(0.0, angle_walk_std))
    return PathCluster(mean_aoa=mean_aoa, mean_aod=mean_aod, delay=cluster.delay, rays=rays)


def evolve(
    real: ChannelRealization,
    steps: int,
    rank_schedule=None,
    rng: np.random.Generator | None = None,
    angle_walk_std: float = 0.0,
    dictionary: AngularDictionary | None = None,
) -> list[ChannelRealization]:
    """Advance a realization ``steps`` times.

    Per step every ray gain rotates by exp(j*2*pi*doppler*Ts), cluster
    mean angles random-walk when ``angle_walk_std`` > 0, and
    ``rank_schedule`` entries (time, n_clusters) add or remove clusters
    when their absolute time index is reached.

    Returns the ``steps`` new realizations, excluding the input.
    """
    if steps < 0:
        raise ConfigError("steps must be non-negative")
    schedule = {}
    if rank_schedule:
        for when, count in rank_schedule:
            if not real.time_index < when <= real.time_index + steps:
                raise ConfigError(
                    f"schedule time {when} outside horizon "
                    f"({real.time_index}, {real.time_index + steps}]"
                )
            if count < 1:
                raise ConfigError("scheduled cluster count must be positive")
            schedule[int(when)] = int(count)

    out = []
    current = real
    params = real.params
    for _ in range(steps):
        t = current.time_index + 1
        clusters = [
            _evolve_cluster(c, params, rng, angle_walk_std) for c in current.clusters
        ]
        if t in schedule:
            target = schedule[t]
            if target < len(clusters):
                clusters = clusters[:target]
            while len(clusters) > 0 and len(clusters) < target:
                if rng is None:
                    raise ConfigError("cluster birth requires a random generator")
                counts = params.ray_counts(target)
                occupied: set = set()
                if dictionary is not None:
                    for existing in clusters:
                        occupied |= _cluster_cells(existing, dictionary)
                clusters.append(
                    _draw_cluster(
                        params,
                        counts[len(clusters)],
                        rng,
                        dictionary,
                        occupied=occupied,
                    )
                )
        current = ChannelRealization(
            params=params, clusters=tuple(clusters), time_index=t
        )
        out.append(current)
    return out
