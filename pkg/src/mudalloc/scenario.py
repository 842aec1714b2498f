"""Reproducible problem instances: geometry, path loss, fading, signatures.

All draws come from one ``numpy.random.Generator`` seeded with
``ScenarioConfig.rng_seed`` in a fixed order (geometry, signatures, fading),
so a config fully determines its :class:`Scenario`.
"""
from dataclasses import dataclass, field, fields, replace
from functools import cached_property

import numpy as np

from .errors import ConfigError

__all__ = [
    "BOLTZMANN",
    "FADING_MODELS",
    "INTERFERENCE_VARIANTS",
    "ScenarioConfig",
    "SignatureMatrix",
    "ChannelTensor",
    "Scenario",
    "fspl_db",
    "path_loss",
    "generate_geometry",
    "slant_ranges",
    "generate_signatures",
    "draw_fading",
    "generate_channels",
    "build_scenario",
]

BOLTZMANN = 1.380649e-23  # J/K
FADING_MODELS = ("none", "rayleigh", "rician")
INTERFERENCE_VARIANTS = ("as_printed", "complement")


@dataclass(frozen=True)
class ScenarioConfig:
    """Problem dimensions, link budget and random seed.

    Defaults follow the simulation setup of the load-allocation study:
    K=32 users on N=12 resource elements seen by J=8 satellites at 600 km,
    2 GHz carrier, 15 MHz bandwidth, -7 dBW user EIRP, -33.6 dB/K G/T and
    -173 dBm/Hz noise density.
    """

    num_users: int = 32
    num_res: int = 12
    num_sats: int = 8
    modulation_order: int = 4
    carrier_freq_hz: float = 2e9
    bandwidth_hz: float = 15e6
    orbit_altitude_m: float = 600e3
    eirp_dbw: float = -7.0
    g_over_t_dbk: float = -33.6
    noise_density_dbm_hz: float = -173.0
    fading_model: str = "rician"
    rician_k_db: float = 10.0
    signature_column_weight: int = 2
    rng_seed: int = 0
    disc_radius_m: float = 500e3
    sat_spacing_m: float = 150e3
    epsilon: float = 0.2
    interference_variant: str = "as_printed"

    def __post_init__(self):
        K, N, J, M = self.num_users, self.num_res, self.num_sats, self.modulation_order
        if min(K, N, J) < 1:
            raise ConfigError(f"K, N, J must be >= 1 (got {K}, {N}, {J})")
        if M < 2 or M & (M - 1):
            raise ConfigError(f"modulation_order must be a power of two >= 2 (got {M})")
        if not 1 <= self.signature_column_weight <= N:
            raise ConfigError(
                f"signature_column_weight must lie in [1, N={N}] (got {self.signature_column_weight})"
            )
        if self.fading_model not in FADING_MODELS:
            raise ConfigError(f"fading_model must be one of {FADING_MODELS}")
        if self.interference_variant not in INTERFERENCE_VARIANTS:
            raise ConfigError(f"interference_variant must be one of {INTERFERENCE_VARIANTS}")
        for name in ("carrier_freq_hz", "bandwidth_hz", "orbit_altitude_m"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.disc_radius_m < 0 or self.sat_spacing_m < 0:
            raise ConfigError("disc_radius_m and sat_spacing_m must be non-negative")
        if not self.epsilon >= 0:
            raise ConfigError(f"epsilon must be non-negative (got {self.epsilon})")
        if self.rng_seed < 0:
            raise ConfigError("rng_seed must be an unsigned integer")

    @classmethod
    def field_types(cls):
        return {f.name: f.type for f in fields(cls)}

    def with_(self, **changes):
        return replace(self, **changes)

    @property
    def noise_density_w_hz(self):
        return 10.0 ** ((self.noise_density_dbm_hz - 30.0) / 10.0)

    @property
    def noise_power(self):
        """Noise power per resource element in watts."""
        return self.noise_density_w_hz * self.bandwidth_hz / self.num_res

    @property
    def link_gain(self):
        """EIRP times receive antenna gain, in linear units.

        The receive gain is G/T times the system temperature implied by the
        noise density (T = N0 / k).
        """
        eirp_w = 10.0 ** (self.eirp_dbw / 10.0)
        g_over_t = 10.0 ** (self.g_over_t_dbk / 10.0)
        t_sys = self.noise_density_w_hz / BOLTZMANN
        return eirp_w * g_over_t * t_sys


def _frozen(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SignatureMatrix:
    """Sparse spreading signatures, one unit-norm column per user."""

    s: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.s)
        if s.ndim != 2:
            raise ConfigError("signature matrix must be 2-D (N x K)")
        object.__setattr__(self, "s", _frozen(s.astype(complex)))

    @property
    def shape(self):
        return self.s.shape

    @cached_property
    def occupancy(self):
        """F(n): tuple of user indices occupying each resource element."""
        nz = self.s != 0
        return tuple(tuple(int(k) for k in np.flatnonzero(row)) for row in nz)

    @property
    def d_f(self):
        return int(max(len(f) for f in self.occupancy))

    @property
    def column_weights(self):
        return np.count_nonzero(self.s, axis=0)

    @property
    def row_degrees(self):
        return np.count_nonzero(self.s, axis=1)


@dataclass(frozen=True, eq=False)
class ChannelTensor:
    """Complex gains ``h[n, k, j]``, slant ranges ``distances[k, j]`` and per-RE noise power."""

    h: np.ndarray
    sigma2: float
    distances: np.ndarray = None

    def __post_init__(self):
        h = np.asarray(self.h)
        if h.ndim != 3:
            raise ConfigError("channel tensor must be 3-D (N x K x J)")
        if not self.sigma2 > 0:
            raise ConfigError(f"noise power must be positive (got {self.sigma2})")
        object.__setattr__(self, "h", _frozen(h.astype(complex)))
        if self.distances is not None:
            object.__setattr__(self, "distances", _frozen(np.asarray(self.distances, float)))


@dataclass(frozen=True, eq=False)
class Scenario:
    config: ScenarioConfig
    signatures: SignatureMatrix
    channel: ChannelTensor
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        N, K = self.signatures.shape
        if self.channel.h.shape != (N, K, self.channel.h.shape[2]):
            raise ConfigError(
                f"channel shape {self.channel.h.shape} inconsistent with signatures {self.signatures.shape}"
            )
        c = self.config
        if (c.num_res, c.num_users, c.num_sats) != self.channel.h.shape:
            raise ConfigError(
                f"config dimensions {(c.num_res, c.num_users, c.num_sats)} "
                f"do not match channel {self.channel.h.shape}"
            )

    @classmethod
    def from_arrays(cls, h, s, sigma2, epsilon=0.0, modulation_order=4,
                    interference_variant="as_printed"):
        """Wrap hand-built arrays; ``h`` is N x K x J and ``s`` is N x K."""
        h = np.asarray(h, dtype=complex)
        s = np.asarray(s, dtype=complex)
        N, K, J = h.shape
        dv = int(np.count_nonzero(s, axis=0).max()) if s.size else 1
        config = ScenarioConfig(
            num_users=K, num_res=N, num_sats=J, modulation_order=modulation_order,
            signature_column_weight=max(1, min(dv, N)), epsilon=epsilon,
            interference_variant=interference_variant,
        )
        return cls(config, SignatureMatrix(s), ChannelTensor(h, float(sigma2)))

    @property
    def dims(self):
        """(N, K, J)."""
        return self.channel.h.shape

    @property
    def sigma2(self):
        return self.channel.sigma2

    def _cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = _frozen(fn())
        return self._cache[key]

    @property
    def gain2(self):
        """|h[n, k, j]|^2."""
        return self._cached("gain2", lambda: np.abs(self.channel.h) ** 2)

    @property
    def sig2(self):
        """|s[n, k]|^2."""
        return self._cached("sig2", lambda: np.abs(self.signatures.s) ** 2)

    @property
    def power(self):
        """|h[n, k, j] s[n, k]|^2, the received signal power coefficient."""
        return self._cached("power", lambda: self.gain2 * self.sig2[:, :, None])

    @property
    def sic_order(self):
        """order[n, :, j] lists users by descending |h[n, k, j]|^2, ties by index."""
        return self._cached("order", lambda: np.argsort(-self.gain2, axis=1, kind="stable"))

    @property
    def sic_rank(self):
        """rank[n, k, j] is the position of user k in ``sic_order[n, :, j]``."""
        return self._cached("rank", lambda: np.argsort(self.sic_order, axis=1, kind="stable"))


def fspl_db(distance_m, carrier_freq_hz):
    """Free-space path loss in dB with distance in m and frequency in Hz."""
    d = np.asarray(distance_m, dtype=float)
    f = np.asarray(carrier_freq_hz, dtype=float)
    if np.any(d <= 0) or np.any(f <= 0):
        raise ConfigError("path loss needs positive distance and frequency")
    return 20.0 * np.log10(d / 1e3) + 20.0 * np.log10(f / 1e9) + 92.45


def path_loss(distance_m, carrier_freq_hz):
    """Amplitude divisor D(d) with 20 log10 D equal to the free-space loss."""
    return 10.0 ** (fspl_db(distance_m, carrier_freq_hz) / 20.0)


def _place_users(config, rng):
    K = config.num_users
    r = config.disc_radius_m * np.sqrt(rng.random(K))
    phi = 2.0 * np.pi * rng.random(K)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), np.zeros(K)])


def _place_satellites(config):
    J = config.num_sats
    along = (np.arange(J) - (J - 1) / 2.0) * config.sat_spacing_m
    return np.column_stack([along, np.zeros(J), np.full(J, config.orbit_altitude_m)])


def slant_ranges(users, sats):
    """Euclidean distances between ground points (K x 3) and satellites (J x 3)."""
    users = np.asarray(users, dtype=float)
    sats = np.asarray(sats, dtype=float)
    return np.linalg.norm(users[:, None, :] - sats[None, :, :], axis=-1)


def generate_geometry(config, rng):
    """Slant ranges d[k, j] for users uniform in a ground disc under a line of satellites.

    Flat-earth local frame: the disc is centred at the origin, satellites sit
    at the orbit altitude spaced along the x axis around the disc centre.
    """
    return slant_ranges(_place_users(config, rng), _place_satellites(config))


def generate_signatures(config, rng):
    """Regular sparse +-1 signatures with balanced row degrees."""
    N, K, dv = config.num_res, config.num_users, config.signature_column_weight
    if dv > N:
        raise ConfigError(f"column weight {dv} exceeds number of REs {N}")
    s = np.zeros((N, K), dtype=complex)
    degree = np.zeros(N, dtype=int)
    for k in range(K):
        perm = rng.permutation(N)
        rows = perm[np.argsort(degree[perm], kind="stable")[:dv]]
        signs = rng.choice((-1.0, 1.0), size=dv)
        s[rows, k] = signs / np.sqrt(dv)
        degree[rows] += 1
    return SignatureMatrix(s)


def draw_fading(model, shape, rng, rician_k_db=10.0):
    """Unit-mean-power complex fading gains.

    Rician draws share one line-of-sight phase along the first axis (the
    resource elements of a given user/satellite link).
    """
    if model == "none":
        return np.ones(shape, dtype=complex)
    scatter = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    if model == "rayleigh":
        return scatter
    if model == "rician":
        kf = 10.0 ** (rician_k_db / 10.0)
        phase = np.exp(2j * np.pi * rng.random(shape[1:]))
        return np.sqrt(kf / (kf + 1.0)) * phase[None] + np.sqrt(1.0 / (kf + 1.0)) * scatter
    raise ConfigError(f"unknown fading model {model!r}")


def generate_channels(config, signatures, distances, rng):
    """h[n, k, j] = sqrt(link gain) * g[n, k, j] / D(d[k, j])."""
    N, K = signatures.shape
    distances = np.asarray(distances, dtype=float)
    if distances.shape[0] != K:
        raise ConfigError("distance matrix rows must match number of users")
    J = distances.shape[1]
    g = draw_fading(config.fading_model, (N, K, J), rng, config.rician_k_db)
    amp = np.sqrt(config.link_gain) / path_loss(distances, config.carrier_freq_hz)
    return ChannelTensor(g * amp[None], config.noise_power, distances)


def build_scenario(config):
    rng = np.random.default_rng(config.rng_seed)
    distances = generate_geometry(config, rng)
    signatures = generate_signatures(config, rng)
    channel = generate_channels(config, signatures, distances, rng)
    return Scenario(config, signatures, channel)
