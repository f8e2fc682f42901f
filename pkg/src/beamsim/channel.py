"""Line-of-sight lead/follower channels with random-walk angles and pilot observations.

Angles are radians internally. Random-walk disturbances are specified as a
variance in squared degrees per time slot, matching how the experiments
quote them.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .array_geometry import ArrayShape, SteeringAngles, TWO_PI, array_response

HALF_PI = 0.5 * np.pi


class PowerConstraintViolated(ValueError):
    pass


def trial_rngs(master_seed, trial_index):
    """Independent (channel, noise, policy) generators of one trial.

    ``SeedSequence([master_seed, trial_index])`` is spawned into three
    children, each feeding a PCG64 generator. Keeping the channel stream
    separate means every tracker in a comparison sees the same angle
    trajectories.
    """
    ss = np.random.SeedSequence([int(master_seed), int(trial_index)])
    return tuple(np.random.default_rng(child) for child in ss.spawn(3))


def wrap_azimuth(phi):
    r = np.mod(phi, TWO_PI)
    # tiny negative inputs round up to exactly 2*pi
    return np.where(r >= TWO_PI, 0.0, r) if np.ndim(r) else (0.0 if r >= TWO_PI else float(r))


def reflect_elevation(theta, low=0.0, high=HALF_PI):
    """Fold an elevation into ``[low, high]`` by mirroring at both boundaries."""
    width = high - low
    if width <= 0:
        return np.full_like(np.asarray(theta, dtype=float), low) + 0.0 * theta
    t = np.mod(np.asarray(theta, dtype=float) - low, 2.0 * width)
    t = np.where(t > width, 2.0 * width - t, t) + low
    return t if np.ndim(t) else float(t)


@dataclass(frozen=True)
class AngleWalk:
    """Current AoA/AoD angles of one link (radians) and the per-slot disturbance variance (deg^2)."""

    phi_a: float
    theta_a: float
    phi_d: float
    theta_d: float
    sigma_lambda_sq: float = 0.0
    walk_elevation: bool = True
    theta_a_bounds: tuple = (0.0, HALF_PI)
    theta_d_bounds: tuple = (0.0, HALF_PI)

    @property
    def aoa(self):
        return SteeringAngles(self.phi_a, self.theta_a)

    @property
    def aod(self):
        return SteeringAngles(self.phi_d, self.theta_d)


def step_walk(walk, rng):
    """Advance all four angles by independent N(0, sigma_lambda_sq) degree increments.

    Azimuths wrap modulo 360 degrees; elevations reflect into their bounds
    (by default [0, 90] degrees). With ``walk_elevation=False`` the elevations stay put (the
    single-link example keeps them at 15 degrees).
    """
    if walk.sigma_lambda_sq < 0:
        raise ValueError("sigma_lambda_sq must be non-negative")
    if walk.sigma_lambda_sq == 0:
        return walk
    d = np.deg2rad(rng.normal(0.0, np.sqrt(walk.sigma_lambda_sq), size=4))
    if not walk.walk_elevation:
        d[1] = d[3] = 0.0
    return replace(
        walk,
        phi_a=float(wrap_azimuth(walk.phi_a + d[0])),
        theta_a=float(reflect_elevation(walk.theta_a + d[1], *walk.theta_a_bounds)),
        phi_d=float(wrap_azimuth(walk.phi_d + d[2])),
        theta_d=float(reflect_elevation(walk.theta_d + d[3], *walk.theta_d_bounds)),
    )


@dataclass
class LinkChannel:
    rho: complex
    walk: AngleWalk
    shape: ArrayShape

    def a_arrival(self):
        return array_response(self.walk.aoa, self.shape)

    def a_departure(self):
        return array_response(self.walk.aod, self.shape)


def channel_matrix(link):
    """Rank-one LoS channel ``rho * a_A a_D^H`` (lead side rows, follower side columns)."""
    return link.rho * np.outer(link.a_arrival(), link.a_departure().conj())


@dataclass(frozen=True)
class NoiseModel:
    """Observation noise variance and thermal noise variance used in SINR."""

    sigma_z_sq: float
    sigma_n_sq: float

    def __post_init__(self):
        if self.sigma_z_sq < 0 or self.sigma_n_sq <= 0:
            raise ValueError("noise variances must be positive")

    @classmethod
    def from_snr_db(cls, signal_power, snr_db, pilot_gain_db=0.0):
        """Thermal noise at ``snr_db`` below ``signal_power``.

        ``pilot_gain_db`` lowers the observation noise relative to the
        thermal noise, as a longer correlated pilot sequence would.
        """
        s = signal_power / 10.0 ** (snr_db / 10.0)
        return cls(s / 10.0 ** (pilot_gain_db / 10.0), s)


@dataclass(frozen=True)
class Observation:
    follower: int
    time: int
    beam_pair: tuple
    value: complex

    @property
    def power(self):
        return abs(self.value) ** 2


def complex_normal(rng, variance, size=None):
    s = np.sqrt(variance / 2.0)
    return s * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


def coupling(link, f, w):
    """Coupling coefficient ``f^H H w`` without forming H."""
    return link.rho * np.vdot(f, link.a_arrival()) * np.vdot(link.a_departure(), w)


def observe(links, u, beam_pair, noise, rng, f_codebook, w_codebook, time=0, store=None):
    """Noisy coupling observation ``f^H H_u w + z`` with ``z ~ CN(0, sigma_z^2)``.

    The observation is appended to ``store`` when one is given.
    """
    n_f, n_w = beam_pair
    value = coupling(links[u], f_codebook[n_f], w_codebook[n_w])
    if noise.sigma_z_sq > 0:
        value = value + complex_normal(rng, noise.sigma_z_sq)
    obs = Observation(u, time, (int(n_f), int(n_w)), complex(value))
    if store is not None:
        store.record(obs)
    return obs


def effective_channels(links, f_vectors, w_vectors):
    """Matrix ``G`` with column ``i`` equal to ``F_P^H H_i w_i``."""
    f_p = np.asarray(f_vectors)
    cols = [link.rho * (f_p.conj() @ link.a_arrival()) * np.vdot(link.a_departure(), w)
            for link, w in zip(links, w_vectors)]
    return np.stack(cols, axis=1)


def true_sinr(links, f_codebook, w_codebook, f_p_indices, w_p_indices, f_b, sigma_n_sq,
              atol=1e-8):
    """Per-follower SINR from the true channels under analog beams and digital weights.

    ``f_b`` column ``u`` must satisfy ``f_b[:,u]^H F_P^H F_P f_b[:,u] = 1``.
    """
    f_vectors = np.stack([f_codebook[i] for i in f_p_indices])
    w_vectors = [w_codebook[i] for i in w_p_indices]
    f_b = np.asarray(f_b, dtype=complex)
    gram = f_vectors.conj() @ f_vectors.T
    norms = np.einsum("iu,ij,ju->u", f_b.conj(), gram, f_b).real
    if np.any(np.abs(norms - 1.0) > atol):
        raise PowerConstraintViolated(f"combiner norms {norms}")
    g = effective_channels(links, f_vectors, w_vectors)
    p = np.abs(f_b.conj().T @ g) ** 2  # p[u, i]: follower i's power in combiner u
    sig = np.diag(p)
    interf = p.sum(axis=1) - sig
    return sig / (interf + sigma_n_sq)


@dataclass
class LinkSet:
    """All lead/follower links of one trial plus codebooks, noise and RNGs.

    ``rng`` draws observation noise, ``walk_rng`` the angle disturbances.

    Couplings for every (n_f, n_w) pair are cached per time slot, since the
    trackers query them many times between channel updates.
    """

    links: list
    f_codebook: object
    w_codebook: object
    noise: NoiseModel
    rng: np.random.Generator
    walk_rng: np.random.Generator = None
    time: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.walk_rng is None:
            self.walk_rng = self.rng

    @property
    def n_followers(self):
        return len(self.links)

    def advance(self):
        for link in self.links:
            link.walk = step_walk(link.walk, self.walk_rng)
        self.time += 1
        self._cache.clear()

    def coupling_grid(self, u):
        """All true couplings of follower ``u`` as an (N_F, N_W) array."""
        grid = self._cache.get(u)
        if grid is None:
            link = self.links[u]
            g_a = self.f_codebook.vectors.conj() @ link.a_arrival()
            g_d = self.w_codebook.vectors @ link.a_departure().conj()
            grid = link.rho * np.outer(g_a, g_d)
            self._cache[u] = grid
        return grid

    def coupling(self, u, n_f, n_w):
        return self.coupling_grid(u)[n_f, n_w]

    def true_power(self, u, n_f, n_w):
        return abs(self.coupling(u, n_f, n_w)) ** 2

    def observe(self, u, n_f, n_w, store=None):
        value = self.coupling(u, n_f, n_w)
        if self.noise.sigma_z_sq > 0:
            value = value + complex_normal(self.rng, self.noise.sigma_z_sq)
        obs = Observation(u, self.time, (int(n_f), int(n_w)), complex(value))
        if store is not None:
            store.record(obs)
        return obs


def make_links(rng, n_followers, shape, sigma_lambda_sq, azimuth_range_deg=(0.0, 360.0),
               elevation_a_range_deg=(0.0, 30.0), elevation_d_range_deg=(0.0, 30.0),
               walk_elevation=True):
    """Draw ``U`` links with equal power split ``|rho_u|^2 = 1/U`` and random phases.

    Initial azimuths are uniform over ``azimuth_range_deg``. Elevations
    start uniform over their ranges and their walks reflect at the range
    boundaries, which keeps followers inside their elevation zone.
    """
    links = []
    for _ in range(n_followers):
        az = np.deg2rad(rng.uniform(*azimuth_range_deg, size=2))
        el_a = np.deg2rad(rng.uniform(*elevation_a_range_deg))
        el_d = np.deg2rad(rng.uniform(*elevation_d_range_deg))
        rho = np.exp(1j * rng.uniform(0.0, TWO_PI)) / np.sqrt(n_followers)
        walk = AngleWalk(float(wrap_azimuth(az[0])), float(el_a), float(wrap_azimuth(az[1])),
                         float(el_d), sigma_lambda_sq, walk_elevation,
                         tuple(np.deg2rad(elevation_a_range_deg)),
                         tuple(np.deg2rad(elevation_d_range_deg)))
        links.append(LinkChannel(complex(rho), walk, shape))
    return links
