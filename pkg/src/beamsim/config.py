"""Experiment configuration: defaults, presets and the INI-style config file.

Config files use ``configparser`` syntax. All keys live in sections that
only group them for readability; angles are in degrees and lists are
comma separated::

    [experiment]
    name = fig5
    n_trials = 200
    master_seed = 7

    [channel]
    sigma_lambda_sq = 4, 16
    snr_db = 20
"""

import configparser
import dataclasses
from dataclasses import dataclass, field

PRESETS = ("fig4", "fig5", "fig6_7", "fig8", "fig9", "custom")
TRACKERS = ("qlearning", "gradient")
MODES = ("online", "online_offline")
WEIGHTS = ("none", "equal_gain", "optimal")
METRIC_STATES = ("smp", "final")

SECTIONS = {
    "experiment": ("name", "n_trials", "master_seed", "n_initial_episodes", "n_total_episodes",
                   "workers"),
    "array": ("n_x", "n_y", "spacing_over_lambda", "lead_azimuths_deg", "lead_elevations_deg",
              "follower_azimuths_deg", "follower_elevations_deg"),
    "channel": ("n_followers", "sigma_lambda_sq", "snr_db", "aoa_elevation_range_deg",
                "aod_elevation_range_deg", "walk_elevation", "pilot_gain_db"),
    "learning": ("alpha", "gamma", "epsilon", "n_steps", "c_u", "c_l"),
    "tracking": ("tracker", "mode", "metric_state"),
    "combiner": ("weights", "k"),
}


class ConfigError(ValueError):
    pass


def _grid(start, step, count):
    return tuple(float(start + i * step) for i in range(count))


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "custom"
    n_followers: int = 3
    n_x: int = 4
    n_y: int = 4
    spacing_over_lambda: float = 0.5
    lead_azimuths_deg: tuple = _grid(15.0, 30.0, 12)
    lead_elevations_deg: tuple = (15.0,)
    follower_azimuths_deg: tuple = _grid(15.0, 30.0, 12)
    follower_elevations_deg: tuple = _grid(15.0, 30.0, 3)
    sigma_lambda_sq: tuple = (4.0, 16.0)
    snr_db: float = 20.0
    aoa_elevation_range_deg: tuple = (15.0, 15.0)
    aod_elevation_range_deg: tuple = (15.0, 15.0)
    walk_elevation: bool = False
    pilot_gain_db: float = 0.0
    alpha: float = 0.5
    gamma: float = 0.5
    epsilon: float = 0.1
    n_steps: int = 4
    c_u: float = 1.1
    c_l: float = 0.9
    n_initial_episodes: int = 30
    n_total_episodes: int = 150
    k: int = 1
    n_trials: int = 1000
    master_seed: int = 0
    mode: str = "online"
    tracker: str = "qlearning"
    weights: str = "none"
    metric_state: str = "smp"
    workers: int = 1

    def __post_init__(self):
        checks = [
            (self.name in PRESETS, f"unknown experiment {self.name!r}"),
            (self.tracker in TRACKERS, f"unknown tracker {self.tracker!r}"),
            (self.mode in MODES, f"unknown mode {self.mode!r}"),
            (self.weights in WEIGHTS, f"unknown weights {self.weights!r}"),
            (self.metric_state in METRIC_STATES, f"unknown metric_state {self.metric_state!r}"),
            (1 <= self.n_followers <= len(self.lead_azimuths_deg) * len(self.lead_elevations_deg),
             "need 1 <= n_followers <= N_F"),
            (self.n_x >= 1 and self.n_y >= 1, "array dimensions must be positive"),
            (0 < self.alpha < 1 and 0 < self.gamma < 1, "alpha and gamma must lie in (0, 1)"),
            (0 <= self.epsilon <= 1, "epsilon must lie in [0, 1]"),
            (0 < self.c_l <= self.c_u, "need 0 < c_l <= c_u"),
            (self.n_steps >= 1, "n_steps must be positive"),
            (1 <= self.n_initial_episodes <= self.n_total_episodes, "bad episode counts"),
            (1 <= self.k <= 3, "k must lie in 1..3"),
            (self.n_trials >= 1, "n_trials must be positive"),
            (self.workers >= 1, "workers must be positive"),
            (all(len(r) == 2 and 0 <= r[0] <= r[1] <= 90
                 for r in (self.aoa_elevation_range_deg, self.aod_elevation_range_deg)),
             "elevation ranges must be 'low, high' within [0, 90] degrees"),
            (all(s >= 0 for s in self.sigma_lambda_sq) and self.sigma_lambda_sq,
             "sigma_lambda_sq must be a non-empty list of non-negative values"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return dataclasses.asdict(self)


def _parse_value(name, raw, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(float(v) for v in raw.split(",") if v.strip())
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def load_config(path, base=None):
    """Read an INI-style config file on top of ``base`` (defaults if omitted)."""
    base = base or ExperimentConfig()
    parser = configparser.ConfigParser()
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    known = {k: s for s, keys in SECTIONS.items() for k in keys}
    defaults = base.as_dict()
    changes = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            changes[key] = _parse_value(key, raw, defaults[key])
    return base.replace(**changes)


def dump_config(cfg):
    """Config as INI text that :func:`load_config` reads back."""
    d = cfg.as_dict()
    lines = []
    for section, keys in SECTIONS.items():
        lines.append(f"[{section}]")
        for k in keys:
            v = d[k]
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            lines.append(f"{k} = {v}")
        lines.append("")
    return "\n".join(lines)


def preset(name, **overrides):
    """Base configuration of a named experiment."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    cfg = ExperimentConfig(name=name)
    if name == "fig4":
        cfg = cfg.replace(n_followers=1, sigma_lambda_sq=(16.0,), n_trials=1)
    elif name == "fig8":
        cfg = cfg.replace(mode="online_offline")
    return cfg.replace(**overrides)
