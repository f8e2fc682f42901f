"""Monte-Carlo experiment runner: trials, curve presets, averaging and CSV output."""

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .array_geometry import ArrayShape, build_codebook_deg
from .channel import LinkSet, NoiseModel, make_links, trial_rngs, true_sinr
from .config import ExperimentConfig
from .gradient_baseline import GradientTracker
from .hybrid_combiner import (
    candidate_sets, enumerate_combos, probe_schedule, select_best_combo,
)
from .qtracker import (
    INITIAL_SEARCH, TRACKING, LearnParams, QLearningTracker, RewardThresholds,
    initial_search_schedule,
)
from .threshold_calibration import exceed_curves

log = logging.getLogger(__name__)


def to_db(x):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(x)


@dataclass
class MetricSeries:
    """Per-episode metrics of one trial (or their trial average).

    ``sum_power_db``: total true received power of all followers over
    ``sigma_n^2`` at the selected beam pairs. ``sinr_db``: true SINR per
    follower (episodes x followers), NaN when no digital stage runs.
    ``overhead_reduction``: cumulative percentage of tracking-step pilots
    saved, 0 during initial search.
    """

    sum_power_db: np.ndarray
    sinr_db: np.ndarray
    overhead_reduction: np.ndarray
    pilots: np.ndarray
    probe_pilots: np.ndarray

    @property
    def mean_sinr_db(self):
        return self.sinr_db.mean(axis=1)


def build_codebooks(cfg):
    shape = ArrayShape(cfg.n_x, cfg.n_y, cfg.spacing_over_lambda)
    f_cb = build_codebook_deg(cfg.lead_azimuths_deg, cfg.lead_elevations_deg, shape)
    w_cb = build_codebook_deg(cfg.follower_azimuths_deg, cfg.follower_elevations_deg, shape)
    return shape, f_cb, w_cb


def build_trial(cfg, trial_index):
    """Fresh links, environment and tracker of one trial, deterministic in ``(master_seed, trial_index)``."""
    shape, f_cb, w_cb = build_codebooks(cfg)
    chan_rng, noise_rng, policy_rng = trial_rngs(cfg.master_seed, trial_index)
    links = make_links(chan_rng, cfg.n_followers, shape, cfg.sigma_lambda_sq[0],
                       elevation_a_range_deg=cfg.aoa_elevation_range_deg,
                       elevation_d_range_deg=cfg.aod_elevation_range_deg,
                       walk_elevation=cfg.walk_elevation)
    signal_power = 1.0 / cfg.n_followers
    noise = NoiseModel.from_snr_db(signal_power, cfg.snr_db, pilot_gain_db=cfg.pilot_gain_db)
    env = LinkSet(links, f_cb, w_cb, noise, noise_rng, walk_rng=chan_rng)
    schedule = initial_search_schedule(len(f_cb), len(w_cb), cfg.n_initial_episodes)
    if cfg.tracker == "qlearning":
        tracker = QLearningTracker(
            env, LearnParams(cfg.alpha, cfg.gamma, cfg.epsilon, cfg.n_steps),
            RewardThresholds(cfg.c_u, cfg.c_l), mode=cfg.mode, schedule=schedule, rng=policy_rng)
    else:
        tracker = GradientTracker(env, n_steps=cfg.n_steps, schedule=schedule)
    return env, tracker


def _data_states(cfg, tracker, report):
    if cfg.metric_state == "final" or cfg.tracker == "gradient":
        return report.final_states
    return tracker.selected_states()


def digital_stage(cfg, env, tracker, selected, since):
    """Candidate probing, combo selection and true SINR at the current channel.

    Returns ``(sinr_linear, probe_pilots)``. Probing happens within the
    current slot, so it does not move the channel.
    """
    store = tracker.store
    cands = candidate_sets(store, selected, cfg.k, since=since)
    probes = 0
    for leads, tx in probe_schedule(cands, store, since=since):
        for u, n_w in tx.items():
            probes += 1
            for n_f in leads:
                env.observe(u, n_f, n_w, store)
    sel = select_best_combo(enumerate_combos(cands), store, env.f_codebook,
                            env.noise.sigma_n_sq, weights=cfg.weights)
    sinr = true_sinr(env.links, env.f_codebook, env.w_codebook, sel.combo.f_indices,
                     sel.combo.w_indices, sel.f_b, env.noise.sigma_n_sq, atol=1e-6)
    return sinr, probes


def run_trial(cfg, trial_index):
    """Initial search, tracking and (optionally) digital beamforming for one trial."""
    env, tracker = build_trial(cfg, trial_index)
    E, U = cfg.n_total_episodes, cfg.n_followers
    sum_power = np.empty(E)
    sinr = np.full((E, U), np.nan)
    pilots = np.zeros(E)
    probe_pilots = np.zeros(E)
    reduction = np.zeros(E)
    tracking_pilots = tracking_slots = 0
    for e in range(E):
        phase = INITIAL_SEARCH if e < cfg.n_initial_episodes else TRACKING
        report = tracker.run_episode(e, phase)
        pilots[e] = sum(report.pilots)
        if phase == TRACKING:
            tracking_pilots += pilots[e]
            tracking_slots += cfg.n_steps * U
            reduction[e] = 100.0 * (1.0 - tracking_pilots / tracking_slots)
        states = _data_states(cfg, tracker, report)
        power = sum(env.true_power(u, s.n_f, s.n_w) for u, s in enumerate(states))
        sum_power[e] = to_db(power / env.noise.sigma_n_sq)
        if cfg.weights != "none":
            s, probe_pilots[e] = digital_stage(cfg, env, tracker, states, report.start_time)
            sinr[e] = to_db(s)
    return MetricSeries(sum_power, sinr, reduction, pilots, probe_pilots)


def _run_trial_star(args):
    return run_trial(*args)


def run_trials(cfg, workers=None):
    """All trials of ``cfg`` in trial order (parallel across processes when ``workers > 1``)."""
    workers = cfg.workers if workers is None else workers
    jobs = [(cfg, i) for i in range(cfg.n_trials)]
    if workers <= 1:
        return [run_trial(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_trial_star, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


@dataclass
class Curve:
    """Trial-averaged series: ``value`` and ``stderr`` per episode, ``n`` trials each."""

    label: str
    metric: str
    value: np.ndarray
    stderr: np.ndarray
    n: int


def average(series_list, metric):
    data = np.stack([_metric(s, metric) for s in series_list])
    n = data.shape[0]
    mean = data.mean(axis=0)
    se = data.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se, n


def _metric(series, metric):
    if metric == "sum_power_db":
        return series.sum_power_db
    if metric == "sinr_db":
        return series.mean_sinr_db
    if metric == "overhead_reduction":
        return series.overhead_reduction
    raise ValueError(metric)


def curve_variants(cfg):
    """``(label, config, metrics)`` for every curve an experiment produces."""
    out = []
    for s2 in cfg.sigma_lambda_sq:
        tag = f"var{s2:g}"
        one = cfg.replace(sigma_lambda_sq=(s2,))
        if cfg.name == "fig5":
            out.append((f"qlearning_{tag}", one.replace(tracker="qlearning", mode="online"),
                        ("sum_power_db",)))
            out.append((f"gradient_{tag}", one.replace(tracker="gradient"), ("sum_power_db",)))
        elif cfg.name == "fig6_7":
            out.append((f"online_{tag}", one.replace(tracker="qlearning", mode="online"),
                        ("sum_power_db", "overhead_reduction")))
            out.append((f"online_offline_{tag}",
                        one.replace(tracker="qlearning", mode="online_offline"),
                        ("sum_power_db", "overhead_reduction")))
        elif cfg.name == "fig8":
            out.append((f"equal_gain_{tag}", one.replace(weights="equal_gain", k=1), ("sinr_db",)))
            out.append((f"optimal_k1_{tag}", one.replace(weights="optimal", k=1), ("sinr_db",)))
            out.append((f"optimal_k2_{tag}", one.replace(weights="optimal", k=2), ("sinr_db",)))
        else:
            metrics = ("sum_power_db", "overhead_reduction")
            if one.weights != "none":
                metrics += ("sinr_db",)
            out.append((f"{one.tracker}_{tag}", one, metrics))
    return out


def run_curves(cfg, workers=None):
    """Run every curve of ``cfg`` and return the averaged :class:`Curve` list."""
    curves = []
    for label, variant, metrics in curve_variants(cfg):
        log.info("running %s (%d trials)", label, variant.n_trials)
        trials = run_trials(variant, workers)
        for m in metrics:
            mean, se, n = average(trials, m)
            curves.append(Curve(label, m, mean, se, n))
    return curves


def write_curve_csv(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["episode", "value", "stderr", "n_trials"])
        for e, (v, s) in enumerate(zip(curve.value, curve.stderr)):
            w.writerow([e, f"{v:.10g}", f"{s:.10g}", curve.n])


def write_manifest(out_dir, cfg, files, extra=None):
    manifest = {"version": __version__, "config": cfg.as_dict(), "files": files}
    if cfg.name == "fig8":
        manifest["equal_gain_normalization"] = "identity columns scaled to unit combiner noise gain"
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=list)


def run_experiment(cfg, out_dir, workers=None):
    """Run an experiment and write one CSV per curve plus ``manifest.json``; returns the file list."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    if cfg.name == "fig4":
        files = [write_fig4(cfg, out_dir)]
    elif cfg.name == "fig9":
        files = [write_exceed_csv(os.path.join(out_dir, "fig9_exceed.csv"),
                                  exceed_curves(seed=cfg.master_seed))]
    else:
        files = []
        for curve in run_curves(cfg, workers):
            name = f"{cfg.name}_{curve.metric}_{curve.label}.csv"
            write_curve_csv(os.path.join(out_dir, name), curve)
            files.append(name)
    write_manifest(out_dir, cfg, files)
    return files


def write_exceed_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "snr_db", "c_u", "prob", "stderr"])
        for r in rows:
            w.writerow([f"{v:.10g}" for v in r])
    return os.path.basename(path)


def fig4_rows(cfg, trial_index=0):
    """Single-realization trajectories: true azimuths and the beams picked by both trackers."""
    variants = {t: cfg.replace(tracker=t, mode="online", n_followers=1) for t in ("qlearning", "gradient")}
    runs = {t: build_trial(v, trial_index) for t, v in variants.items()}
    rows = []
    for e in range(cfg.n_total_episodes):
        phase = INITIAL_SEARCH if e < cfg.n_initial_episodes else TRACKING
        row = {"episode": e}
        for t, (env, tracker) in runs.items():
            report = tracker.run_episode(e, phase)
            s = _data_states(variants[t], tracker, report)[0]
            walk = env.links[0].walk
            row["aoa_azimuth_deg"] = np.rad2deg(walk.phi_a)
            row["aod_azimuth_deg"] = np.rad2deg(walk.phi_d)
            row[f"{t}_lead_beam_azimuth_deg"] = np.rad2deg(env.f_codebook.angles[s.n_f].azimuth)
            row[f"{t}_follower_beam_azimuth_deg"] = np.rad2deg(env.w_codebook.angles[s.n_w].azimuth)
            row[f"{t}_snr_db"] = to_db(env.true_power(0, s.n_f, s.n_w) / env.noise.sigma_n_sq)
        rows.append(row)
    return rows


def write_fig4(cfg, out_dir):
    rows = fig4_rows(cfg)
    name = "fig4_trajectories.csv"
    with open(os.path.join(out_dir, name), "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in r.items()})
    return name
