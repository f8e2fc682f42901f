"""Neighbor-search beam tracker used as the reference method.

Initial search probes one scheduled beam pair per episode. Each tracking
episode then probes the four grid neighbors of the current pair, one per
slot, and moves to the strongest if it beats the current pair.
"""

import numpy as np

from .qtracker import (
    ACTIONS, INITIAL_SEARCH, BeamState, EpisodeReport, ObservationStore, StepLog,
    free_lead_beam, initial_search_schedule, move,
)


def baseline_initial_search(observe, schedule):
    """Probe each scheduled pair once via ``observe(state) -> power``; return the first strongest."""
    if not schedule:
        raise ValueError("empty schedule")
    powers = [observe(s) for s in schedule]
    return schedule[int(np.argmax(powers))], max(powers)


def baseline_episode(current, current_power, observe, n_f, n_w, blocked_nf=()):
    """Probe the four circular neighbors of ``current``; move to the best one if it is stronger.

    Neighbors landing on a lead beam in ``blocked_nf`` are not probed.
    Returns ``(next_state, its_power, probed)`` where ``probed`` maps each
    probed neighbor to its observed power.
    """
    probed = {}
    for a in ACTIONS:
        nb = move(current, a, n_f, n_w)
        if nb.n_f in blocked_nf:
            continue
        probed[nb] = observe(nb)
    if probed:
        best = max(probed, key=lambda s: probed[s])
        if probed[best] > current_power:
            return best, probed[best], probed
    return current, current_power, probed


class GradientTracker:
    """Multi-follower neighbor-search tracker with the same episode interface as the Q-learner.

    During initial search each follower probes schedule entry ``episode``
    (lead beams shifted apart when followers collide) in the first slot of
    the episode. At the first tracking episode each follower jumps to its
    strongest probed pair. Tracking episodes refresh the current pair's
    power from the previous data frame, probe the neighbors in slots 0..3,
    and then move followers in descending power order without lead-beam
    collisions.
    """

    def __init__(self, env, n_steps=4, schedule=None, n_initial=30, log_steps=False):
        self.env = env
        self.n_steps = n_steps
        n_f, n_w = len(env.f_codebook), len(env.w_codebook)
        self.schedule = schedule or initial_search_schedule(n_f, n_w, n_initial)
        self.store = ObservationStore()
        U = env.n_followers
        self.states = [None] * U
        self.powers = [-np.inf] * U
        self.best = [None] * U
        self.best_power = [-np.inf] * U
        self.log_steps = log_steps

    @property
    def n_f(self):
        return len(self.env.f_codebook)

    @property
    def n_w(self):
        return len(self.env.w_codebook)

    def _observe(self, u, s):
        return self.env.observe(u, s.n_f, s.n_w, self.store).power

    def _initial_episode(self, episode, report):
        start = self.schedule[episode % len(self.schedule)]
        taken = set()
        for u in range(self.env.n_followers):
            s = BeamState(free_lead_beam(start.n_f, taken, self.n_f), start.n_w)
            taken.add(s.n_f)
            p = self._observe(u, s)
            report.pilots[u] += 1
            if p > self.best_power[u]:
                self.best[u], self.best_power[u] = s, p
            self.states[u], self.powers[u] = s, p
            if self.log_steps:
                report.steps.append(StepLog(episode, 0, u, s.n_f, s.n_w, "", 0, True, p))
        for _ in range(self.n_steps):
            self.env.advance()

    def _enter_tracking(self):
        U = self.env.n_followers
        order = sorted(range(U), key=lambda u: (-self.best_power[u], u))
        taken = set()
        for u in order:
            s = self.best[u]
            if s.n_f in taken:
                s = BeamState(free_lead_beam(s.n_f, taken, self.n_f), s.n_w)
            taken.add(s.n_f)
            self.states[u] = s
        self.best = None

    def run_episode(self, episode, phase):
        env = self.env
        U = env.n_followers
        report = EpisodeReport(episode, phase, env.time, [], [0] * U)
        if phase == INITIAL_SEARCH:
            self._initial_episode(episode, report)
            report.final_states = list(self.states)
            return report
        if self.best is not None:
            self._enter_tracking()
        # reference power measured on the previous data frame, no pilot slot
        self.powers = [self._observe(u, self.states[u]) for u in range(U)]
        probed = [dict() for _ in range(U)]
        for step, a in enumerate(ACTIONS[: self.n_steps]):
            for u in range(U):
                others = {self.states[i].n_f for i in range(U) if i != u}
                nb = move(self.states[u], a, self.n_f, self.n_w)
                report.pilots[u] += 1
                if nb.n_f in others:
                    continue
                p = self._observe(u, nb)
                probed[u][nb] = p
                if self.log_steps:
                    report.steps.append(StepLog(episode, step, u, nb.n_f, nb.n_w, a.name, 0, True, p))
            env.advance()
        for _ in range(self.n_steps - len(ACTIONS)):
            env.advance()
        order = sorted(range(U), key=lambda u: (-self.powers[u], u))
        for u in order:
            others = {self.states[i].n_f for i in range(U) if i != u}
            cands = {s: p for s, p in probed[u].items() if s.n_f not in others}
            if cands:
                best = max(cands, key=lambda s: cands[s])
                if cands[best] > self.powers[u]:
                    self.states[u], self.powers[u] = best, cands[best]
        report.final_states = list(self.states)
        return report
