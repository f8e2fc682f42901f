"""Tabular Q-learning analog beam tracking over the (lead beam, follower beam) grid.

A state is a beam pair ``(n_f, n_w)`` of 0-based codebook indices. Moving
``UP``/``DOWN`` steps the follower beam, ``RIGHT``/``LEFT`` the lead beam;
both indices wrap around. Every follower owns its own Q-table, and the
lead never assigns the same lead beam to two followers in one slot.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

ONLINE = "online"
ONLINE_OFFLINE = "online_offline"
INITIAL_SEARCH = "initial_search"
TRACKING = "tracking"

POWER_FLOOR = np.finfo(float).tiny


class AllActionsMasked(RuntimeError):
    pass


class Action(enum.IntEnum):
    UP = 0
    DOWN = 1
    RIGHT = 2
    LEFT = 3


ACTIONS = tuple(Action)
_DELTA = {Action.UP: (0, 1), Action.DOWN: (0, -1), Action.RIGHT: (1, 0), Action.LEFT: (-1, 0)}


class BeamState(NamedTuple):
    n_f: int
    n_w: int


def move(state, action, n_f_total, n_w_total):
    df, dw = _DELTA[Action(action)]
    return BeamState((state.n_f + df) % n_f_total, (state.n_w + dw) % n_w_total)


@dataclass(frozen=True)
class RewardThresholds:
    c_u: float = 1.1
    c_l: float = 0.9

    def __post_init__(self):
        if not 0 < self.c_l <= self.c_u:
            raise ValueError(f"need 0 < c_l <= c_u, got {self.c_l}, {self.c_u}")


@dataclass(frozen=True)
class LearnParams:
    alpha: float = 0.5
    gamma: float = 0.5
    epsilon: float = 0.1
    n_steps: int = 4

    def __post_init__(self):
        for name in ("alpha", "gamma"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")


class QTable:
    """Q-values for one follower plus its running max-power state ``s_mp``.

    ``max_power_seen`` is the latest observed power at ``s_mp``: a fresh,
    lower observation of ``s_mp`` lowers it, so a stale maximum cannot pin
    the tracker to a beam pair that has drifted away.
    """

    def __init__(self, n_f, n_w):
        self.n_f = n_f
        self.n_w = n_w
        self.values = np.zeros((n_f, n_w, len(ACTIONS)))
        self.s_mp = None
        self.max_power_seen = -math.inf

    def __getitem__(self, key):
        state, action = key
        return self.values[state.n_f, state.n_w, int(action)]

    def __setitem__(self, key, value):
        state, action = key
        self.values[state.n_f, state.n_w, int(action)] = value

    def row(self, state):
        return self.values[state.n_f, state.n_w]

    def update_smp(self, state, power):
        if state == self.s_mp:
            self.max_power_seen = power
        elif power > self.max_power_seen:
            self.s_mp = state
            self.max_power_seen = power


class ObservationStore:
    """Latest complex observation per (follower, n_f, n_w), plus an optional append log."""

    def __init__(self, keep_history=False):
        self.latest = {}
        self.history = [] if keep_history else None

    def record(self, obs):
        self.latest[(obs.follower,) + tuple(obs.beam_pair)] = (obs.time, obs.value)
        if self.history is not None:
            self.history.append(obs)

    def get(self, follower, n_f, n_w):
        return self.latest.get((follower, n_f, n_w))

    def __contains__(self, key):
        return key in self.latest

    def power(self, follower, n_f, n_w):
        entry = self.latest.get((follower, n_f, n_w))
        return None if entry is None else abs(entry[1]) ** 2

    def top_states(self, follower, k, since=None, exclude_nf=()):
        """Up to ``k`` beam pairs of ``follower`` by stored power, descending.

        Only observations taken at or after time ``since`` qualify when it is
        given; lead beams in ``exclude_nf`` are skipped.
        """
        rows = [(abs(v) ** 2, t, BeamState(nf, nw))
                for (u, nf, nw), (t, v) in self.latest.items()
                if u == follower and (since is None or t >= since) and nf not in exclude_nf]
        rows.sort(key=lambda r: (-r[0], r[2]))
        return [r[2] for r in rows[:k]]


def reward(prev_power, new_power, th):
    """+1 if the power ratio exceeds ``c_u``, 0 inside ``(c_l, c_u]``, -1 otherwise.

    A vanishing previous power counts as an infinite ratio.
    """
    if prev_power <= POWER_FLOOR:
        return 1 if new_power > 0 else 0
    ratio = new_power / prev_power
    if ratio > th.c_u:
        return 1
    if ratio > th.c_l:
        return 0
    return -1


def q_update(q, s, a, r, s_next, p):
    q[s, a] = (1.0 - p.alpha) * q[s, a] + p.alpha * (r + p.gamma * q.row(s_next).max())


def epsilon_greedy(q, s, masked, p, rng):
    """Epsilon-greedy action over the unmasked actions, ties broken uniformly at random."""
    legal = [a for a in ACTIONS if a not in masked]
    if not legal:
        raise AllActionsMasked(f"every action masked at {s}")
    explore = rng.random() < p.epsilon
    if explore:
        return legal[rng.integers(len(legal))]
    vals = q.row(s)[[int(a) for a in legal]]
    best = [a for a, v in zip(legal, vals) if v == vals.max()]
    return best[rng.integers(len(best))] if len(best) > 1 else best[0]


def _lattice_positions(n_total, count):
    return [(i * n_total) // count for i in range(count)]


def initial_search_schedule(n_f, n_w, n_episodes):
    """Starting states of the initial beam search, spread as a uniform sub-lattice.

    The lattice dimensions ``a x b`` (``a*b >= n_episodes``) minimize the
    larger of the two circular strides ``n_f/a`` and ``n_w/b``; ties go to
    the smallest surplus and then to the squarest lattice. States are listed
    lead-beam-major and truncated to ``n_episodes``.
    """
    if not 1 <= n_episodes <= n_f * n_w:
        raise ValueError(f"need 1 <= n_episodes <= {n_f * n_w}")
    best = None
    for a in range(1, n_f + 1):
        b = -(-n_episodes // a)
        if b > n_w:
            continue
        key = (max(n_f / a, n_w / b), a * b - n_episodes, abs(n_f / a - n_w / b))
        if best is None or key < best[0]:
            best = (key, a, b)
    _, a, b = best
    states = [BeamState(f, w) for f in _lattice_positions(n_f, a)
              for w in _lattice_positions(n_w, b)]
    return states[:n_episodes]


def free_lead_beam(n_f, taken, n_f_total):
    """Nearest lead beam to ``n_f`` (alternating +1, -1, +2, ...) not in ``taken``."""
    if n_f not in taken:
        return n_f
    for d in range(1, n_f_total):
        for cand in ((n_f + d) % n_f_total, (n_f - d) % n_f_total):
            if cand not in taken:
                return cand
    raise AllActionsMasked("no free lead beam left")


def collision_mask(state, others_nf, n_f_total, n_w_total):
    """Actions that would put ``state`` on a lead beam already held by another follower."""
    return {a for a in ACTIONS if move(state, a, n_f_total, n_w_total).n_f in others_nf}


def choose_multilink_actions(qtables, states, powers, params, rng):
    """One probing decision for all followers with lead-beam collision masking.

    Followers decide in descending order of ``powers`` (latest observed power
    at their current state). Each follower's mask excludes moves onto a lead
    beam held by another follower, counting already-decided followers at
    their new beams. Returns ``(actions, next_states)`` indexed by follower.
    """
    n_f_total, n_w_total = qtables[0].n_f, qtables[0].n_w
    order = sorted(range(len(states)), key=lambda u: (-powers[u], u))
    current = list(states)
    actions = [None] * len(states)
    for u in order:
        others = {current[i].n_f for i in range(len(states)) if i != u}
        masked = collision_mask(current[u], others, n_f_total, n_w_total)
        a = epsilon_greedy(qtables[u], current[u], masked, params, rng)
        actions[u] = a
        current[u] = move(current[u], a, n_f_total, n_w_total)
    return actions, current


@dataclass
class StepLog:
    episode: int
    step: int
    follower: int
    n_f: int
    n_w: int
    action: str
    reward: int
    pilot_sent: bool
    power: float


@dataclass
class EpisodeReport:
    episode: int
    phase: str
    start_time: int
    final_states: list
    pilots: list
    steps: list = field(default_factory=list)


class QLearningTracker:
    """Multi-follower Q-learning beam tracker driving a :class:`~beamsim.channel.LinkSet`.

    Each episode spends ``n_steps`` time slots. Slot 0 always sends a pilot
    at the starting state; each later slot takes one epsilon-greedy move per
    follower, gets an observation (fresh pilot, or a stored one in
    ``online_offline`` mode when the state was already observed), turns the
    power ratio into a reward and updates the Q-table and ``s_mp``.

    Whenever followers send pilots, the lead correlates each pilot on all of
    its current beams, so cross couplings ``y_u(n_f of follower j, n_w of u)``
    are stored as well.
    """

    def __init__(self, env, params=LearnParams(), thresholds=RewardThresholds(),
                 mode=ONLINE, schedule=None, n_initial=30, store=None, log_steps=False,
                 rng=None):
        if mode not in (ONLINE, ONLINE_OFFLINE):
            raise ValueError(f"unknown mode {mode!r}")
        n_f, n_w = len(env.f_codebook), len(env.w_codebook)
        if env.n_followers > n_f:
            raise ValueError("more followers than lead beams")
        self.env = env
        self.params = params
        self.thresholds = thresholds
        self.mode = mode
        self.schedule = schedule or initial_search_schedule(n_f, n_w, n_initial)
        self.qtables = [QTable(n_f, n_w) for _ in range(env.n_followers)]
        self.store = store if store is not None else ObservationStore()
        self.states = [None] * env.n_followers
        self.log_steps = log_steps
        self.rng = env.rng if rng is None else rng

    @property
    def n_f(self):
        return len(self.env.f_codebook)

    @property
    def n_w(self):
        return len(self.env.w_codebook)

    def _initial_states(self, episode):
        start = self.schedule[episode % len(self.schedule)]
        taken, states = set(), []
        for _ in range(self.env.n_followers):
            nf = free_lead_beam(start.n_f, taken, self.n_f)
            taken.add(nf)
            states.append(BeamState(nf, start.n_w))
        return states

    def _tracking_states(self):
        U = self.env.n_followers
        order = sorted(range(U), key=lambda u: (-self.qtables[u].max_power_seen, u))
        taken, states = set(), [None] * U
        for u in order:
            s = self.qtables[u].s_mp
            if s is None:
                s = self.schedule[0]
            if s.n_f in taken:
                alt = self.store.top_states(u, 1, exclude_nf=taken)
                s = alt[0] if alt else BeamState(free_lead_beam(s.n_f, taken, self.n_f), s.n_w)
            taken.add(s.n_f)
            states[u] = s
        return states

    def _pilot_slot(self, states, senders):
        """Observe every sender on all lead beams in use; return own-pair observations."""
        own = {}
        for u in senders:
            for j, sj in enumerate(states):
                obs = self.env.observe(u, sj.n_f, states[u].n_w, self.store)
                if j == u:
                    own[u] = obs
        return own

    def run_episode(self, episode, phase):
        env, p = self.env, self.params
        U = env.n_followers
        states = self._initial_states(episode) if phase == INITIAL_SEARCH else self._tracking_states()
        report = EpisodeReport(episode, phase, env.time, [], [0] * U)
        powers = [0.0] * U
        actions = [None] * U
        prev_states = list(states)
        for step in range(p.n_steps):
            if step > 0:
                actions, states = choose_multilink_actions(self.qtables, prev_states, powers, p, self.rng)
            reuse = self.mode == ONLINE_OFFLINE and phase == TRACKING and step > 0
            senders, values = [], {}
            for u in range(U):
                key = (u, states[u].n_f, states[u].n_w)
                if reuse and key in self.store:
                    values[u] = self.store.latest[key][1]
                else:
                    senders.append(u)
            values.update({u: o.value for u, o in self._pilot_slot(states, senders).items()})
            for u in range(U):
                new_power = abs(values[u]) ** 2
                r = 0
                if step > 0:
                    r = reward(powers[u], new_power, self.thresholds)
                    q_update(self.qtables[u], prev_states[u], actions[u], r, states[u], p)
                self.qtables[u].update_smp(states[u], new_power)
                powers[u] = new_power
                if u in senders:
                    report.pilots[u] += 1
                if self.log_steps:
                    report.steps.append(StepLog(
                        episode, step, u, states[u].n_f, states[u].n_w,
                        actions[u].name if step > 0 else "", r, u in senders, new_power))
            prev_states = list(states)
            env.advance()
        self.states = list(states)
        report.final_states = list(states)
        return report

    def selected_states(self):
        """Beam pairs used for data after an episode: ``s_mp`` per follower, lead beams made distinct."""
        return self._tracking_states()
