"""Digital weights for a set of selected analog beams, computed from coupling observations.

For selected lead beams ``F_P`` (columns) and follower beams ``w_u``, the
effective channel of follower ``u`` is the vector of couplings between
``w_u`` and every selected lead beam. Each combiner column is
``(F_P^H F_P)^{-1/2} x_u`` with ``x_u`` the maximizer of a generalized
Rayleigh quotient, which keeps the combined noise power fixed.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .numerics import inv_sqrt_pd, max_generalized_rayleigh, rayleigh_quotient
from .qtracker import BeamState

MAX_CANDIDATES = 3
MAX_FOLLOWERS = 4


class TooManyCombos(ValueError):
    pass


class NoCompleteCombo(RuntimeError):
    pass


@dataclass(frozen=True)
class ComboAssignment:
    f_indices: tuple
    w_indices: tuple


@dataclass(frozen=True)
class Missing:
    """Observations an effective channel would need but the store lacks: ``(follower, n_f, n_w)``."""

    keys: tuple


def _unique(seq):
    return list(dict.fromkeys(seq))


def enumerate_combos(candidates):
    """All analog beam assignments reachable from per-follower candidate lists.

    Lead-side and follower-side choices are combined independently: lead
    beam ``u`` ranges over the lead beams of follower ``u``'s candidates and
    follower beam ``u`` over its follower beams. Assignments reusing a lead
    beam are dropped; follower beams may repeat across followers.
    """
    U = len(candidates)
    k = max(len(c) for c in candidates)
    if U > MAX_FOLLOWERS or k > MAX_CANDIDATES:
        raise TooManyCombos(f"U={U}, k={k} exceeds enumeration limits")
    if any(len(c) == 0 for c in candidates):
        return []
    f_sets = [_unique(s.n_f for s in c) for c in candidates]
    w_sets = [_unique(s.n_w for s in c) for c in candidates]
    leads = [f for f in itertools.product(*f_sets) if len(set(f)) == U]
    follows = list(itertools.product(*w_sets))
    return [ComboAssignment(tuple(f), tuple(w)) for f in leads for w in follows]


def required_observations(combo):
    """Store keys needed to assemble the effective channels of ``combo``."""
    return [(u, f, w) for u, w in enumerate(combo.w_indices) for f in combo.f_indices]


def effective_channel(store, combo):
    """U x U matrix whose column ``u`` holds follower ``u``'s latest couplings with every selected lead beam.

    Returns :class:`Missing` if any needed observation is absent.
    """
    U = len(combo.f_indices)
    h = np.empty((U, U), dtype=complex)
    missing = []
    for u, w in enumerate(combo.w_indices):
        for j, f in enumerate(combo.f_indices):
            entry = store.get(u, f, w)
            if entry is None:
                missing.append((u, f, w))
            else:
                h[j, u] = entry[1]
    return Missing(tuple(missing)) if missing else h


def lead_matrix(f_codebook, f_indices):
    """Selected lead beams stacked as columns (N x U)."""
    return np.stack([f_codebook[i] for i in f_indices], axis=1)


def build_ab(eff, f_p, sigma_n_sq, u):
    """Signal matrix ``A`` and interference-plus-noise matrix ``B`` of follower ``u``.

    With ``G = (F_P^H F_P)^{-1/2}``: ``A = G h_u h_u^H G`` and
    ``B = sum_{i != u} G h_i h_i^H G + sigma_n^2 I``.
    """
    g = inv_sqrt_pd(f_p.conj().T @ f_p)
    gh = g @ eff
    a = np.outer(gh[:, u], gh[:, u].conj())
    others = np.delete(gh, u, axis=1)
    b = others @ others.conj().T + sigma_n_sq * np.eye(eff.shape[0])
    return a, b


def optimal_weights(eff, f_p, sigma_n_sq):
    """SINR-maximizing digital weights and the SINRs they are predicted to reach.

    Returns
    -------
    f_b : ndarray (U, U)
        Column ``u`` is ``(F_P^H F_P)^{-1/2} x_u`` for the unit-norm
        maximizer ``x_u``; it satisfies the combiner power constraint.
    approx_sinrs : ndarray (U,)
        Predicted SINR of every follower (linear scale).
    """
    U = eff.shape[1]
    g = inv_sqrt_pd(f_p.conj().T @ f_p)
    xs, vals = [], []
    for u in range(U):
        a, b = build_ab(eff, f_p, sigma_n_sq, u)
        x, v = max_generalized_rayleigh(a, b)
        xs.append(x)
        vals.append(v)
    return g @ np.stack(xs, axis=1), np.array(vals)


def equal_gain_weights(f_p):
    """Identity combiner, each column scaled to meet the power constraint."""
    gram_diag = np.einsum("nu,nu->u", f_p.conj(), f_p).real
    return np.diag(1.0 / np.sqrt(gram_diag)).astype(complex)


def approx_sinrs(eff, f_p, f_b, sigma_n_sq):
    """Predicted per-follower SINR of an arbitrary combiner from the effective channels."""
    p = np.abs(f_b.conj().T @ eff) ** 2
    sig = np.diag(p)
    gram = f_p.conj().T @ f_p
    noise = sigma_n_sq * np.einsum("iu,ij,ju->u", f_b.conj(), gram, f_b).real
    return sig / (p.sum(axis=1) - sig + noise)


@dataclass
class Selection:
    combo: ComboAssignment
    f_b: np.ndarray
    approx_sinrs: np.ndarray
    n_combos: int

    @property
    def score(self):
        return float(self.approx_sinrs.sum())


def optimal_sinr_batch(effs, f_ps, sigma_n_sq):
    """Maximal predicted SINRs for a stack of combos, shape ``(C, U)``.

    ``A_u`` has rank one, ``A_u = a a^H`` with ``a = G h_u``, so its largest
    generalized eigenvalue against ``B_u`` is ``a^H B_u^{-1} a``. This is
    the same value :func:`optimal_weights` reaches through the eigenvector,
    computed for all combos in one batched solve.
    """
    grams = np.einsum("cnu,cnv->cuv", f_ps.conj(), f_ps)
    w, v = np.linalg.eigh(grams)
    g = np.einsum("cuk,ck,cvk->cuv", v, 1.0 / np.sqrt(w), v.conj())
    gh = g @ effs                                      # (C, U, U), column u is a_u
    C, U, _ = gh.shape
    full = gh @ gh.conj().transpose(0, 2, 1)           # sum over all followers
    out = np.empty((C, U))
    eye = sigma_n_sq * np.eye(U)
    for u in range(U):
        a = gh[:, :, u]
        b = full - np.einsum("ci,cj->cij", a, a.conj()) + eye
        out[:, u] = np.einsum("ci,ci->c", a.conj(), np.linalg.solve(b, a[:, :, None])[:, :, 0]).real
    return out


def select_best_combo(combos, store, f_codebook, sigma_n_sq, weights="optimal"):
    """Combination with the largest predicted sum SINR (linear), with its weights.

    Combos lacking an observation are skipped. ``weights="equal_gain"``
    scores the identity combiner instead of the optimal one.
    """
    complete, effs = [], []
    for combo in combos:
        eff = effective_channel(store, combo)
        if not isinstance(eff, Missing):
            complete.append(combo)
            effs.append(eff)
    if not complete:
        raise NoCompleteCombo(f"none of {len(combos)} combos has complete observations")
    f_ps = [lead_matrix(f_codebook, c.f_indices) for c in complete]
    if weights == "optimal":
        scores = optimal_sinr_batch(np.stack(effs), np.stack(f_ps), sigma_n_sq).sum(axis=1)
    elif weights == "equal_gain":
        scores = [approx_sinrs(e, f, equal_gain_weights(f), sigma_n_sq).sum()
                  for e, f in zip(effs, f_ps)]
    else:
        raise ValueError(f"unknown weights {weights!r}")
    i = int(np.argmax(scores))
    if weights == "optimal":
        f_b, sinrs = optimal_weights(effs[i], f_ps[i], sigma_n_sq)
    else:
        f_b = equal_gain_weights(f_ps[i])
        sinrs = approx_sinrs(effs[i], f_ps[i], f_b, sigma_n_sq)
    return Selection(complete[i], f_b, sinrs, len(combos))


def candidate_sets(store, selected, k, since=None):
    """Per-follower candidate lists: the tracker's selected pair first, then the strongest others.

    Extra candidates come from observations taken at or after ``since``.
    """
    out = []
    for u, s in enumerate(selected):
        extra = [c for c in store.top_states(u, k + 1, since=since) if c != s]
        out.append([BeamState(*s)] + extra[: k - 1])
    return out


def probe_schedule(candidates, store, since=None):
    """Pilot slots that fill every missing (or older than ``since``) observation the combos need.

    Each slot assigns one follower beam per follower and up to ``U`` lead
    beams; every transmitting follower is correlated on all of them.
    Returns a list of ``(lead_beams, {follower: n_w})``.
    """
    U = len(candidates)
    leads = _unique(s.n_f for c in candidates for s in c)
    chunks = [leads[i:i + U] for i in range(0, len(leads), U)]
    w_sets = [_unique(s.n_w for s in c) for c in candidates]

    def stale(u, f, w):
        entry = store.get(u, f, w)
        return entry is None or (since is not None and entry[0] < since)

    slots = []
    for r in range(max(len(w) for w in w_sets)):
        for chunk in chunks:
            tx = {u: ws[r] for u, ws in enumerate(w_sets)
                  if r < len(ws) and any(stale(u, f, ws[r]) for f in chunk)}
            if tx:
                slots.append((tuple(chunk), tx))
    return slots
