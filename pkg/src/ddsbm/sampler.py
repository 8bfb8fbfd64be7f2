"""Reversible-jump Metropolis-Hastings sampler over (Z, K, P).

Each iteration picks one of four allocation moves uniformly:

* ``mk``: add or delete an empty community,
* ``gs``: Gibbs-style relabelling of one node,
* ``m3``: sequential reshuffle of the members of two communities,
* ``ae``: merge two communities or split one in two.

Every move then redraws the whole connectivity matrix from
``Beta(O*_ab + 1, n*_ab - O*_ab + 1)`` given the proposed assignment, and is
accepted with the move-specific closed-form probability. All arithmetic is
in log space.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from ._rng import make_rng
from .identify import is_diagonally_dominant
from .model import (
    Assignment,
    BlockStats,
    Hyperparams,
    log_prior_k,
    log_prior_p,
    log_prior_z_sizes,
    move_node_inplace,
    pair_counts,
    triu_idx,
)

MOVES = ("mk", "gs", "m3", "ae")


@dataclass(frozen=True)
class ChainConfig:
    n_keep: int = 20_000
    n_burn: int = 10_000
    seed: int = 0
    hp: Hyperparams | None = None
    keep_p: bool = False

    def __post_init__(self):
        if self.n_keep < 1:
            raise ValueError("n_keep must be at least 1")
        if self.n_burn < 0:
            raise ValueError("n_burn must be non-negative")


@dataclass(frozen=True, eq=False)
class ChainState:
    """Current draw with cached block counts and log posterior."""

    z: np.ndarray
    k: int
    P: np.ndarray
    O: np.ndarray
    sizes: np.ndarray
    log_post: float

    @property
    def Z(self) -> Assignment:
        return Assignment(self.z, self.k)

    @property
    def stats(self) -> BlockStats:
        return BlockStats(self.O, pair_counts(self.sizes))

    @property
    def k_eff(self) -> int:
        return int(np.count_nonzero(self.sizes))


@dataclass(eq=False)
class ProposalOutcome:
    """A proposed (Z*, K*, P*) with its log acceptance probability.

    ``z`` is None when the move was abandoned before a proposal existed
    (deleting a non-empty community, merging with K = 1, ...).
    ``info`` records the random choices so the proposal can be replayed.
    ``log_ratio`` is the unclipped log MH ratio; ``log_alpha`` = min(0, log_ratio).
    """

    kind: str
    branch: str
    log_alpha: float
    z: np.ndarray | None = None
    k: int = 0
    P: np.ndarray | None = None
    O: np.ndarray | None = None
    sizes: np.ndarray | None = None
    log_q_p: float = math.nan
    info: dict = field(default_factory=dict)
    log_ratio: float = math.nan

    @property
    def abandoned(self) -> bool:
        return self.z is None


@dataclass(eq=False)
class Trace:
    """Retained draws: effective K, labels (0-based) and optionally P."""

    k_eff: np.ndarray
    z: np.ndarray
    declared_k: np.ndarray
    accept_counts: dict[str, tuple[int, int]]
    P: list[np.ndarray] | None = None
    seed: int | None = None

    def __len__(self) -> int:
        return len(self.k_eff)

    def assignment(self, t: int) -> Assignment:
        return Assignment(self.z[t], int(self.declared_k[t]))

    def acceptance_rates(self) -> dict[str, float]:
        return {m: (acc / prop if prop else 0.0) for m, (prop, acc) in self.accept_counts.items()}

    def dump(self, fh) -> None:
        """One line per draw: ``iter k_eff z_1 ... z_n`` with 1-based labels."""
        for t, (k, row) in enumerate(zip(self.k_eff, self.z), start=1):
            fh.write(f"{t} {int(k)} " + " ".join(str(int(v) + 1) for v in row) + "\n")

    def summary(self, config: ChainConfig | None = None) -> dict:
        out = {
            "seed": self.seed,
            "n_keep": len(self),
            "acceptance_rates": self.acceptance_rates(),
            "accept_counts": {m: list(v) for m, v in self.accept_counts.items()},
        }
        if config is not None:
            out["n_burn"] = config.n_burn
            if config.hp is not None:
                out["hp"] = {"delta_n": config.hp.delta_n, "k_max": config.hp.k_max,
                             "lambda": config.hp.lam}
        return out

    def dump_summary(self, fh, config: ChainConfig | None = None) -> None:
        json.dump(self.summary(config), fh, indent=2, sort_keys=True)
        fh.write("\n")


class SBMPosterior:
    """The network plus hyperparameters: everything a move needs besides the state."""

    def __init__(self, A, hp: Hyperparams | None = None):
        dense = np.asarray(getattr(A, "dense", A), dtype=np.float64)
        self.dense = dense
        self.n = dense.shape[0]
        self.hp = hp if hp is not None else Hyperparams.default(self.n)

    def neighbour_counts(self, z: np.ndarray, node: int, k: int) -> np.ndarray:
        return np.bincount(z, weights=self.dense[node], minlength=k).astype(np.int64)

    def log_post(self, O, sizes, P, k) -> float:
        lpk = log_prior_k(k, self.hp)
        lpp = log_prior_p(P, self.hp)
        if lpk == -math.inf or lpp == -math.inf:
            return -math.inf
        return _loglik(O, pair_counts(sizes), P) + lpp + log_prior_z_sizes(sizes, k) + lpk

    def state(self, z, k, P) -> ChainState:
        """Build a coherent state from scratch."""
        z = np.array(z, dtype=np.int64)
        n = self.n
        onehot = np.zeros((n, k))
        onehot[np.arange(n), z] = 1.0
        O = np.rint(onehot.T @ self.dense @ onehot).astype(np.int64)
        O[np.diag_indices(k)] //= 2
        sizes = np.bincount(z, minlength=k).astype(np.int64)
        P = np.array(P, dtype=float)
        z.setflags(write=False)
        return ChainState(z, k, P, O, sizes, self.log_post(O, sizes, P, k))


def _triu(M: np.ndarray) -> np.ndarray:
    return M[triu_idx(M.shape[0])]


def _loglik(O, npairs, P) -> float:
    o, m, p = _triu(O), _triu(npairs), _triu(P)
    with np.errstate(divide="ignore"):
        lp, l1p = np.log(p), np.log1p(-p)
    val = np.where(o > 0, o * lp, 0.0).sum() + np.where(m - o > 0, (m - o) * l1p, 0.0).sum()
    return float(val)


def _log_beta(O, sizes) -> float:
    o, m = _triu(O), _triu(pair_counts(sizes))
    return float(np.sum(gammaln(m + 2) - gammaln(o + 1) - gammaln(m - o + 1)))


def _draw_p(O, npairs, rng) -> tuple[np.ndarray, float]:
    k = O.shape[0]
    iu = triu_idx(k)
    o, m = O[iu], npairs[iu]
    a, b = o + 1.0, m - o + 1.0
    p = rng.beta(a, b)
    bad = (p <= 0.0) | (p >= 1.0)
    while np.any(bad):
        p[bad] = rng.beta(a[bad], b[bad])
        bad = (p <= 0.0) | (p >= 1.0)
    logdens = np.sum(gammaln(m + 2) - gammaln(o + 1) - gammaln(m - o + 1)
                     + o * np.log(p) + (m - o) * np.log1p(-p))
    P = np.empty((k, k))
    P[iu] = p
    P.T[iu] = p
    return P, float(logdens)


def propose_p(stats: BlockStats, rng) -> tuple[np.ndarray, float]:
    """Draw P*_ab ~ Beta(O_ab + 1, n_ab - O_ab + 1); return P* and its log density."""
    return _draw_p(stats.O, stats.npairs, make_rng(rng))


def beta_log_density(P, stats: BlockStats) -> float:
    """Log density of ``P`` under the Beta proposal given ``stats``."""
    iu = triu_idx(stats.k)
    o, m, p = stats.O[iu], stats.npairs[iu], np.asarray(P)[iu]
    with np.errstate(divide="ignore"):
        return float(np.sum(gammaln(m + 2) - gammaln(o + 1) - gammaln(m - o + 1)
                            + np.where(o > 0, o * np.log(p), 0.0)
                            + np.where(m - o > 0, (m - o) * np.log1p(-p), 0.0)))


def _insert_empty(z, O, sizes, pos):
    z = z + (z >= pos)
    O = np.insert(np.insert(O, pos, 0, axis=0), pos, 0, axis=1)
    sizes = np.insert(sizes, pos, 0)
    return z, O, sizes


def _remove_empty(z, O, sizes, pos):
    z = z - (z > pos)
    O = np.delete(np.delete(O, pos, axis=0), pos, axis=1)
    sizes = np.delete(sizes, pos)
    return z, O, sizes


def _relabel(target: SBMPosterior, z, O, sizes, nodes, labels) -> None:
    """Move ``nodes`` to ``labels`` one at a time, updating counts in place."""
    k = O.shape[0]
    for i, b in zip(nodes, labels):
        a = z[i]
        if a == b:
            continue
        e = target.neighbour_counts(z, i, k)
        move_node_inplace(O, sizes, e, a, b)
        z[i] = b


def _recount(target: SBMPosterior, z, O, sizes, blocks) -> None:
    """Refresh the rows and columns of ``blocks`` after their members changed.

    Only labels inside ``blocks`` may have changed since ``O`` was valid.
    """
    k = O.shape[0]
    onehot = np.zeros((z.size, k))
    onehot[np.arange(z.size), z] = 1.0
    to_block = target.dense @ onehot
    for c in blocks:
        row = np.rint(onehot[:, c] @ to_block).astype(np.int64)
        row[c] //= 2
        O[c, :] = row
        O[:, c] = row
    sizes[:] = onehot.sum(axis=0)


def _merge_counts(O, sizes, c1, c2) -> None:
    """Fold block c2 into c1 in place; c2 is left empty."""
    within = O[c1, c1] + O[c2, c2] + O[c1, c2]
    O[c1, :] += O[c2, :]
    O[:, c1] += O[:, c2]
    O[c1, c1] = within
    O[c2, :] = 0
    O[:, c2] = 0
    sizes[c1] += sizes[c2]
    sizes[c2] = 0


def _finish(kind, branch, target, state, z, k, O, sizes, log_alpha_z, rng, info,
            lp_old=None) -> ProposalOutcome:
    """Redraw P* under the proposed assignment and add the P-prior ratio."""
    P_new, log_q_p = _draw_p(O, pair_counts(sizes), rng)
    if lp_old is None:
        lp_old = log_prior_p(state.P, target.hp)
    lp_new = log_prior_p(P_new, target.hp)
    if lp_new == -math.inf or log_prior_k(k, target.hp) == -math.inf:
        log_alpha = -math.inf
    else:
        log_alpha = lp_new - lp_old + log_alpha_z
    return ProposalOutcome(kind, branch, min(0.0, log_alpha), z, k, P_new, O, sizes, log_q_p, info,
                           float(log_alpha))


def move_mk(state: ChainState, target: SBMPosterior, rng) -> ProposalOutcome:
    """Add an empty community at a random position, or delete a random one if empty."""
    n, k, lam = target.n, state.k, target.hp.lam
    if rng.random() < 0.5:
        pos = int(rng.integers(k + 1))
        info = {"position": pos}
        if k + 1 > target.hp.k_max:
            return ProposalOutcome("mk", "add", -math.inf, info=info)
        z, O, sizes = _insert_empty(state.z, state.O, state.sizes, pos)
        log_a = math.log(k) - math.log(k + 1) - math.log(n + k) + math.log(lam)
        return _finish("mk", "add", target, state, z, k + 1, O, sizes, log_a, rng, info)
    pos = int(rng.integers(k))
    info = {"position": pos}
    if state.sizes[pos] > 0:
        return ProposalOutcome("mk", "delete", -math.inf, info=info)
    z, O, sizes = _remove_empty(state.z, state.O, state.sizes, pos)
    log_a = math.log(k) - math.log(k - 1) + math.log(n + k - 1) - math.log(lam)
    return _finish("mk", "delete", target, state, z, k - 1, O, sizes, log_a, rng, info)


def gs_log_weights(state: ChainState, target: SBMPosterior, node: int) -> np.ndarray:
    """Normalized log proposal probabilities for relabelling ``node``.

    Weight of label c is beta(Z_c, A)^-1 * Pi(Z_c | K), where Z_c sends
    ``node`` to c; only blocks touching c differ between candidates.
    """
    k = state.k
    a = state.z[node]
    e = target.neighbour_counts(state.z, node, k)
    O = state.O.copy()
    O[a, :] -= e
    O[:, a] -= e
    O[a, a] += e[a]
    s = state.sizes.copy()
    s[a] -= 1
    N_old = pair_counts(s)
    O_new = O + e[None, :]
    N_new = np.outer(s + 1, s)
    np.fill_diagonal(N_new, (s + 1) * s // 2)
    f_old = gammaln(N_old + 2) - gammaln(O + 1) - gammaln(N_old - O + 1)
    f_new = gammaln(N_new + 2) - gammaln(O_new + 1) - gammaln(N_new - O_new + 1)
    logw = -(f_new - f_old).sum(axis=1) + np.log(s + 1.0)
    return logw - np.logaddexp.reduce(logw)


def move_gs(state: ChainState, target: SBMPosterior, rng) -> ProposalOutcome:
    """Relabel one uniformly chosen node from its conditional proposal."""
    i = int(rng.integers(target.n))
    logw = gs_log_weights(state, target, i)
    c = int(rng.choice(state.k, p=np.exp(logw)))
    z = state.z.copy()
    O, sizes = state.O.copy(), state.sizes.copy()
    _relabel(target, z, O, sizes, [i], [c])
    info = {"node": i, "label": c, "log_weights": logw}
    return _finish("gs", "relabel", target, state, z, state.k, O, sizes, 0.0, rng, info)


def m3_path(target: SBMPosterior, z, c1, c2, order, P, rng=None, fixed=None):
    """Sequentially allocate ``order`` between communities c1 and c2.

    Node x_h goes to c1 with odds
    Pi(A_h | P, x_h -> c1) (n_{h,c1} + 1) / [Pi(A_h | P, x_h -> c2) (n_{h,c2} + 1)],
    where A_h holds every node outside c1, c2 plus the nodes already placed.
    With ``fixed`` the labels are replayed instead of sampled.
    Returns (labels, log path probability).
    """
    order = np.asarray(order, dtype=np.int64)
    m = order.size
    if m == 0:
        return np.empty(0, dtype=np.int64), 0.0
    k = P.shape[0]
    lp, l1p = np.log(P), np.log1p(-P)
    dlp, dl1p = lp[c1] - lp[c2], l1p[c1] - l1p[c2]
    outside = (z != c1) & (z != c2)
    onehot = np.zeros((z.size, k))
    onehot[np.flatnonzero(outside), z[outside]] = 1.0
    rows = target.dense[order]
    cnt = rows @ onehot
    base = cnt @ dlp + (onehot.sum(axis=0) - cnt) @ dl1p
    # an already placed neighbour in c contributes (lp or l1p)[c1, c] - [c2, c]
    u1, v1 = dlp[c1], dl1p[c1]
    u2, v2 = dlp[c2], dl1p[c2]
    sub = rows[:, order]
    acc1 = np.zeros(m)
    acc2 = np.zeros(m)
    m1 = m2 = 0
    labels = np.empty(m, dtype=np.int64)
    logp = 0.0
    draws = rng.random(m) if fixed is None else None
    for h in range(m):
        d1, d2 = acc1[h], acc2[h]
        x = (base[h] + d1 * u1 + (m1 - d1) * v1 + d2 * u2 + (m2 - d2) * v2
             + math.log(m1 + 1) - math.log(m2 + 1))
        # log sigmoid(x) and log sigmoid(-x), overflow-safe
        if x >= 0.0:
            log_p1 = -math.log1p(math.exp(-x))
            log_p2 = -x + log_p1
        else:
            log_p2 = -math.log1p(math.exp(x))
            log_p1 = x + log_p2
        if fixed is None:
            to_c1 = draws[h] < math.exp(log_p1)
        else:
            to_c1 = fixed[h] == c1
        if to_c1:
            labels[h] = c1
            logp += log_p1
            acc1 += sub[:, h]
            m1 += 1
        else:
            labels[h] = c2
            logp += log_p2
            acc2 += sub[:, h]
            m2 += 1
    return labels, float(logp)


def move_m3(state: ChainState, target: SBMPosterior, rng) -> ProposalOutcome:
    """Reallocate the members of two random communities in a random order.

    The forward path uses the current P; the reverse path replays the same
    order under P*, the connectivity the reverse move would start from.
    """
    k = state.k
    if k < 2:
        return ProposalOutcome("m3", "noop", -math.inf)
    c1, c2 = (int(c) for c in rng.choice(k, 2, replace=False))
    members = np.flatnonzero((state.z == c1) | (state.z == c2))
    order = rng.permutation(members)
    labels, log_fwd = m3_path(target, state.z, c1, c2, order, state.P, rng=rng)
    z = state.z.copy()
    z[order] = labels
    O, sizes = state.O.copy(), state.sizes.copy()
    _recount(target, z, O, sizes, (c1, c2))
    P_new, log_q_p = _draw_p(O, pair_counts(sizes), rng)
    _, log_rev = m3_path(target, state.z, c1, c2, order, P_new, fixed=state.z[order])
    lp_old = log_prior_p(state.P, target.hp)
    lp_new = log_prior_p(P_new, target.hp)
    info = {"c1": c1, "c2": c2, "order": order, "log_fwd": log_fwd, "log_rev": log_rev}
    if lp_new == -math.inf:
        log_alpha = -math.inf
    else:
        log_alpha = (lp_new - lp_old + log_rev - log_fwd
                     + gammaln(sizes[c1] + 1) + gammaln(sizes[c2] + 1)
                     - gammaln(state.sizes[c1] + 1) - gammaln(state.sizes[c2] + 1)
                     + _log_beta(state.O, state.sizes) - _log_beta(O, sizes))
    return ProposalOutcome("m3", "reshuffle", min(0.0, float(log_alpha)), z, k, P_new, O, sizes,
                           log_q_p, info, float(log_alpha))


def move_ae(state: ChainState, target: SBMPosterior, rng) -> ProposalOutcome:
    """Merge two random communities, or split one into two."""
    n, k, lam = target.n, state.k, target.hp.lam
    log_beta_old = _log_beta(state.O, state.sizes)
    if rng.random() < 0.5:
        if k < 2:
            return ProposalOutcome("ae", "merge", -math.inf)
        # ordered pair: c1 keeps its members and absorbs c2
        c1, c2 = (int(c) for c in rng.choice(k, 2, replace=False))
        z = state.z.copy()
        O, sizes = state.O.copy(), state.sizes.copy()
        z[z == c2] = c1
        _merge_counts(O, sizes, c1, c2)
        merged = int(sizes[c1])
        z, O, sizes = _remove_empty(z, O, sizes, c2)
        log_a = (math.log(k) - math.log(k - 1) + log_beta_old - _log_beta(O, sizes)
                 + math.log(k - 1 + n) - math.log(merged + 1) - math.log(lam))
        info = {"c1": c1, "c2": c2, "merged_size": merged}
        return _finish("ae", "merge", target, state, z, k - 1, O, sizes, log_a, rng, info)
    c2 = int(rng.integers(k + 1))
    j = int(rng.integers(k))
    c1 = j if j < c2 else j + 1
    p_c = float(rng.random())
    info = {"c1": c1, "c2": c2, "p_c": p_c}
    if k + 1 > target.hp.k_max:
        return ProposalOutcome("ae", "split", -math.inf, info=info)
    z, O, sizes = _insert_empty(state.z, state.O, state.sizes, c2)
    members = np.flatnonzero(z == c1)
    size_before = members.size
    z[members[rng.random(members.size) < p_c]] = c2
    _recount(target, z, O, sizes, (c1, c2))
    log_a = (math.log(k) - math.log(k + 1) + log_beta_old - _log_beta(O, sizes)
             + math.log(size_before + 1) - math.log(k + n) + math.log(lam))
    return _finish("ae", "split", target, state, z, k + 1, O, sizes, log_a, rng, info)


_MOVE_FUNCS = {"mk": move_mk, "gs": move_gs, "m3": move_m3, "ae": move_ae}


def init_state(target: SBMPosterior, rng, max_tries: int = 1000) -> ChainState:
    """K = 2, uniform random labels, P drawn from the Beta proposal until dominant."""
    rng = make_rng(rng)
    k = 2
    z = rng.integers(k, size=target.n).astype(np.int64)
    sizes = np.bincount(z, minlength=k)
    probe = target.state(z, k, np.full((k, k), 0.5))
    npairs = pair_counts(sizes)
    for _ in range(max_tries):
        P, _ = _draw_p(probe.O, npairs, rng)
        if is_diagonally_dominant(P, target.hp.delta_n):
            break
    else:
        P = np.full((k, k), 0.25)
        np.fill_diagonal(P, 0.75)
    return target.state(z, k, P)


def step(state: ChainState, target: SBMPosterior, rng, tally: dict | None = None,
         kind: str | None = None) -> ChainState:
    """One Metropolis-Hastings iteration; returns the next state."""
    if kind is None:
        kind = MOVES[int(rng.integers(4))]
    out = _MOVE_FUNCS[kind](state, target, rng)
    accepted = False
    if not out.abandoned and out.log_alpha > -math.inf:
        accepted = math.log(rng.random()) < out.log_alpha
    if tally is not None:
        prop, acc = tally.get(kind, (0, 0))
        tally[kind] = (prop + 1, acc + int(accepted))
    if not accepted:
        return state
    z = out.z
    z.setflags(write=False)
    log_post = target.log_post(out.O, out.sizes, out.P, out.k)
    return ChainState(z, out.k, out.P, out.O, out.sizes, log_post)


def run_chain(A, config: ChainConfig) -> Trace:
    """Burn in, then record ``n_keep`` consecutive draws."""
    target = SBMPosterior(A, config.hp)
    rng = make_rng(config.seed)
    state = init_state(target, rng)
    tally = {m: (0, 0) for m in MOVES}
    for _ in range(config.n_burn):
        state = step(state, target, rng, tally)
    tally = {m: (0, 0) for m in MOVES}
    n_keep = config.n_keep
    k_eff = np.empty(n_keep, dtype=np.int64)
    declared = np.empty(n_keep, dtype=np.int64)
    zs = np.empty((n_keep, target.n), dtype=np.int16)
    Ps = [] if config.keep_p else None
    for t in range(n_keep):
        state = step(state, target, rng, tally)
        k_eff[t] = state.k_eff
        declared[t] = state.k
        zs[t] = state.z
        if Ps is not None:
            Ps.append(state.P)
    return Trace(k_eff, zs, declared, tally, Ps, seed=config.seed)
