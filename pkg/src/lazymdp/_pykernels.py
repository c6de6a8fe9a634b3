"""Pure-Python simulation kernels.

Statement-for-statement twin of ``_ckernels.pyx``: both draw from the same
xoshiro256** stream in the same order, so for a given seed they produce
bit-identical Q-tables, curves and visit counts. Keep the two in sync.

Transition kernels are passed in CSR form: successors of the flattened
pair ``i = s * n_actions + a`` are ``nxt[ptr[i]:ptr[i+1]]`` with cumulative
probabilities ``cum[ptr[i]:ptr[i+1]]`` (last entry exactly 1.0).
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_TWO_M53 = 1.0 / 9007199254740992.0


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256:
    """xoshiro256** seeded through splitmix64."""

    def __init__(self, seed: int):
        x = seed & _MASK
        s = []
        for _ in range(4):
            x = (x + 0x9E3779B97F4A7C15) & _MASK
            z = x
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
            s.append(z ^ (z >> 31))
        self.s = s

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * _TWO_M53

    def randint(self, n: int) -> int:
        k = int(self.uniform() * n)
        return k if k < n else n - 1


def _sample_cdf(rng, cum, lo, hi):
    if hi - lo == 1:
        return lo
    u = rng.uniform()
    for k in range(lo, hi):
        if u < cum[k]:
            return k
    return hi - 1


def _sample_row(rng, cdf_row, n):
    u = rng.uniform()
    for a in range(n):
        if u < cdf_row[a]:
            return a
    return n - 1


def _greedy(rng, qrow, n):
    best = qrow[0]
    arg = 0
    count = 1
    for a in range(1, n):
        v = qrow[a]
        if v > best:
            best = v
            arg = a
            count = 1
        elif v == best:
            count += 1
    if count == 1:
        return arg
    k = rng.randint(count)
    for a in range(n):
        if qrow[a] == best:
            if k == 0:
                return a
            k -= 1
    return arg


def _row_max(qrow, n):
    best = qrow[0]
    for a in range(1, n):
        if qrow[a] > best:
            best = qrow[a]
    return best


def _start_state(rng, init_cum, start_states, exploring):
    if exploring:
        return int(start_states[rng.randint(len(start_states))])
    return _sample_row(rng, init_cum, len(init_cum))


def q_learning(
    ptr, nxt, cum, rewards, absorbing, init_cum, start_states, default_cum, q, eta,
    alpha, gamma, eps0, eps_inf, decay_horizon,
    n_phases, episodes_per_phase, max_steps, n_eval, exploring, seed,
    scores, control_freq, visits,
):
    """Tabular Q-learning, optionally with a trailing lazy action.

    The run is lazy when ``default_cum`` has rows; action ``n_base`` then
    defers to the default policy and is exempt from the ``eta`` penalty.
    Fills ``scores`` (mean greedy return per phase, penalties excluded),
    ``control_freq`` (fraction of non-lazy training decisions per phase) and
    ``visits`` (state visits during the final phase); updates ``q`` in place.
    """
    rng = Xoshiro256(seed)
    n_states, n_base = rewards.shape
    lazy = default_cum.shape[0] > 0
    n_agent = n_base + 1 if lazy else n_base
    q = q.tolist() if isinstance(q, np.ndarray) else q
    qa = q
    rew = rewards.tolist()
    absb = [bool(x) for x in absorbing]
    ptr_l = ptr.tolist()
    nxt_l = nxt.tolist()
    cum_l = cum.tolist()
    init_l = init_cum.tolist()
    dcum = default_cum.tolist() if lazy else None
    episode = 0
    for phase in range(n_phases):
        decisions = 0
        controls = 0
        last = phase == n_phases - 1
        for _ in range(episodes_per_phase):
            eps = eps0 + (eps_inf - eps0) * min(episode / decay_horizon, 1.0)
            s = _start_state(rng, init_l, start_states, exploring)
            for _t in range(max_steps):
                if last:
                    visits[s] += 1
                qrow = qa[s]
                if rng.uniform() < eps:
                    a = rng.randint(n_agent)
                else:
                    a = _greedy(rng, qrow, n_agent)
                decisions += 1
                if lazy and a == n_base:
                    b = _sample_row(rng, dcum[s], n_base)
                    r = rew[s][b]
                else:
                    b = a
                    r = rew[s][b] - eta
                    controls += 1
                i = s * n_base + b
                s2 = nxt_l[_sample_cdf(rng, cum_l, ptr_l[i], ptr_l[i + 1])]
                if absb[s2]:
                    target = r
                else:
                    target = r + gamma * _row_max(qa[s2], n_agent)
                qrow[a] = qrow[a] + alpha * (target - qrow[a])
                s = s2
                if absb[s]:
                    if last:
                        visits[s] += 1
                    break
            episode += 1
        control_freq[phase] = controls / decisions if decisions else 0.0
        if n_eval > 0:
            total = 0.0
            for _ in range(n_eval):
                s = _sample_row(rng, init_l, n_states)
                ret = 0.0
                for _t in range(max_steps):
                    a = _greedy(rng, qa[s], n_agent)
                    if lazy and a == n_base:
                        b = _sample_row(rng, dcum[s], n_base)
                    else:
                        b = a
                    ret += rew[s][b]
                    i = s * n_base + b
                    s = nxt_l[_sample_cdf(rng, cum_l, ptr_l[i], ptr_l[i + 1])]
                    if absb[s]:
                        break
                total += ret
            scores[phase] = total / n_eval
        else:
            scores[phase] = np.nan
    return qa


def td_evaluate(
    ptr, nxt, cum, reward_table, absorbing, init_cum, start_states, target_policy, target_cum, q,
    alpha, gamma, eps0, eps_inf, decay_horizon, n_episodes, max_steps, exploring, seed,
):
    """Off-policy TD evaluation of a fixed target policy (expected bootstrap).

    Behaviour is uniform with probability epsilon, else the target policy.
    """
    rng = Xoshiro256(seed)
    n_states, n_actions = reward_table.shape
    qa = q.tolist() if isinstance(q, np.ndarray) else q
    rew = reward_table.tolist()
    absb = [bool(x) for x in absorbing]
    ptr_l = ptr.tolist()
    nxt_l = nxt.tolist()
    cum_l = cum.tolist()
    init_l = init_cum.tolist()
    pol = target_policy.tolist()
    pcum = target_cum.tolist()
    for episode in range(n_episodes):
        eps = eps0 + (eps_inf - eps0) * min(episode / decay_horizon, 1.0)
        s = _start_state(rng, init_l, start_states, exploring)
        for _t in range(max_steps):
            if rng.uniform() < eps:
                a = rng.randint(n_actions)
            else:
                a = _sample_row(rng, pcum[s], n_actions)
            r = rew[s][a]
            i = s * n_actions + a
            s2 = nxt_l[_sample_cdf(rng, cum_l, ptr_l[i], ptr_l[i + 1])]
            if absb[s2]:
                target = r
            else:
                boot = 0.0
                row = qa[s2]
                prow = pol[s2]
                for a2 in range(n_actions):
                    boot += prow[a2] * row[a2]
                target = r + gamma * boot
            qa[s][a] = qa[s][a] + alpha * (target - qa[s][a])
            s = s2
            if absb[s]:
                break
    return qa


def rollout_visits(ptr, nxt, cum, absorbing, init_cum, policy_cum, n_episodes, max_steps, seed, visits):
    """Monte-Carlo state-visit counts of a stochastic policy from the initial distribution."""
    rng = Xoshiro256(seed)
    n_states, n_actions = policy_cum.shape
    absb = [bool(x) for x in absorbing]
    ptr_l = ptr.tolist()
    nxt_l = nxt.tolist()
    cum_l = cum.tolist()
    init_l = init_cum.tolist()
    pc = policy_cum.tolist()
    for _ in range(n_episodes):
        s = _sample_row(rng, init_l, n_states)
        for _t in range(max_steps):
            visits[s] += 1
            if absb[s]:
                break
            a = _sample_row(rng, pc[s], n_actions)
            i = s * n_actions + a
            s = nxt_l[_sample_cdf(rng, cum_l, ptr_l[i], ptr_l[i + 1])]
