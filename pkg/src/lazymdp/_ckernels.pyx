# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels; see ``_pykernels.py`` for the reference twin."""

from libc.stdint cimport uint64_t, int64_t
from libc.math cimport fmin, NAN

import numpy as np


cdef struct Rng:
    uint64_t s0
    uint64_t s1
    uint64_t s2
    uint64_t s3


cdef inline uint64_t _rotl(uint64_t x, int k) noexcept nogil:
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t _splitmix(uint64_t* x) noexcept nogil:
    x[0] += <uint64_t>0x9E3779B97F4A7C15ULL
    cdef uint64_t z = x[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline void _seed(Rng* r, uint64_t seed) noexcept nogil:
    cdef uint64_t x = seed
    r.s0 = _splitmix(&x)
    r.s1 = _splitmix(&x)
    r.s2 = _splitmix(&x)
    r.s3 = _splitmix(&x)


cdef inline uint64_t _next(Rng* r) noexcept nogil:
    cdef uint64_t result = _rotl(r.s1 * 5, 7) * 9
    cdef uint64_t t = r.s1 << 17
    r.s2 ^= r.s0
    r.s3 ^= r.s1
    r.s1 ^= r.s2
    r.s0 ^= r.s3
    r.s2 ^= t
    r.s3 = _rotl(r.s3, 45)
    return result


cdef inline double _uniform(Rng* r) noexcept nogil:
    return <double>(_next(r) >> 11) * (1.0 / 9007199254740992.0)


cdef inline Py_ssize_t _randint(Rng* r, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t k = <Py_ssize_t>(_uniform(r) * n)
    return k if k < n else n - 1


cdef inline Py_ssize_t _sample_cdf(Rng* r, const double[::1] cum, Py_ssize_t lo, Py_ssize_t hi) noexcept nogil:
    if hi - lo == 1:
        return lo
    cdef double u = _uniform(r)
    cdef Py_ssize_t k
    for k in range(lo, hi):
        if u < cum[k]:
            return k
    return hi - 1


cdef inline Py_ssize_t _sample_row(Rng* r, const double[:, ::1] cdf, Py_ssize_t s, Py_ssize_t n) noexcept nogil:
    cdef double u = _uniform(r)
    cdef Py_ssize_t a
    for a in range(n):
        if u < cdf[s, a]:
            return a
    return n - 1


cdef inline Py_ssize_t _sample_vec(Rng* r, const double[::1] cdf, Py_ssize_t n) noexcept nogil:
    cdef double u = _uniform(r)
    cdef Py_ssize_t a
    for a in range(n):
        if u < cdf[a]:
            return a
    return n - 1


cdef inline Py_ssize_t _greedy(Rng* r, double[:, ::1] q, Py_ssize_t s, Py_ssize_t n) noexcept nogil:
    cdef double best = q[s, 0]
    cdef double v
    cdef Py_ssize_t arg = 0, count = 1, a, k
    for a in range(1, n):
        v = q[s, a]
        if v > best:
            best = v
            arg = a
            count = 1
        elif v == best:
            count += 1
    if count == 1:
        return arg
    k = _randint(r, count)
    for a in range(n):
        if q[s, a] == best:
            if k == 0:
                return a
            k -= 1
    return arg


cdef inline double _row_max(double[:, ::1] q, Py_ssize_t s, Py_ssize_t n) noexcept nogil:
    cdef double best = q[s, 0]
    cdef Py_ssize_t a
    for a in range(1, n):
        if q[s, a] > best:
            best = q[s, a]
    return best


cdef inline Py_ssize_t _start_state(Rng* r, const double[::1] init_cum, const int64_t[::1] start_states,
                                    bint exploring) noexcept nogil:
    if exploring:
        return <Py_ssize_t>start_states[_randint(r, start_states.shape[0])]
    return _sample_vec(r, init_cum, init_cum.shape[0])


def q_learning(
    const int64_t[::1] ptr, const int64_t[::1] nxt, const double[::1] cum,
    const double[:, ::1] rewards, const unsigned char[::1] absorbing,
    const double[::1] init_cum, const int64_t[::1] start_states,
    const double[:, ::1] default_cum, double[:, ::1] q, double eta,
    double alpha, double gamma, double eps0, double eps_inf, double decay_horizon,
    Py_ssize_t n_phases, Py_ssize_t episodes_per_phase, Py_ssize_t max_steps,
    Py_ssize_t n_eval, bint exploring, uint64_t seed,
    double[::1] scores, double[::1] control_freq, int64_t[::1] visits,
):
    cdef Rng rng
    _seed(&rng, seed)
    cdef Py_ssize_t n_states = rewards.shape[0]
    cdef Py_ssize_t n_base = rewards.shape[1]
    cdef bint lazy = default_cum.shape[0] > 0
    cdef Py_ssize_t n_agent = n_base + 1 if lazy else n_base
    cdef Py_ssize_t phase, ep, t, s, s2, a, b, i, ev
    cdef long long episode = 0, decisions, controls
    cdef double eps, r, target, total, ret
    cdef bint last
    with nogil:
        for phase in range(n_phases):
            decisions = 0
            controls = 0
            last = phase == n_phases - 1
            for ep in range(episodes_per_phase):
                eps = eps0 + (eps_inf - eps0) * fmin(<double>episode / decay_horizon, 1.0)
                s = _start_state(&rng, init_cum, start_states, exploring)
                for t in range(max_steps):
                    if last:
                        visits[s] += 1
                    if _uniform(&rng) < eps:
                        a = _randint(&rng, n_agent)
                    else:
                        a = _greedy(&rng, q, s, n_agent)
                    decisions += 1
                    if lazy and a == n_base:
                        b = _sample_row(&rng, default_cum, s, n_base)
                        r = rewards[s, b]
                    else:
                        b = a
                        r = rewards[s, b] - eta
                        controls += 1
                    i = s * n_base + b
                    s2 = nxt[_sample_cdf(&rng, cum, ptr[i], ptr[i + 1])]
                    if absorbing[s2]:
                        target = r
                    else:
                        target = r + gamma * _row_max(q, s2, n_agent)
                    q[s, a] = q[s, a] + alpha * (target - q[s, a])
                    s = s2
                    if absorbing[s]:
                        if last:
                            visits[s] += 1
                        break
                episode += 1
            control_freq[phase] = (<double>controls / decisions) if decisions else 0.0
            if n_eval > 0:
                total = 0.0
                for ev in range(n_eval):
                    s = _sample_vec(&rng, init_cum, n_states)
                    ret = 0.0
                    for t in range(max_steps):
                        a = _greedy(&rng, q, s, n_agent)
                        if lazy and a == n_base:
                            b = _sample_row(&rng, default_cum, s, n_base)
                        else:
                            b = a
                        ret += rewards[s, b]
                        i = s * n_base + b
                        s = nxt[_sample_cdf(&rng, cum, ptr[i], ptr[i + 1])]
                        if absorbing[s]:
                            break
                    total += ret
                scores[phase] = total / n_eval
            else:
                scores[phase] = NAN
    return None


def td_evaluate(
    const int64_t[::1] ptr, const int64_t[::1] nxt, const double[::1] cum,
    const double[:, ::1] reward_table, const unsigned char[::1] absorbing,
    const double[::1] init_cum, const int64_t[::1] start_states,
    const double[:, ::1] target_policy, const double[:, ::1] target_cum, double[:, ::1] q,
    double alpha, double gamma, double eps0, double eps_inf, double decay_horizon,
    Py_ssize_t n_episodes, Py_ssize_t max_steps, bint exploring, uint64_t seed,
):
    cdef Rng rng
    _seed(&rng, seed)
    cdef Py_ssize_t n_actions = reward_table.shape[1]
    cdef Py_ssize_t episode, t, s, s2, a, a2, i
    cdef double eps, r, target, boot
    with nogil:
        for episode in range(n_episodes):
            eps = eps0 + (eps_inf - eps0) * fmin(<double>episode / decay_horizon, 1.0)
            s = _start_state(&rng, init_cum, start_states, exploring)
            for t in range(max_steps):
                if _uniform(&rng) < eps:
                    a = _randint(&rng, n_actions)
                else:
                    a = _sample_row(&rng, target_cum, s, n_actions)
                r = reward_table[s, a]
                i = s * n_actions + a
                s2 = nxt[_sample_cdf(&rng, cum, ptr[i], ptr[i + 1])]
                if absorbing[s2]:
                    target = r
                else:
                    boot = 0.0
                    for a2 in range(n_actions):
                        boot += target_policy[s2, a2] * q[s2, a2]
                    target = r + gamma * boot
                q[s, a] = q[s, a] + alpha * (target - q[s, a])
                s = s2
                if absorbing[s]:
                    break
    return None


def rollout_visits(
    const int64_t[::1] ptr, const int64_t[::1] nxt, const double[::1] cum,
    const unsigned char[::1] absorbing, const double[::1] init_cum,
    const double[:, ::1] policy_cum, Py_ssize_t n_episodes, Py_ssize_t max_steps,
    uint64_t seed, int64_t[::1] visits,
):
    cdef Rng rng
    _seed(&rng, seed)
    cdef Py_ssize_t n_states = policy_cum.shape[0]
    cdef Py_ssize_t n_actions = policy_cum.shape[1]
    cdef Py_ssize_t episode, t, s, a, i
    with nogil:
        for episode in range(n_episodes):
            s = _sample_vec(&rng, init_cum, n_states)
            for t in range(max_steps):
                visits[s] += 1
                if absorbing[s]:
                    break
                a = _sample_row(&rng, policy_cum, s, n_actions)
                i = s * n_actions + a
                s = nxt[_sample_cdf(&rng, cum, ptr[i], ptr[i + 1])]
    return None
