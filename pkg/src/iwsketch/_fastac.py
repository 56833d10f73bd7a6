"""Compiled inner loop for tabular actor-critic training.

Same update rule as the pure Python loop in ``policy.train_actor_critic``
but over flat arrays: row ``s`` of the logit table is
``logits[ptr[s]:ptr[s + 1]]`` with successor ids ``cand[ptr[s]:ptr[s + 1]]``.
The random stream is numba's own Mersenne Twister, so results differ from
the Python engine for the same seed but are reproducible run to run.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def seed(s):
    np.random.seed(s)


@njit(cache=True)
def run(n, pool_ptr, pool, ptr, cand, logits, values, is_goal, solvable, gamma, alpha, beta, dead_v, clip,
        adam, m_l, v_l, m_v, v_v, step):
    """Run ``n`` updates; returns the Adam step counter."""
    ntasks = pool_ptr.shape[0] - 1
    b1, b2, eps = 0.9, 0.999, 1e-8
    ex = np.empty(np.max(ptr[1:] - ptr[:-1]) + 1)
    for _ in range(n):
        ti = np.random.randint(0, ntasks) if ntasks > 1 else 0
        sid = pool[np.random.randint(pool_ptr[ti], pool_ptr[ti + 1])]
        lo = ptr[sid]
        hi = ptr[sid + 1]
        w = hi - lo
        m = logits[lo]
        for i in range(1, w):
            if logits[lo + i] > m:
                m = logits[lo + i]
        z = 0.0
        for i in range(w):
            ex[i] = math.exp(logits[lo + i] - m)
            z += ex[i]
        r = np.random.random() * z
        acc = 0.0
        j = w - 1
        for i in range(w):
            acc += ex[i]
            if r < acc:
                j = i
                break
        nxt = cand[lo + j]
        v_next = values[nxt] if solvable[nxt] else dead_v
        delta = 1.0 + gamma * v_next - values[sid]
        if not adam:
            values[sid] += beta * delta
            for i in range(w):
                ind = 1.0 if i == j else 0.0
                x = logits[lo + i] - alpha * delta * (ind - ex[i] / z)
                logits[lo + i] = min(clip, max(-clip, x))
            if is_goal[nxt]:
                values[nxt] -= beta * values[nxt]
        else:
            step += 1
            c1 = 1.0 - b1 ** step
            c2 = 1.0 - b2 ** step
            g = -delta
            m_v[sid] = b1 * m_v[sid] + (1 - b1) * g
            v_v[sid] = b2 * v_v[sid] + (1 - b2) * g * g
            values[sid] -= beta * (m_v[sid] / c1) / (math.sqrt(v_v[sid] / c2) + eps)
            for i in range(w):
                ind = 1.0 if i == j else 0.0
                g = delta * (ind - ex[i] / z)
                k = lo + i
                m_l[k] = b1 * m_l[k] + (1 - b1) * g
                v_l[k] = b2 * v_l[k] + (1 - b2) * g * g
                x = logits[k] - alpha * (m_l[k] / c1) / (math.sqrt(v_l[k] / c2) + eps)
                logits[k] = min(clip, max(-clip, x))
            if is_goal[nxt]:
                g = values[nxt]
                m_v[nxt] = b1 * m_v[nxt] + (1 - b1) * g
                v_v[nxt] = b2 * v_v[nxt] + (1 - b2) * g * g
                values[nxt] -= beta * (m_v[nxt] / c1) / (math.sqrt(v_v[nxt] / c2) + eps)
    return step
