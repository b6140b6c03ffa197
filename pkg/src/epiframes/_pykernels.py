"""Numpy reference implementations of the hot loops.

Every function here returns the same result as its counterpart in
``_ckernels.pyx`` given the same inputs (``segment_sums`` may differ in the
last ulp because of summation order).
"""

import numpy as np


def floyd_sample(pool_sizes, sizes, uniforms):
    """Draw ``sizes[g]`` distinct positions from ``range(pool_sizes[g])`` per group.

    Floyd's algorithm consumes exactly one uniform per drawn position, so the
    random stream layout does not depend on collisions. The loop runs over the
    position index and is vectorised across groups.
    """
    pool_sizes = np.asarray(pool_sizes, dtype=np.int64)
    sizes = np.asarray(sizes, dtype=np.int64)
    uniforms = np.asarray(uniforms, dtype=np.float64)
    n_groups = len(sizes)
    if n_groups == 0:
        return np.empty(0, dtype=np.int64)
    smax = int(sizes.max())
    starts = np.cumsum(sizes) - sizes
    picks = np.full((n_groups, max(smax, 1)), -1, dtype=np.int64)
    for i in range(smax):
        active = sizes > i
        rows = np.nonzero(active)[0]
        j = pool_sizes[rows] - sizes[rows] + i
        t = np.floor(uniforms[starts[rows] + i] * (j + 1)).astype(np.int64)
        if i:
            dup = (picks[rows, :i] == t[:, None]).any(axis=1)
            t = np.where(dup, j, t)
        picks[rows, i] = t
    cols = np.arange(picks.shape[1])
    return picks[cols[None, :] < sizes[:, None]]


def contagion(ptr, participants, is_source, state, keys, infections_per_meeting,
              susceptible, exposed):
    """Process meetings in order; infect up to ``infections_per_meeting`` susceptibles.

    A meeting transmits when any attendee is flagged in ``is_source`` (a
    start-of-day snapshot). Targets are the attendees still susceptible at the
    moment the meeting is processed, chosen by smallest key. ``state`` is
    updated in place; the newly exposed ids are returned in infection order.
    """
    out = []
    participants = np.asarray(participants)
    src = np.asarray(is_source, dtype=bool)
    hit = src[participants]
    for m in range(len(ptr) - 1):
        a, b = int(ptr[m]), int(ptr[m + 1])
        if not hit[a:b].any():
            continue
        slots = [i for i in range(a, b) if state[participants[i]] == susceptible]
        slots.sort(key=lambda i: (keys[i], i))
        for i in slots[:infections_per_meeting]:
            state[participants[i]] = exposed
            out.append(int(participants[i]))
    return np.asarray(out, dtype=np.int64)


def select_by_keys(ptr, keys, take):
    """Mask the ``take[s]`` smallest-key entries inside every segment ``s``."""
    ptr = np.asarray(ptr, dtype=np.int64)
    keys = np.asarray(keys, dtype=np.float64)
    take = np.asarray(take, dtype=np.int64)
    n = len(keys)
    seg = np.repeat(np.arange(len(ptr) - 1), np.diff(ptr))
    order = np.lexsort((np.arange(n), keys, seg))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n) - ptr[seg[order]]
    return rank < take[seg]


def segment_sums(ptr, values):
    ptr = np.asarray(ptr, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros(len(ptr) - 1)
    nonempty = np.diff(ptr) > 0
    if nonempty.any():
        out[nonempty] = np.add.reduceat(values[: ptr[-1]], ptr[:-1][nonempty])
    return out
