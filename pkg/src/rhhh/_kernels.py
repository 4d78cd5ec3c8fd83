"""Compiled per-packet path: Space Saving banks, the hash index, and the RNG.

A bank holds ``T`` independent Space Saving tables of equal capacity ``k``
in flat arrays so that one compiled loop can feed any of them.  Each table
is a stream-summary: slots hang off doubly linked buckets of equal count,
buckets form an ascending doubly linked chain, and an open-addressing hash
maps keys to slots.  Every increment touches O(1) slots and buckets.

State tuple layout (``st``)::

    skey  uint64[T, k]       key of each slot
    sint  int64[T, 4, k]     OVER, BKT, ENEXT, EPREV per slot
    bint  int64[T, 5, k]     CNT, HEAD, TAIL, BNEXT, BPREV per bucket
    bfree int64[T, k]        stack of unused bucket ids
    htab  int64[T, hsize]    slot index or -1, linear probing
    meta  int64[T, 4]        SIZE, MINB, FTOP, TOTAL
"""

import numpy as np
from numba import njit

OVER, BKT, ENEXT, EPREV = 0, 1, 2, 3
CNT, HEAD, TAIL, BNEXT, BPREV = 0, 1, 2, 3, 4
SIZE, MINB, FTOP, TOTAL = 0, 1, 2, 3

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_LOW32 = np.uint64(0xFFFFFFFF)


def new_bank(tables, capacity):
    hsize = 4
    while hsize < 4 * capacity:
        hsize *= 2
    skey = np.zeros((tables, capacity), dtype=np.uint64)
    sint = np.full((tables, 4, capacity), -1, dtype=np.int64)
    bint = np.full((tables, 5, capacity), -1, dtype=np.int64)
    bfree = np.empty((tables, capacity), dtype=np.int64)
    bfree[:] = np.arange(capacity - 1, -1, -1)
    htab = np.full((tables, hsize), -1, dtype=np.int64)
    meta = np.zeros((tables, 4), dtype=np.int64)
    meta[:, MINB] = -1
    meta[:, FTOP] = capacity
    return (skey, sint, bint, bfree, htab, meta)


@njit(cache=True, _nrt=False, inline="always")
def _mix(x):
    z = x ^ (x >> _S30)
    z = z * _M1
    z = z ^ (z >> _S27)
    z = z * _M2
    return z ^ (z >> _S31)


# ---------------------------------------------------------------- RNG

@njit(cache=True, _nrt=False, inline="always")
def rng_next(state):
    """SplitMix64 step on a one-element uint64 state array."""
    state[0] = state[0] + _GOLDEN
    return _mix(state[0])


@njit(cache=True, _nrt=False, inline="always")
def rng_bounded(state, n):
    """Unbiased integer in [0, n) for 0 < n < 2**32 (multiply-and-reject)."""
    bound = np.uint64(n)
    m = (rng_next(state) >> _S32) * bound
    low = m & _LOW32
    if low < bound:
        threshold = ((_LOW32 - bound) + np.uint64(1)) % bound
        while low < threshold:
            m = (rng_next(state) >> _S32) * bound
            low = m & _LOW32
    return np.int64(m >> _S32)


@njit(cache=True, _nrt=False)
def rng_fill(state, n, out):
    for i in range(out.shape[0]):
        out[i] = rng_bounded(state, n)


# ---------------------------------------------------------------- hash index

@njit(cache=True, _nrt=False, inline="always")
def _ht_find(skey, htab, t, key):
    hmask = htab.shape[1] - 1
    pos = np.int64(_mix(key) & np.uint64(hmask))
    while True:
        s = htab[t, pos]
        if s == -1:
            return -1
        if skey[t, s] == key:
            return s
        pos = (pos + 1) & hmask


@njit(cache=True, _nrt=False, inline="always")
def _ht_insert(skey, htab, t, slot):
    hmask = htab.shape[1] - 1
    pos = np.int64(_mix(skey[t, slot]) & np.uint64(hmask))
    while htab[t, pos] != -1:
        pos = (pos + 1) & hmask
    htab[t, pos] = slot


@njit(cache=True, _nrt=False, inline="always")
def _ht_delete(skey, htab, t, key):
    hmask = htab.shape[1] - 1
    pos = np.int64(_mix(key) & np.uint64(hmask))
    while skey[t, htab[t, pos]] != key:
        pos = (pos + 1) & hmask
    # backward-shift deletion keeps probe chains intact without tombstones
    j = pos
    while True:
        j = (j + 1) & hmask
        s = htab[t, j]
        if s == -1:
            break
        home = np.int64(_mix(skey[t, s]) & np.uint64(hmask))
        if pos <= j:
            stays = pos < home <= j
        else:
            stays = home > pos or home <= j
        if not stays:
            htab[t, pos] = s
            pos = j
    htab[t, pos] = -1


# ---------------------------------------------------------------- buckets

@njit(cache=True, _nrt=False, inline="always")
def _detach(sint, bint, t, i):
    b = sint[t, BKT, i]
    prev = sint[t, EPREV, i]
    nxt = sint[t, ENEXT, i]
    if prev != -1:
        sint[t, ENEXT, prev] = nxt
    else:
        bint[t, HEAD, b] = nxt
    if nxt != -1:
        sint[t, EPREV, nxt] = prev
    else:
        bint[t, TAIL, b] = prev


@njit(cache=True, _nrt=False, inline="always")
def _append(sint, bint, t, i, b):
    tail = bint[t, TAIL, b]
    sint[t, EPREV, i] = tail
    sint[t, ENEXT, i] = -1
    if tail != -1:
        sint[t, ENEXT, tail] = i
    else:
        bint[t, HEAD, b] = i
    bint[t, TAIL, b] = i
    sint[t, BKT, i] = b


@njit(cache=True, _nrt=False, inline="always")
def _alloc_bucket(bint, bfree, meta, t, count):
    meta[t, FTOP] -= 1
    b = bfree[t, meta[t, FTOP]]
    bint[t, CNT, b] = count
    bint[t, HEAD, b] = -1
    bint[t, TAIL, b] = -1
    return b


@njit(cache=True, _nrt=False, inline="always")
def _link_after(bint, meta, t, b, prev):
    """Link bucket ``b`` after ``prev`` (-1 links it as the new minimum)."""
    if prev == -1:
        nxt = meta[t, MINB]
        meta[t, MINB] = b
    else:
        nxt = bint[t, BNEXT, prev]
        bint[t, BNEXT, prev] = b
    bint[t, BPREV, b] = prev
    bint[t, BNEXT, b] = nxt
    if nxt != -1:
        bint[t, BPREV, nxt] = b


@njit(cache=True, _nrt=False, inline="always")
def _release_bucket(bint, bfree, meta, t, b):
    prev = bint[t, BPREV, b]
    nxt = bint[t, BNEXT, b]
    if prev != -1:
        bint[t, BNEXT, prev] = nxt
    else:
        meta[t, MINB] = nxt
    if nxt != -1:
        bint[t, BPREV, nxt] = prev
    bfree[t, meta[t, FTOP]] = b
    meta[t, FTOP] += 1


@njit(cache=True, _nrt=False, inline="always")
def _bump(sint, bint, bfree, meta, t, i):
    b = sint[t, BKT, i]
    c = bint[t, CNT, b]
    nb = bint[t, BNEXT, b]
    if nb != -1 and bint[t, CNT, nb] == c + 1:
        _detach(sint, bint, t, i)
        _append(sint, bint, t, i, nb)
        if bint[t, HEAD, b] == -1:
            _release_bucket(bint, bfree, meta, t, b)
    elif bint[t, HEAD, b] == i and bint[t, TAIL, b] == i:
        bint[t, CNT, b] = c + 1
    else:
        _detach(sint, bint, t, i)
        nb = _alloc_bucket(bint, bfree, meta, t, c + 1)
        _link_after(bint, meta, t, nb, b)
        _append(sint, bint, t, i, nb)


@njit(cache=True, _nrt=False, inline="always")
def increment(st, t, key):
    skey, sint, bint, bfree, htab, meta = st
    meta[t, TOTAL] += 1
    i = _ht_find(skey, htab, t, key)
    if i >= 0:
        _bump(sint, bint, bfree, meta, t, i)
        return
    capacity = skey.shape[1]
    if meta[t, SIZE] < capacity:
        i = meta[t, SIZE]
        meta[t, SIZE] += 1
        skey[t, i] = key
        sint[t, OVER, i] = 0
        _ht_insert(skey, htab, t, i)
        mb = meta[t, MINB]
        if mb != -1 and bint[t, CNT, mb] == 1:
            _append(sint, bint, t, i, mb)
        else:
            nb = _alloc_bucket(bint, bfree, meta, t, 1)
            _link_after(bint, meta, t, nb, -1)
            _append(sint, bint, t, i, nb)
        return
    # full: the oldest slot of the minimum bucket takes over the new key
    mb = meta[t, MINB]
    i = bint[t, HEAD, mb]
    _ht_delete(skey, htab, t, skey[t, i])
    skey[t, i] = key
    sint[t, OVER, i] = bint[t, CNT, mb]
    _ht_insert(skey, htab, t, i)
    _bump(sint, bint, bfree, meta, t, i)


@njit(cache=True, _nrt=False)
def query(st, t, key):
    skey, sint, bint, bfree, htab, meta = st
    i = _ht_find(skey, htab, t, key)
    if i >= 0:
        c = bint[t, CNT, sint[t, BKT, i]]
        return c, c - sint[t, OVER, i]
    if meta[t, SIZE] == skey.shape[1]:
        return bint[t, CNT, meta[t, MINB]], 0
    return 0, 0


@njit(cache=True)
def entries(st, t):
    skey, sint, bint, bfree, htab, meta = st
    n = meta[t, SIZE]
    keys = skey[t, :n].copy()
    upper = np.empty(n, dtype=np.int64)
    lower = np.empty(n, dtype=np.int64)
    for i in range(n):
        c = bint[t, CNT, sint[t, BKT, i]]
        upper[i] = c
        lower[i] = c - sint[t, OVER, i]
    return keys, upper, lower


@njit(cache=True, _nrt=False)
def increment_many(st, t, keys):
    for j in range(keys.shape[0]):
        increment(st, t, keys[j])


# ---------------------------------------------------------------- per-packet loops

@njit(cache=True, _nrt=False)
def feed_randomized(st, masks, keys, rng, V, r):
    """Each packet draws ``r`` levels uniformly from [0, V); draws below H update."""
    H = masks.shape[0]
    for j in range(keys.shape[0]):
        key = keys[j]
        for _ in range(r):
            d = rng_bounded(rng, V)
            if d < H:
                increment(st, d, key & masks[d])


@njit(cache=True, _nrt=False)
def feed_draws(st, masks, keys, draws, r):
    """Same as :func:`feed_randomized` with pre-drawn levels (``r`` per packet)."""
    H = masks.shape[0]
    for j in range(keys.shape[0]):
        key = keys[j]
        for u in range(r):
            d = draws[j * r + u]
            if d < H:
                increment(st, d, key & masks[d])


@njit(cache=True, _nrt=False)
def feed_all_levels(st, masks, keys):
    H = masks.shape[0]
    for j in range(keys.shape[0]):
        key = keys[j]
        for d in range(H):
            increment(st, d, key & masks[d])
