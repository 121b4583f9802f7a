"""Jitted inner loops.

These mirror the exact Python definitions in :mod:`idla.rng`,
:mod:`idla.kernels` and :mod:`idla.lattice`: for the same 64-bit draw they
select the same transition, so a walk driven from Python and one driven from
here agree step for step.  Rows are handled as integer numerators over a
common denominator ``D``; a draw ``u`` falls below cumulative ``c / D`` iff
``hi64(u * D) < c``.  Near the origin the rows are also tabulated as
thresholds ``ceil(c * 2**64 / D)``, for which ``u < threshold`` is the same
test; the one draw ``2**64 - 1`` that a saturated threshold cannot
separate takes the slow path.
"""
import numpy as np
from numba import njit

U64 = np.uint64
GOLDEN = U64(0x9E3779B97F4A7C15)
STREAM_SALT = U64(0xD1B54A32D192ED03)
CARD_SALT = U64(0x8CB92BA72F3D8DD7)
MASK32 = U64(0xFFFFFFFF)
MAX64 = U64(0xFFFFFFFFFFFFFFFF)

# grow_kernel status codes
DONE = 0
OFF_GRID = 1
STEP_CAP = 2
RADIUS_LIMIT = 3


@njit(cache=True, inline="always")
def mix64(z):
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def mulhi(a, b):
    s = U64(32)
    al = a & MASK32
    ah = a >> s
    bl = b & MASK32
    bh = b >> s
    ll = al * bl
    hl = ah * bl
    lh = al * bh
    cross = (ll >> s) + (hl & MASK32) + lh
    return ah * bh + (hl >> s) + (cross >> s)


@njit(cache=True)
def derive_key(seed, index):
    return mix64(U64(seed) ^ mix64(U64(index) * GOLDEN + STREAM_SALT))


@njit(cache=True)
def card_draw(seed, x, y, t):
    packed = ((U64(np.int64(x)) & MASK32) << U64(32)) | (U64(np.int64(y)) & MASK32)
    site_key = mix64(mix64(U64(seed) ^ CARD_SALT) ^ packed)
    return mix64(site_key + U64(t + 1) * GOLDEN)


@njit(cache=True)
def below(st, n):
    """Lemire's exact bounded draw; returns ``(value, new_state)``."""
    nn = U64(n)
    st += GOLDEN
    u = mix64(st)
    low = u * nn
    if low < nn:
        threshold = (U64(0) - nn) % nn
        while low < threshold:
            st += GOLDEN
            u = mix64(st)
            low = u * nn
    return np.int64(mulhi(u, nn)), st


@njit(cache=True)
def layer_site(k, i):
    if k == 0:
        return 0, 0
    seg = i // k
    t = i - seg * k
    if seg == 0:
        return k - t, t
    if seg == 1:
        return -t, k - t
    if seg == 2:
        return -k + t, -t
    return t, -k + t


@njit(cache=True)
def row(fam, pn, pd, x, y):
    """Cumulative numerators (stay, +east, +north, +west) over denominator D."""
    ax = abs(x)
    ay = abs(y)
    k = ax + ay
    if fam == 2 or (fam == 1 and ((ax == 0) == (ay == 0))):
        # simple random walk; also the off-axis part of the reflected walk
        return 4, 0, 1, 2, 3
    if fam == 1:
        if ay == 0:
            if x > 0:
                return 4, 0, 2, 3, 3
            return 4, 0, 0, 1, 3
        if y > 0:
            return 4, 0, 1, 3, 4
        return 4, 0, 1, 1, 2
    qn = pd - pn
    if k == 0:
        c0 = 4 * pn
        return 4 * pd, c0, c0 + qn, c0 + 2 * qn, c0 + 3 * qn
    if ay == 0:
        out = qn * 2 * ax
        inn = pn * 2 * (ax + 1)
        if x > 0:
            return pd * 2 * (ax + 1), 0, out, out + qn, out + qn + inn
        return pd * 2 * (ax + 1), 0, inn, inn + qn, inn + qn + out
    if ax == 0:
        out = qn * 2 * ay
        inn = pn * 2 * (ay + 1)
        if y > 0:
            return pd * 2 * (ay + 1), 0, qn, qn + out, 2 * qn + out
        return pd * 2 * (ay + 1), 0, qn, qn + inn, 2 * qn + inn
    ox = qn * (2 * ax + 1) * (k - 1)
    oy = qn * (2 * ay + 1) * (k - 1)
    ix = pn * (2 * ax - 1) * (k + 1)
    iy = pn * (2 * ay - 1) * (k + 1)
    e = ox if x > 0 else ix
    n = oy if y > 0 else iy
    w = ix if x > 0 else ox
    return pd * 2 * (k + 1) * (k - 1), 0, e, e + n, e + n + w


@njit(cache=True)
def step(fam, pn, pd, x, y, u):
    D, c0, cE, cN, cW = row(fam, pn, pd, x, y)
    h = mulhi(u, U64(D))
    if h < U64(c0):
        return x, y
    if h < U64(cE):
        return x + 1, y
    if h < U64(cN):
        return x, y + 1
    if h < U64(cW):
        return x - 1, y
    return x, y - 1


@njit(cache=True)
def _ceil_ratio64(c, D):
    """``min(ceil(c * 2**64 / D), 2**64 - 1)`` for ``0 <= c <= D < 2**63``."""
    if c >= D:
        return MAX64
    q = U64(0)
    rem = U64(c)
    d = U64(D)
    for _ in range(64):
        rem = rem << U64(1)
        q = q << U64(1)
        if rem >= d:
            rem -= d
            q |= U64(1)
    if rem != U64(0):
        q += U64(1)
    return q


@njit(cache=True)
def threshold_table(fam, pn, pd, T):
    """Thresholds of the four cumulative entries for each site with ``|x|, |y| <= T``.

    Flat layout: site ``(x, y)`` starts at ``4 * ((x + T) * (2T + 1) + y + T)``.
    """
    W = 2 * T + 1
    tab = np.empty(4 * W * W, dtype=np.uint64)
    for x in range(-T, T + 1):
        for y in range(-T, T + 1):
            D, c0, cE, cN, cW = row(fam, pn, pd, x, y)
            b = 4 * ((x + T) * W + y + T)
            tab[b] = _ceil_ratio64(c0, D)
            tab[b + 1] = _ceil_ratio64(cE, D)
            tab[b + 2] = _ceil_ratio64(cN, D)
            tab[b + 3] = _ceil_ratio64(cW, D)
    return tab


@njit(cache=True, inline="always")
def fast_step(tab, T, fam, pn, pd, x, y, u):
    if x < -T or x > T or y < -T or y > T or u == MAX64:
        return step(fam, pn, pd, x, y, u)
    b = 4 * ((x + T) * (2 * T + 1) + y + T)
    # branch-free: d counts thresholds passed, 0..4 = stay, E, N, W, S
    d = (np.int64(u >= tab[b]) + np.int64(u >= tab[b + 1])
         + np.int64(u >= tab[b + 2]) + np.int64(u >= tab[b + 3]))
    return x + np.int64(d == 1) - np.int64(d == 3), y + np.int64(d == 2) - np.int64(d == 4)


@njit(cache=True)
def _in_grid(grid, R, x, y):
    if x < -R or x > R or y < -R or y > R:
        return False
    return grid[x + R, y + R] != 0


@njit(cache=True)
def walk_kernel(tab, T, fam, pn, pd, x, y, st, rules, hit_layer, hx, hy, grid, R, cap, klimit):
    """Walk until the first rule in ``rules`` fires.

    Rule codes: 0 = left the set marked in ``grid``, 1 = on layer
    ``hit_layer``, 2 = at site ``(hx, hy)``.  Returns
    ``(x, y, steps, index of fired rule, state)``; the index is -1 when the
    step cap is hit and -2 when the walk passes ``klimit``.
    """
    t = 0
    while True:
        for j in range(rules.shape[0]):
            c = rules[j]
            if c == 0:
                if not _in_grid(grid, R, x, y):
                    return x, y, t, j, st
            elif c == 1:
                if abs(x) + abs(y) == hit_layer:
                    return x, y, t, j, st
            elif x == hx and y == hy:
                return x, y, t, j, st
        if t >= cap:
            return x, y, t, -1, st
        if abs(x) + abs(y) >= klimit:
            return x, y, t, -2, st
        st += GOLDEN
        x, y = fast_step(tab, T, fam, pn, pd, x, y, mix64(st))
        t += 1


@njit(cache=True)
def escape_kernel(a, st):
    """Uniform site of layer ``a + 1``; returns ``(x, y, state)``."""
    i, st = below(st, 4 * (a + 1))
    x, y = layer_site(a + 1, i)
    return x, y, st


@njit(cache=True)
def _add_site(grid, R, layer_counts, meta, x, y):
    grid[x + R, y + R] = 1
    k = abs(x) + abs(y)
    layer_counts[k] += 1
    ifr = meta[0]
    while ifr + 1 < layer_counts.shape[0]:
        nxt = ifr + 1
        size = 1 if nxt == 0 else 4 * nxt
        if layer_counts[nxt] != size:
            break
        ifr = nxt
    meta[0] = ifr
    meta[1] += 1


@njit(cache=True)
def grow_kernel(tab, T, fam, pn, pd, grid, R, layer_counts, meta, starts_x, starts_y, first, count,
                seed, use_stacks, odometer, shortcut, cap, stop_layer, frozen,
                out_x, out_y, out_p, result):
    """Aggregate particles ``first .. first + count - 1`` one at a time.

    ``meta`` holds ``[inner_full_radius, occupied count, settled in this call,
    total steps, shortcut used]``.  ``starts_x/starts_y`` are indexed from 0
    for particle ``first``.  With ``use_stacks`` the draw at an occupied site
    is the next card of that site's stack (``odometer`` counts burned cards);
    otherwise particle ``i`` uses its own stream keyed by ``(seed, i)``.
    ``stop_layer >= 0`` selects the stopped process; ``frozen`` then counts
    first hits of that layer.  On a non-DONE status ``result`` holds
    ``[status, particle, x, y]``.
    """
    for j in range(count):
        pidx = first + j
        x = np.int64(starts_x[j])
        y = np.int64(starts_y[j])
        st = derive_key(seed, pidx)
        t = 0
        while True:
            k = abs(x) + abs(y)
            on_stop = stop_layer >= 0 and k == stop_layer
            occupied = _in_grid(grid, R, x, y)
            if on_stop or not occupied:
                break
            if shortcut and x == 0 and y == 0 and meta[0] >= 0 and (
                stop_layer < 0 or meta[0] + 1 <= stop_layer
            ):
                x, y, st = escape_kernel(meta[0], st)
                meta[4] = 1
                continue
            if t >= cap:
                result[0] = STEP_CAP
                result[1] = pidx
                result[2] = x
                result[3] = y
                return STEP_CAP
            if use_stacks:
                u = card_draw(seed, x, y, odometer[x + R, y + R])
                odometer[x + R, y + R] += 1
            else:
                st += GOLDEN
                u = mix64(st)
            nx, ny = fast_step(tab, T, fam, pn, pd, x, y, u)
            x = nx
            y = ny
            t += 1
        meta[3] += t
        if on_stop:
            frozen[x + R, y + R] += 1
        if not occupied:
            if x < -R or x > R or y < -R or y > R:
                result[0] = OFF_GRID
                result[1] = pidx
                result[2] = x
                result[3] = y
                return OFF_GRID
            _add_site(grid, R, layer_counts, meta, x, y)
            n = meta[2]
            out_x[n] = x
            out_y[n] = y
            out_p[n] = pidx
            meta[2] = n + 1
    result[0] = DONE
    return DONE


@njit(cache=True)
def add_many(grid, R, layer_counts, meta, xs, ys):
    """Occupy ``(xs[i], ys[i])`` in order; returns the index of the first
    already-occupied site, or -1."""
    for i in range(xs.shape[0]):
        x = xs[i]
        y = ys[i]
        if grid[x + R, y + R] != 0:
            return i
        _add_site(grid, R, layer_counts, meta, x, y)
    return -1


@njit(cache=True)
def settle_lanes(tab, T, fam, pn, pd, grid, R, ifr, shortcut, seed, sx, sy, cap, lanes,
                 out_x, out_y, out_t, result):
    """Independent additions to a fixed occupied set.

    Walk ``i`` starts at ``(sx[i], sy[i])`` with stream ``derive_key(seed, i)``
    and stops at its first site outside ``grid``, which is never modified.
    Up to ``lanes`` walks advance in one interleaved loop so that their
    dependency chains overlap; every walk consumes its own stream exactly as
    if run alone.  ``ifr`` is the inner full radius used by the shortcut.
    """
    n = sx.shape[0]
    lx = np.zeros(lanes, dtype=np.int64)
    ly = np.zeros(lanes, dtype=np.int64)
    ls = np.zeros(lanes, dtype=np.uint64)
    lt = np.zeros(lanes, dtype=np.int64)
    lid = np.full(lanes, -1, dtype=np.int64)
    nxt = 0
    while True:
        busy = 0
        for l in range(lanes):
            while True:
                if lid[l] < 0:
                    if nxt >= n:
                        break
                    lid[l] = nxt
                    lx[l] = sx[nxt]
                    ly[l] = sy[nxt]
                    ls[l] = derive_key(seed, nxt)
                    lt[l] = 0
                    nxt += 1
                x = lx[l]
                y = ly[l]
                if not _in_grid(grid, R, x, y):
                    i = lid[l]
                    out_x[i] = x
                    out_y[i] = y
                    out_t[i] = lt[l]
                    lid[l] = -1
                    continue
                if shortcut and x == 0 and y == 0 and ifr >= 0:
                    x, y, st = escape_kernel(ifr, ls[l])
                    lx[l] = x
                    ly[l] = y
                    ls[l] = st
                    continue
                if lt[l] >= cap:
                    result[0] = STEP_CAP
                    result[1] = lid[l]
                    result[2] = x
                    result[3] = y
                    return STEP_CAP
                busy += 1
                break
        if busy == 0:
            break
        event = False
        while not event:
            for l in range(lanes):
                if lid[l] < 0:
                    continue
                st = ls[l] + GOLDEN
                x, y = fast_step(tab, T, fam, pn, pd, lx[l], ly[l], mix64(st))
                t = lt[l] + 1
                ls[l] = st
                lx[l] = x
                ly[l] = y
                lt[l] = t
                if t >= cap or not _in_grid(grid, R, x, y) or (shortcut and x == 0 and y == 0):
                    event = True
    result[0] = DONE
    return DONE
