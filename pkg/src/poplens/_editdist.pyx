# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
# cython: cdivision=True
"""Compiled edit-distance kernel.

Mirrors _editdist_py exactly; the only difference is speed. The DP runs
without the GIL on pre-copied code-point buffers.
"""

from libc.stdlib cimport free, malloc


cdef void _copy_codepoints(str s, Py_UCS4 *buf):
    cdef Py_ssize_t i, n = len(s)
    for i in range(n):
        buf[i] = s[i]


cdef Py_ssize_t _dist(Py_UCS4 *a, Py_ssize_t la, Py_UCS4 *b, Py_ssize_t lb,
                      Py_ssize_t limit, Py_ssize_t *row0, Py_ssize_t *row1) nogil:
    """Two-row DP over the shorter string; rows need min(la, lb) + 1 slots.

    `limit` < 0 means unbounded; otherwise returns limit + 1 once the
    distance provably exceeds it.
    """
    cdef Py_ssize_t *prev
    cdef Py_ssize_t *cur
    cdef Py_ssize_t *tmp
    cdef Py_UCS4 *stmp
    cdef Py_ssize_t i, j, c, d, row_min
    cdef Py_UCS4 ca

    if la < lb:
        stmp = a; a = b; b = stmp
        i = la; la = lb; lb = i
    if lb == 0:
        if limit >= 0 and la > limit:
            return limit + 1
        return la
    if limit >= 0 and la - lb > limit:
        return limit + 1

    prev = row0
    cur = row1
    for j in range(lb + 1):
        prev[j] = j
    for i in range(1, la + 1):
        cur[0] = i
        row_min = i
        ca = a[i - 1]
        for j in range(1, lb + 1):
            c = prev[j - 1] + (0 if ca == b[j - 1] else 1)
            d = prev[j] + 1
            if d < c:
                c = d
            d = cur[j - 1] + 1
            if d < c:
                c = d
            cur[j] = c
            if c < row_min:
                row_min = c
        if limit >= 0 and row_min > limit:
            return limit + 1
        tmp = prev
        prev = cur
        cur = tmp
    return prev[lb]


def levenshtein(str a, str b, limit=None):
    """Levenshtein distance; with `limit`, returns limit + 1 on overflow."""
    cdef Py_ssize_t la = len(a), lb = len(b)
    cdef Py_ssize_t lim = -1 if limit is None else <Py_ssize_t> limit
    cdef Py_ssize_t short_len = lb if lb < la else la
    cdef Py_UCS4 *ba
    cdef Py_UCS4 *bb
    cdef Py_ssize_t *row0
    cdef Py_ssize_t *row1
    cdef Py_ssize_t res

    ba = <Py_UCS4 *> malloc((la + 1) * sizeof(Py_UCS4))
    bb = <Py_UCS4 *> malloc((lb + 1) * sizeof(Py_UCS4))
    row0 = <Py_ssize_t *> malloc((short_len + 2) * sizeof(Py_ssize_t))
    row1 = <Py_ssize_t *> malloc((short_len + 2) * sizeof(Py_ssize_t))
    if ba == NULL or bb == NULL or row0 == NULL or row1 == NULL:
        free(ba); free(bb); free(row0); free(row1)
        raise MemoryError()
    try:
        _copy_codepoints(a, ba)
        _copy_codepoints(b, bb)
        with nogil:
            res = _dist(ba, la, bb, lb, lim, row0, row1)
        return res
    finally:
        free(ba); free(bb); free(row0); free(row1)


def similarity(str a, str b):
    """Normalized edit similarity: 1 - distance / max(len); 1.0 for two empties."""
    cdef Py_ssize_t m = max(len(a), len(b))
    if m == 0:
        return 1.0
    return 1.0 - <double> levenshtein(a, b) / <double> m


def best_match(str query, candidates, double min_score):
    """Scan `candidates` for the best similarity to `query`.

    Returns (index, score) of the first candidate attaining the highest
    score >= min_score, or (-1, 0.0) if none qualifies. Ties keep the
    earliest index.
    """
    cdef Py_ssize_t n = len(query)
    cdef Py_ssize_t best_idx = -1
    cdef double best_score = 0.0
    cdef Py_ssize_t idx, lc, m, limit, dist, cap
    cdef double upper, needed, score
    cdef str cand
    cdef Py_UCS4 *bq
    cdef Py_UCS4 *bc
    cdef Py_ssize_t *row0
    cdef Py_ssize_t *row1
    cdef Py_ssize_t ncand = len(candidates)

    cap = 256
    bq = <Py_UCS4 *> malloc((n + 1) * sizeof(Py_UCS4))
    bc = <Py_UCS4 *> malloc(cap * sizeof(Py_UCS4))
    # The DP rows span the shorter string, which is at most the query once
    # longer candidates are handled; min(n, lc) + 1 <= n + 2 always.
    row0 = <Py_ssize_t *> malloc((n + 2) * sizeof(Py_ssize_t))
    row1 = <Py_ssize_t *> malloc((n + 2) * sizeof(Py_ssize_t))
    if bq == NULL or bc == NULL or row0 == NULL or row1 == NULL:
        free(bq); free(bc); free(row0); free(row1)
        raise MemoryError()
    try:
        _copy_codepoints(query, bq)
        for idx in range(ncand):
            cand = candidates[idx]
            lc = len(cand)
            m = n if n > lc else lc
            if m == 0:
                if best_score < 1.0:
                    best_idx = idx
                    best_score = 1.0
                continue
            upper = 1.0 - <double> (n - lc if n > lc else lc - n) / <double> m
            if best_idx >= 0:
                if upper <= best_score:
                    continue
                needed = best_score
            else:
                if upper < min_score:
                    continue
                needed = min_score
            if lc + 1 > cap:
                free(bc)
                cap = 2 * (lc + 1)
                bc = <Py_UCS4 *> malloc(cap * sizeof(Py_UCS4))
                if bc == NULL:
                    bc = NULL
                    raise MemoryError()
            _copy_codepoints(cand, bc)
            limit = <Py_ssize_t> ((1.0 - needed) * m) + 1
            with nogil:
                dist = _dist(bq, n, bc, lc, limit, row0, row1)
            score = 1.0 - <double> dist / <double> m
            if score >= min_score and score > best_score:
                best_idx = idx
                best_score = score
    finally:
        free(bq); free(bc); free(row0); free(row1)
    if best_idx < 0:
        return -1, 0.0
    return best_idx, best_score
