# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled simulation kernel.

Mirrors the pure-Python engine draw for draw: the splitmix64 substream
derivation, the Box-Muller normal, Knuth's Poisson and the per-neighbour
decision order are identical, so both backends emit byte-identical logs
on the same platform. The step loop runs without the GIL so independent
runs parallelise across threads.
"""

from libc.math cimport ceil, cos, exp, floor, log, sqrt
from libc.stdint cimport uint64_t
from libc.stdlib cimport free, malloc, realloc

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef uint64_t GOLDEN = <uint64_t>0x9E3779B97F4A7C15
cdef uint64_t MIX1 = <uint64_t>0xBF58476D1CE4E5B9
cdef uint64_t MIX2 = <uint64_t>0x94D049BB133111EB
cdef double INV_2_53 = 2.0 ** -53
cdef double TWO_PI = 6.283185307179586


cdef inline uint64_t mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * MIX1
    z = (z ^ (z >> 27)) * MIX2
    return z ^ (z >> 31)


cdef inline uint64_t substream_state(uint64_t seed, uint64_t agent,
                                     uint64_t step, uint64_t salt) nogil:
    cdef uint64_t z = mix64(seed)
    z = mix64(z ^ mix64((agent + 1) * GOLDEN))
    z = mix64(z ^ mix64((step + 1) * GOLDEN))
    z = mix64(z ^ mix64((salt + 1) * GOLDEN))
    return z


cdef inline uint64_t next_u64(uint64_t *state) nogil:
    state[0] = state[0] + GOLDEN
    return mix64(state[0])


cdef inline double u01(uint64_t *state) nogil:
    return <double>(next_u64(state) >> 11) * INV_2_53


cdef inline double u01_open(uint64_t *state) nogil:
    return <double>((next_u64(state) >> 11) + 1) * INV_2_53


cdef inline double normal(uint64_t *state) nogil:
    cdef double u1 = u01_open(state)
    cdef double u2 = u01(state)
    return sqrt(-2.0 * log(u1)) * cos(TWO_PI * u2)


cdef inline int poisson(uint64_t *state, double lam) nogil:
    cdef double limit, p
    cdef int k = 0
    if lam <= 0.0:
        return 0
    limit = exp(-lam)
    p = 1.0
    while True:
        p *= u01(state)
        if p <= limit:
            return k
        k += 1


cdef inline double clamp(double x, double lo, double hi,
                         bint integer_valued) nogil:
    if integer_valued:
        x = floor(x + 0.5) if x >= 0.0 else ceil(x - 0.5)
    if x < lo:
        x = lo
    if x > hi:
        x = hi
    return x + 0.0  # normalise -0.0


cdef struct LogBuf:
    int *steps
    int *senders
    int *recipients
    int *bursts
    double *sentiments
    long size
    long cap


cdef inline bint log_push(LogBuf *buf, int step, int sender, int recipient,
                          int burst, double sentiment) nogil:
    cdef long cap
    if buf.size == buf.cap:
        cap = buf.cap * 2 if buf.cap else 1024
        buf.steps = <int *>realloc(buf.steps, cap * sizeof(int))
        buf.senders = <int *>realloc(buf.senders, cap * sizeof(int))
        buf.recipients = <int *>realloc(buf.recipients, cap * sizeof(int))
        buf.bursts = <int *>realloc(buf.bursts, cap * sizeof(int))
        buf.sentiments = <double *>realloc(buf.sentiments, cap * sizeof(double))
        if (buf.steps == NULL or buf.senders == NULL or buf.recipients == NULL
                or buf.bursts == NULL or buf.sentiments == NULL):
            return False
        buf.cap = cap
    buf.steps[buf.size] = step
    buf.senders[buf.size] = sender
    buf.recipients[buf.size] = recipient
    buf.bursts[buf.size] = burst
    buf.sentiments[buf.size] = sentiment
    buf.size += 1
    return True


cdef inline long find_slot(const int *indices, long lo, long hi,
                           int needle) nogil:
    """Binary search for needle in sorted indices[lo:hi]; -1 if absent."""
    cdef long mid
    while lo < hi:
        mid = (lo + hi) // 2
        if indices[mid] < needle:
            lo = mid + 1
        elif indices[mid] > needle:
            hi = mid
        else:
            return mid
    return -1


cdef bint run_loop(int n_steps, uint64_t seed,
                   const int *indptr, const int *indices, int n,
                   const double *p_init, const double *p_reply,
                   const double *p_prop, const double *baseline,
                   const double *neutral,
                   double mean_burst, double contagion, double reset_p,
                   double noise, double lo, double hi, bint integer_valued,
                   bint per_message,
                   LogBuf *buf,
                   double *cur, unsigned char *recent, unsigned char *recent_next,
                   unsigned char *has_recent, double *in_sum, int *in_cnt) nogil:
    cdef int step, i, j, burst, msg
    cdef long pos, slot
    cdef double p, value, influence
    cdef uint64_t state
    cdef long nnz = indptr[n]

    for i in range(n):
        cur[i] = baseline[i]
        has_recent[i] = 0
    for pos in range(nnz):
        recent[pos] = 0

    for step in range(1, n_steps + 1):
        for pos in range(nnz):
            recent_next[pos] = 0
        for i in range(n):
            in_sum[i] = 0.0
            in_cnt[i] = 0
        # act phase: all agents read the previous step's state
        for i in range(n):
            if indptr[i] == indptr[i + 1]:
                continue
            state = substream_state(seed, <uint64_t>i, <uint64_t>step, 0)
            for pos in range(indptr[i], indptr[i + 1]):
                j = indices[pos]
                if has_recent[i]:
                    p = p_reply[i] if recent[pos] else p_prop[i]
                else:
                    p = p_init[i]
                if u01(&state) < p:
                    burst = 1 + poisson(&state, mean_burst - 1.0)
                    slot = find_slot(indices, indptr[j], indptr[j + 1], i)
                    if per_message:
                        for msg in range(burst):
                            value = clamp(cur[i] + normal(&state) * noise,
                                          lo, hi, integer_valued)
                            if not log_push(buf, step, i, j, 1, value):
                                return False
                            in_sum[j] += value
                            in_cnt[j] += 1
                    else:
                        value = clamp(cur[i] + normal(&state) * noise,
                                      lo, hi, integer_valued)
                        if not log_push(buf, step, i, j, burst, value):
                            return False
                        in_sum[j] += value * burst
                        in_cnt[j] += burst
                    if slot >= 0:
                        recent_next[slot] = 1
        # evolve phase
        for i in range(n):
            state = substream_state(seed, <uint64_t>i, <uint64_t>step, 1)
            if u01(&state) < reset_p:
                cur[i] = baseline[i]
            else:
                influence = (in_sum[i] - in_cnt[i] * neutral[i]) * contagion
                cur[i] = cur[i] + influence
        for i in range(n):
            has_recent[i] = 0
            for pos in range(indptr[i], indptr[i + 1]):
                recent[pos] = recent_next[pos]
                if recent_next[pos]:
                    has_recent[i] = 1
    return True


def run_simulation(int n_steps, object seed,
                   cnp.ndarray[int, ndim=1] indptr,
                   cnp.ndarray[int, ndim=1] indices,
                   cnp.ndarray[double, ndim=1] p_init,
                   cnp.ndarray[double, ndim=1] p_reply,
                   cnp.ndarray[double, ndim=1] p_prop,
                   cnp.ndarray[double, ndim=1] baseline,
                   cnp.ndarray[double, ndim=1] neutral,
                   double mean_burst, double contagion, double reset_p,
                   double noise, double lo, double hi, bint integer_valued,
                   bint per_message):
    """Run the synchronous step loop; returns the five log columns."""
    cdef int n = indptr.shape[0] - 1
    cdef uint64_t useed = <uint64_t>(int(seed) & ((1 << 64) - 1))
    cdef long nnz = indptr[n]
    cdef LogBuf buf
    buf.steps = NULL
    buf.senders = NULL
    buf.recipients = NULL
    buf.bursts = NULL
    buf.sentiments = NULL
    buf.size = 0
    buf.cap = 0

    cdef long n_alloc = n if n > 0 else 1
    cdef long nnz_alloc = nnz if nnz > 0 else 1
    cdef double *cur = <double *>malloc(n_alloc * sizeof(double))
    cdef unsigned char *recent = <unsigned char *>malloc(nnz_alloc)
    cdef unsigned char *recent_next = <unsigned char *>malloc(nnz_alloc)
    cdef unsigned char *has_recent = <unsigned char *>malloc(n_alloc)
    cdef double *in_sum = <double *>malloc(n_alloc * sizeof(double))
    cdef int *in_cnt = <int *>malloc(n_alloc * sizeof(int))

    cdef bint ok = False
    cdef const int *indptr_p = <const int *>cnp.PyArray_DATA(indptr)
    cdef const int *indices_p = <const int *>cnp.PyArray_DATA(indices)
    cdef const double *p_init_p = <const double *>cnp.PyArray_DATA(p_init)
    cdef const double *p_reply_p = <const double *>cnp.PyArray_DATA(p_reply)
    cdef const double *p_prop_p = <const double *>cnp.PyArray_DATA(p_prop)
    cdef const double *baseline_p = <const double *>cnp.PyArray_DATA(baseline)
    cdef const double *neutral_p = <const double *>cnp.PyArray_DATA(neutral)

    if (cur != NULL and recent != NULL and recent_next != NULL
            and has_recent != NULL and in_sum != NULL and in_cnt != NULL):
        with nogil:
            ok = run_loop(n_steps, useed, indptr_p, indices_p, n,
                          p_init_p, p_reply_p, p_prop_p, baseline_p, neutral_p,
                          mean_burst, contagion, reset_p, noise,
                          lo, hi, integer_valued, per_message,
                          &buf, cur, recent, recent_next, has_recent,
                          in_sum, in_cnt)

    free(cur)
    free(recent)
    free(recent_next)
    free(has_recent)
    free(in_sum)
    free(in_cnt)

    if not ok:
        free(buf.steps)
        free(buf.senders)
        free(buf.recipients)
        free(buf.bursts)
        free(buf.sentiments)
        raise MemoryError("simulation buffers could not be allocated")

    cdef long m = buf.size
    steps_arr = np.empty(m, dtype=np.int32)
    senders_arr = np.empty(m, dtype=np.int32)
    recipients_arr = np.empty(m, dtype=np.int32)
    bursts_arr = np.empty(m, dtype=np.int32)
    sentiments_arr = np.empty(m, dtype=np.float64)
    cdef long idx
    cdef int[:] sv = steps_arr
    cdef int[:] dv = senders_arr
    cdef int[:] rv = recipients_arr
    cdef int[:] bv = bursts_arr
    cdef double[:] xv = sentiments_arr
    for idx in range(m):
        sv[idx] = buf.steps[idx]
        dv[idx] = buf.senders[idx]
        rv[idx] = buf.recipients[idx]
        bv[idx] = buf.bursts[idx]
        xv[idx] = buf.sentiments[idx]

    free(buf.steps)
    free(buf.senders)
    free(buf.recipients)
    free(buf.bursts)
    free(buf.sentiments)
    return steps_arr, senders_arr, recipients_arr, bursts_arr, sentiments_arr
