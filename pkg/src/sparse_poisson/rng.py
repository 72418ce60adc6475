"""Counter-keyed random streams and an exact Poisson sampler.

Every random quantity in the package is drawn from a SplitMix64 stream whose
starting state is a hash of ``(seed, replication, column)``::

    key = mix(mix(mix(seed + A) ^ mix(replication + B)) ^ mix(column + C))

where ``mix`` is the SplitMix64 finaliser (a bijection on 64-bit words) and
``A``, ``B``, ``C`` are fixed odd constants. A stream depends on nothing but
its key, so results are identical under any thread count or schedule.

Poisson variates are exact: sequential-search inversion for means below 10
and Hormann's transformed rejection with squeeze (PTRS) above.
"""

import math
import os

import numba
import numpy as np
from numba import njit, prange

# omp is thread-safe for concurrent callers; the default probe also warns about old TBB builds
if os.environ.get("NUMBA_THREADING_LAYER") is None:
    numba.config.THREADING_LAYER = "omp"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SEED_SALT = np.uint64(0x243F6A8885A308D3)
_REP_SALT = np.uint64(0x13198A2E03707345)
_COL_SALT = np.uint64(0xA4093822299F31D1)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_TWO_M53 = 1.0 / 9007199254740992.0

PTRS_CUTOFF = 10.0


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def _key(seed, rep, col):
    k = _mix(seed + _SEED_SALT)
    k = _mix(k ^ _mix(rep + _REP_SALT))
    return _mix(k ^ _mix(col + _COL_SALT))


@njit(cache=True)
def _next_uniform(state):
    state = state + _GAMMA
    z = _mix(state)
    # open interval (0, 1): the PTRS log() calls never see 0
    return state, ((z >> _S11) + 0.5) * _TWO_M53


@njit(cache=True)
def _poisson_one(lam, state):
    if lam <= 0.0:
        return state, 0
    if lam < PTRS_CUTOFF:
        state, u = _next_uniform(state)
        k = 0
        p = math.exp(-lam)
        cdf = p
        while u > cdf:
            k += 1
            p *= lam / k
            if p == 0.0:
                break
            cdf += p
        return state, k
    slam = math.sqrt(lam)
    loglam = math.log(lam)
    b = 0.931 + 2.53 * slam
    a = -0.059 + 0.02483 * b
    invalpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        state, u = _next_uniform(state)
        state, v = _next_uniform(state)
        u -= 0.5
        us = 0.5 - abs(u)
        k = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return state, np.int64(k)
        if k < 0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(invalpha) - math.log(a / (us * us) + b)
                <= -lam + k * loglam - math.lgamma(k + 1.0)):
            return state, np.int64(k)


@njit(cache=True, parallel=True)
def _poisson_fill(lam, seed, reps, col_offset, out):
    nrep = reps.shape[0]
    p, n = lam.shape
    for t in prange(nrep * n):
        r = t // n
        c = t % n
        state = _key(seed, np.uint64(reps[r]), np.uint64(c + col_offset))
        for j in range(p):
            state, k = _poisson_one(lam[j, c], state)
            out[r, j, c] = k


@njit(cache=True, parallel=True)
def _uniform_fill(seed, reps, col_offset, out):
    nrep, m, n = out.shape
    for t in prange(nrep * n):
        r = t // n
        c = t % n
        state = _key(seed, np.uint64(reps[r]), np.uint64(c + col_offset))
        for j in range(m):
            state, u = _next_uniform(state)
            out[r, j, c] = u


def _seed_word(seed):
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must lie in [0, 2**64), got {seed}")
    return np.uint64(seed)


def _rep_array(replications):
    reps = np.atleast_1d(np.asarray(replications, dtype=np.int64))
    if reps.ndim != 1 or (reps < 0).any():
        raise ValueError("replication ids must be a flat list of non-negative integers")
    return reps


def stream_key(seed, replication, column):
    """Starting SplitMix64 state of the stream for ``(seed, replication, column)``."""
    return int(_key(_seed_word(seed), np.uint64(replication), np.uint64(column)))


def poisson_counts(means, seed, replications=0, col_offset=0):
    """Exact Poisson counts with per-entry ``means`` of shape ``(p, n)``.

    Column ``c`` of replication ``r`` is drawn from the stream keyed by
    ``(seed, r, c + col_offset)``, rows in increasing order. Returns an
    ``int64`` array of shape ``(len(replications), p, n)``; a scalar
    ``replications`` still yields a leading axis of length one.
    """
    lam = np.ascontiguousarray(np.asarray(means, dtype=np.float64))
    if lam.ndim != 2:
        raise ValueError("means must be a 2-D (p, n) array")
    if not np.all(np.isfinite(lam)) or (lam < 0).any():
        raise ValueError("Poisson means must be finite and non-negative")
    reps = _rep_array(replications)
    out = np.empty((reps.shape[0],) + lam.shape, dtype=np.int64)
    _poisson_fill(lam, _seed_word(seed), reps, int(col_offset), out)
    return out


def uniforms(seed, shape, replications=0, col_offset=0):
    """Uniform (0, 1) draws of shape ``(len(replications), m, n)`` for ``shape=(m, n)``.

    Column ``c`` uses the same stream key convention as :func:`poisson_counts`.
    """
    m, n = shape
    reps = _rep_array(replications)
    out = np.empty((reps.shape[0], m, n), dtype=np.float64)
    _uniform_fill(_seed_word(seed), reps, int(col_offset), out)
    return out


def configure_threads(env_var="NUM_THREADS"):
    """Cap numba parallelism from the environment; returns the thread count in use."""
    value = os.environ.get(env_var)
    if value:
        wanted = max(1, int(value))
        numba.set_num_threads(min(wanted, numba.config.NUMBA_NUM_THREADS))
    return numba.get_num_threads()
