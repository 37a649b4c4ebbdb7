"""Counter-based Gaussian streams.

Every variate is a pure function of ``(seed, replica, mode, index, tag)``. It is
word ``replica % 4`` of the Philox4x64-10 block with key ``(seed, tag)`` and
counter ``(replica // 4 + 1, index, mode, 0)``. No generator state is carried
between calls, so replicas can be produced in any order or chunking and still
reproduce bit for bit.

The bulk path walks numpy's own Philox bit generator along the replica axis;
``philox4x64`` is a plain-numpy evaluation of the same block function, used for
scattered draws and to cross-check the bulk path.
"""
import numpy as np
from scipy.special import ndtri

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_LO32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)

# stream tags
BROWNIAN = 0
MIXTURE = 1


def _mulhilo(a, b):
    """Full 128-bit product of uint64 arrays, returned as (hi, lo)."""
    a_lo, a_hi = a & _LO32, a >> _S32
    b_lo, b_hi = b & _LO32, b >> _S32
    ll = a_lo * b_lo
    lh = a_lo * b_hi
    hl = a_hi * b_lo
    hh = a_hi * b_hi
    mid = (ll >> _S32) + (lh & _LO32) + (hl & _LO32)
    hi = hh + (lh >> _S32) + (hl >> _S32) + (mid >> _S32)
    return hi, a * b


def philox4x64(c0, c1, c2, c3, key0, key1=0, rounds=10):
    """Philox4x64 block function on broadcastable uint64 counter words."""
    x = [np.asarray(c, dtype=np.uint64) for c in np.broadcast_arrays(c0, c1, c2, c3)]
    k0 = np.uint64(key0)
    k1 = np.uint64(key1)
    with np.errstate(over="ignore"):
        for r in range(rounds):
            if r:
                k0 = k0 + _W0
                k1 = k1 + _W1
            hi0, lo0 = _mulhilo(_M0, x[0])
            hi1, lo1 = _mulhilo(_M1, x[2])
            x = [hi1 ^ x[1] ^ k0, lo1, hi0 ^ x[3] ^ k1, lo0]
    return x


def _as_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return seed


def _to_unit(words):
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def uniforms(seed, replica, mode, index, tag=BROWNIAN):
    """Open-interval uniforms on (0, 1) for broadcast ``(replica, mode, index)``."""
    r, k, i = np.broadcast_arrays(*(np.asarray(a, dtype=np.uint64) for a in (replica, mode, index)))
    words = philox4x64(r // np.uint64(4) + np.uint64(1), i, k, 0, _as_seed(seed), tag)
    lane = (r % np.uint64(4)).astype(np.intp)
    out = np.choose(lane, words)
    return _to_unit(out)


def normals(seed, replica, mode, index, tag=BROWNIAN):
    """Standard normals (inverse-CDF transform of ``uniforms``)."""
    return ndtri(uniforms(seed, replica, mode, index, tag))


def replica_normals(seed, replicas, mode, index, tag=BROWNIAN):
    """Normals for many replicas at one ``(mode, index)``, via numpy's Philox."""
    replicas = np.asarray(replicas, dtype=np.int64)
    lo, hi = int(replicas.min()), int(replicas.max()) + 1
    bg = np.random.Philox(counter=np.array([lo // 4, index, mode, 0], dtype=np.uint64),
                          key=np.array([_as_seed(seed), tag], dtype=np.uint64))
    skip = lo % 4
    raw = bg.random_raw(skip + hi - lo)[skip:]
    return ndtri(_to_unit(raw[replicas - lo]))


def brownian_increments(seed, replicas, n_modes, n_steps, T):
    """Brownian increments on a uniform grid, built by dyadic bridge refinement.

    ``n_steps`` is split as ``n0 * 2**L`` with ``n0`` odd. The ``n0`` coarse
    increments come from indices ``[0, n0)``; each refinement level ``l`` fills
    interval midpoints from indices ``[n0 2**(l-1), n0 2**l)``. A grid with
    twice the steps therefore refines the same path: every coarse increment is
    the sum of the two fine ones below it.

    Returns an array of shape ``(len(replicas), n_modes, n_steps)``.
    """
    replicas = np.atleast_1d(np.asarray(replicas, dtype=np.int64))
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    n0, levels = n_steps, 0
    while n0 % 2 == 0:
        n0 //= 2
        levels += 1

    Z = np.empty((len(replicas), n_modes, n_steps))
    for k in range(n_modes):
        for i in range(n_steps):
            Z[:, k, i] = replica_normals(seed, replicas, k, i)

    dt = T / n0
    W = np.zeros((len(replicas), n_modes, n0 + 1))
    W[..., 1:] = np.cumsum(np.sqrt(dt) * Z[..., :n0], axis=-1)
    n_cur = n0
    for _ in range(levels):
        mid = 0.5 * (W[..., :-1] + W[..., 1:]) + 0.5 * np.sqrt(dt) * Z[..., n_cur:2 * n_cur]
        fine = np.empty(W.shape[:-1] + (2 * n_cur + 1,))
        fine[..., 0::2] = W
        fine[..., 1::2] = mid
        W = fine
        n_cur *= 2
        dt /= 2
    return np.diff(W, axis=-1)
