"""Seeded, splittable random variate streams.

Each ``RngStream`` is a counter-based generator: draw ``i`` of stream
``(master_seed, stream_id)`` is a pure hash of those three integers, so a
stream's output never depends on how many other streams exist or on the order
in which work is scheduled. Replicate ``r`` of a simulation always consumes
streams derived from component ``r``, which is what makes parallel execution
reproduce the serial results bit for bit.

Normal variates come from the inverse CDF applied to the stream's uniforms;
that choice is fixed for this package and covered by the determinism tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import InvalidParameter, InvalidProbability
from .special import normal_ppf_array

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_1 = 0xBF58476D1CE4E5B9
_MIX_2 = 0x94D049BB133111EB

# integer df at or below this use the sum-of-squared-normals route
_CHISQ_EXACT_DF = 400


def _mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX_1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX_2) & _MASK
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(_MIX_1)
    z ^= z >> np.uint64(27)
    z *= np.uint64(_MIX_2)
    z ^= z >> np.uint64(31)
    return z


def _fold(h: int, part) -> int:
    """Fold one integer or short string component into a 64-bit hash state."""
    if isinstance(part, str):
        for byte in part.encode("utf-8"):
            h = _mix64(h ^ ((byte + 1) * _GOLDEN))
        return _mix64(h ^ 0x53544152)
    if isinstance(part, (int, np.integer)):
        return _mix64(h ^ ((int(part) & _MASK) * _GOLDEN & _MASK))
    raise InvalidParameter(f"stream components must be ints or strings, got {type(part)!r}")


def _stream_key(master_seed: int, stream_id: int) -> int:
    h = _mix64((master_seed & _MASK) ^ 0x6A09E667F3BCC909)
    return _mix64(h ^ ((stream_id & _MASK) * _GOLDEN & _MASK) ^ 0xBB67AE8584CAA73B)


@dataclass
class RngStream:
    """Single-owner mutable stream state; never share one across threads."""

    master_seed: int
    stream_id: int
    counter: int = 0
    _key: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._key = _stream_key(self.master_seed, self.stream_id)

    def raw(self, m: int) -> np.ndarray:
        """Next ``m`` 64-bit words (advances the counter)."""
        counters = np.arange(self.counter, self.counter + m, dtype=np.uint64)
        self.counter += m
        state = np.uint64(self._key) + (counters + np.uint64(1)) * np.uint64(_GOLDEN)
        return _mix64_array(state)

    def uniforms(self, m: int) -> np.ndarray:
        """``m`` uniforms strictly inside (0, 1)."""
        bits53 = (self.raw(m) >> np.uint64(11)).astype(np.float64)
        return (bits53 + 0.5) * (2.0 ** -53)

    def normals(self, m: int) -> np.ndarray:
        return normal_ppf_array(self.uniforms(m))

    def substream(self, *parts) -> "RngStream":
        """Derive an independent child stream keyed by this stream and ``parts``."""
        h = _mix64(self.stream_id ^ 0x243F6A8885A308D3)
        for part in parts:
            h = _fold(h, part)
        return derive_stream(self.master_seed, h)


def derive_stream(master_seed: int, stream_id: int) -> RngStream:
    """Stream determined entirely by ``(master_seed, stream_id)``."""
    return RngStream(master_seed=master_seed, stream_id=stream_id)


def substream(master_seed: int, *parts) -> RngStream:
    """Stream keyed by a master seed and a path of ints/strings."""
    h = 0x243F6A8885A308D3
    for part in parts:
        h = _fold(h, part)
    return derive_stream(master_seed, h)


def derive_seed(master_seed: int, *parts) -> int:
    """64-bit seed deterministically derived from a master seed and a path.

    Used to hand independent sub-experiments (grid settings, repeated study
    runs) their own master seeds.
    """
    h = _mix64((master_seed & _MASK) ^ 0x452821E638D01377)
    for part in parts:
        h = _fold(h, part)
    return h


def mvn_sample(rng: RngStream, mean, cov, m: int) -> np.ndarray:
    """``m`` i.i.d. multivariate normal rows via the Cholesky factor of ``cov``."""
    mean = np.asarray(mean, dtype=float)
    lower = numerics.cholesky(cov)
    p = mean.shape[0]
    if lower.shape[0] != p:
        raise InvalidParameter(
            f"mean has length {p} but covariance is {lower.shape[0]}x{lower.shape[0]}"
        )
    z = rng.normals(m * p).reshape(m, p)
    return mean + z @ lower.T


def bernoulli_sample(rng: RngStream, p: float, m: int) -> np.ndarray:
    if not 0.0 <= p <= 1.0:
        raise InvalidProbability(f"probability must be in [0, 1], got {p}")
    return (rng.uniforms(m) < p).astype(np.int64)


def _gamma_draw(rng: RngStream, shape: float) -> float:
    """One Gamma(shape, 1) draw by Marsaglia-Tsang squeeze rejection."""
    if shape < 1.0:
        u = float(rng.uniforms(1)[0])
        return _gamma_draw(rng, shape + 1.0) * u ** (1.0 / shape)
    d = shape - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    while True:
        x = float(rng.normals(1)[0])
        v = (1.0 + c * x) ** 3
        if v <= 0.0:
            continue
        u = float(rng.uniforms(1)[0])
        if np.log(u) < 0.5 * x * x + d - d * v + d * np.log(v):
            return d * v


def chisq_sample(rng: RngStream, df: float) -> float:
    """One chi-square draw; exact normal sum for small integer df."""
    if df <= 0.0:
        raise InvalidParameter(f"degrees of freedom must be positive, got {df}")
    if float(df).is_integer() and df <= _CHISQ_EXACT_DF:
        z = rng.normals(int(df))
        return float(z @ z)
    return 2.0 * _gamma_draw(rng, 0.5 * df)


def scaled_inv_chisq_sample(rng: RngStream, df: float, scale: float) -> float:
    """One draw of ``scale * df / chisq(df)``; strictly positive."""
    if df <= 0.0:
        raise InvalidParameter(f"degrees of freedom must be positive, got {df}")
    if scale <= 0.0:
        raise InvalidParameter(f"scale must be positive, got {scale}")
    return scale * df / chisq_sample(rng, df)
