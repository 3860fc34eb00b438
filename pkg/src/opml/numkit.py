"""Deterministic numerical primitives shared by every other module.

All arithmetic is 64-bit floating point. The PRNG is splitmix64 with fully
documented derived streams (uniform doubles, Box-Muller normals, Knuth
Poisson, backward Fisher-Yates shuffles), so seeded data generation is
bit-identical across machines and across reimplementations in other
languages.
"""

import math

import numpy as np
from scipy.linalg.lapack import dpotrf

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_TWO53 = float(1 << 53)


class NumericalError(RuntimeError):
    """A numerical operation failed (failed factorization, non-finite value)."""


class Rng:
    """splitmix64 generator.

    State update per draw: ``state += 0x9E3779B97F4A7C15 (mod 2^64)``,
    output ``z = state``, then ``z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
    z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31`` (all mod 2^64).

    Derived streams (each documented so other implementations can match
    the byte-exact output):

    * ``uniform``: ``(next_u64() >> 11) / 2^53`` in [0, 1).
    * ``uniform_index(n)``: rejection sampling -- draw ``u`` until
      ``u < 2^64 - (2^64 mod n)``, return ``u mod n``. Unbiased.
    * ``normal``: Box-Muller cosine branch, two uniforms per draw,
      ``sqrt(-2 ln(1-u1)) * cos(2 pi u2)``, no caching of the sine value.
    * ``poisson``: Knuth's product-of-uniforms method.
    * ``permutation(n)``: backward Fisher-Yates, ``i = n-1 .. 1``,
      ``j = uniform_index(i+1)``, swap.
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform_index(self, n: int) -> int:
        """Unbiased draw from {0, ..., n-1} via rejection sampling."""
        if n < 1:
            raise ValueError(f"uniform_index needs n >= 1, got {n}")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def uniform(self) -> float:
        return (self.next_u64() >> 11) / _TWO53

    def normal(self) -> float:
        u1 = self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log1p(-u1)) * math.cos(2.0 * math.pi * u2)

    def poisson(self, mean: float) -> int:
        if mean < 0:
            raise ValueError(f"poisson mean must be >= 0, got {mean}")
        threshold = math.exp(-mean)
        k = 0
        p = 1.0
        while True:
            p *= self.uniform()
            if p <= threshold:
                return k
            k += 1

    def permutation(self, n: int) -> np.ndarray:
        idx = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.uniform_index(i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx


def sigmoid(x) -> np.ndarray:
    """Stable logistic function.

    Branch form pinned for reproducibility: ``1 / (exp(-x) + 1)`` for
    ``x >= 0`` and ``exp(x) / (1 + exp(x))`` otherwise. Loss gradients rely
    on this exact evaluation, so do not swap in another formulation.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    nonneg = x >= 0
    out[nonneg] = 1.0 / (np.exp(-x[nonneg]) + 1.0)
    ex = np.exp(x[~nonneg])
    out[~nonneg] = ex / (1.0 + ex)
    return out


def softplus(x) -> np.ndarray:
    """log(1 + exp(x)) without overflow, elementwise."""
    return np.logaddexp(0.0, np.asarray(x, dtype=np.float64))


def stable_log_sum(constant: float, terms) -> float:
    """log(constant + sum_i exp(terms_i)) without overflow.

    Evaluated as ``m + log(constant * exp(-m) + sum_i exp(terms_i - m))``
    with ``m = max(0, max_i terms_i)`` when ``constant > 0`` and
    ``m = max_i terms_i`` when ``constant == 0``.

    Args:
        constant: additive constant inside the log, must be >= 0.
        terms: vector of exponents; may be empty if constant > 0.

    Raises:
        ValueError: on a negative or non-finite constant, non-finite terms,
            or the log(0) case (constant == 0 with no terms).
    """
    t = np.asarray(terms, dtype=np.float64).ravel()
    if not (constant >= 0 and math.isfinite(constant)):
        raise ValueError(f"constant must be finite and >= 0, got {constant}")
    if t.size and not np.isfinite(t).all():
        raise ValueError("terms must be finite")
    if constant == 0:
        if t.size == 0:
            raise ValueError("log(0): constant == 0 and no terms")
        m = float(t.max())
    else:
        m = max(0.0, float(t.max())) if t.size else 0.0
    acc = constant * math.exp(-m) + float(np.exp(t - m).sum())
    return m + math.log(acc)


def logdet_psd(gram: np.ndarray, epsilon: float) -> float:
    """log det(gram + epsilon * I) of a symmetric PSD matrix via Cholesky.

    The input is symmetrized before the shift, so small asymmetry from
    accumulated rounding (at most 1e-10) is tolerated; anything larger is
    a contract violation. Equals ``2 * sum(log diag(L))`` for the lower
    Cholesky factor L of the shifted matrix.

    Raises:
        ValueError: non-square or visibly asymmetric input, epsilon < 0.
        NumericalError: shifted matrix not positive definite; the message
            names the failing pivot (1-based leading-minor order).
    """
    a = np.asarray(gram, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"gram must be square, got shape {a.shape}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    if not np.isfinite(a).all():
        raise ValueError("gram has non-finite entries")
    if a.size and float(np.abs(a - a.T).max()) > 1e-10:
        raise ValueError("gram is not symmetric within 1e-10")
    n = a.shape[0]
    if n == 0:
        return 0.0
    shifted = (a + a.T) / 2.0 + epsilon * np.eye(n)
    c, info = dpotrf(shifted, lower=1)
    if info != 0:
        raise NumericalError(
            f"matrix not positive definite after shift: pivot {info}"
        )
    return 2.0 * float(np.sum(np.log(np.diag(c))))


def finite_diff_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a matrix.

    Probes ``(f(x + h e_ij) - f(x - h e_ij)) / (2 h)`` for every entry.
    Intended as an independent oracle for analytic gradients; O(size(x))
    function evaluations, so keep the instances small.
    """
    if h <= 0:
        raise ValueError(f"step h must be > 0, got {h}")
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        ij = it.multi_index
        xp = x.copy()
        xp[ij] += h
        xm = x.copy()
        xm[ij] -= h
        fp = float(f(xp))
        fm = float(f(xm))
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericalError(f"non-finite value while probing entry {ij}")
        grad[ij] = (fp - fm) / (2.0 * h)
    return grad
