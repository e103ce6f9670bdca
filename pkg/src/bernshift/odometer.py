"""The dyadic odometer tau (add one with carry, least significant digit first).

tau(1,..,1,0,w) = (0,..,0,1,w).  On a finite word the carry can run off the
end (all-ones prefix); that is an overflow and raises unless wrapping is
explicitly requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cocycle import LogValue
from .errors import OdometerOverflow, PreconditionError, SingularMarginal
from .measure import ProductMeasure, Word, cylinder_mass

DIRECT_MAX_EXPONENT = 12


@dataclass(frozen=True)
class OdometerStepResult:
    word: Word
    phi: int
    overflow: bool = False


def phi_first_zero(x: Word) -> int:
    """1-based position of the first zero."""
    try:
        return x.symbols.index(0) + 1
    except ValueError:
        raise OdometerOverflow(f"no zero within horizon {x.horizon}") from None


def odometer_step(x: Word, wrap: bool = False) -> OdometerStepResult:
    """tau(x).  With ``wrap`` an all-ones word maps to all zeros, flagged overflow."""
    s = x.symbols
    if any(v > 1 for v in s):
        raise PreconditionError("the odometer acts on binary words")
    try:
        phi = phi_first_zero(x)
    except OdometerOverflow:
        if wrap:
            return OdometerStepResult(Word((0,) * len(s)), len(s), True)
        raise
    return OdometerStepResult(Word((0,) * (phi - 1) + (1,) + s[phi:]), phi)


def odometer_decrement(x: Word) -> Word:
    """tau^{-1}: subtract one with borrow."""
    s = x.symbols
    try:
        j = s.index(1)
    except ValueError:
        raise OdometerOverflow("all-zeros prefix has no predecessor within horizon") from None
    return Word((1,) * j + (0,) + s[j + 1:])


# integer view: x_k is the coefficient of 2^(k-1)


def word_to_int(x: Word) -> int:
    return int("".join(str(v) for v in reversed(x.symbols)) or "0", 2)


def int_to_word(v: int, horizon: int) -> Word:
    return Word(tuple((v >> i) & 1 for i in range(horizon)))


def odometer_power(x: Word, count: int) -> Word:
    """tau^count(x) by carry arithmetic."""
    if count < 0:
        raise PreconditionError("count must be >= 0")
    y = word_to_int(x) + count
    if y >> x.horizon:
        raise OdometerOverflow(f"carry leaves horizon {x.horizon}")
    return int_to_word(y, x.horizon)


def _log_odds(m: ProductMeasure, ks) -> np.ndarray:
    """L_k = log(P_k(1)/P_k(0))."""
    a = m.bias(ks)
    if np.any(np.abs(a) >= 1):
        raise SingularMarginal("marginal with |a_k| = 1")
    return np.log1p(a) - np.log1p(-a)


def log_tau_prime(m: ProductMeasure, x: Word) -> LogValue:
    """log tau'(x) = L_phi - sum_{k<phi} L_k, exact finite sum."""
    phi = phi_first_zero(x)
    L = _log_odds(m, np.arange(1, phi + 1))
    return LogValue(float(L[-1]) - math.fsum(L[:-1].tolist()), 0.0)


def log_tau_power_prime(m: ProductMeasure, x: Word, count: int) -> LogValue:
    """log (tau^count)'(x) = sum_k L_k (y_k - x_k) with y = tau^count x."""
    y = odometer_power(x, count)
    diff = y.array() - x.array()
    nz = np.nonzero(diff)[0]
    if nz.size == 0:
        return LogValue(0.0)
    L = _log_odds(m, nz + 1)
    return LogValue(math.fsum((L * diff[nz]).tolist()), 0.0)


def log_tau_orbit_sum(m: ProductMeasure, x: Word, count: int) -> LogValue:
    """sum_{j<count} log tau'(tau^j x) by stepping."""
    total = []
    y = x
    for _ in range(count):
        total.append(log_tau_prime(m, y).value)
        y = odometer_step(y).word
    return LogValue(math.fsum(total), 0.0)


def odometer_property_check(N: int, start: Word | None = None) -> bool:
    """Every N-prefix appears exactly once along a 2^N-step tau orbit.

    The first N coordinates of tau^j x depend only on x_1..x_N and j, so the
    orbit is run on N-words with the carry out of position N discarded.
    """
    if not 1 <= N <= 20:
        raise PreconditionError("odometer_property_check supports 1 <= N <= 20")
    x = start if start is not None else Word((0,) * N)
    if x.horizon < N:
        raise PreconditionError("start word shorter than N")
    cur = list(x.symbols[:N])
    seen = bytearray(1 << N)
    for _ in range(1 << N):
        code = 0
        for i, v in enumerate(cur):
            code |= v << i
        if seen[code]:
            return False
        seen[code] = 1
        # one odometer step, in place
        i = 0
        while i < N and cur[i] == 1:
            cur[i] = 0
            i += 1
        if i < N:
            cur[i] = 1
    return all(seen) and cur == list(x.symbols[:N])


# -- rigidity times tau^{2^n} -------------------------------------------------


@dataclass(frozen=True)
class RigidityResult:
    n: int
    coordinate_fix_ok: bool
    derivative_ok: bool
    lhs: float
    rhs: float
    method: str

    def to_dict(self):
        return dict(self.__dict__)


def _rhs(m: ProductMeasure, x: Word, n: int) -> float:
    # sigma^n x sees the marginals P_{n+k}
    return log_tau_prime(m.shifted(n), x.shifted(n)).value


def rigidity_identity_check(m: ProductMeasure, x: Word, n: int, method: str = "auto", atol: float = 1e-10) -> RigidityResult:
    """(tau^{2^n})'(x) against tau'(sigma^n x), plus (tau^{2^n} x)_j = x_j for j <= n.

    The right side is evaluated with the shifted measure, whose coordinate k
    carries P_{n+k}; this is the reading under which the identity is exact.
    """
    if not 0 <= n <= 24:
        raise PreconditionError("rigidity checks support 0 <= n <= 24")
    if method == "auto":
        method = "direct" if n <= DIRECT_MAX_EXPONENT else "carry"
    if method == "direct":
        y = x
        parts = []
        for _ in range(1 << n):
            parts.append(log_tau_prime(m, y).value)
            y = odometer_step(y).word
        lhs = math.fsum(parts)
    elif method == "carry":
        y = odometer_power(x, 1 << n)
        lhs = log_tau_power_prime(m, x, 1 << n).value
    else:
        raise PreconditionError(f"unknown method {method!r}")
    rhs = _rhs(m, x, n)
    return RigidityResult(
        n=n,
        coordinate_fix_ok=y.symbols[:n] == x.symbols[:n],
        derivative_ok=abs(lhs - rhs) <= atol,
        lhs=lhs,
        rhs=rhs,
        method=method,
    )


@dataclass(frozen=True)
class RigidityBatch:
    n: int
    lhs: np.ndarray
    rhs: np.ndarray
    fix_ok: np.ndarray
    overflow: np.ndarray  # rows excluded from the statistics
    method: str

    @property
    def max_deviation(self) -> float:
        keep = ~self.overflow
        return float(np.max(np.abs(self.lhs[keep] - self.rhs[keep]))) if keep.any() else 0.0


def _first_zero(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(phi per row, overflow mask)."""
    z = X == 0
    has = z.any(axis=1)
    return np.argmax(z, axis=1) + 1, ~has


def _tau_prime_rows(L: np.ndarray, cumL: np.ndarray, phi: np.ndarray) -> np.ndarray:
    # L[k-1] = L_k, cumL[j] = L_1 + ... + L_j
    return L[phi - 1] - cumL[phi - 1]


def rigidity_batch(m: ProductMeasure, X: np.ndarray, n: int, method: str = "auto") -> RigidityBatch:
    """Vectorised rigidity check over the rows of X (samples x horizon)."""
    X = np.asarray(X, dtype=np.uint8)
    S, H = X.shape
    if H <= n:
        raise PreconditionError("horizon must exceed n")
    if method == "auto":
        method = "direct" if n <= DIRECT_MAX_EXPONENT else "carry"
    L = _log_odds(m, np.arange(1, H + 1))
    cumL = np.concatenate([[0.0], np.cumsum(L)])
    cols = np.arange(H)

    # carry path: adding 2^n flips positions n+1 .. n+phi(sigma^n x)
    phi_s, over = _first_zero(X[:, n:])
    if method == "carry":
        Y = X.copy()
        flip = (cols[None, :] >= n) & (cols[None, :] < (n + phi_s)[:, None]) & ~over[:, None]
        Y[flip] ^= 1
        lhs = (L[None, :] * (Y.astype(float) - X)).sum(axis=1)
    elif method == "direct":
        Y = X.copy()
        lhs = np.zeros(S)
        over = over.copy()
        for _ in range(1 << n):
            phi, ov = _first_zero(Y)
            over |= ov
            phi = np.where(ov, 1, phi)
            lhs += np.where(ov, 0.0, _tau_prime_rows(L, cumL, phi))
            Y[cols[None, :] < (phi - 1)[:, None]] = 0
            Y[np.arange(S), phi - 1] = 1
    else:
        raise PreconditionError(f"unknown method {method!r}")
    # right side under the shifted marginals: L_{n+phi'} - sum_{j<phi'} L_{n+j}
    ph = np.where(over, 1, phi_s)
    rhs = L[n + ph - 1] - (cumL[n + ph - 1] - cumL[n])
    fix_ok = np.all(Y[:, :n] == X[:, :n], axis=1)
    return RigidityBatch(n, lhs, rhs, fix_ok, over, method)


def overflow_mass_bound(m: ProductMeasure, horizon: int) -> float:
    """Mass of the all-ones prefix of length ``horizon``: prod (1 + a_k)/2."""
    return cylinder_mass(m, Word((1,) * horizon))


def transport_check(m: ProductMeasure, N: int, rel: float = 1e-12) -> dict:
    """mass(tau c) = mass(c) * exp(log tau'(c)) for every non-all-ones N-prefix.

    Also checks that tau maps these 2^N - 1 prefixes bijectively onto the
    prefixes other than all zeros.
    """
    if not 1 <= N <= 12:
        raise PreconditionError("transport_check supports 1 <= N <= 12")
    worst = 0.0
    images = set()
    for v in range((1 << N) - 1):
        c = int_to_word(v, N)
        step = odometer_step(c)
        images.add(step.word.symbols)
        lhs = cylinder_mass(m, step.word)
        rhs = cylinder_mass(m, c) * math.exp(log_tau_prime(m, c).value)
        worst = max(worst, abs(lhs - rhs) / max(lhs, 1e-300))
    bijective = len(images) == (1 << N) - 1 and (0,) * N not in images
    return {"N": N, "max_rel_error": worst, "bijective": bijective, "ok": bijective and worst <= rel}
