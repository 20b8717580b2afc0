"""Most powerful tests between two discrete outcome models on n i.i.d. copies.

The likelihood ratio of an outcome sequence depends only on its count
vector, so exact computations enumerate the C(n+m-1, m-1) count vectors
with multinomial weights instead of the m**n sequences. Every probability
product is formed in the log domain.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import EnumerationTooLarge
from .information import kl_divergence
from .measurement import as_distribution

MAX_COUNT_VECTORS = 2_000_000
TIE_RTOL = 1e-10

__all__ = [
    "LikelihoodRatioTest",
    "TestPerformance",
    "MonteCarloPerformance",
    "SteinResult",
    "count_vectors",
    "mp_test",
    "test_performance",
    "beta_star",
    "log_beta_star",
    "stein_exponent",
    "monte_carlo_power",
    "power_approx_stein",
    "power_approx_fisher",
    "gamma_max",
]


@dataclass(frozen=True)
class LikelihoodRatioTest:
    """Randomized likelihood-ratio test phi*.

    Rejects H0 when Lambda_n > k, rejects with probability ``boundary_prob``
    when Lambda_n = k, and accepts otherwise. ``log_threshold`` is ln k and
    is what the decision actually uses; ``threshold_k`` may overflow to inf.
    """

    threshold_k: float
    boundary_prob: float
    n: int
    n_outcomes: int
    alpha_star: float | None = None
    log_threshold: float = field(default=None)
    uninformative: bool = False

    def __post_init__(self):
        if not 0.0 <= self.boundary_prob <= 1.0:
            raise ValueError(f"boundary_prob must lie in [0, 1], got {self.boundary_prob}")
        if self.threshold_k < 0:
            raise ValueError("threshold_k must be >= 0")
        if self.log_threshold is None:
            lk = -math.inf if self.threshold_k == 0 else math.log(self.threshold_k)
            object.__setattr__(self, "log_threshold", lk)

    @classmethod
    def always_accept(cls, n: int, n_outcomes: int) -> "LikelihoodRatioTest":
        return cls(math.inf, 0.0, n, n_outcomes)

    @classmethod
    def always_reject(cls, n: int, n_outcomes: int) -> "LikelihoodRatioTest":
        return cls(0.0, 1.0, n, n_outcomes)


@dataclass(frozen=True)
class TestPerformance:
    alpha: float
    beta: float
    power: float
    log_beta: float = None

    # keeps pytest from collecting the class when imported into a test module
    __test__ = False


@dataclass(frozen=True)
class MonteCarloPerformance:
    alpha: float
    beta: float
    power: float
    alpha_halfwidth: float
    power_halfwidth: float
    samples: int
    test: LikelihoodRatioTest

    @property
    def beta_halfwidth(self) -> float:
        return self.power_halfwidth


@dataclass(frozen=True)
class SteinResult:
    alpha_star: float
    kl: float
    reference: float
    rows: list  # (n, beta_n^(1/n))


def _n_vectors(n: int, m: int) -> int:
    return math.comb(n + m - 1, m - 1)


@lru_cache(maxsize=64)
def _count_vectors_cached(n: int, m: int) -> np.ndarray:
    if m == 1:
        out = np.array([[n]], dtype=np.int64)
    else:
        blocks = []
        for first in range(n + 1):
            rest = _count_vectors_cached(n - first, m - 1)
            head = np.full((rest.shape[0], 1), first, dtype=np.int64)
            blocks.append(np.hstack([head, rest]))
        out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def count_vectors(n: int, m: int) -> np.ndarray:
    """All (c_1..c_m) with c_i >= 0 and sum n, as a (K, m) int array."""
    if n < 0 or m < 1:
        raise ValueError("need n >= 0 and m >= 1")
    K = _n_vectors(n, m)
    if K > MAX_COUNT_VECTORS:
        raise EnumerationTooLarge(
            f"{K} count vectors for n={n}, m={m} exceeds {MAX_COUNT_VECTORS}; "
            "use monte_carlo_power"
        )
    return _count_vectors_cached(n, m)


def _log_probs(counts: np.ndarray, p: np.ndarray, log_coef: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    terms = np.where(counts > 0, counts * np.where(p > 0, logp, 0.0), 0.0)
    impossible = np.any((counts > 0) & (p == 0), axis=1)
    out = log_coef + terms.sum(axis=1)
    out[impossible] = -np.inf
    return out


def _log_ratio(l0: np.ndarray, l1: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        lr = l1 - l0
    lr[np.isneginf(l0) & np.isfinite(l1)] = np.inf
    lr[np.isneginf(l1) & np.isfinite(l0)] = -np.inf
    return lr


def _group_boundaries(sorted_desc: np.ndarray) -> np.ndarray:
    """Start indices of tie classes in a descending array (inf ties with inf)."""
    x = sorted_desc
    if x.size == 0:
        return np.array([], dtype=np.int64)
    with np.errstate(invalid="ignore"):
        gap = x[:-1] - x[1:]
    scale = np.maximum(1.0, np.abs(x[:-1]))
    same = np.where(np.isnan(gap), True, gap <= TIE_RTOL * scale)
    same &= ~(np.isinf(x[:-1]) ^ np.isinf(x[1:]))
    return np.concatenate([[0], np.nonzero(~same)[0] + 1])


@dataclass(frozen=True)
class _Classes:
    """Likelihood-ratio classes in decreasing order of ln Lambda."""

    log_lr: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    log_p1: np.ndarray


def _lr_classes(p0, p1, n: int) -> _Classes:
    p0 = np.asarray(as_distribution(p0).probs)
    p1 = np.asarray(as_distribution(p1).probs)
    if p0.shape != p1.shape:
        raise ValueError(f"outcome count mismatch: {p0.size} vs {p1.size}")
    if n < 1:
        raise ValueError("n must be >= 1")
    support = (p0 > 0) | (p1 > 0)
    p0, p1 = p0[support], p1[support]
    m = p0.size
    if m == 1:
        # single reachable outcome under both hypotheses: one certain class
        one = np.array([0.0])
        return _Classes(one, np.array([1.0]), np.array([1.0]), one)
    counts = count_vectors(n, m)
    log_coef = gammaln(n + 1) - gammaln(counts + 1).sum(axis=1)
    l0 = _log_probs(counts, p0, log_coef)
    l1 = _log_probs(counts, p1, log_coef)
    lr = _log_ratio(l0, l1)
    keep = ~np.isnan(lr)
    l0, l1, lr = l0[keep], l1[keep], lr[keep]
    order = np.argsort(-lr, kind="stable")
    l0, l1, lr = l0[order], l1[order], lr[order]
    starts = _group_boundaries(lr)
    P0 = np.add.reduceat(np.exp(l0), starts)
    # per-class logsumexp of l1
    mx = np.maximum.reduceat(l1, starts)
    safe = np.where(np.isfinite(mx), mx, 0.0)
    shift = l1 - np.repeat(safe, np.diff(np.append(starts, l1.size)))
    with np.errstate(divide="ignore"):
        logP1 = safe + np.log(np.add.reduceat(np.exp(shift), starts))
    logP1[np.isneginf(mx)] = -np.inf
    return _Classes(lr[starts], P0, np.exp(logP1), logP1)


def mp_test(p0, p1, n: int, alpha_star: float) -> LikelihoodRatioTest:
    """Exact-size most powerful randomized test of H0: p0 against H1: p1.

    Count-vector classes are visited in decreasing likelihood ratio;
    classes with Lambda = inf (impossible under H0) are rejected outright
    at no cost in size, and the class where the accumulated H0 mass first
    reaches ``alpha_star`` becomes the randomized boundary.

    Raises
    ------
    EnumerationTooLarge
        If more than ``MAX_COUNT_VECTORS`` count vectors would be needed.
    """
    if not 0.0 < alpha_star < 1.0:
        raise ValueError(f"alpha_star must lie in (0, 1), got {alpha_star}")
    m = len(as_distribution(p0))
    cl = _lr_classes(p0, p1, n)
    uninformative = bool(cl.log_lr.size == 1 and cl.log_lr[0] == 0.0)
    cum = 0.0
    for lr, P0 in zip(cl.log_lr, cl.p0):
        if P0 == 0.0:
            continue
        if cum + P0 >= alpha_star:
            gamma = float(min(max((alpha_star - cum) / P0, 0.0), 1.0))
            k = math.exp(lr) if lr < 700 else math.inf
            return LikelihoodRatioTest(k, gamma, n, m, alpha_star, float(lr), uninformative)
        cum += P0
    # H0 mass sums to 1 > alpha_star, so the loop always returns
    raise AssertionError("unreachable: H0 mass exhausted before reaching alpha_star")


def _decisions(cl: _Classes, test: LikelihoodRatioTest):
    lk = test.log_threshold
    x = cl.log_lr
    with np.errstate(invalid="ignore"):
        gap = x - lk
    finite = np.isfinite(x) & np.isfinite(lk)
    tol = TIE_RTOL * np.maximum(1.0, np.abs(np.where(finite, x, 0.0)))
    both_inf = np.isinf(x) & np.isinf(lk) & (np.sign(x) == np.sign(lk))
    eq = both_inf | (finite & (np.abs(np.where(finite, gap, 0.0)) <= tol))
    above = ~eq & (gap > 0)
    below = ~eq & ~above
    return above, eq, below


def test_performance(test: LikelihoodRatioTest, p0, p1) -> TestPerformance:
    """Exact type-I error, type-II error and power of ``test`` on (p0, p1)."""
    m = len(as_distribution(p0))
    if m != test.n_outcomes or len(as_distribution(p1)) != m:
        raise ValueError(f"test built for {test.n_outcomes} outcomes, got {m}")
    cl = _lr_classes(p0, p1, test.n)
    above, eq, below = _decisions(cl, test)
    g = test.boundary_prob
    alpha = float(cl.p0[above].sum() + g * cl.p0[eq].sum())
    parts = [cl.log_p1[below]]
    if g < 1.0:
        parts.append(math.log1p(-g) + cl.log_p1[eq])
    lb = np.concatenate(parts)
    log_beta = min(float(logsumexp(lb)), 0.0) if lb.size else -math.inf
    beta = math.exp(log_beta) if log_beta > -math.inf else 0.0
    beta = min(max(beta, 0.0), 1.0)
    alpha = min(max(alpha, 0.0), 1.0)
    return TestPerformance(alpha, beta, 1.0 - beta, log_beta)


test_performance.__test__ = False


def log_beta_star(p0, p1, n: int, alpha_star: float) -> float:
    """ln of the minimal type-II error among tests of size <= alpha_star."""
    return test_performance(mp_test(p0, p1, n, alpha_star), p0, p1).log_beta


def beta_star(p0, p1, n: int, alpha_star: float) -> float:
    return math.exp(log_beta_star(p0, p1, n, alpha_star))


def stein_exponent(p0, p1, alpha_star: float, n_values) -> SteinResult:
    """(beta_n*)^(1/n) per n, with exp(-D(p0||p1)) as the limiting reference."""
    D = kl_divergence(p0, p1)
    rows = []
    for n in n_values:
        lb = log_beta_star(p0, p1, int(n), alpha_star)
        rows.append((int(n), math.exp(lb / n)))
    return SteinResult(alpha_star, D, math.exp(-D), rows)


def _outcome_llr(p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return _log_ratio(np.log(p0), np.log(p1))


def _sample_log_lr(counts: np.ndarray, llr: np.ndarray) -> np.ndarray:
    finite = np.isfinite(llr)
    out = counts[:, finite] @ llr[finite]
    pos = np.any(counts[:, np.isposinf(llr)] > 0, axis=1)
    neg = np.any(counts[:, np.isneginf(llr)] > 0, axis=1)
    out = out.astype(float)
    out[neg] = -np.inf
    out[pos] = np.inf
    return out


def _chunk_rng(seed: int, stream: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, chunk])))


def monte_carlo_power(
    p0,
    p1,
    n: int,
    alpha_star: float,
    samples: int = 100_000,
    seed: int = 0,
    threads: int = 1,
    chunk_size: int = 10_000,
) -> MonteCarloPerformance:
    """Sampling estimate of the most powerful test's size and power.

    The threshold and boundary probability are calibrated on the upper
    ``alpha_star`` quantile of ln Lambda over one H0 sample; size and power
    are then measured on fresh H0 and H1 samples, scoring boundary hits by
    the boundary probability. Each chunk of samples draws from its own
    Philox stream keyed by (seed, stream, chunk), so the result is
    independent of ``threads``. Half-widths are binomial 95% intervals.
    """
    if samples < 1000:
        raise ValueError("monte_carlo_power needs at least 1000 samples")
    if not 0.0 < alpha_star < 1.0:
        raise ValueError(f"alpha_star must lie in (0, 1), got {alpha_star}")
    q0 = np.asarray(as_distribution(p0).probs)
    q1 = np.asarray(as_distribution(p1).probs)
    llr = _outcome_llr(q0, q1)
    sizes = [min(chunk_size, samples - s) for s in range(0, samples, chunk_size)]

    def draw(stream, probs, c):
        counts = _chunk_rng(seed, stream, c).multinomial(n, probs, size=sizes[c])
        return _sample_log_lr(counts, llr)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        calib = np.concatenate(list(pool.map(lambda c: draw(0, q0, c), range(len(sizes)))))
        x = np.sort(calib)[::-1]
        starts = _group_boundaries(x)
        freq = np.diff(np.append(starts, x.size)) / x.size
        cum = np.concatenate([[0.0], np.cumsum(freq)[:-1]])
        j = int(np.searchsorted(cum + freq, alpha_star, side="left"))
        j = min(j, len(starts) - 1)
        gamma = float(min(max((alpha_star - cum[j]) / freq[j], 0.0), 1.0))
        lk = float(x[starts[j]])
        test = LikelihoodRatioTest(
            math.exp(lk) if lk < 700 else math.inf, gamma, n, q0.size, alpha_star, lk
        )

        def score(stream, probs, c):
            v = draw(stream, probs, c)
            cls = _Classes(v, None, None, None)
            above, eq, _ = _decisions(cls, test)
            return int(above.sum()), int(eq.sum())

        h0 = list(pool.map(lambda c: score(1, q0, c), range(len(sizes))))
        h1 = list(pool.map(lambda c: score(2, q1, c), range(len(sizes))))

    def rate(parts):
        above = sum(a for a, _ in parts)
        eq = sum(e for _, e in parts)
        return (above + gamma * eq) / samples

    alpha, power = float(rate(h0)), float(rate(h1))

    def hw(p):
        return 1.96 * math.sqrt(max(p * (1 - p), 0.0) / samples)

    return MonteCarloPerformance(alpha, 1.0 - power, power, hw(alpha), hw(power), samples, test)


def power_approx_stein(n: int, D: float) -> float:
    """1 - exp(-n D)."""
    if D < 0:
        raise ValueError("D must be >= 0")
    if math.isinf(D):
        return 1.0
    return -math.expm1(-n * D)


def power_approx_fisher(n: int, J: float, dt: float) -> float:
    """1 - exp(-(n/2) J dt^2)."""
    if J < 0:
        raise ValueError("J must be >= 0")
    if math.isinf(J):
        return 1.0 if dt != 0 else 0.0
    return -math.expm1(-0.5 * n * J * dt * dt)


def gamma_max(n: int, dH2: float, dt: float, hbar: float = 1.0) -> tuple[float, float]:
    """Power of the optimum test, 1 - exp(-2 n dt^2 Var(H) / hbar^2), and its weak-signal form."""
    x = 2.0 * n * dt * dt * dH2 / hbar**2
    return -math.expm1(-x), x
