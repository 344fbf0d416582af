"""Closed-form performance formulas and independent oracles for each of them.

Conventions: ``f`` frame length, ``k`` hash count, ``q`` dummy probability,
``c`` average neighbor count, ``C`` detector count, ``omega`` polled positions,
``gamma`` real positions among them, ``t`` polling rounds.

The expected number of distinct slots is available in two flavours.
``mu_as_written`` is the sum ``sum_l l * binom(f, l) / f**k`` exactly as it is
usually quoted; it disagrees with brute-force enumeration (f=2, k=2 gives 1.0
against 1.5).  ``mu_oracle`` is ``f * (1 - (1 - 1/f)**k)``, which matches
enumeration.  Every formula downstream of it takes a ``mu_mode`` switch.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats
from scipy.special import gammaln

from ._rng import draw_u64, substream
from .protocol import HashFamily, InvalidParameter, batch_frames

__all__ = [
    "UndefinedResult",
    "LOCATION_REPORT_BITS",
    "AnalysisParams",
    "avg_neighbors",
    "mu_as_written",
    "mu_oracle",
    "mu_enumerate",
    "mu_monte_carlo",
    "mu",
    "p_one",
    "p_one_monte_carlo",
    "false_positive_prob",
    "expected_rounds",
    "p1",
    "p1_prime",
    "p_m",
    "rank_pdf",
    "correctness_prob",
    "p1_advanced",
    "Overhead",
    "overhead_closed_forms",
    "validate_analysis",
]

# size of one sealed location report in the detector-communication counters
LOCATION_REPORT_BITS = 256


class UndefinedResult(ValueError):
    """The formula has no finite value for these arguments."""


@dataclass(frozen=True)
class AnalysisParams:
    N: int = 10_000
    S: float = 2000.0**2
    R: float = 50.0
    C: int = 10_000
    q: float = 0.9
    f: int = 300
    k: int = 10
    omega: int = 15
    gamma: int = 1
    t: int = 1

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise InvalidParameter("q must be in [0, 1]")
        if self.omega > self.f:
            raise InvalidParameter("omega must not exceed f")
        if self.gamma > self.k:
            raise InvalidParameter("gamma must not exceed k")
        if min(self.N, self.S, self.R, self.C, self.f, self.k, self.omega) <= 0:
            raise InvalidParameter("N, S, R, C, f, k, omega must be positive")

    @property
    def c(self) -> int:
        return avg_neighbors(self.N, self.R, self.S)

    @classmethod
    def from_config(cls, config, gamma: int = 1, t: int = 1) -> "AnalysisParams":
        return cls(config.C, config.area, config.R, config.C, config.q, config.f,
                   config.k, config.omega, gamma, t)


def avg_neighbors(N: float, R: float, S: float) -> int:
    return math.floor(math.pi * N * R * R / S)


# -- distinct slots -----------------------------------------------------------


def _check_fk(f: int, k: int) -> None:
    if f < 1 or k < 1:
        raise InvalidParameter(f"need f >= 1 and k >= 1, got f={f}, k={k}")


def mu_as_written(f: int, k: int) -> float:
    """``sum_{l=1..k} l * binom(f, l) / f**k`` with exact integers."""
    _check_fk(f, k)
    num = sum(l * math.comb(f, l) for l in range(1, k + 1))
    return float(Fraction(num, f**k))


def mu_oracle(f: int, k: int) -> float:
    """Expected number of distinct values among ``k`` uniform draws from ``f`` slots."""
    _check_fk(f, k)
    return f * -math.expm1(k * math.log1p(-1.0 / f)) if f > 1 else 1.0


def mu_enumerate(f: int, k: int, limit: int = 10**6) -> float:
    """Average distinct count over all ``f**k`` equally likely hash outcomes."""
    _check_fk(f, k)
    if f**k > limit:
        raise InvalidParameter(f"f**k = {f**k} outcomes exceed the enumeration limit {limit}")
    total = sum(len(set(t)) for t in itertools.product(range(f), repeat=k))
    return total / f**k


def mu_monte_carlo(f: int, k: int, trials: int, rng: np.random.Generator) -> tuple[float, float]:
    """Sample mean and its standard error."""
    _check_fk(f, k)
    s = np.sort(rng.integers(0, f, size=(trials, k)), axis=1)
    distinct = 1 + (s[:, 1:] != s[:, :-1]).sum(axis=1)
    return float(distinct.mean()), float(distinct.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0


def mu(f: int, k: int, mode: str = "oracle") -> float:
    if mode == "oracle":
        return mu_oracle(f, k)
    if mode == "as_written":
        return mu_as_written(f, k)
    raise InvalidParameter(f"unknown mu mode {mode!r}")


# -- basic scheme -------------------------------------------------------------


def p_one(f: int, k: int, q: float, c: float, mu_value: float) -> float:
    """Probability a detector without the lost tag survives one basic round."""
    if mu_value <= 0:
        raise InvalidParameter("mu must be positive")
    return (1.0 - (1.0 - 1.0 / f) ** (k * q * c)) ** mu_value


def p_one_monte_carlo(f: int, k: int, q: float, c: int, trials: int, seed: int = 0) -> tuple[float, float]:
    """Survival frequency of a non-covering detector with ``c`` dummy-capable neighbors.

    Runs the real frame machinery: each neighbor joins with probability ``q``
    under a fresh pseudonym, and the detector survives when every slot of a
    random lost id is busy.  Returns (frequency, standard error).
    """
    rng = substream(seed, "p_one_mc")
    round_seed = draw_u64(rng)
    joined = rng.random((trials, c)) < q
    owners = np.nonzero(joined)[0]
    pseudonyms = draw_u64(rng, owners.size)
    bits, _, _ = batch_frames(owners, pseudonyms, round_seed, trials, f, k)
    lost_slots = HashFamily(k).slots(draw_u64(rng, trials), round_seed, f)
    survive = bits[np.arange(trials)[:, None], lost_slots].all(axis=1)
    freq = float(survive.mean())
    return freq, math.sqrt(max(freq * (1 - freq), 1e-300) / trials)


def false_positive_prob(p_one_value: float, t: int, C: int) -> float:
    """Probability that at least one of ``C`` detectors survives ``t`` rounds by chance."""
    if t < 1:
        raise InvalidParameter(f"t must be >= 1, got {t}")
    return -math.expm1(C * math.log1p(-(p_one_value**t))) if p_one_value < 1 else 1.0


def expected_rounds(f: int, k: int, q: float, c: float, mu_value: float, C: int, cap: int = 200) -> int:
    """``floor(log_{p_e}(1/C))`` with ``p_e = 1 - p_one``, limited to ``cap``.

    Raises :class:`UndefinedResult` when ``p_e`` is 0 or 1.
    """
    p_e = 1.0 - p_one(f, k, q, c, mu_value)
    return rounds_for_exclusion(p_e, C, cap)


def rounds_for_exclusion(p_e: float, C: int, cap: int = 200) -> int:
    if not 0.0 < p_e < 1.0:
        raise UndefinedResult(f"exclusion probability {p_e} gives no finite round count")
    t = math.log(C) / -math.log(p_e)
    # 1e-9 absorbs rounding in exact cases such as p_e = 1/2, C = 1024
    return min(math.floor(t + 1e-9), cap)


# -- rank distribution --------------------------------------------------------


def p1(f: int, k: int, q: float, c: float) -> float:
    """One-probability of a slot for a detector that also hears the lost tag."""
    return 1.0 - (1.0 - 1.0 / f) ** ((c * q + 1) * k)


def p1_prime(f: int, k: int, q: float, c: float) -> float:
    """One-probability of a slot for a detector hearing only dummies."""
    return 1.0 - (1.0 - 1.0 / f) ** (c * q * k)


def _binom_logpmf(n: int, p: float) -> np.ndarray:
    z = np.arange(n + 1)
    logc = gammaln(n + 1) - gammaln(z + 1) - gammaln(n - z + 1)
    with np.errstate(divide="ignore"):
        return logc + z * np.log(p) + (n - z) * np.log1p(-p)


def p_m(f: int, k: int, q: float, c: float, z_start: int = 1) -> float:
    """Probability the real detector has at least as many ones as a fake one.

    Ones counts are modeled as Binomial(u, p1) and Binomial(u', p1') with
    ``u = min(f, (cq+1)k)`` and ``u' = min(f, cqk)`` (rounded to integers).
    The outer sum starts at ``z_start`` (1 in the final displayed form; 0 in
    the first line of its derivation).
    """
    u = min(f, round((c * q + 1) * k))
    u_p = min(f, round(c * q * k))
    a, b = p1(f, k, q, c), p1_prime(f, k, q, c)
    pmf_real = np.exp(_binom_logpmf(u, a))
    pmf_fake = np.exp(_binom_logpmf(u_p, b)) if u_p > 0 else np.array([1.0])
    tail = np.cumsum(pmf_real[::-1])[::-1]  # tail[z] = Pr(b_real >= z)
    total = 0.0
    for z in range(z_start, u_p + 1):
        if z > u:
            break
        total += tail[z] * pmf_fake[z]
    return float(min(total, 1.0))


def rank_pdf(C: int, p_m_value: float) -> np.ndarray:
    """``Pr(rank = r) = binom(C-1, r-1) p_m^(r-1) (1-p_m)^(C-r)`` for ``r = 1..C``.

    Index ``r - 1`` of the result holds rank ``r``.
    """
    if C < 1:
        raise InvalidParameter("C must be >= 1")
    # scipy's binom.pmf overflows for p below ~1e-304; the lost terms are under 1e-295
    p = 0.0 if p_m_value < 1e-300 else p_m_value
    return stats.binom.pmf(np.arange(C), C - 1, p)


# -- correctness and the advanced scheme -------------------------------------


def correctness_prob(N: float, R: float, S: float) -> float:
    """Probability at least one detector lies within ``R`` of the lost tag."""
    if N < 0 or R < 0 or S <= 0:
        raise InvalidParameter("N, R must be non-negative and S positive")
    return -math.expm1(-math.pi * N * R * R / S)


def p1_advanced(f: int, k: int, q: float, c: float, gamma: int, omega: int) -> float:
    """One-probability of a polled bit at a covering detector with ``gamma`` real positions."""
    if not 0 <= gamma <= omega <= f:
        raise InvalidParameter(f"need 0 <= gamma <= omega <= f, got {gamma}, {omega}, {f}")
    base = p1_prime(f, k, q, c)
    return base * (omega - gamma) / omega + gamma / omega


# -- overhead -----------------------------------------------------------------


@dataclass(frozen=True)
class Overhead:
    tag_comm_bits: float
    tag_hash_ops: float
    detector_comm_bits: float


def overhead_closed_forms(scheme: str, *, c: float, k: int, t: int, C: int, f: int, omega: int | None = None,
                          location_bits: int = LOCATION_REPORT_BITS) -> Overhead:
    """Approximate totals over ``t`` rounds.

    ``c`` is the average number of tags answering inside one detector's frame.
    """
    if t <= 0:
        return Overhead(0.0, 0.0, 0.0)
    hash_ops = c * k * t * C
    if scheme == "basic":
        return Overhead(c * k * t * C, hash_ops, (f * t + location_bits) * C)
    if scheme == "advanced":
        if omega is None:
            raise InvalidParameter("advanced overhead needs omega")
        return Overhead(c * k * omega * t * C / f, hash_ops, (omega * t + location_bits) * C)
    raise InvalidParameter(f"unknown scheme {scheme!r}")


# -- validation table ---------------------------------------------------------

VALIDATION_COLUMNS = (
    "formula", "instance", "as_written", "oracle", "reference", "reference_kind",
    "delta_as_written", "delta_oracle", "tolerance", "verdict",
)


def _row(formula, instance, as_written, oracle, reference, kind, tol):
    da, do = abs(as_written - reference), abs(oracle - reference)
    if da <= tol and do <= tol:
        verdict = "agree"
    elif do <= tol:
        verdict = "as_written DISAGREES"
    elif da <= tol:
        verdict = "oracle DISAGREES"
    else:
        verdict = "both DISAGREE"
    return dict(formula=formula, instance=instance, as_written=as_written, oracle=oracle,
                reference=reference, reference_kind=kind, delta_as_written=da,
                delta_oracle=do, tolerance=tol, verdict=verdict)


def validate_analysis(seed: int = 0, trials: int = 200_000) -> list[dict]:
    """Each closed form against its independent oracle on small instances.

    ``as_written`` evaluates the formula with the distinct-slot count as
    printed, ``oracle`` with the enumeration-consistent one; formulas that do
    not involve it show the same value in both columns.
    """
    rng = substream(seed, "validate")
    rows = []
    for f, k in ((2, 2), (3, 2), (5, 3), (300, 1)):
        rows.append(_row("mu", f"f={f} k={k}", mu_as_written(f, k), mu_oracle(f, k),
                         mu_enumerate(f, k), "enumeration", 1e-12))
    m, se = mu_monte_carlo(300, 10, trials, rng)
    rows.append(_row("mu", "f=300 k=10", mu_as_written(300, 10), mu_oracle(300, 10), m,
                     "monte_carlo", 3 * se))

    f, k, q, c = 10, 2, 0.5, 4
    freq, se = p_one_monte_carlo(f, k, q, c, trials, seed)
    rows.append(_row("p_one", f"f={f} k={k} q={q} c={c}", p_one(f, k, q, c, mu_as_written(f, k)),
                     p_one(f, k, q, c, mu_oracle(f, k)), freq, "frame_monte_carlo", 3 * se))

    t, C = 2, 20
    fp_mc = 1.0 - (1.0 - freq**t) ** C
    rows.append(_row("false_positive_prob", f"p_one from row above, t={t} C={C}",
                     false_positive_prob(p_one(f, k, q, c, mu_as_written(f, k)), t, C),
                     false_positive_prob(p_one(f, k, q, c, mu_oracle(f, k)), t, C),
                     fp_mc, "plug_in_monte_carlo", 3 * C * t * se))

    rows.append(_row("expected_rounds", "p_e=0.5 C=1024", rounds_for_exclusion(0.5, 1024),
                     rounds_for_exclusion(0.5, 1024), 10.0, "exact", 0.0))

    pdf = rank_pdf(50, p_m(50, 3, 0.5, 4))
    rows.append(_row("rank_pdf_sum", "C=50 f=50 k=3 q=0.5 c=4", float(pdf.sum()), float(pdf.sum()),
                     1.0, "normalization", 1e-12))

    N, R, side, n_dep = 50, 50.0, 2000.0, 20_000
    cov = _coverage_monte_carlo(N, R, side, n_dep, rng)
    cp = correctness_prob(N, R, side * side)
    se = math.sqrt(cp * (1 - cp) / n_dep)
    rows.append(_row("correctness_prob", f"N={N} R={R} side={side} (torus MC)", cp, cp, cov,
                     "poisson_monte_carlo", 3 * se))

    rows.append(_row("p1_advanced", "gamma=omega=15 f=300 k=10 q=0.9 c=19",
                     p1_advanced(300, 10, 0.9, 19, 15, 15), p1_advanced(300, 10, 0.9, 19, 15, 15),
                     1.0, "exact", 1e-12))
    return rows


def _coverage_monte_carlo(N: float, R: float, side: float, trials: int, rng: np.random.Generator) -> float:
    """Fraction of Poisson deployments with a detector within ``R`` of a uniform point.

    Distances wrap around the square so that boundary losses do not bias the
    comparison with the infinite-plane formula.
    """
    hits = 0
    for _ in range(trials):
        n = rng.poisson(N)
        if n == 0:
            continue
        pts = rng.uniform(0, side, size=(n, 2))
        tag = rng.uniform(0, side, size=2)
        d = np.abs(pts - tag)
        d = np.minimum(d, side - d)
        hits += bool(np.any((d * d).sum(axis=1) <= R * R))
    return hits / trials


def format_table(rows: list[dict]) -> str:
    """Fixed-width text rendering of :func:`validate_analysis` rows."""
    def fmt(v):
        return f"{v:.6g}" if isinstance(v, float) else str(v)

    cells = [list(VALIDATION_COLUMNS)] + [[fmt(r[col]) for col in VALIDATION_COLUMNS] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(VALIDATION_COLUMNS))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells) + "\n"
