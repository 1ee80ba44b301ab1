"""False-positive, false-negative and neutral rates of the reading protocols.

Three independent routes:

* ``exact_rates``: enumerate every defect subset of the panel and, for each
  defective sensor, which side of ``a`` its uniform reading falls on.  Each
  pattern is evaluated with ``protocols.decide`` on representative readings.
  Ties between a defective reading and any other reading have probability
  zero and are never produced.
* ``paper_formula``: the closed forms as printed in the source analysis,
  including the two that are wrong (see ``ERRATA``).
* ``monte_carlo_rates``: vectorised simulation in fixed-size blocks, one
  seeded substream per block.

Conventions: ``fp = P(Positive | AOA <= a)`` and ``fn = P(not Positive | AOA > a)``.
With ``neutral_policy="excluded"`` both are conditioned on the verdict not
being Neutral instead.
"""
import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import rng as rngmod
from .protocols import Protocol, TriState, decide, decide_batch, parse_protocol
from .sensor_model import FaultModel, PanelSample, ThresholdConfig, sample_panels

SIDES = ("below", "above")
CONDITIONINGS = ("both", "below", "above")
NEUTRAL_POLICIES = ("counts-negative", "excluded")
SOURCES = ("exact-enumeration", "paper-closed-form", "monte-carlo")
MAX_EXACT_SENSORS = 12


class UnsupportedQuery(ValueError):
    pass


@dataclass(frozen=True)
class RateQuery:
    protocol: Protocol
    f: float
    a: float
    conditioning: str = "both"
    neutral_policy: str = "counts-negative"
    d: Optional[float] = None

    def __post_init__(self):
        FaultModel(self.f)
        ThresholdConfig(self.a, self.d)
        if self.conditioning not in CONDITIONINGS:
            raise ValueError(f"conditioning must be one of {CONDITIONINGS}")
        if self.neutral_policy not in NEUTRAL_POLICIES:
            raise ValueError(f"neutral_policy must be one of {NEUTRAL_POLICIES}")

    @classmethod
    def of(cls, token: str, f: float, a: float, **kw) -> "RateQuery":
        return cls(parse_protocol(token), f, a, **kw)

    @property
    def thresholds(self) -> ThresholdConfig:
        return ThresholdConfig(self.a, self.d)

    @property
    def sides(self) -> Tuple[str, ...]:
        return SIDES if self.conditioning == "both" else (self.conditioning,)


@dataclass(frozen=True)
class RateReport:
    query: RateQuery
    source: str
    fp: Optional[float] = None
    fn: Optional[float] = None
    p_neutral: Optional[float] = None
    trials: Optional[int] = None
    se_fp: Optional[float] = None
    se_fn: Optional[float] = None
    se_neutral: Optional[float] = None
    seed: Optional[int] = None
    # sample counts behind each Monte Carlo estimate (fp, fn, neutral)
    denominators: Optional[Tuple[int, int, int]] = field(default=None, compare=False)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        mc = self.source == "monte-carlo"
        for rate, se in ((self.fp, self.se_fp), (self.fn, self.se_fn), (self.p_neutral, self.se_neutral)):
            if rate is not None and not math.isnan(rate) and not 0.0 <= rate <= 1.0:
                raise ValueError(f"rate {rate!r} outside [0, 1]")
            if se is not None and not mc:
                raise ValueError("standard errors are reported for Monte Carlo only")

    def rates(self) -> Dict[str, Optional[float]]:
        return {"fp": self.fp, "fn": self.fn, "p_neutral": self.p_neutral}

    def errors(self) -> Dict[str, Optional[float]]:
        return {"fp": self.se_fp, "fn": self.se_fn, "p_neutral": self.se_neutral}


# exact enumeration

def _representative(side: str, a: float, slot: int, n: int) -> float:
    # n + 1 distinct values strictly inside the chosen side of a
    step = (slot + 1) / (n + 2)
    return a * step if side == "below" else a + (1.0 - a) * step


def side_probabilities(protocol: Protocol, f: float, a: float, side: str) -> Dict[TriState, float]:
    """``P(verdict | AOA on side)`` for each verdict, by full enumeration."""
    if protocol.kind == "guarded" and protocol.mode == "threshold":
        raise UnsupportedQuery("threshold disagreement depends on the AOA value; use Monte Carlo")
    n = protocol.n
    if n > MAX_EXACT_SENSORS:
        raise UnsupportedQuery(f"exact enumeration is limited to {MAX_EXACT_SENSORS} sensors")
    thresholds = ThresholdConfig(a)
    true_aoa = _representative(side, a, 0, n)
    terms: Dict[TriState, List[float]] = {t: [] for t in TriState}
    for mask in itertools.product((False, True), repeat=n):
        k = sum(mask)
        w_mask = f ** k * (1.0 - f) ** (n - k)
        if w_mask == 0.0:
            continue
        bad = [i for i in range(n) if mask[i]]
        for placement in itertools.product(SIDES, repeat=k):
            w = w_mask
            readings = [true_aoa] * n
            for i, s in zip(bad, placement):
                w *= a if s == "below" else 1.0 - a
                readings[i] = _representative(s, a, i + 1, n)
            if w == 0.0:
                continue
            sample = PanelSample(true_aoa, mask, tuple(readings))
            terms[decide(protocol, sample, thresholds)].append(w)
    return {t: math.fsum(ws) for t, ws in terms.items()}


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0.0 else math.nan


def exact_rates(query: RateQuery) -> RateReport:
    probs = {s: side_probabilities(query.protocol, query.f, query.a, s) for s in query.sides}
    excluded = query.neutral_policy == "excluded"
    fp = fn = None
    if "below" in probs:
        p = probs["below"]
        fp = p[TriState.POSITIVE]
        if excluded:
            fp = _ratio(fp, p[TriState.POSITIVE] + p[TriState.NEGATIVE])
    if "above" in probs:
        p = probs["above"]
        fn = p[TriState.NEGATIVE] if excluded else math.fsum((p[TriState.NEGATIVE], p[TriState.NEUTRAL]))
        if excluded:
            fn = _ratio(fn, p[TriState.POSITIVE] + p[TriState.NEGATIVE])
    # exact-equality protocols: P(Neutral) does not depend on the side
    neutral_side = "above" if "above" in probs else "below"
    p_neutral = probs[neutral_side][TriState.NEUTRAL]
    return RateReport(query, "exact-enumeration", fp=_clip(fp), fn=_clip(fn), p_neutral=_clip(p_neutral))


def _clip(x: Optional[float]) -> Optional[float]:
    if x is None or math.isnan(x):
        return x
    return min(max(x, 0.0), 1.0)


# printed closed forms

PAPER_FORMULAS: Dict[str, Callable[[float, float], float]] = {
    "single-fp": lambda f, a: f * (1 - a),
    "single-fn": lambda f, a: f * a,
    "conj-fp": lambda f, a: f ** 2 * (1 - a) ** 2,
    "conj-fn": lambda f, a: f * a * (4 - a - 2 * f),
    "disj-fp": lambda f, a: f * (1 - a) * (f * (1 + a) + 2 * (1 - f)),
    "disj-fn": lambda f, a: f ** 2 * a * (1 - a),
    "guarded-fn": lambda f, a: f * a,
    "p-disagree": lambda f, a: f * (2 - f),
    "maj3-no-agreement": lambda f, a: f ** 2 * (3 - 2 * f),
}

# Printed simplifications that disagree with their own preceding sums and with
# enumeration, mapped to the value the enumeration yields.
ERRATA: Dict[str, Callable[[float, float], float]] = {
    "conj-fn": lambda f, a: f * a * (2 - f * a),
    "disj-fn": lambda f, a: f ** 2 * a ** 2,
}

# which printed formula covers which (protocol token, rate)
_PAPER_COVERAGE = {
    "single": {"fp": "single-fp", "fn": "single-fn"},
    "alternating": {"fp": "single-fp", "fn": "single-fn"},
    "conj2": {"fp": "conj-fp", "fn": "conj-fn"},
    "disj2": {"fp": "disj-fp", "fn": "disj-fn"},
    "guarded2": {"fn": "guarded-fn", "p_neutral": "p-disagree"},
    "majgate3": {"p_neutral": "maj3-no-agreement"},
}


def paper_formula(name: str, f: float, a: float) -> float:
    try:
        formula = PAPER_FORMULAS[name]
    except KeyError:
        raise ValueError(f"unknown formula {name!r}; known: {sorted(PAPER_FORMULAS)}") from None
    return formula(f, a)


def paper_formula_names(protocol: Protocol) -> Dict[str, str]:
    """Rate name -> catalog entry for the printed formulas covering ``protocol``."""
    return dict(_PAPER_COVERAGE.get(protocol.token, {}))


def paper_report(query: RateQuery) -> RateReport:
    names = paper_formula_names(query.protocol)
    vals = {k: paper_formula(v, query.f, query.a) for k, v in names.items()}
    if query.conditioning == "below":
        vals.pop("fn", None)
    elif query.conditioning == "above":
        vals.pop("fp", None)
    return RateReport(query, "paper-closed-form", **{k: _clip(v) for k, v in vals.items()})


# Monte Carlo

Sampler = Callable[[np.random.Generator, str, float, int], np.ndarray]


def uniform_side_sampler(rng: np.random.Generator, side: str, a: float, m: int) -> np.ndarray:
    """True AOA uniform on [0, a) below the threshold, on (a, 1] above it."""
    u = rng.random(m)
    if side == "below":
        return a * u
    return a + (1.0 - a) * (1.0 - u)


def _run_block(query: RateQuery, sampler: Sampler, side: str, seed: int, stream: int, m: int) -> np.ndarray:
    gen = rngmod.np_stream(seed, stream)
    aoa = sampler(gen, side, query.a, m)
    if aoa.shape != (m,):
        raise ValueError("sampler returned the wrong number of values")
    if side == "below" and np.any(aoa > query.a) or side == "above" and np.any(aoa <= query.a):
        raise ValueError(f"sampler produced values outside the {side} side of a")
    _, readings = sample_panels(aoa, FaultModel(query.f), query.protocol.n, gen)
    verdicts = decide_batch(query.protocol, readings, query.thresholds)
    return np.bincount(verdicts, minlength=len(TriState))


def monte_carlo_rates(query: RateQuery, trials: int, seed: int,
                      sampler: Optional[Sampler] = None, workers: int = 1,
                      block_size: int = 1 << 16) -> RateReport:
    """Estimate the rates with ``trials`` samples per conditioning side.

    Block ``b`` of side ``s`` draws from substream ``derive_seed(seed, s * 2**32 + b)``,
    so the result does not depend on ``workers``.  With ``conditioning="both"``
    the neutral rate pools the samples of both sides.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    sampler = sampler or uniform_side_sampler
    tasks = []
    for side in query.sides:
        side_id = SIDES.index(side)
        for b, start in enumerate(range(0, trials, block_size)):
            tasks.append((side, (side_id << 32) + b, min(block_size, trials - start)))

    def run(task):
        side, stream, m = task
        return side, _run_block(query, sampler, side, seed, stream, m)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    counts = {s: np.zeros(len(TriState), dtype=np.int64) for s in query.sides}
    for side, c in results:
        counts[side] += c

    excluded = query.neutral_policy == "excluded"
    fp = fn = se_fp = se_fn = None
    n_fp = n_fn = 0
    if "below" in counts:
        c = counts["below"]
        n_fp = int(c[TriState.POSITIVE] + c[TriState.NEGATIVE]) if excluded else trials
        fp, se_fp = _binomial(int(c[TriState.POSITIVE]), n_fp)
    if "above" in counts:
        c = counts["above"]
        hits = int(c[TriState.NEGATIVE]) if excluded else int(c[TriState.NEGATIVE] + c[TriState.NEUTRAL])
        n_fn = int(c[TriState.POSITIVE] + c[TriState.NEGATIVE]) if excluded else trials
        fn, se_fn = _binomial(hits, n_fn)
    neutral = sum(int(c[TriState.NEUTRAL]) for c in counts.values())
    n_neutral = trials * len(counts)
    p_neutral, se_neutral = _binomial(neutral, n_neutral)
    return RateReport(query, "monte-carlo", fp=fp, fn=fn, p_neutral=p_neutral, trials=trials,
                      se_fp=se_fp, se_fn=se_fn, se_neutral=se_neutral, seed=seed,
                      denominators=(n_fp, n_fn, n_neutral))


def _binomial(hits: int, n: int) -> Tuple[float, float]:
    if n == 0:
        return math.nan, math.nan
    p = hits / n
    return p, math.sqrt(p * (1.0 - p) / n)


# comparison

@dataclass(frozen=True)
class RateCheck:
    rate: str
    reference: float
    estimate: float
    se: float
    z: float
    passed: bool


@dataclass(frozen=True)
class Comparison:
    checks: Tuple[RateCheck, ...]
    k_sigma: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def by_rate(self) -> Dict[str, RateCheck]:
        return {c.rate: c for c in self.checks}


def compare_reports(reference: RateReport, mc: RateReport, k_sigma: float = 4.0) -> Comparison:
    """Check each rate present in both reports at ``|ref - est| <= k_sigma * SE``.

    The SE is the Monte Carlo one; when the sample size is known it is floored
    by the binomial SE under the reference value, so an estimate of exactly
    zero for a tiny but non-zero rate is not an automatic failure.
    """
    if reference.query != mc.query:
        raise ValueError("reports answer different queries")
    if k_sigma <= 0:
        raise ValueError("k_sigma must be positive")
    denominators = dict(zip(("fp", "fn", "p_neutral"), mc.denominators or (None, None, None)))
    checks = []
    ref_rates, est_rates, ses = reference.rates(), mc.rates(), mc.errors()
    for rate in ("fp", "fn", "p_neutral"):
        ref, est = ref_rates[rate], est_rates[rate]
        if ref is None or est is None or math.isnan(ref) or math.isnan(est):
            continue
        se = ses[rate] or 0.0
        n = denominators[rate]
        if n:
            se = max(se, math.sqrt(ref * (1.0 - ref) / n))
        diff = abs(ref - est)
        if se > 0:
            z = diff / se
        else:
            z = 0.0 if diff == 0 else math.inf
        checks.append(RateCheck(rate, ref, est, se, z, z <= k_sigma))
    return Comparison(tuple(checks), k_sigma)
