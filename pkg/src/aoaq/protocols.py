"""Reading protocols: fold a panel of sensor readings into one tri-state verdict.

Tokens used on the command line and in CSV/JSON files::

    single        one sensor (index 0)
    alternating   two sensors, the per-flight parity picks which one is read
    conj2         Positive iff both readings exceed a
    disj2         Positive iff at least one reading exceeds a
    guarded2      Neutral on exact disagreement, else the lead sensor decides
    guarded2d     as guarded2, disagreement means |L - R| >= d
    majbool<n>    Positive iff more than half of n readings exceed a
    majgate<n>    the modal value shared by >= 2 sensors decides; Neutral if
                  no two readings agree
"""
import enum
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .sensor_model import PanelSample, ThresholdConfig


class TriState(enum.IntEnum):
    NEGATIVE = 0
    POSITIVE = 1
    NEUTRAL = 2


def effective_trigger(decision: TriState) -> bool:
    """MCAS acts only on Positive; Neutral is treated like Negative."""
    return decision == TriState.POSITIVE


KINDS = ("single", "alternating", "conj", "disj", "guarded", "majbool", "majgate")


@dataclass(frozen=True)
class Protocol:
    """A reading protocol.

    ``index`` is the sensor read by ``single``, the flight parity for
    ``alternating`` and the lead sensor for ``guarded``; ``mode`` selects the
    guarded disagreement test (``"exact"`` or ``"threshold"``).
    """

    kind: str
    n: int
    index: int = 0
    mode: str = "exact"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown protocol kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("a protocol needs at least one sensor")
        if self.kind in ("conj", "disj", "guarded", "alternating") and self.n != 2:
            raise ValueError(f"{self.kind} protocol requires exactly 2 sensors")
        if self.kind in ("majbool", "majgate") and (self.n < 3 or self.n % 2 == 0):
            raise ValueError("majority protocols require an odd sensor count >= 3")
        if self.kind == "alternating" and self.index not in (0, 1):
            raise ValueError("alternating parity must be 0 or 1")
        if self.kind in ("single", "guarded") and not 0 <= self.index < self.n:
            raise ValueError(f"sensor index {self.index} out of range for {self.n} sensors")
        if self.mode not in ("exact", "threshold"):
            raise ValueError(f"unknown disagreement mode {self.mode!r}")
        if self.mode == "threshold" and self.kind != "guarded":
            raise ValueError("threshold disagreement mode applies to guarded reading only")

    @property
    def token(self) -> str:
        if self.kind in ("single", "alternating"):
            return self.kind
        if self.kind == "guarded":
            return "guarded2d" if self.mode == "threshold" else "guarded2"
        if self.kind in ("conj", "disj"):
            return f"{self.kind}2"
        return f"{self.kind}{self.n}"

    @property
    def read_index(self) -> int:
        """Sensor consulted by single-read protocols."""
        return self.index


_TOKEN = re.compile(r"^(single|alternating|conj2|disj2|guarded2d?|majbool(\d+)|majgate(\d+))$")


def parse_protocol(token: str) -> Protocol:
    m = _TOKEN.match(token.strip())
    if not m:
        raise ValueError(f"unknown protocol token {token!r}")
    tok = m.group(1)
    if tok == "single":
        return Protocol("single", 1)
    if tok == "alternating":
        return Protocol("alternating", 2)
    if tok in ("conj2", "disj2"):
        return Protocol(tok[:-1], 2)
    if tok.startswith("guarded"):
        return Protocol("guarded", 2, mode="threshold" if tok.endswith("d") else "exact")
    kind = tok[:7]
    return Protocol(kind, int(m.group(2) or m.group(3)))


def _disagree_threshold(thresholds: ThresholdConfig) -> float:
    d = thresholds.disagreement_threshold
    if d is None:
        raise ValueError("guarded2d needs a disagreement threshold d")
    return d


def decide(protocol: Protocol, sample: PanelSample, thresholds: ThresholdConfig) -> TriState:
    if sample.n != protocol.n:
        raise ValueError(f"{protocol.token} expects {protocol.n} readings, got {sample.n}")
    a = thresholds.trigger_threshold
    r = sample.readings
    kind = protocol.kind

    def verdict(x: float) -> TriState:
        return TriState.POSITIVE if x > a else TriState.NEGATIVE

    if kind in ("single", "alternating"):
        return verdict(r[protocol.read_index])
    if kind == "conj":
        return verdict(min(r))
    if kind == "disj":
        return verdict(max(r))
    if kind == "guarded":
        left, right = r
        if protocol.mode == "exact":
            disagree = left != right
        else:
            disagree = abs(left - right) >= _disagree_threshold(thresholds)
        return TriState.NEUTRAL if disagree else verdict(r[protocol.index])
    if kind == "majbool":
        above = sum(x > a for x in r)
        return TriState.POSITIVE if 2 * above > protocol.n else TriState.NEGATIVE
    # majgate: highest multiplicity wins, ties go to the value seen first
    counts = Counter(r)
    best = max(counts.values())
    if best < 2:
        return TriState.NEUTRAL
    modal = next(x for x in r if counts[x] == best)
    return verdict(modal)


def decide_batch(protocol: Protocol, readings: np.ndarray, thresholds: ThresholdConfig) -> np.ndarray:
    """Vectorised ``decide`` over rows of ``readings`` (shape ``(m, n)``).

    Returns an int8 array of ``TriState`` codes.
    """
    readings = np.asarray(readings, dtype=np.float64)
    if readings.ndim != 2 or readings.shape[1] != protocol.n:
        raise ValueError(f"{protocol.token} expects readings of shape (m, {protocol.n})")
    a = thresholds.trigger_threshold
    above = readings > a
    kind = protocol.kind
    out = np.zeros(readings.shape[0], dtype=np.int8)
    if kind in ("single", "alternating"):
        out[above[:, protocol.read_index]] = TriState.POSITIVE
    elif kind == "conj":
        out[above.all(axis=1)] = TriState.POSITIVE
    elif kind == "disj":
        out[above.any(axis=1)] = TriState.POSITIVE
    elif kind == "guarded":
        left, right = readings[:, 0], readings[:, 1]
        if protocol.mode == "exact":
            disagree = left != right
        else:
            disagree = np.abs(left - right) >= _disagree_threshold(thresholds)
        out[above[:, protocol.index]] = TriState.POSITIVE
        out[disagree] = TriState.NEUTRAL
    elif kind == "majbool":
        out[2 * above.sum(axis=1) > protocol.n] = TriState.POSITIVE
    else:
        counts = np.ones(readings.shape, dtype=np.int8)
        for i in range(protocol.n):
            for j in range(i + 1, protocol.n):
                same = readings[:, i] == readings[:, j]
                counts[:, i] += same
                counts[:, j] += same
        first_best = counts.argmax(axis=1)
        rows = np.arange(readings.shape[0])
        agreed = counts[rows, first_best] >= 2
        modal_above = above[rows, first_best]
        out[modal_above] = TriState.POSITIVE
        out[~agreed] = TriState.NEUTRAL
    return out
