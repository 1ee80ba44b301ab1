"""Discrete-time flight simulation of MCAS-style intervention policies.

One flight: the true AOA follows a clamped AR(1) process on [0, 1]; each step
the sensor panel is sampled, the reading protocol gives a verdict, and the
variant policy decides whether to start, continue or stop a nose-down trim
intervention.  Trim is an abstract scalar and only accumulates (there is no
aerodynamic feedback).

Randomness is consumed in a fixed order that does not depend on the policy:
defect mask, bird-strike draws, then per step one Gaussian (from step 1 on),
one uniform per defective sensor and one pilot uniform.  Two policies run on
the same seed therefore see identical AOA paths, readings and pilot draws.

Comparing mcasu with mcas-legacy on one seed, mcasu never accumulates more
trim provided ``duration + pause <= episode_reset + 1`` for the legacy policy
and every legacy magnitude is at least every mcasu magnitude (the defaults
satisfy both).
"""
import copy
import json
import math
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Tuple

from . import rng as rngmod
from .protocols import Protocol, TriState, decide, effective_trigger, parse_protocol
from .sensor_model import FaultModel, ThresholdConfig, draw_defect_mask, panel_from_mask

MACH_BUCKETS = ("low", "mid", "high")
DISAGREE_POLICIES = ("ignore", "disable-for-flight")
REPEAT_POLICIES = ("repeat-after-pause", "once-per-episode", "never")
OVERRIDE_POLICIES = ("yoke-overrides", "yoke-ignored")


@dataclass(frozen=True)
class VariantPolicy:
    name: str
    disagree_policy: str
    repeat_policy: str
    override_policy: str
    magnitude: Mapping[str, float]
    duration: int = 5
    pause: int = 5

    def __post_init__(self):
        if self.name not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.name!r}")
        if self.disagree_policy not in DISAGREE_POLICIES:
            raise ValueError(f"unknown disagree policy {self.disagree_policy!r}")
        if self.repeat_policy not in REPEAT_POLICIES:
            raise ValueError(f"unknown repeat policy {self.repeat_policy!r}")
        if self.override_policy not in OVERRIDE_POLICIES:
            raise ValueError(f"unknown override policy {self.override_policy!r}")
        if set(self.magnitude) != set(MACH_BUCKETS) or any(v < 0 for v in self.magnitude.values()):
            raise ValueError(f"magnitude needs a non-negative value for each of {MACH_BUCKETS}")
        if self.duration < 1 or self.pause < 0:
            raise ValueError("duration must be >= 1 and pause >= 0")
        if self.name == "mcasu" and (self.disagree_policy, self.repeat_policy, self.override_policy) != (
                "disable-for-flight", "once-per-episode", "yoke-overrides"):
            raise ValueError("mcasu disables on disagreement, intervenes once per episode and yields to the yoke")
        if self.name == "max-min" and self.repeat_policy != "never":
            raise ValueError("max-min never intervenes")


POLICY_NAMES = ("mcas-legacy", "mcasu", "max-min")

# Magnitudes are arbitrary trim units; only their ordering matters.
POLICIES: Dict[str, VariantPolicy] = {
    "mcas-legacy": VariantPolicy("mcas-legacy", "ignore", "repeat-after-pause", "yoke-ignored",
                                 {"low": 2.0, "mid": 2.0, "high": 2.0}),
    "mcasu": VariantPolicy("mcasu", "disable-for-flight", "once-per-episode", "yoke-overrides",
                           {"low": 1.0, "mid": 1.0, "high": 1.0}),
    "max-min": VariantPolicy("max-min", "ignore", "never", "yoke-ignored",
                             {"low": 0.0, "mid": 0.0, "high": 0.0}),
}


def policy_by_name(name: str) -> VariantPolicy:
    try:
        return POLICIES[name]
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {POLICY_NAMES}") from None


def moderated(upgraded: VariantPolicy, legacy: VariantPolicy) -> bool:
    """Whether every bucket magnitude of ``upgraded`` is at most that of ``legacy``."""
    return all(upgraded.magnitude[b] <= legacy.magnitude[b] for b in MACH_BUCKETS)


@dataclass(frozen=True)
class AOAProcess:
    mu: float = 0.3
    rho: float = 0.9
    sigma: float = 0.05
    init: float = 0.3

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise ValueError("aoa_process.mu must lie in (0, 1)")
        if not 0 <= self.rho < 1:
            raise ValueError("aoa_process.rho must lie in [0, 1)")
        if self.sigma < 0:
            raise ValueError("aoa_process.sigma must be >= 0")
        if not 0 <= self.init <= 1:
            raise ValueError("aoa_process.init must lie in [0, 1]")

    def advance(self, x: float, noise: float) -> float:
        return min(1.0, max(0.0, self.mu + self.rho * (x - self.mu) + self.sigma * noise))


@dataclass(frozen=True)
class BirdStrike:
    prob: float = 0.0
    enabled: bool = False

    def __post_init__(self):
        if not 0 <= self.prob <= 1:
            raise ValueError("bird_strike.prob must lie in [0, 1]")


@dataclass(frozen=True)
class PilotModel:
    cutout_after: Optional[int] = None
    counteract_prob: float = 0.0

    def __post_init__(self):
        if self.cutout_after is not None and self.cutout_after < 1:
            raise ValueError("pilot.cutout_after must be >= 1")
        if not 0 <= self.counteract_prob <= 1:
            raise ValueError("pilot.counteract_prob must lie in [0, 1]")


@dataclass(frozen=True)
class ScenarioConfig:
    steps: int
    protocol: Protocol
    thresholds: ThresholdConfig
    fault: FaultModel
    aoa_process: AOAProcess = AOAProcess()
    bird_strike: BirdStrike = BirdStrike()
    mach_profile: Tuple[str, ...] = ("low",)
    pilot: PilotModel = PilotModel()
    policy: str = "mcasu"
    seed: int = 0
    episode_reset: int = 10
    runaway_limit: int = 3
    parity: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.mach_profile or any(b not in MACH_BUCKETS for b in self.mach_profile):
            raise ValueError(f"mach_profile must be a non-empty list drawn from {MACH_BUCKETS}")
        if self.episode_reset < 1 or self.runaway_limit < 1:
            raise ValueError("episode_reset and runaway_limit must be >= 1")
        if self.parity not in (0, 1):
            raise ValueError("parity must be 0 or 1")
        if self.policy not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.policy!r}")

    def mach_bucket(self, t: int) -> str:
        return self.mach_profile[t * len(self.mach_profile) // self.steps]

    def flight_protocol(self, parity: Optional[int] = None) -> Protocol:
        if self.protocol.kind != "alternating":
            return self.protocol
        return replace(self.protocol, index=self.parity if parity is None else parity)


class Event(NamedTuple):
    step: int
    kind: str
    detail: Any = None


@dataclass
class FlightState:
    defect: List[bool]
    strike_step: Optional[int] = None
    struck_sensor: Optional[int] = None
    t: int = 0
    aoa: float = 0.0
    trim: float = 0.0
    max_trim: float = 0.0
    interventions: int = 0
    ended_interventions: int = 0
    disagreement_events: int = 0
    disabled_at: Optional[int] = None
    cutout_engaged_at: Optional[int] = None
    active_remaining: int = 0
    active_rate: float = 0.0
    pause_remaining: int = 0
    episode_open: bool = False
    episodes: int = 0
    intervened_in_episode: bool = False
    quiet_streak: int = 0
    uncountered_streak: int = 0
    runaway: bool = False


@dataclass(frozen=True)
class FlightOutcome:
    interventions: int
    disabled_at: Optional[int]
    disagreement_events: int
    max_trim_excursion: float
    cutout_engaged_at: Optional[int]
    episodes: int
    runaway_flag: bool

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def initial_state(config: ScenarioConfig, rng) -> FlightState:
    n = config.protocol.n
    state = FlightState(defect=draw_defect_mask(config.fault, n, rng), aoa=config.aoa_process.init)
    if config.bird_strike.enabled:
        hit = rng.random() < config.bird_strike.prob
        when, which = rng.randrange(config.steps), rng.randrange(n)
        if hit:
            state.strike_step, state.struck_sensor = when, which
    return state


def step_flight(state: FlightState, config: ScenarioConfig, policy: VariantPolicy, rng,
                protocol: Optional[Protocol] = None) -> Tuple[FlightState, List[Event]]:
    """Advance one time step; returns the new state and the events it produced."""
    s = copy.copy(state)
    s.defect = list(state.defect)
    t = s.t
    events: List[Event] = []
    protocol = protocol or config.flight_protocol()

    if t > 0:
        s.aoa = config.aoa_process.advance(s.aoa, rng.gauss(0.0, 1.0))
    if s.strike_step == t:
        s.defect[s.struck_sensor] = True
        events.append(Event(t, "bird-strike", s.struck_sensor))
    panel = panel_from_mask(s.aoa, s.defect, rng)
    yoke = rng.random() < config.pilot.counteract_prob
    verdict = decide(protocol, panel, config.thresholds)
    trigger = effective_trigger(verdict)

    if trigger:
        s.quiet_streak = 0
        if not s.episode_open:
            s.episode_open = True
            s.episodes += 1
            s.intervened_in_episode = False
            events.append(Event(t, "episode-start"))
    else:
        s.quiet_streak += 1
        if s.episode_open and s.quiet_streak >= config.episode_reset:
            s.episode_open = False

    if verdict == TriState.NEUTRAL:
        s.disagreement_events += 1
        events.append(Event(t, "disagreement"))
        if policy.disagree_policy == "disable-for-flight" and s.disabled_at is None:
            s.disabled_at = t
            events.append(Event(t, "disabled"))
            if s.active_remaining:
                s.active_remaining = 0
                _end_intervention(s, config, events, "terminated")

    was_active = s.active_remaining > 0
    paused = s.pause_remaining > 0
    if s.pause_remaining:
        s.pause_remaining -= 1
    if not was_active and trigger and _may_start(s, policy, paused):
        s.interventions += 1
        s.intervened_in_episode = True
        s.active_remaining = policy.duration
        s.active_rate = policy.magnitude[config.mach_bucket(t)] / policy.duration
        events.append(Event(t, "intervention", s.active_rate * policy.duration))

    if s.active_remaining:
        if yoke and policy.override_policy == "yoke-overrides":
            s.active_remaining = 0
            s.uncountered_streak = 0
            _end_intervention(s, config, events, "countered")
        else:
            s.trim += s.active_rate
            s.max_trim = max(s.max_trim, abs(s.trim))
            s.active_remaining -= 1
            if not s.active_remaining:
                s.uncountered_streak += 1
                if s.uncountered_streak >= config.runaway_limit and not s.runaway:
                    s.runaway = True
                    events.append(Event(t, "runaway"))
                s.pause_remaining = policy.pause
                _end_intervention(s, config, events, "completed")

    s.t = t + 1
    return s, events


def _may_start(s: FlightState, policy: VariantPolicy, paused: bool) -> bool:
    if s.disabled_at is not None or s.cutout_engaged_at is not None:
        return False
    if policy.repeat_policy == "never":
        return False
    if policy.repeat_policy == "once-per-episode":
        return not s.intervened_in_episode
    return not paused


def _end_intervention(s: FlightState, config: ScenarioConfig, events: List[Event], how: str) -> None:
    events.append(Event(s.t, "intervention-end", how))
    s.ended_interventions += 1
    limit = config.pilot.cutout_after
    if limit is not None and s.cutout_engaged_at is None and s.ended_interventions >= limit:
        s.cutout_engaged_at = s.t
        events.append(Event(s.t, "cutout"))


def _outcome(s: FlightState) -> FlightOutcome:
    return FlightOutcome(
        interventions=s.interventions,
        disabled_at=s.disabled_at,
        disagreement_events=s.disagreement_events,
        max_trim_excursion=s.max_trim,
        cutout_engaged_at=s.cutout_engaged_at,
        episodes=s.episodes,
        runaway_flag=s.runaway,
    )


def _fly(config: ScenarioConfig, policy: VariantPolicy, rng, parity: int) -> Tuple[FlightOutcome, List[Event]]:
    protocol = config.flight_protocol(parity)
    state = initial_state(config, rng)
    trace: List[Event] = []
    for _ in range(config.steps):
        state, events = step_flight(state, config, policy, rng, protocol)
        trace.extend(events)
    return _outcome(state), trace


def flight_trace(config: ScenarioConfig, policy: VariantPolicy) -> Tuple[FlightOutcome, List[Event]]:
    """Run one flight seeded with ``config.seed`` and keep the event trace."""
    return _fly(config, policy, random.Random(config.seed), config.parity)


def run_flight(config: ScenarioConfig, policy: VariantPolicy) -> FlightOutcome:
    return flight_trace(config, policy)[0]


@dataclass(frozen=True)
class FleetStats:
    n_flights: int
    seed: int
    protocol: str
    policy: str
    disabled: int
    fraction_disabled: float
    se_disabled: float
    with_disagreement: int
    fraction_with_disagreement: float
    se_with_disagreement: float
    mean_interventions: float
    runaway: int
    runaway_fraction: float
    cutout_fraction: float
    mean_max_trim: float
    outcomes: Tuple[FlightOutcome, ...] = field(default=(), repr=False, compare=False)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d.pop("outcomes")
        return d


def fleet_flight(config: ScenarioConfig, policy: VariantPolicy, seed: int, i: int) -> FlightOutcome:
    """Flight ``i`` of a fleet: seeded by ``derive_seed(seed, i)``, parity alternating per flight."""
    return _fly(config, policy, rngmod.py_stream(seed, i), (config.parity + i) % 2)[0]


def _fleet_chunk(args) -> List[FlightOutcome]:
    config, policy, seed, start, stop = args
    return [fleet_flight(config, policy, seed, i) for i in range(start, stop)]


def run_fleet(config: ScenarioConfig, policy: VariantPolicy, n_flights: int, seed: int,
              workers: int = 1, keep_outcomes: bool = False) -> FleetStats:
    if n_flights < 1:
        raise ValueError("n_flights must be >= 1")
    if workers > 1:
        chunk = max(1, math.ceil(n_flights / (4 * workers)))
        tasks = [(config, policy, seed, s, min(s + chunk, n_flights)) for s in range(0, n_flights, chunk)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = [o for part in pool.map(_fleet_chunk, tasks) for o in part]
    else:
        outcomes = _fleet_chunk((config, policy, seed, 0, n_flights))

    disabled = sum(o.disabled_at is not None for o in outcomes)
    disagreed = sum(o.disagreement_events > 0 for o in outcomes)
    runaway = sum(o.runaway_flag for o in outcomes)
    cutout = sum(o.cutout_engaged_at is not None for o in outcomes)
    p_dis, p_dg = disabled / n_flights, disagreed / n_flights
    return FleetStats(
        n_flights=n_flights,
        seed=seed,
        protocol=config.protocol.token,
        policy=policy.name,
        disabled=disabled,
        fraction_disabled=p_dis,
        se_disabled=math.sqrt(p_dis * (1 - p_dis) / n_flights),
        with_disagreement=disagreed,
        fraction_with_disagreement=p_dg,
        se_with_disagreement=math.sqrt(p_dg * (1 - p_dg) / n_flights),
        mean_interventions=math.fsum(o.interventions for o in outcomes) / n_flights,
        runaway=runaway,
        runaway_fraction=runaway / n_flights,
        cutout_fraction=cutout / n_flights,
        mean_max_trim=math.fsum(o.max_trim_excursion for o in outcomes) / n_flights,
        outcomes=tuple(outcomes) if keep_outcomes else (),
    )


# scenario files

class ScenarioError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


_SCHEMA: Dict[str, Optional[Tuple[str, ...]]] = {
    "steps": None,
    "aoa_process": ("mu", "rho", "sigma", "init"),
    "bird_strike": ("prob", "enabled"),
    "mach_profile": None,
    "pilot": ("cutout_after", "counteract_prob"),
    "protocol": None,
    "fault": ("f",),
    "thresholds": ("a", "d"),
    "policy": None,
    "seed": None,
    "episode_reset": None,
    "runaway_limit": None,
    "parity": None,
}
_REQUIRED = ("steps", "protocol", "fault", "thresholds", "policy")


def _section(doc: Mapping[str, Any], key: str) -> Dict[str, Any]:
    value = doc.get(key, {})
    if not isinstance(value, dict):
        raise ScenarioError(key, "expected an object")
    for sub in value:
        if sub not in _SCHEMA[key]:
            raise ScenarioError(f"{key}.{sub}", "unknown key")
    return value


def _integer(key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(key, f"expected an integer, got {value!r}")
    return value


def _number(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(key, f"expected a number, got {value!r}")
    return float(value)


def parse_scenario(doc: Mapping[str, Any], default_seed: int = 0) -> ScenarioConfig:
    """Build a ``ScenarioConfig`` from a decoded scenario document; unknown keys are errors."""
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "expected a JSON object")
    for key in doc:
        if key not in _SCHEMA:
            raise ScenarioError(key, "unknown key")
    for key in _REQUIRED:
        if key not in doc:
            raise ScenarioError(key, "missing required key")

    def build(key, fn):
        try:
            return fn()
        except ScenarioError:
            raise
        except (ValueError, TypeError) as exc:
            raise ScenarioError(key, str(exc)) from None

    aoa = _section(doc, "aoa_process")
    bird = _section(doc, "bird_strike")
    pilot = _section(doc, "pilot")
    fault = _section(doc, "fault")
    thr = _section(doc, "thresholds")
    if "f" not in fault:
        raise ScenarioError("fault.f", "missing required key")
    if "a" not in thr:
        raise ScenarioError("thresholds.a", "missing required key")
    if not isinstance(doc["protocol"], str):
        raise ScenarioError("protocol", "expected a protocol token")
    if not isinstance(doc["policy"], str):
        raise ScenarioError("policy", "expected a policy name")
    profile = doc.get("mach_profile", ["low"])
    if not isinstance(profile, list):
        raise ScenarioError("mach_profile", "expected a list of Mach buckets")
    cutout = pilot.get("cutout_after")
    if "enabled" in bird and not isinstance(bird["enabled"], bool):
        raise ScenarioError("bird_strike.enabled", "expected true or false")

    return build("<root>", lambda: ScenarioConfig(
        steps=_integer("steps", doc["steps"]),
        protocol=build("protocol", lambda: parse_protocol(doc["protocol"])),
        thresholds=build("thresholds", lambda: ThresholdConfig(
            _number("thresholds.a", thr["a"]),
            None if thr.get("d") is None else _number("thresholds.d", thr["d"]))),
        fault=build("fault.f", lambda: FaultModel(_number("fault.f", fault["f"]))),
        aoa_process=build("aoa_process", lambda: AOAProcess(
            **{k: _number(f"aoa_process.{k}", v) for k, v in aoa.items()})),
        bird_strike=build("bird_strike", lambda: BirdStrike(
            _number("bird_strike.prob", bird.get("prob", 0.0)), bird.get("enabled", False))),
        mach_profile=build("mach_profile", lambda: tuple(profile)),
        pilot=build("pilot", lambda: PilotModel(
            None if cutout is None else _integer("pilot.cutout_after", cutout),
            _number("pilot.counteract_prob", pilot.get("counteract_prob", 0.0)))),
        policy=build("policy", lambda: policy_by_name(doc["policy"]).name),
        seed=_integer("seed", doc.get("seed", default_seed)),
        episode_reset=_integer("episode_reset", doc.get("episode_reset", 10)),
        runaway_limit=_integer("runaway_limit", doc.get("runaway_limit", 3)),
        parity=_integer("parity", doc.get("parity", 0)),
    ))


def load_scenario(path: "os.PathLike[str] | str", default_seed: int = 0) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError("<json>", str(exc)) from None
    return parse_scenario(doc, default_seed)


def scenario_to_dict(config: ScenarioConfig) -> Dict[str, Any]:
    return {
        "steps": config.steps,
        "aoa_process": asdict(config.aoa_process),
        "bird_strike": asdict(config.bird_strike),
        "mach_profile": list(config.mach_profile),
        "pilot": {"cutout_after": config.pilot.cutout_after, "counteract_prob": config.pilot.counteract_prob},
        "protocol": config.protocol.token,
        "fault": {"f": config.fault.defect_probability},
        "thresholds": {"a": config.thresholds.trigger_threshold, "d": config.thresholds.disagreement_threshold},
        "policy": config.policy,
        "seed": config.seed,
        "episode_reset": config.episode_reset,
        "runaway_limit": config.runaway_limit,
        "parity": config.parity,
    }
