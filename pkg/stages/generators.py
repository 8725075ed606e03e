"""
Synthetic Corpus Generators
Three statistically distinct melody sources for desk-scale experiments:

- native-like: pentatonic-weighted sampling, rich in rest tokens
- algorithmic: order-1 Markov chain fitted on reference melodies, then
  simulated annealing against a rule set (scale membership, max leap, no rests)
- llm-like: order-2 Markov chain fitted on a motif-based style corpus

The llm-like class is an emulation. No language model is trained or sampled;
the claim is only that the pipeline separates three distinct sources.
"""

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from core.config import load_resource, merge_overrides
from core.errors import DegenerateDataError, InvalidConfig
from core.schema_validator import validate_generator_config
from core.utils import derive_seed, make_rng
from core.ynote import REST_PREFIX, TokenSequence, is_rest_token, parse_note
from stages.corpus import LabeledSong

logger = logging.getLogger(__name__)

CLASS_LABELS = {"native": 0, "algorithm": 1, "llm": 2}
PITCH_ORDER = "CDEFGAB"


class CorpusTooShort(DegenerateDataError):
    """Raised when a Markov chain cannot be fitted (no data, or sequences not longer than the order)."""
    pass


class EmptyModel(DegenerateDataError):
    """Raised when generating from a Markov model with no states."""
    pass


# Markov chain

@dataclass
class MarkovModel:
    """
    Categorical next-token model conditioned on the previous `order` tokens.

    Attributes:
        order: Context length (1 or 2)
        states: Sorted token vocabulary
        transition: context tuple → {next token: probability}
        initial: starting context tuple → probability
    """
    order: int
    states: tuple[str, ...]
    transition: dict[tuple[str, ...], dict[str, float]]
    initial: dict[tuple[str, ...], float]
    _tables: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def _table(self, key, dist: dict) -> tuple[list, np.ndarray]:
        cached = self._tables.get(key)
        if cached is None:
            outcomes = sorted(dist)
            cumulative = np.cumsum([dist[o] for o in outcomes])
            cached = (outcomes, cumulative)
            self._tables[key] = cached
        return cached

    def sample_initial(self, rng: np.random.Generator) -> tuple[str, ...]:
        if not self.initial:
            raise EmptyModel("Markov model has no starting contexts")
        outcomes, cumulative = self._table(("__initial__",), self.initial)
        return outcomes[_draw(cumulative, rng)]

    def sample_next(self, context: Sequence[str], rng: np.random.Generator) -> str:
        """
        Draw the token following `context`.

        Unseen contexts back off to the initial distribution: a starting
        context is drawn and its last token is emitted.
        """
        context = tuple(context[-self.order:])
        dist = self.transition.get(context)
        if not dist:
            return self.sample_initial(rng)[-1]
        outcomes, cumulative = self._table(context, dist)
        return outcomes[_draw(cumulative, rng)]


def _draw(cumulative: np.ndarray, rng: np.random.Generator) -> int:
    u = rng.random() * cumulative[-1]
    return min(int(np.searchsorted(cumulative, u, side="right")), cumulative.size - 1)


def fit_markov(corpus: Sequence[Sequence[str]], order: int) -> MarkovModel:
    """
    Maximum-likelihood transition estimates from context → next counts.

    Args:
        corpus: Token sequences
        order: 1 or 2

    Returns:
        MarkovModel; unobserved contexts are absent

    Raises:
        InvalidConfig: order not in {1, 2}
        CorpusTooShort: Empty corpus or a sequence of length <= order
    """
    if order not in (1, 2):
        raise InvalidConfig(f"Markov order must be 1 or 2, got {order}")
    if not corpus:
        raise CorpusTooShort("Cannot fit a Markov model on an empty corpus")

    counts: dict[tuple, Counter] = defaultdict(Counter)
    starts: Counter = Counter()
    states: set = set()
    for seq in corpus:
        tokens = tuple(seq)
        if len(tokens) <= order:
            raise CorpusTooShort(f"Sequence of {len(tokens)} token(s) is too short for order {order}")
        states.update(tokens)
        starts[tokens[:order]] += 1
        for i in range(len(tokens) - order):
            counts[tokens[i:i + order]][tokens[i + order]] += 1

    transition = {
        context: {token: n / sum(nexts.values()) for token, n in sorted(nexts.items())}
        for context, nexts in sorted(counts.items())
    }
    total_starts = sum(starts.values())
    initial = {context: n / total_starts for context, n in sorted(starts.items())}
    return MarkovModel(order=order, states=tuple(sorted(states)), transition=transition, initial=initial)


def sample_chain(model: MarkovModel, length: int, rng: np.random.Generator) -> list[str]:
    """Sample `length` tokens: a starting context, then transitions."""
    if not model.transition and not model.initial:
        raise EmptyModel("Markov model has no states")
    tokens = list(model.sample_initial(rng))
    while len(tokens) < length:
        tokens.append(model.sample_next(tokens, rng))
    return tokens[:length]


# Rule-based annealing

@dataclass(frozen=True)
class RuleSet:
    allowed_letters: tuple[str, ...] = ("C", "D", "E", "G", "A")
    max_leap: int = 4
    forbid_rests: bool = True

    def __post_init__(self):
        if not self.allowed_letters:
            raise InvalidConfig("RuleSet needs at least one allowed pitch letter")
        if self.max_leap < 0:
            raise InvalidConfig(f"max_leap must be >= 0, got {self.max_leap}")

    @property
    def scale(self) -> tuple[str, ...]:
        """Allowed letters in pitch order (uppercase first, as written)."""
        return tuple(sorted(self.allowed_letters, key=lambda l: (PITCH_ORDER.find(l.upper()), l)))


@dataclass(frozen=True)
class AnnealSchedule:
    initial_temp: float = 2.0
    cooling: float = 0.995
    steps: int = 2000
    seed: int = 42

    def __post_init__(self):
        if not self.initial_temp > 0:
            raise InvalidConfig(f"initial_temp must be positive, got {self.initial_temp}")
        if not 0 < self.cooling < 1:
            raise InvalidConfig(f"cooling must be in (0, 1), got {self.cooling}")
        if self.steps < 1:
            raise InvalidConfig(f"steps must be >= 1, got {self.steps}")


@dataclass
class AnnealResult:
    tokens: list[str]
    initial_energy: int
    final_energy: int
    accepted: int
    steps_run: int


class MelodyEnergy:
    """
    Rule-violation count for a melody.

    One point per rest (when forbidden), per pitched note outside the scale,
    and per pair of consecutive in-scale notes more than max_leap scale steps
    apart. Costs are local, so a single-position change is rescored from its
    neighbourhood only.
    """

    def __init__(self, rules: RuleSet):
        self.rules = rules
        self._degree = {letter: i for i, letter in enumerate(rules.scale)}
        self._size = len(rules.scale)

    def _step(self, token: str) -> Optional[int]:
        if is_rest_token(token):
            return None
        note = parse_note(token)
        degree = self._degree.get(note.pitch_letter)
        if degree is None:
            return None
        return note.octave * self._size + degree

    def token_cost(self, token: str) -> int:
        if is_rest_token(token):
            return 1 if self.rules.forbid_rests else 0
        return 0 if parse_note(token).pitch_letter in self._degree else 1

    def pair_cost(self, left: str, right: str) -> int:
        a, b = self._step(left), self._step(right)
        if a is None or b is None:
            return 0
        return 1 if abs(a - b) > self.rules.max_leap else 0

    def total(self, tokens: Sequence[str]) -> int:
        energy = sum(self.token_cost(t) for t in tokens)
        energy += sum(self.pair_cost(a, b) for a, b in zip(tokens, tokens[1:]))
        return energy

    def local(self, tokens: Sequence[str], position: int, token: str) -> int:
        """Cost terms touching `position` if it held `token`."""
        cost = self.token_cost(token)
        if position > 0:
            cost += self.pair_cost(tokens[position - 1], token)
        if position < len(tokens) - 1:
            cost += self.pair_cost(token, tokens[position + 1])
        return cost


def melody_energy(tokens: Sequence[str], rules: RuleSet) -> int:
    """Number of rule violations in a melody."""
    return MelodyEnergy(rules).total(tokens)


def anneal_melody(model: MarkovModel, tokens: Sequence[str], rules: RuleSet,
                  schedule: AnnealSchedule, rng: np.random.Generator) -> AnnealResult:
    """
    Simulated annealing on rule violations.

    Each step resamples one random position from the chain's conditional on
    its predecessor (the initial distribution at position 0). Moves with
    dE <= 0 are accepted, others with probability exp(-dE / T); T cools
    geometrically. The best melody seen is returned, and the search stops
    as soon as energy reaches 0.
    """
    energy_fn = MelodyEnergy(rules)
    current = list(tokens)
    energy = energy_fn.total(current)
    result = AnnealResult(tokens=list(current), initial_energy=energy, final_energy=energy,
                          accepted=0, steps_run=0)
    if energy == 0:
        return result

    temperature = schedule.initial_temp
    for step in range(schedule.steps):
        position = int(rng.integers(len(current)))
        if position == 0:
            proposal = model.sample_initial(rng)[-1]
        else:
            proposal = model.sample_next(current[:position], rng)
        delta = energy_fn.local(current, position, proposal) - energy_fn.local(current, position, current[position])

        if delta <= 0 or rng.random() < math.exp(-delta / temperature):
            current[position] = proposal
            energy += delta
            result.accepted += 1
            if energy < result.final_energy:
                result.tokens = list(current)
                result.final_energy = energy

        temperature *= schedule.cooling
        result.steps_run = step + 1
        if result.final_energy == 0:
            break

    return result


def generate_algorithmic(model: MarkovModel, length: int, rules: RuleSet,
                         schedule: AnnealSchedule, seed: int) -> TokenSequence:
    """
    Rule-constrained melody: sample from an order-1 chain, then anneal.

    Args:
        model: Order-1 Markov model
        length: Number of notes (>= 2)
        rules: Constraints scored by the energy
        schedule: Annealing temperatures, step budget and the seed of the
            annealing stream
        seed: Seed of the initial chain sample

    Returns:
        Best melody found

    Raises:
        EmptyModel: Model has no states
        InvalidConfig: length < 2 or model order != 1
    """
    if length < 2:
        raise InvalidConfig(f"Melody length must be >= 2, got {length}")
    if model.order != 1:
        raise InvalidConfig(f"Algorithmic generation needs an order-1 chain, got order {model.order}")
    start = sample_chain(model, length, make_rng(seed))
    result = anneal_melody(model, start, rules, schedule, make_rng(schedule.seed))
    return _as_sequence(result.tokens)


# Native-like

DEFAULT_LETTER_WEIGHTS = {"C": 0.19, "D": 0.17, "E": 0.19, "G": 0.19, "A": 0.17,
                          "F": 0.03, "B": 0.03, "c": 0.015, "f": 0.015}
DEFAULT_DURATION_WEIGHTS = {"02": 0.15, "04": 0.35, "08": 0.35, "16": 0.15}
DEFAULT_OCTAVE_WEIGHTS = {"4": 0.5, "5": 0.5}
DEFAULT_REST_CODES = ("02", "04", "08")


@dataclass(frozen=True)
class NativeStyleConfig:
    length_min: int = 32
    length_max: int = 64
    rest_prob: float = 0.12
    repeat_prob: float = 0.2
    letter_weights: tuple[tuple[str, float], ...] = tuple(DEFAULT_LETTER_WEIGHTS.items())
    octave_weights: tuple[tuple[str, float], ...] = tuple(DEFAULT_OCTAVE_WEIGHTS.items())
    duration_weights: tuple[tuple[str, float], ...] = tuple(DEFAULT_DURATION_WEIGHTS.items())
    rest_codes: tuple[str, ...] = DEFAULT_REST_CODES

    def __post_init__(self):
        if not 1 <= self.length_min <= self.length_max:
            raise InvalidConfig(f"length range must satisfy 1 <= min <= max, got ({self.length_min}, {self.length_max})")
        for name in ("rest_prob", "repeat_prob"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidConfig(f"{name} must be in [0, 1], got {value}")
        for name in ("letter_weights", "octave_weights", "duration_weights"):
            weights = getattr(self, name)
            if not weights or any(w < 0 for _, w in weights) or sum(w for _, w in weights) <= 0:
                raise InvalidConfig(f"{name} must be non-empty with non-negative weights")
        if not self.rest_codes:
            raise InvalidConfig("rest_codes must not be empty")


def _weighted(pairs: Sequence[tuple[str, float]], rng: np.random.Generator) -> str:
    values = [v for v, _ in pairs]
    cumulative = np.cumsum([w for _, w in pairs], dtype=np.float64)
    return values[_draw(cumulative, rng)]


def generate_native_like(config: NativeStyleConfig, seed: int) -> TokenSequence:
    """
    Rest-rich, pentatonic-weighted melody.

    Each position is a rest with probability rest_prob; otherwise, with
    probability repeat_prob, the previous pitch is repeated with a fresh
    duration, else a new pitch is drawn from the letter/octave weights.
    """
    rng = make_rng(seed)
    length = int(rng.integers(config.length_min, config.length_max + 1))
    tokens: list[str] = []
    previous_pitch: Optional[str] = None
    for _ in range(length):
        if rng.random() < config.rest_prob:
            tokens.append(REST_PREFIX + config.rest_codes[int(rng.integers(len(config.rest_codes)))])
            continue
        if previous_pitch is not None and rng.random() < config.repeat_prob:
            pitch = previous_pitch
        else:
            pitch = _weighted(config.letter_weights, rng) + _weighted(config.octave_weights, rng)
        tokens.append(pitch + _weighted(config.duration_weights, rng))
        previous_pitch = pitch
    return _as_sequence(tokens)


# LLM-like

def generate_llm_like(model: MarkovModel, length: int, seed: int) -> TokenSequence:
    """
    Order-2 Markov sample from a motif-trained style model.

    Raises:
        EmptyModel: Model has no states
        InvalidConfig: length < 1 or model order != 2
    """
    if length < 1:
        raise InvalidConfig(f"Melody length must be >= 1, got {length}")
    if model.order != 2:
        raise InvalidConfig(f"LLM-like generation needs an order-2 chain, got order {model.order}")
    return _as_sequence(sample_chain(model, length, make_rng(seed)))


def build_style_corpus(motifs: Sequence[tuple[Sequence[str], float]], n_songs: int,
                       length_range: tuple[int, int], seed: int) -> list[list[str]]:
    """
    Songs made by chaining weighted motifs; training data for the llm-like chain.

    Args:
        motifs: (token list, weight) pairs
        n_songs: Number of songs
        length_range: Min/max notes per song
        seed: RNG seed
    """
    rng = make_rng(seed)
    cumulative = np.cumsum([w for _, w in motifs], dtype=np.float64)
    songs = []
    for _ in range(n_songs):
        target = int(rng.integers(length_range[0], length_range[1] + 1))
        song: list[str] = []
        while len(song) < target:
            song.extend(motifs[_draw(cumulative, rng)][0])
        songs.append(song[:max(target, 3)])
    return songs


def _as_sequence(tokens: Sequence[str]) -> TokenSequence:
    tokens = tuple(tokens)
    return TokenSequence(tokens=tokens, source_len=4 * len(tokens))


# Corpus generation

def _native_config(entry: dict) -> NativeStyleConfig:
    kwargs = {
        "length_min": entry["length_range"][0],
        "length_max": entry["length_range"][1],
    }
    if "rest_prob" in entry:
        kwargs["rest_prob"] = float(entry["rest_prob"])
    if "repeat_prob" in entry:
        kwargs["repeat_prob"] = float(entry["repeat_prob"])
    if "scale" in entry:
        kwargs["letter_weights"] = tuple((k, float(v)) for k, v in entry["scale"].items())
    return NativeStyleConfig(**kwargs)


def _class_seed(base_seed: int, entry: dict, label: int) -> int:
    return int(entry.get("seed", derive_seed(base_seed, label << 32)))


def _generate_class(entry: dict, base_seed: int, reference_songs: int) -> list[LabeledSong]:
    kind = entry["class"]
    label = CLASS_LABELS[kind]
    seed = _class_seed(base_seed, entry, label)
    low, high = entry["length_range"]
    lengths_rng = make_rng(derive_seed(seed, (1 << 62)))
    lengths = [int(n) for n in lengths_rng.integers(low, high + 1, size=entry["count"])]

    songs = []
    if kind == "native":
        config = _native_config(entry)
        for i in range(entry["count"]):
            songs.append(generate_native_like(config, derive_seed(seed, i)))

    elif kind == "algorithm":
        defaults = load_resource("rule_set.json")
        rules_cfg = merge_overrides(defaults["rules"], entry.get("rules"))
        anneal_cfg = merge_overrides(defaults["anneal"], entry.get("anneal"))
        rules = RuleSet(
            allowed_letters=tuple(rules_cfg["allowed_letters"]),
            max_leap=int(rules_cfg["max_leap"]),
            forbid_rests=bool(rules_cfg["forbid_rests"]),
        )
        # chain fitted on reference melodies in the native style; a rule set
        # that forbids rests also keeps them out of the transition table
        reference_config = _native_config(entry)
        reference = []
        for i in range(reference_songs):
            tokens = generate_native_like(reference_config, derive_seed(seed, (1 << 61) + i)).tokens
            if rules.forbid_rests:
                tokens = tuple(t for t in tokens if not is_rest_token(t))
            if len(tokens) > 1:
                reference.append(tokens)
        chain = fit_markov(reference, 1)
        for i in range(entry["count"]):
            song_seed = derive_seed(seed, i)
            schedule = AnnealSchedule(
                initial_temp=float(anneal_cfg["initial_temp"]),
                cooling=float(anneal_cfg["cooling"]),
                steps=int(anneal_cfg["steps"]),
                seed=derive_seed(song_seed, 1),
            )
            songs.append(generate_algorithmic(chain, lengths[i], rules, schedule, song_seed))

    else:
        order = int(entry.get("markov_order", 2))
        motifs = [(tuple(m["tokens"]), float(m["weight"]))
                  for m in load_resource("llm_style_motifs.json")["motifs"]]
        style = build_style_corpus(motifs, reference_songs, (low, high), derive_seed(seed, (1 << 61)))
        chain = fit_markov(style, order)
        for i in range(entry["count"]):
            songs.append(generate_llm_like(chain, lengths[i], derive_seed(seed, i)))

    return [
        LabeledSong(id=f"{kind}-{i:05d}", label=label, ynote=seq.text())
        for i, seq in enumerate(songs)
    ]


def generate_corpus(config: dict, seed: Optional[int] = None) -> list[LabeledSong]:
    """
    Generate a labeled corpus from a generator config.

    Args:
        config: Generator config (see resources/generator_config.json)
        seed: Base seed; overrides the config's "seed"

    Returns:
        Songs grouped by class in config order

    Raises:
        GeneratorConfigError: Config layout or a value is invalid
    """
    validate_generator_config(config)
    base_seed = int(seed if seed is not None else config.get("seed", 42))
    reference_songs = int(config.get("reference_songs", 60))
    songs: list[LabeledSong] = []
    for entry in config["classes"]:
        generated = _generate_class(entry, base_seed, reference_songs)
        logger.info("Generated %d %s songs", len(generated), entry["class"])
        songs.extend(generated)
    return songs


def default_generator_config(profile: str = "balanced") -> dict:
    """Shipped generator config ("balanced" 300/300/300 or "imbalanced" 100/1000/200)."""
    name = {"balanced": "generator_config.json",
            "imbalanced": "generator_config_imbalanced.json"}.get(profile)
    if name is None:
        raise InvalidConfig(f"Unknown generator profile {profile!r}")
    return load_resource(name)
