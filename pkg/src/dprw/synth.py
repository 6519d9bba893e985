"""Synthetic intent-classification corpora for experiments and tests.

Two templated domains with fully disjoint token inventories: when a model
pre-trained on one domain rewrites the other, any vocabulary bleeding into
the output must have come from pre-training memory, which is exactly what
the leak audit measures. Disjointness is asserted at generation time.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Document, LabeledDataset
from .numcore import Rng

__all__ = ["DomainSpec", "FLIGHTS", "SMART_HOME", "domain_tokens", "make_corpus", "make_disjoint_pair"]


@dataclass(frozen=True)
class DomainSpec:
    """Intent labels with sentence templates and shared slot fillers.

    Placeholders like {city} or {city2} draw from slots[base] where base
    is the placeholder name without trailing digits; the special {verb}
    placeholder draws from the intent's own verb pool, the only slot that
    carries label information.
    """

    name: str
    intents: dict[str, tuple[str, ...]]
    verb_pools: dict[str, tuple[str, ...]]
    slots: dict[str, tuple[str, ...]]


# Every intent inside a domain uses the same carrier templates and the
# same slot pools; the label signal lives entirely in the intent verb.
# That keeps the label channel maximally fragile under latent noise, and
# the disjoint inventories across domains isolate pre-training memory.

_FLIGHT_CARRIERS = (
    "{verb} a flight from {city} to {city2} on {day}",
    "please {verb} the {day} flight to {city}",
    "{verb} a trip to {city} for {day}",
    "{verb} the flight from {city} to {city2}",
    "{verb} a seat on the {day} flight to {city}",
)

FLIGHTS = DomainSpec(
    name="flights",
    intents={
        "book_flight": _FLIGHT_CARRIERS,
        "flight_status": _FLIGHT_CARRIERS,
        "fare_info": _FLIGHT_CARRIERS,
        "cancel_booking": _FLIGHT_CARRIERS,
    },
    verb_pools={
        "book_flight": ("book", "reserve"),
        "flight_status": ("track", "watch"),
        "fare_info": ("price", "quote"),
        "cancel_booking": ("cancel", "drop"),
    },
    slots={
        "city": (
            "boston", "denver", "austin", "chicago", "dallas", "memphis",
            "tulsa", "fresno", "omaha", "tacoma", "reno", "boise",
        ),
        "day": ("monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"),
    },
)

_HOME_CARRIERS = (
    "{verb} my {room} at {htime}",
    "kindly {verb} every {room} by {htime}",
    "{verb} it in my {room} {btime}",
    "{verb} my {room} {btime}",
    "{verb} things in my {room} at {htime}",
)

SMART_HOME = DomainSpec(
    name="smart_home",
    intents={
        "play_music": _HOME_CARRIERS,
        "check_temp": _HOME_CARRIERS,
        "set_alarm": _HOME_CARRIERS,
        "dim_lights": _HOME_CARRIERS,
    },
    verb_pools={
        "play_music": ("play", "queue"),
        "check_temp": ("gauge", "sense"),
        "set_alarm": ("wake", "ring"),
        "dim_lights": ("dim", "brighten"),
    },
    slots={
        "room": ("kitchen", "bedroom", "garage", "office", "attic", "porch"),
        "htime": ("six", "seven", "eight", "ten", "eleven", "midnight"),
        "btime": ("tonight", "today", "tomorrow", "early"),
    },
)


def _slot_base(placeholder: str) -> str:
    return placeholder.rstrip("0123456789")


def domain_tokens(spec: DomainSpec) -> set[str]:
    """Every surface token the domain can ever emit."""
    tokens: set[str] = set()
    for pool in spec.verb_pools.values():
        tokens.update(pool)
    for templates in spec.intents.values():
        for template in templates:
            for word in template.split():
                if word.startswith("{") and word.endswith("}"):
                    base = _slot_base(word[1:-1])
                    if base != "verb":
                        tokens.update(spec.slots[base])
                else:
                    tokens.add(word)
    return tokens


def _fill(template: str, label: str, spec: DomainSpec, rng: Rng) -> str:
    words = []
    for word in template.split():
        if word.startswith("{") and word.endswith("}"):
            base = _slot_base(word[1:-1])
            pool = spec.verb_pools[label] if base == "verb" else spec.slots[base]
            words.append(rng.choice(pool))
        else:
            words.append(word)
    return " ".join(words)


def make_corpus(
    spec: DomainSpec,
    seed: int,
    train_size: int = 200,
    val_size: int = 40,
    test_size: int = 160,
) -> LabeledDataset:
    """Balanced labeled splits; deterministic in (spec, seed, sizes)."""
    rng = Rng(seed)
    splits: dict[str, list[Document]] = {}
    for split_name, size in (("train", train_size), ("validation", val_size), ("test", test_size)):
        docs: list[Document] = []
        labels = list(spec.intents)
        base, extra = divmod(size, len(labels))
        for li, label in enumerate(labels):
            count = base + (1 if li < extra else 0)
            templates = spec.intents[label]
            stream = rng.derive(spec.name, split_name, label)
            for i in range(count):
                text = _fill(templates[i % len(templates)], label, spec, stream)
                docs.append(Document(text=text, label=label))
        splits[split_name] = docs
    return LabeledDataset(
        train=splits["train"], validation=splits["validation"], test=splits["test"]
    )


def make_disjoint_pair(
    seed: int,
    train_size: int = 200,
    val_size: int = 40,
    test_size: int = 160,
) -> tuple[LabeledDataset, LabeledDataset]:
    """The flights and smart-home corpora; token inventories must not overlap."""
    shared = domain_tokens(FLIGHTS) & domain_tokens(SMART_HOME)
    if shared:
        raise AssertionError(f"domain token inventories overlap: {sorted(shared)}")
    a = make_corpus(FLIGHTS, seed, train_size, val_size, test_size)
    b = make_corpus(SMART_HOME, seed, train_size, val_size, test_size)
    return a, b
