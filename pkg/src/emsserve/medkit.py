"""Deterministic clinical post-processing helpers.

Covers three small jobs downstream of text extraction: correcting noisy
medicine names against a trusted dictionary by edit distance, computing dose
volumes from quantity and concentration, and looking up the diseases
associated with a medicine. All pure functions over an immutable dictionary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import NegativeQuantity, SchemaError, UnknownEntry, ZeroConcentration

DEFAULT_MAX_RELATIVE_ED = 0.34  # roughly one edit per three characters


@dataclass(frozen=True)
class MedEntry:
    name: str
    concentrations: tuple[float, ...] = ()
    diseases: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.name:
            raise SchemaError("medicine name must be non-empty")
        object.__setattr__(self, "concentrations", tuple(self.concentrations))
        object.__setattr__(self, "diseases", tuple(self.diseases))
        if any(c <= 0 for c in self.concentrations):
            raise SchemaError(f"{self.name}: concentrations must be > 0")


@dataclass(frozen=True)
class MedsDictionary:
    entries: tuple[MedEntry, ...]
    disease_universe: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        names = [e.name for e in self.entries]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate medicine names in dictionary")
        universe = set(self.disease_universe)
        referenced = {d for e in self.entries for d in e.diseases}
        if not universe:
            universe = referenced
        elif not referenced <= universe:
            missing = sorted(referenced - universe)
            raise SchemaError(f"diseases not in universe: {missing}")
        object.__setattr__(self, "disease_universe", frozenset(universe))

    def get(self, name: str) -> MedEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise UnknownEntry(name)


@dataclass(frozen=True)
class DoseResult:
    volume_ml: float
    quantity_mg: float
    concentration_mg_per_ml: float


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit-cost insert/delete/substitute."""
    if a == b:
        return 0
    if len(a) > len(b):
        a, b = b, a
    previous = list(range(len(a) + 1))
    for i, cb in enumerate(b, start=1):
        current = [i]
        for j, ca in enumerate(a, start=1):
            cost = previous[j - 1] + (ca != cb)
            current.append(min(previous[j] + 1, current[j - 1] + 1, cost))
        previous = current
    return previous[-1]


def _normalize(token: str) -> str:
    return token.strip().casefold()


def ed_match(
    token: str,
    dictionary: MedsDictionary,
    max_rel_ed: float = DEFAULT_MAX_RELATIVE_ED,
) -> MedEntry | None:
    """Closest dictionary entry by edit distance, or None when even the best
    candidate is further than ceil(max_rel_ed * len(name)) edits away.

    Ties break toward the smaller distance, then the lexicographically
    smaller name. Matching is case-insensitive.
    """
    if not 0 < max_rel_ed <= 1:
        raise ValueError("max_rel_ed must be in (0, 1]")
    needle = _normalize(token)
    best: tuple[int, str, MedEntry] | None = None
    for entry in dictionary.entries:
        distance = levenshtein(needle, _normalize(entry.name))
        candidate = (distance, entry.name, entry)
        if best is None or candidate[:2] < best[:2]:
            best = candidate
    if best is None:
        return None
    distance, _, entry = best
    if distance > math.ceil(max_rel_ed * len(entry.name)):
        return None
    return entry


def med_math(quantity_mg: float, concentration_mg_per_ml: float) -> DoseResult:
    """Dose volume in ml: quantity divided by concentration."""
    if concentration_mg_per_ml <= 0:
        raise ZeroConcentration(f"concentration must be > 0, got {concentration_mg_per_ml}")
    if quantity_mg < 0:
        raise NegativeQuantity(f"quantity must be >= 0, got {quantity_mg}")
    return DoseResult(
        volume_ml=quantity_mg / concentration_mg_per_ml,
        quantity_mg=quantity_mg,
        concentration_mg_per_ml=concentration_mg_per_ml,
    )


def disease_lookup(entry: MedEntry, dictionary: MedsDictionary) -> list[str]:
    """Diseases associated with a dictionary entry; entry must be in the dict."""
    for candidate in dictionary.entries:
        if candidate == entry:
            return list(entry.diseases)
    raise UnknownEntry(entry.name)


_UNIT_SUFFIXES = ("mg/ml", "mg per ml", "mgml")


def concentration_match(
    token: str,
    entry: MedEntry,
    max_rel_ed: float = DEFAULT_MAX_RELATIVE_ED,
) -> float | None:
    """Resolve an extracted concentration string against an entry's known
    concentrations.

    A clean numeric token must equal a listed value; when the numeric parse
    fails (OCR noise), the token is edit-distance matched against the string
    renderings of the listed values instead.
    """
    cleaned = _normalize(token)
    for suffix in _UNIT_SUFFIXES:
        if cleaned.endswith(suffix):
            cleaned = cleaned[: -len(suffix)].strip()
            break
    try:
        value = float(cleaned)
    except ValueError:
        value = None
    if value is not None:
        return value if value in entry.concentrations else None
    renderings = {_render_concentration(c): c for c in entry.concentrations}
    best = None
    for rendering, concentration in sorted(renderings.items()):
        distance = levenshtein(cleaned, rendering)
        if best is None or distance < best[0]:
            best = (distance, rendering, concentration)
    if best is None:
        return None
    distance, rendering, concentration = best
    if distance > math.ceil(max_rel_ed * len(rendering)):
        return None
    return concentration


def _render_concentration(value: float) -> str:
    return f"{value:g}"


# --- persistence --------------------------------------------------------------


def dictionary_to_json(dictionary: MedsDictionary) -> str:
    doc = {
        "schema": 1,
        "entries": [
            {
                "name": e.name,
                "concentrations": list(e.concentrations),
                "diseases": list(e.diseases),
            }
            for e in dictionary.entries
        ],
        "disease_universe": sorted(dictionary.disease_universe),
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def dictionary_from_json(text: str) -> MedsDictionary:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid dictionary JSON: {exc}") from exc
    if isinstance(doc, list):
        raw_entries, universe = doc, []
    else:
        raw_entries = doc.get("entries", [])
        universe = doc.get("disease_universe", [])
    try:
        entries = tuple(
            MedEntry(
                name=e["name"],
                concentrations=tuple(float(c) for c in e.get("concentrations", [])),
                diseases=tuple(e.get("diseases", [])),
            )
            for e in raw_entries
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"dictionary entry missing key: {exc}") from exc
    return MedsDictionary(entries=entries, disease_universe=frozenset(universe))


def load_dictionary(path: str | Path) -> MedsDictionary:
    return dictionary_from_json(Path(path).read_text())


def sample_dictionary() -> MedsDictionary:
    """Small bundled dictionary for demos and tests; real deployments load a
    site-specific file with the full disease universe."""
    rows = [
        ("adrenaline", (4.2, 1.0), ("anaphylaxis", "cardiac arrest")),
        ("albuterol", (0.5,), ("asthma", "copd")),
        ("aspirin", (), ("chest pain", "stroke")),
        ("atropine", (0.1, 1.0), ("bradycardia",)),
        ("atrovent", (0.25,), ("asthma", "copd")),
        ("dextrose", (250.0, 500.0), ("hypoglycemia",)),
        ("epinephrine", (1.0, 0.1), ("anaphylaxis", "cardiac arrest")),
        ("fentanyl", (0.05,), ("severe pain",)),
        ("glucagon", (1.0,), ("hypoglycemia",)),
        ("midazolam", (1.0, 5.0), ("seizure",)),
        ("naloxone", (0.4, 1.0), ("opioid overdose",)),
        ("nitroglycerin", (0.4,), ("chest pain",)),
        ("ondansetron", (2.0,), ("nausea",)),
    ]
    entries = tuple(MedEntry(name, conc, dis) for name, conc, dis in rows)
    universe = {d for e in entries for d in e.diseases} | {
        "respiratory distress",
        "overdose ingestion",
        "allergic reaction",
    }
    return MedsDictionary(entries=entries, disease_universe=frozenset(universe))
