"""Glyph classes, Latin transliteration, and sound-ambiguity resolution.

The default inventory covers the traditional syllabary: three standalone
vowels plus fourteen consonants, each consonant in four vowel forms (inherent
a, i, u, and the vowel-killed bare consonant), for 59 classes in total.
Diacritic marks are folded into the class itself: "ga", "gi", "gu", and "g"
are four distinct classes sharing one base shape.

Transliteration is canonical: the i-form always romanizes as "i" and the
u-form as "u", even though the script does not distinguish e from i or o from
u (nor d from r). Those distinctions are recovered afterwards by expanding the
ambiguous letters and picking the closest word from a lexicon.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .detection import Detection, ReadingOrder, assemble_reading_order
from .errors import AmbiguityError, InputError

VOWELS = ("a", "i", "u")

# Consonant onsets in traditional recitation order.
ONSETS = ("b", "k", "d", "g", "h", "l", "m", "n", "ng", "p", "s", "t", "w", "y")

# Vowel carried by each consonant form; "" is the killed (vowel-less) form.
FORMS = ("a", "i", "u", "")

DEFAULT_EXPANSION_CAP = 4096


@dataclass(frozen=True)
class Glyph:
    """One detector class: an onset/vowel pair with its Latin reading."""

    class_id: int
    name: str
    onset: str
    vowel: str

    def __post_init__(self) -> None:
        if self.class_id < 0:
            raise InputError(f"class_id must be >= 0, got {self.class_id}")
        if self.onset == "":
            if self.vowel not in VOWELS:
                raise InputError(f"standalone vowel must be one of {VOWELS}, got {self.vowel!r}")
        else:
            if self.onset not in ONSETS:
                raise InputError(f"unknown onset {self.onset!r}")
            if self.vowel not in FORMS:
                raise InputError(f"vowel form must be one of {FORMS}, got {self.vowel!r}")

    @property
    def latin(self) -> str:
        return self.onset + self.vowel


def parse_glyph_name(name: str) -> tuple[str, str]:
    """Split a class name like "ga", "ng", or "u" into (onset, vowel)."""
    if name in VOWELS:
        return ("", name)
    for onset in sorted(ONSETS, key=len, reverse=True):
        if name.startswith(onset) and name[len(onset):] in FORMS:
            return (onset, name[len(onset):])
    raise InputError(f"not a recognizable glyph name: {name!r}")


def default_class_names() -> list[str]:
    """The 59 canonical class names: vowels first, then each onset's forms."""
    names = list(VOWELS)
    for onset in ONSETS:
        names.extend(onset + form for form in FORMS)
    return names


@dataclass(frozen=True)
class ClassInventory:
    """Glyphs indexed by contiguous class id."""

    glyphs: tuple[Glyph, ...]

    def __post_init__(self) -> None:
        ids = [g.class_id for g in self.glyphs]
        if ids != list(range(len(ids))):
            raise InputError("glyph class ids must be contiguous from 0")
        names = [g.name for g in self.glyphs]
        if len(set(names)) != len(names):
            raise InputError("glyph names must be unique")
        object.__setattr__(self, "_by_name", {g.name: g for g in self.glyphs})

    @classmethod
    def from_names(cls, names: Sequence[str]) -> "ClassInventory":
        glyphs = []
        for i, name in enumerate(names):
            onset, vowel = parse_glyph_name(name)
            glyphs.append(Glyph(i, name, onset, vowel))
        return cls(tuple(glyphs))

    @classmethod
    def default(cls) -> "ClassInventory":
        return cls.from_names(default_class_names())

    def __len__(self) -> int:
        return len(self.glyphs)

    def glyph(self, class_id: int) -> Glyph:
        if not 0 <= class_id < len(self.glyphs):
            raise InputError(
                f"class id {class_id} out of range for {len(self.glyphs)}-class inventory"
            )
        return self.glyphs[class_id]

    def by_name(self, name: str) -> Glyph:
        try:
            return self._by_name[name]  # type: ignore[attr-defined]
        except KeyError:
            raise InputError(f"no glyph named {name!r}") from None


def glyph_to_latin(class_id: int, inventory: ClassInventory) -> str:
    """Latin reading of one class id."""
    return inventory.glyph(class_id).latin


def transliterate_lines(
    detections: Sequence[Detection],
    inventory: ClassInventory,
    order: ReadingOrder | None = None,
) -> list[str]:
    """Romanize detections line by line.

    When ``order`` is omitted it is assembled from the detection boxes.
    """
    if order is None:
        order = assemble_reading_order(detections)
    return [
        "".join(glyph_to_latin(detections[i].class_id, inventory) for i in line)
        for line in order.lines
    ]


def transliterate(
    detections: Sequence[Detection],
    inventory: ClassInventory,
    order: ReadingOrder | None = None,
) -> str:
    """Romanize detections into a single string; lines joined by spaces."""
    return " ".join(transliterate_lines(detections, inventory, order))


# ---------------------------------------------------------------------------
# Ambiguity expansion and lexicon lookup
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AmbiguitySet:
    """Groups of Latin letters the script does not distinguish."""

    groups: tuple[frozenset[str], ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for group in self.groups:
            if len(group) < 2:
                raise InputError(f"ambiguity group needs >= 2 letters, got {set(group)}")
            for ch in group:
                if len(ch) != 1 or not ch.islower():
                    raise InputError(f"ambiguity entries must be single lowercase letters, got {ch!r}")
                if ch in seen:
                    raise InputError(f"letter {ch!r} appears in more than one ambiguity group")
                seen.add(ch)

    def options(self, ch: str) -> tuple[str, ...]:
        for group in self.groups:
            if ch in group:
                return tuple(sorted(group))
        return (ch,)


DEFAULT_AMBIGUITY = AmbiguitySet(
    (frozenset({"d", "r"}), frozenset({"e", "i"}), frozenset({"o", "u"}))
)


def expand_ambiguities(
    word: str,
    ambiguity: AmbiguitySet = DEFAULT_AMBIGUITY,
    cap: int = DEFAULT_EXPANSION_CAP,
) -> set[str]:
    """All spellings reachable by swapping letters within their ambiguity group.

    The input itself is always a member. Raises AmbiguityError when the
    candidate count would exceed ``cap``.
    """
    choices = [ambiguity.options(ch) for ch in word]
    count = 1
    for opts in choices:
        count *= len(opts)
        if count > cap:
            raise AmbiguityError(
                f"{word!r} expands to more than {cap} candidates"
            )
    return {"".join(parts) for parts in itertools.product(*choices)}


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit-cost insert, delete, and substitute."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


@dataclass(frozen=True)
class Lexicon:
    """Sorted unique lowercase word list used to resolve ambiguous spellings."""

    words: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.words:
            raise InputError("lexicon is empty")
        if list(self.words) != sorted(set(self.words)):
            raise InputError("lexicon words must be sorted and unique")
        object.__setattr__(self, "_word_set", frozenset(self.words))

    def __contains__(self, word: str) -> bool:
        return word in self._word_set  # type: ignore[attr-defined]

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def from_text(cls, text: str) -> "Lexicon":
        words = sorted({line.strip().lower() for line in text.splitlines() if line.strip()})
        return cls(tuple(words))


def load_lexicon(path: str | Path) -> Lexicon:
    return Lexicon.from_text(Path(path).read_text(encoding="utf-8"))


def disambiguate(
    word: str,
    lexicon: Lexicon,
    ambiguity: AmbiguitySet = DEFAULT_AMBIGUITY,
    cap: int = DEFAULT_EXPANSION_CAP,
) -> tuple[str, int]:
    """Find the lexicon word closest to any ambiguity expansion of ``word``.

    Returns (lexicon_word, distance) minimizing the edit distance between a
    candidate spelling and a lexicon word. Ties prefer the candidate closest
    to the original spelling, then the lexicographically smallest lexicon
    word. A word already resolvable within the lexicon comes back with
    distance 0.
    """
    candidates = sorted(expand_ambiguities(word, ambiguity, cap))
    best: tuple[int, int, str] | None = None
    for cand in candidates:
        in_lex = cand in lexicon
        for lex_word in ([cand] if in_lex else lexicon.words):
            d = 0 if in_lex else levenshtein(cand, lex_word)
            key = (d, levenshtein(cand, word), lex_word)
            if best is None or key < best:
                best = key
    assert best is not None
    return (best[2], best[0])
