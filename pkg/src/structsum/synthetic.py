"""Seeded synthetic corpora for tests and desk-scale experiments.

``naming-longrange``
    Mini-language methods made of assignments to two-word camelCase
    identifiers.  The method name is the one identifier that is assigned
    twice, at least 20 token positions apart.  The six words of a method form
    a 3-regular pattern (every word occurs in exactly three identifiers), so
    counting words does not reveal the answer; what does is the
    LastLexicalUse edge between the two occurrences.
``copy-task``
    One sentence of common words with one or two made-up rare words; the
    target is the rare words in order, so it can only be produced by copying.
``nl-toy``
    Templated multi-sentence stories with person and city mentions, pronoun
    coreference and the first sentence as summary.
"""

from __future__ import annotations

import random

from .codegraph import PLACEHOLDER, CodeGraphConfig, build_code_graph
from .data import SCHEMA, document_record, method_record
from .minilang import parse_method
from .nlgraph import AnnotatedDocument

KINDS = ("naming-longrange", "copy-task", "nl-toy")
MIN_SPAN = 20

NAME_WORDS = (
    "account", "buffer", "cache", "count", "data", "entry", "event", "file", "flag", "frame",
    "handle", "index", "item", "key", "label", "limit", "line", "list", "lock", "map",
    "mode", "node", "offset", "order", "page", "path", "point", "queue", "rate", "record",
    "result", "row", "score", "size", "slot", "state", "table", "task", "time", "total",
    "user", "value",
)

# Identifier pattern over six word slots: the pair (0, 1) is doubled and
# every slot has degree three.
PAIR_PATTERN = ((0, 2), (1, 3), (2, 4), (2, 5), (3, 4), (3, 5), (4, 5))

COMMON_WORDS = (
    "the", "a", "of", "and", "to", "in", "is", "was", "for", "on", "that", "with", "as", "it",
    "at", "by", "from", "this", "had", "not", "but", "be", "are", "have", "one", "all", "new",
    "more", "some", "out",
)
SYLLABLES = ("ka", "zu", "mor", "ti", "vel", "qua", "dro", "fen", "lix", "gor", "pim", "sab", "ur", "nex")

FIRST_NAMES = {
    "he": ("John", "Peter", "Omar", "Ivan", "Marco", "Kenji", "Samuel", "Luis"),
    "she": ("Mary", "Anna", "Fatima", "Olga", "Lucia", "Yuki", "Grace", "Elena"),
}
LAST_NAMES = ("Smith", "Garcia", "Kowalski", "Tanaka", "Okafor", "Silva", "Novak", "Haddad", "Berg", "Moreau")
CITIES = ("Paris", "Lagos", "Lima", "Osaka", "Cairo", "Oslo", "Quito", "Perth", "Dublin", "Seoul")
JOBS = ("teacher", "doctor", "pilot", "chef", "lawyer", "farmer", "writer", "nurse")
THINGS = ("meeting", "trip", "plan", "film", "match", "book")
ADJECTIVES = ("long", "good", "strange", "short", "difficult", "great")


def _camel(a: str, b: str) -> str:
    return a + b[:1].upper() + b[1:]


def _naming_method(rng: random.Random) -> tuple:
    while True:
        words = rng.sample(NAME_WORDS, 6)
        target = (words[0], words[1])
        idents = [_camel(*target), _camel(*target)]
        for i, j in PAIR_PATTERN:
            a, b = (words[i], words[j]) if rng.random() < 0.5 else (words[j], words[i])
            idents.append(_camel(a, b))
        if len(set(idents)) != len(idents) - 1:
            continue
        rng.shuffle(idents)
        stmts = []
        for ident in idents:
            form = rng.randrange(3)
            n1, n2 = rng.randrange(10), rng.randrange(10)
            stmts.append(f"{ident} = {n1};" if form == 0 else f"{ident} = {n1} {'+*'[form - 1]} {n2};")
        source = "def " + _camel(*target) + "() { " + " ".join(stmts) + " }"
        method = parse_method(source)
        # Sequence positions of the two target occurrences (two subtokens per identifier).
        positions, pos = [], 0
        for text, is_ident in method.tokens:
            if is_ident and text == _camel(*target):
                positions.append(pos)
            pos += 2 if is_ident else 1
        if positions[1] - positions[0] >= MIN_SPAN:
            return method, source


def _rare_word(rng: random.Random, taken: set) -> str:
    syllables = 3
    while True:
        for _ in range(50):
            w = "".join(rng.choice(SYLLABLES) for _ in range(syllables))
            if w not in taken and w not in COMMON_WORDS:
                taken.add(w)
                return w
        syllables += 1  # three-syllable words are running out


def _copy_document(rng: random.Random, taken: set) -> AnnotatedDocument:
    tokens = [rng.choice(COMMON_WORDS) for _ in range(rng.randint(6, 12))]
    rare = [_rare_word(rng, taken) for _ in range(rng.randint(1, 2))]
    slots = sorted(rng.sample(range(len(tokens) + len(rare)), len(rare)))
    for slot, word in zip(slots, rare):
        tokens.insert(slot, word)
    tokens.append(".")
    return AnnotatedDocument(tokens, [(0, len(tokens))], summary_tokens=rare)


def _story(rng: random.Random, sentences: int) -> AnnotatedDocument:
    people = []
    for _ in range(2):
        pron = rng.choice(("he", "she"))
        people.append((rng.choice(FIRST_NAMES[pron]), rng.choice(LAST_NAMES), pron))
    if people[0][:2] == people[1][:2]:
        people[1] = (people[1][0], LAST_NAMES[(LAST_NAMES.index(people[1][1]) + 1) % len(LAST_NAMES)], people[1][2])
    tokens, spans, entities = [], [], []
    chains = {0: [], 1: []}

    def person(i, full=True):
        first, last, pron = people[i]
        start = len(tokens)
        if full:
            tokens.extend([first, last])
            entities.append(((start, start + 2), "PERSON"))
        else:
            tokens.append(pron.capitalize() if not tokens or tokens[-1] == "." else pron)
        chains[i].append((start, len(tokens)))

    def city():
        tokens.append(rng.choice(CITIES))
        entities.append(((len(tokens) - 1, len(tokens)), "CITY"))

    def sentence(kind):
        start = len(tokens)
        if kind == 0:
            person(0)
            tokens.extend(["moved", "to"])
            city()
            tokens.extend(["in", str(rng.randint(1950, 2020))])
        elif kind == 1:
            person(rng.randrange(2), full=False)
            tokens.extend(["works", "as", "a", rng.choice(JOBS), "in"])
            city()
        elif kind == 2:
            person(0, full=False)
            tokens.append("met")
            person(1)
            tokens.extend(["at", "the", rng.choice(THINGS)])
        else:
            person(rng.randrange(2), full=False)
            tokens.extend(["said", "the", rng.choice(THINGS), "was", rng.choice(ADJECTIVES)])
        tokens.append(".")
        spans.append((start, len(tokens)))

    sentence(0)
    sentence(2)
    for _ in range(max(sentences - 2, 0)):
        sentence(rng.choice((1, 3)))
    summary = tokens[spans[0][0] : spans[0][1]]
    corefs = [chain for chain in chains.values() if len(chain) > 1]
    return AnnotatedDocument(tokens, spans, entities, corefs, summary_tokens=summary)


def generate_synthetic_corpus(kind: str, size: int, seed: int = 0, sentences: tuple = (3, 6)) -> list:
    """``size`` dataset records of the given kind; identical for identical seeds.

    ``sentences`` bounds the story length of ``nl-toy`` documents.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if size < 1:
        raise ValueError("size must be >= 1")
    rng = random.Random(f"{kind}:{seed}")
    records = []
    taken = set()
    for i in range(size):
        rid = f"{kind}-{seed}-{i}"
        if kind == "naming-longrange":
            method, _ = _naming_method(rng)
            records.append(method_record(method, rid, task="naming"))
        elif kind == "copy-task":
            records.append(document_record(_copy_document(rng, taken), rid))
        else:
            records.append(document_record(_story(rng, rng.randint(*sentences)), rid))
    return records


def longest_lexical_use_span(record: dict) -> int:
    """Largest sequence-position distance bridged by a LastLexicalUse edge."""
    from .data import record_to_method

    method = record_to_method(record)
    g = build_code_graph(method, CodeGraphConfig())
    k = g.edge_type_names.index("LastLexicalUse")
    anchor = {}
    for src, dst in g.edge_lists[g.edge_type_names.index("InToken")]:
        anchor.setdefault(int(dst), int(src))
    spans = [abs(anchor[int(a)] - anchor[int(b)]) for a, b in g.edge_lists[k]]
    return max(spans, default=0)


__all__ = ["KINDS", "PLACEHOLDER", "SCHEMA", "generate_synthetic_corpus", "longest_lexical_use_span"]
