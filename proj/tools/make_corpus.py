#!/usr/bin/env python3
"""Generate the bundled training corpus.

The text is produced by a small seeded story grammar, so the output is
byte-stable and free of third-party copyright. Run from the repository root:

    python3 tools/make_corpus.py --out data/corpus.txt --bytes 1000000
"""

import argparse
import random

NOUNS = """
farmer boat river house garden dog cat horse bird tree road village town
window door table letter book lamp fire king queen child mother father
brother sister friend stranger soldier sailor miller baker teacher doctor
merchant hunter shepherd fox wolf bear rabbit owl crow mouse sheep cow goat
apple bread cheese cup basket coat hat ship wagon bridge tower castle church
mountain hill forest field valley stream lake sea shore island storm wind
rain snow sun moon star cloud stone rock path gate wall fence barn mill well
key coin ring sword shield song story dream voice heart hand face eye
""".split()

RARE_NOUNS = """
lantern anvil compass harp kettle spindle loom saddle plough chisel quill
parchment thimble cauldron chalice beacon turret rampart orchard meadowlark
heron badger otter falcon lynx marten weasel hedgehog tortoise salamander
juniper hawthorn willow birch alder rowan hazel aspen larch cedar cypress
amber cobalt garnet jasper opal quartz topaz onyx ember cinder ash frost
""".split()

ADJS = """
old young small big tall short quiet loud dark bright cold warm wet dry
happy sad tired brave kind cruel wise foolish strong weak poor rich
green red blue white black golden silver gray long narrow deep shallow
gentle wild strange lonely busy empty full broken new ancient hidden
""".split()

VERBS = [
    ("walk", "walked"), ("see", "saw"), ("find", "found"), ("take", "took"),
    ("carry", "carried"), ("watch", "watched"), ("follow", "followed"),
    ("call", "called"), ("help", "helped"), ("open", "opened"),
    ("close", "closed"), ("build", "built"), ("break", "broke"),
    ("leave", "left"), ("bring", "brought"), ("hold", "held"),
    ("keep", "kept"), ("lose", "lost"), ("meet", "met"), ("hear", "heard"),
    ("paint", "painted"), ("mend", "mended"), ("sell", "sold"),
    ("buy", "bought"), ("chase", "chased"), ("feed", "fed"),
    ("greet", "greeted"), ("remember", "remembered"), ("forget", "forgot"),
    ("love", "loved"), ("fear", "feared"), ("visit", "visited"),
]

INTRANS = [
    ("run", "ran"), ("sleep", "slept"), ("sing", "sang"), ("laugh", "laughed"),
    ("cry", "cried"), ("wait", "waited"), ("rest", "rested"),
    ("dance", "danced"), ("shout", "shouted"), ("smile", "smiled"),
    ("wander", "wandered"), ("return", "returned"), ("listen", "listened"),
]

PLACES = """
river village town forest field valley hill mountain lake sea shore
market garden castle church mill bridge road barn tower harbor
""".split()

NAMES = """
anna thomas mary john peter martha paul clara hugo elsa oscar ida
walter rosa henry lena victor greta arthur nora felix hilda simon agnes
edmund beatrix godfrey isolde leopold matilda ottilie reginald sibyl
tobias ursula wilhelmina xavier yolanda zacharias bartholomew cornelius
""".split()

ADVS = """
slowly quickly quietly softly loudly gladly sadly carefully suddenly
again together alone early late often
""".split()

TIMES = """
morning evening night winter summer spring autumn dawn noon
""".split()

PREPS = ["to", "from", "near", "into", "across", "along", "past", "toward"]
DETS = ["the", "the", "the", "a", "his", "her", "their", "that"]
PRONS = [("he", "him"), ("she", "her"), ("they", "them")]


def zipf_choice(rng, items, s=1.1):
    weights = [1.0 / (r + 1) ** s for r in range(len(items))]
    return rng.choices(items, weights=weights, k=1)[0]


# Invented hapax-style words so the corpus has a genuine long tail.
_ONSETS = ["br", "cl", "dr", "fl", "gr", "k", "m", "pl", "sk", "tr", "v", "z"]
_CODAS = ["anth", "ell", "ibb", "ock", "orn", "umble", "ast", "ix"]
TAIL_NOUNS = [o + "a" + c for o in _ONSETS for c in _CODAS] + \
             [o + "o" + c for o in _ONSETS for c in _CODAS]


def noun(rng):
    if rng.random() < 0.003:
        return rng.choice(TAIL_NOUNS)
    if rng.random() < 0.04:
        return rng.choice(RARE_NOUNS)
    return zipf_choice(rng, NOUNS, 0.8)


def np_(rng):
    det = rng.choice(DETS)
    if rng.random() < 0.5:
        return f"{det} {zipf_choice(rng, ADJS, 0.7)} {noun(rng)}"
    return f"{det} {noun(rng)}"


def subject(rng):
    r = rng.random()
    if r < 0.3:
        return zipf_choice(rng, NAMES, 1.2)
    if r < 0.5:
        return rng.choice(PRONS)[0]
    return np_(rng)


def sentence(rng):
    kind = rng.randrange(10)
    if kind == 0:
        return f"{subject(rng)} {zipf_choice(rng, VERBS, 0.6)[1]} {np_(rng)} {rng.choice(PREPS)} the {rng.choice(PLACES)} ."
    if kind == 1:
        return f"in the {rng.choice(TIMES)} , {subject(rng)} {zipf_choice(rng, INTRANS, 0.6)[1]} {rng.choice(ADVS)} ."
    if kind == 2:
        p = rng.choice(PRONS)
        return f"{p[0]} said that {np_(rng)} was {zipf_choice(rng, ADJS, 0.7)} ."
    if kind == 3:
        return f"did {np_(rng)} {zipf_choice(rng, VERBS, 0.6)[0]} {np_(rng)} ?"
    if kind == 4:
        return f"what a {zipf_choice(rng, ADJS, 0.7)} {noun(rng)} !"
    if kind == 5:
        a, b = rng.sample(NAMES[:24], 2)
        return f"{a} and {b} {zipf_choice(rng, INTRANS, 0.6)[1]} {rng.choice(PREPS)} the {rng.choice(PLACES)} ."
    if kind == 6:
        p = rng.choice(PRONS)
        v1 = zipf_choice(rng, VERBS, 0.6)[1]
        v2 = zipf_choice(rng, VERBS, 0.6)[1]
        return f"{subject(rng)} {v1} {np_(rng)} and {v2} {p[1]} {rng.choice(ADVS)} ."
    if kind == 7:
        return f"when the {rng.choice(TIMES)} came , {subject(rng)} {zipf_choice(rng, VERBS, 0.6)[1]} {np_(rng)} ."
    if kind == 8:
        return f"{np_(rng)} was {zipf_choice(rng, ADJS, 0.7)} and {zipf_choice(rng, ADJS, 0.7)} ."
    return f"{subject(rng)} {zipf_choice(rng, INTRANS, 0.6)[1]} near {np_(rng)} ."


def paragraph(rng):
    return " ".join(sentence(rng) for _ in range(rng.randint(3, 8)))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", required=True)
    ap.add_argument("--bytes", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=20250101)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    parts = []
    total = 0
    while total < args.bytes:
        p = paragraph(rng)
        parts.append(p)
        total += len(p) + 1
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(parts) + "\n")


if __name__ == "__main__":
    main()
