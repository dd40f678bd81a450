"""Small rule-based sentiment scorer for post narratives.

Valences are summed per token with a booster increment from the previous
token and a sign flip when a negator sits in the three preceding tokens.
The score is reported as positive/negative/neutral proportions, which
``decide`` turns into a single label.
"""

from __future__ import annotations

import enum
import os
import re
from dataclasses import dataclass, field

NEGATION_WINDOW = 3
BOOSTER_INCREMENT = 0.293

_WORD_RE = re.compile(r"[a-z]+(?:'[a-z]+)?")


class Sentiment(str, enum.Enum):
    POSITIVE = "Positive"
    NEGATIVE = "Negative"
    NEUTRAL = "Neutral"


@dataclass(frozen=True)
class SentimentScore:
    pos: float
    neg: float
    neu: float

    def __post_init__(self):
        for v in (self.pos, self.neg, self.neu):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"proportion out of range: {self}")
        if abs(self.pos + self.neg + self.neu - 1.0) > 1e-9:
            raise ValueError(f"proportions must sum to 1: {self}")


# Valences on the usual [-4, 4] scale, biased toward how people describe
# broken and working code.
_VALENCES = """
error -2.0 errors -2.0 exception -1.6 exceptions -1.6 crash -2.6 crashes -2.6
crashed -2.6 crashing -2.6 fail -2.2 fails -2.2 failed -2.2 failing -2.2
failure -2.3 bug -1.9 bugs -1.9 buggy -2.1 broken -2.3 break -1.2 breaks -1.4
wrong -2.1 incorrect -1.8 invalid -1.5 problem -1.7 problems -1.7 issue -1.2
issues -1.2 trouble -1.7 stuck -1.6 hang -1.4 hangs -1.4 freeze -1.4 freezes -1.4
leak -1.9 leaks -1.9 overflow -1.6 segfault -2.6 undefined -1.1 null -0.6
unexpected -1.4 unable -1.6 cannot -1.2 can't -1.2 doesn't -1.0 won't -1.0
weird -1.2 strange -1.1 confused -1.4 confusing -1.5 annoying -1.9 frustrating -2.2
frustrated -2.2 hate -2.7 bad -2.5 worse -2.1 worst -3.1 terrible -2.9 awful -2.9
horrible -2.9 ugly -2.0 slow -1.2 slower -1.2 missing -1.1 lost -1.3 warning -1.1
warnings -1.1 deprecated -0.9 unsafe -1.8 vulnerable -1.9 vulnerability -2.0
corrupt -2.3 corrupted -2.3 garbage -1.9 mess -1.7 messy -1.8 painful -2.1
difficult -1.4 hard -0.8 impossible -1.9 useless -2.2 ignore -0.9 ignored -1.0
deadlock -2.2 race -0.9 timeout -1.3 reject -1.6 rejected -1.7 denied -1.6
abort -1.7 aborted -1.7 panic -2.2 fatal -2.6 critical -1.3 blocked -1.4
sorry -0.9 unfortunately -1.6 poorly -1.9 poor -2.1 fault -1.7 faulty -2.0
mistake -1.9 mistakes -1.9 typo -1.1 disaster -3.1 nightmare -2.9 damn -1.9
good 1.9 great 3.1 excellent 2.7 awesome 3.1 nice 1.8 perfect 2.7 perfectly 2.6
better 1.9 best 3.2 fine 0.8 correct 1.6 correctly 1.6 right 1.0 works 1.7
working 1.4 worked 1.7 work 0.9 fix 1.3 fixed 1.9 fixes 1.4 solve 1.6 solved 2.1
solves 1.7 solution 1.7 solutions 1.5 resolve 1.5 resolved 1.9 thanks 1.9
thank 1.5 thx 1.6 helpful 1.9 help 1.2 helps 1.5 helped 1.7 clean 1.5 cleaner 1.6
simple 1.0 simpler 1.2 easy 1.9 easier 1.8 elegant 2.3 efficient 1.8 fast 1.2
faster 1.4 safe 1.9 safer 1.8 robust 1.8 reliable 1.9 valid 1.2 success 2.7
successful 2.7 successfully 2.6 succeed 2.2 succeeded 2.3 happy 2.7 glad 2.0
love 3.2 like 1.5 clear 1.6 clearly 1.2 useful 1.9 recommended 1.5 recommend 1.5
improve 1.9 improved 2.1 improvement 2.0 optimal 1.6 optimized 1.4
cool 1.3 amazing 2.8 brilliant 2.8 wonderful 2.7 handy 1.8 neat 1.8 smart 1.7
straightforward 1.4 trivial 0.6 idiomatic 1.2 readable 1.5 stable 1.3 secure 1.4
appreciated 2.3 appreciate 2.0
"""

_NEGATORS = frozenset(
    "not no never none nobody nothing neither nor without isn't aren't wasn't "
    "weren't don't didn't doesn't can't cannot won't wouldn't shouldn't couldn't "
    "hasn't haven't hadn't".split()
)

_BOOSTERS = {
    w: BOOSTER_INCREMENT
    for w in (
        "very really extremely totally completely absolutely so too highly "
        "incredibly quite super entirely utterly especially particularly"
    ).split()
} | {w: -BOOSTER_INCREMENT for w in "slightly somewhat barely hardly kinda partly".split()}


def _parse_valences(text: str) -> dict[str, float]:
    parts = text.split()
    return {w: float(v) for w, v in zip(parts[::2], parts[1::2])}


@dataclass(frozen=True)
class SentimentLexicon:
    valences: dict[str, float]
    negators: frozenset[str] = _NEGATORS
    boosters: dict[str, float] = field(default_factory=lambda: dict(_BOOSTERS))

    def __post_init__(self):
        bad = {w: v for w, v in self.valences.items() if not -4.0 <= v <= 4.0}
        if bad:
            raise ValueError(f"valences outside [-4, 4]: {bad}")

    def negated(self) -> "SentimentLexicon":
        """Same lexicon with every valence sign flipped."""
        return SentimentLexicon({w: -v for w, v in self.valences.items()}, self.negators, self.boosters)


DEFAULT_LEXICON = SentimentLexicon(_parse_valences(_VALENCES))


def load_lexicon(path: str | os.PathLike) -> SentimentLexicon:
    """Read a ``token<TAB>valence`` file."""
    valences = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            try:
                token, value = line.split("\t")
                valences[token.strip().lower()] = float(value)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: expected 'token<TAB>valence'") from None
    return SentimentLexicon(valences)


def analyze(text: str, lexicon: SentimentLexicon = DEFAULT_LEXICON) -> SentimentScore:
    words = _WORD_RE.findall(text.lower())
    pos_mass = neg_mass = 0.0
    neutral = 0
    for i, w in enumerate(words):
        v = lexicon.valences.get(w, 0.0)
        if v == 0.0:
            neutral += 1
            continue
        if i > 0 and words[i - 1] in lexicon.boosters:
            boost = lexicon.boosters[words[i - 1]]
            v += boost if v > 0 else -boost
        if any(p in lexicon.negators for p in words[max(0, i - NEGATION_WINDOW) : i]):
            v = -v
        if v > 0:
            pos_mass += v
        else:
            neg_mass -= v
    total = pos_mass + neg_mass + neutral
    if total == 0:
        return SentimentScore(0.0, 0.0, 1.0)
    pos = pos_mass / total
    neg = neg_mass / total
    return SentimentScore(pos, neg, max(0.0, 1.0 - pos - neg))


def decide(score: SentimentScore) -> Sentiment:
    """Positive/Negative when that share reaches 0.5 and beats the other, else Neutral."""
    if score.pos >= 0.5 and score.pos > score.neg:
        return Sentiment.POSITIVE
    if score.neg >= 0.5 and score.neg > score.pos:
        return Sentiment.NEGATIVE
    return Sentiment.NEUTRAL
