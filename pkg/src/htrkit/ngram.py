"""Backoff n-gram language models with Good-Turing discounting.

Models are estimated Katz-style: counts r <= k are discounted by the
Good-Turing ratio r* = (r+1) * N_{r+1} / N_r (renormalized so counts
above the threshold keep their maximum-likelihood estimate), and the
freed mass funds backoff to the next lower order. Character models
treat every character (space included) as a token; word models split
on whitespace and cap the vocabulary at the most frequent words,
mapping the rest to an explicit unknown token so the model stays
open-vocabulary.

Sentence handling: each order m pads with m-1 start sentinels and one
end sentinel. The start sentinel is context only and is never
predicted; the end sentinel is predicted like any token. For every
stored context, the conditional distribution over the full prediction
set (vocabulary + end + unknown) sums to one.

Log probabilities are base 10 throughout, matching the ARPA file
format this module reads and writes.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

SOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
_SENTINELS = (SOS, EOS, UNK)

GT_THRESHOLD = 5
LOG10_TINY = -99.0  # "never happens" log10 probability, SRILM convention


def tokenize_char(text: str, alphabet=None) -> tuple[list[str], int]:
    """Character tokens (space included); returns (tokens, n_filtered).

    When ``alphabet`` is given, characters outside it are dropped and
    counted instead of raising.
    """
    if alphabet is None:
        return list(text), 0
    kept = [c for c in text if c in alphabet]
    return kept, len(text) - len(kept)


def tokenize_word(text: str) -> tuple[list[str], int]:
    """Whitespace tokens; drops (and counts) sentinel-colliding tokens."""
    raw = text.split()
    kept = [w for w in raw if w not in _SENTINELS]
    return kept, len(raw) - len(kept)


@dataclass
class CountTable:
    """Raw n-gram counts for orders 1..order, each with its own padding."""

    order: int
    counts: list[dict[tuple, int]]  # counts[m] for order m; index 0 unused
    n_sentences: int

    def counts_of_counts(self, m: int) -> Counter:
        return Counter(self.counts[m].values())


def count_ngrams(sentences: list[list[str]], order: int) -> CountTable:
    """Count 1..order-grams; order m pads with m-1 starts and one end."""
    if order < 1:
        raise ConfigError("n-gram order must be >= 1")
    counts: list[dict[tuple, int]] = [{} for _ in range(order + 1)]
    for sent in sentences:
        for m in range(1, order + 1):
            seq = [SOS] * (m - 1) + list(sent) + [EOS]
            table = counts[m]
            for i in range(len(seq) - m + 1):
                gram = tuple(seq[i : i + m])
                table[gram] = table.get(gram, 0) + 1
    return CountTable(order=order, counts=counts, n_sentences=len(sentences))


def gt_discounted_count(coc: Counter, r: int) -> float:
    """Plain Good-Turing reestimate r* = (r+1) * N_{r+1} / N_r."""
    if r < 1:
        raise ConfigError("Good-Turing needs r >= 1")
    n_r = coc.get(r, 0)
    if n_r == 0:
        raise ConfigError(f"count-of-counts N_{r} is zero")
    return (r + 1) * coc.get(r + 1, 0) / n_r


def katz_discount_ratios(coc: Counter, k: int = GT_THRESHOLD) -> dict[int, float]:
    """Discount ratio d_r for each 1 <= r <= k; counts above k keep d = 1.

    d_r = (r*/r - A) / (1 - A) with A = (k+1) * N_{k+1} / N_1, which
    makes the discounting vanish smoothly at the threshold. Whenever a
    needed count-of-counts is zero or the formula leaves the (0, 1]
    range, that r falls back to no discount with a warning.
    """
    if k < 1:
        raise ConfigError("discount threshold k must be >= 1")
    ratios = {}
    n1 = coc.get(1, 0)
    a = (k + 1) * coc.get(k + 1, 0) / n1 if n1 > 0 else 1.0
    for r in range(1, k + 1):
        if coc.get(r, 0) == 0:
            continue  # no n-gram has this count; ratio never used
        if n1 == 0 or coc.get(r + 1, 0) == 0 or a >= 1.0:
            warnings.warn(
                f"Good-Turing fallback at r={r}: degenerate counts-of-counts")
            ratios[r] = 1.0
            continue
        r_star = gt_discounted_count(coc, r)
        d = (r_star / r - a) / (1.0 - a)
        if not 0.0 < d <= 1.0:
            warnings.warn(f"Good-Turing fallback at r={r}: ratio {d:.4f} out of range")
            d = 1.0
        ratios[r] = d
    return ratios


class NgramLm:
    """Katz backoff model: stored log10 probs plus context backoff weights."""

    def __init__(self, order: int, mode: str, vocab: tuple[str, ...],
                 entries: list[dict[tuple, float]],
                 backoffs: dict[tuple, float]):
        self.order = order
        self.mode = mode  # "char" | "word"
        self.vocab = tuple(vocab)
        self._vocab_set = frozenset(vocab)
        self.entries = entries  # entries[m]: m-gram tuple -> log10 prob
        self.backoffs = backoffs  # context tuple -> log10 backoff weight

    def prediction_tokens(self) -> list[str]:
        """Everything the model can predict: vocab plus end and unknown."""
        return [*self.vocab, EOS, UNK]

    def _normalize_token(self, token: str) -> str:
        if token in self._vocab_set or token in (EOS, SOS):
            return token
        return UNK

    def logprob(self, context, token: str) -> float:
        """log10 P(token | context) via the Katz chain.

        Context may be any length; only the last order-1 tokens count.
        Unknown tokens (in the context or as the prediction) map to the
        unknown sentinel.
        """
        ctx = tuple(self._normalize_token(t) for t in context)[
            max(0, len(context) - (self.order - 1)) :]
        token = self._normalize_token(token)
        return self._cond(ctx, token)

    def _cond(self, ctx: tuple, token: str) -> float:
        acc = 0.0
        while True:
            gram = ctx + (token,)
            stored = self.entries[len(gram)].get(gram)
            if stored is not None:
                return acc + stored
            if not ctx:
                return acc + self.entries[1].get((token,), LOG10_TINY)
            acc += self.backoffs.get(ctx, 0.0)
            ctx = ctx[1:]

    def backoff(self, ctx: tuple) -> float:
        return self.backoffs.get(tuple(ctx), 0.0)

    def sentence_logprob(self, tokens) -> float:
        """log10 P(tokens </s> | <s> padding), the full Katz chain."""
        seq = [SOS] * (self.order - 1) + [self._normalize_token(t) for t in tokens] + [EOS]
        total = 0.0
        for i in range(self.order - 1, len(seq)):
            total += self._cond(tuple(seq[max(0, i - self.order + 1) : i]), seq[i])
        return total

    def context_sum(self, ctx: tuple) -> float:
        """Sum of P(token | ctx) over the full prediction set (for checks)."""
        return float(sum(10.0 ** self._cond(tuple(ctx), w)
                         for w in self.prediction_tokens()))


def _select_vocab(sentences: list[list[str]], mode: str,
                  vocab_cap: int | None) -> tuple[str, ...]:
    freq = Counter(tok for sent in sentences for tok in sent)
    if mode == "char" or vocab_cap is None or vocab_cap >= len(freq):
        return tuple(sorted(freq))
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    return tuple(sorted(w for w, _ in ranked[:vocab_cap]))


def build_lm(lines: list[str], order: int, mode: str,
             vocab_cap: int | None = None, k: int = GT_THRESHOLD,
             alphabet=None) -> NgramLm:
    """Estimate a Katz/Good-Turing model from one sentence per line."""
    if order < 1:
        raise ConfigError("n-gram order must be >= 1")
    if mode not in ("char", "word"):
        raise ConfigError(f"unknown LM mode {mode!r}")
    tokenizer = tokenize_char if mode == "char" else tokenize_word
    sentences = []
    for line in lines:
        tokens, _ = tokenizer(line, alphabet) if mode == "char" else tokenizer(line)
        sentences.append(tokens)
    if not sentences or all(not s for s in sentences):
        raise DataError("LM corpus is empty")
    vocab = _select_vocab(sentences, mode, vocab_cap)
    vocab_set = frozenset(vocab)
    mapped = [[t if t in vocab_set else UNK for t in sent] for sent in sentences]
    table = count_ngrams(mapped, order)
    return estimate_katz(table, vocab, mode, k)


def estimate_katz(table: CountTable, vocab: tuple[str, ...], mode: str,
                  k: int = GT_THRESHOLD) -> NgramLm:
    order = table.order
    entries: list[dict[tuple, float]] = [{} for _ in range(order + 1)]
    backoffs: dict[tuple, float] = {}
    ratios = {m: katz_discount_ratios(table.counts_of_counts(m), k)
              for m in range(1, order + 1)}

    def disc(m: int, r: int) -> float:
        return ratios[m].get(r, 1.0) if r <= k else 1.0

    # unigrams: discounted relative frequency; freed mass goes to the
    # zero-count prediction tokens (normally just the unknown sentinel)
    prediction = [*vocab, EOS, UNK]
    uni = table.counts[1]
    total = sum(uni.values())
    probs: dict[str, float] = {}
    for w in prediction:
        r = uni.get((w,), 0)
        if r > 0:
            probs[w] = disc(1, r) * r / total
    leftover = 1.0 - sum(probs.values())
    zeros = [w for w in prediction if w not in probs]
    if zeros:
        share = max(leftover, 0.0) / len(zeros)
        for w in zeros:
            probs[w] = share if share > 0 else 10.0**LOG10_TINY
    elif leftover > 1e-9:
        warnings.warn("unigram mass left over with no unseen token to receive it")
    for w, p in probs.items():
        entries[1][(w,)] = float(np.log10(p))

    # higher orders: discounted MLE for seen continuations, Katz backoff
    # weights per context
    for m in range(2, order + 1):
        counts = table.counts[m]
        ctx_total: dict[tuple, int] = {}
        ctx_seen: dict[tuple, list[tuple]] = {}
        for gram, r in counts.items():
            ctx = gram[:-1]
            ctx_total[ctx] = ctx_total.get(ctx, 0) + r
            ctx_seen.setdefault(ctx, []).append(gram)
        for ctx, grams in ctx_seen.items():
            seen_hi = 0.0
            seen_lo = 0.0
            for gram in grams:
                r = counts[gram]
                p = disc(m, r) * r / ctx_total[ctx]
                entries[m][gram] = float(np.log10(p))
                seen_hi += p
                lower = entries[m - 1].get(gram[1:])
                if lower is None:
                    # chain through even lower orders
                    lm_tmp = NgramLm(order, mode, vocab, entries, backoffs)
                    lower = lm_tmp._cond(gram[1:-1], gram[-1])
                seen_lo += 10.0**lower
            num = 1.0 - seen_hi
            den = 1.0 - seen_lo
            if num <= 1e-12:
                alpha = 10.0**LOG10_TINY  # nothing was discounted; no backoff mass
            elif den <= 1e-12:
                warnings.warn(f"context {ctx}: lower order fully covered; backoff mass lost")
                alpha = 1.0
            else:
                alpha = num / den
            backoffs[ctx] = float(np.log10(alpha))

    # start-sentinel contexts need entries to carry their backoff weight in
    # ARPA form even though the start token itself is never predicted
    for m in range(1, order):
        for ctx in backoffs:
            if len(ctx) == m and ctx not in entries[m]:
                entries[m][ctx] = LOG10_TINY
    return NgramLm(order=order, mode=mode, vocab=vocab, entries=entries,
                   backoffs=backoffs)


def oov_rate(lm: NgramLm, tokens: list[str]) -> float:
    """Fraction of test tokens outside the vocabulary (word models only)."""
    if lm.mode != "word":
        raise ConfigError("OOV rate is defined for word models")
    if not tokens:
        return 0.0
    return sum(1 for t in tokens if t not in lm._vocab_set) / len(tokens)


# ---------------------------------------------------------------------------
# ARPA text format


def write_arpa(lm: NgramLm, path) -> None:
    """Standard ARPA dump, deterministically sorted for byte-stable output."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\\data\\\n")
        for m in range(1, lm.order + 1):
            fh.write(f"ngram {m}={len(lm.entries[m])}\n")
        for m in range(1, lm.order + 1):
            fh.write(f"\n\\{m}-grams:\n")
            for gram in sorted(lm.entries[m]):
                logp = lm.entries[m][gram]
                line = f"{logp:.7f}\t{' '.join(gram)}"
                if m < lm.order:
                    line += f"\t{lm.backoffs.get(gram, 0.0):.7f}"
                fh.write(line + "\n")
        fh.write("\n\\end\\\n")


def read_arpa(path, mode: str = "word") -> NgramLm:
    """Parse an ARPA file written by write_arpa (comments tolerated)."""
    sizes: dict[int, int] = {}
    entries: list[dict[tuple, float]] = []
    backoffs: dict[tuple, float] = {}
    section = 0
    state = "preamble"
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if stripped == "\\data\\":
                state = "data"
                continue
            if stripped == "\\end\\":
                state = "done"
                continue
            if stripped.endswith("-grams:") and stripped.startswith("\\"):
                section = int(stripped[1:].split("-")[0])
                state = "grams"
                continue
            if state == "data":
                if not stripped.startswith("ngram "):
                    raise DataError(f"bad ARPA data line: {line!r}")
                m, n = stripped[6:].split("=")
                sizes[int(m)] = int(n)
                continue
            if state != "grams":
                raise DataError(f"unexpected ARPA line: {line!r}")
            fields = line.split("\t")
            if len(fields) == 1:
                fields = stripped.split()
                fields = [fields[0], " ".join(fields[1:])]
            if len(fields) < 2:
                raise DataError(f"bad ARPA entry: {line!r}")
            logp = float(fields[0])
            gram = tuple(fields[1].split(" "))
            if len(gram) != section:
                raise DataError(f"{section}-gram entry has {len(gram)} tokens: {line!r}")
            while len(entries) <= section:
                entries.append({})
            entries[section][gram] = logp
            if len(fields) >= 3 and fields[2] != "":
                backoffs[gram] = float(fields[2])
    if state != "done" or not sizes:
        raise DataError("truncated ARPA file")
    order = max(sizes)
    while len(entries) <= order:
        entries.append({})
    for m, n in sizes.items():
        if len(entries[m]) != n:
            raise DataError(f"ARPA header says {n} {m}-grams, file has {len(entries[m])}")
    vocab = tuple(sorted(g[0] for g in entries[1] if g[0] not in _SENTINELS))
    return NgramLm(order=order, mode=mode, vocab=vocab, entries=entries,
                   backoffs=backoffs)
