"""Error-rate scoring: Levenshtein alignment pooled over a corpus.

CER tokenizes by character (space counts as a character), WER by
whitespace. Rates are corpus-level: total edit distance over total
reference length, not a mean of per-line rates.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class ErrorReport:
    substitutions: int
    insertions: int
    deletions: int
    ref_length: int

    @property
    def distance(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def rate(self) -> float:
        return self.distance / max(self.ref_length, 1)


def edit_distance(ref, hyp) -> tuple[int, int, int, int]:
    """Minimal unit-cost alignment of two token sequences.

    Returns (distance, substitutions, insertions, deletions). Equal-cost
    alignments resolve deterministically: substitutions win over
    deletions, deletions over insertions.
    """
    ref = list(ref)
    hyp = list(hyp)
    m, n = len(ref), len(hyp)
    # cell = (distance, S, I, D)
    prev = [(j, 0, j, 0) for j in range(n + 1)]
    for i in range(1, m + 1):
        cur = [(i, 0, 0, i)]
        for j in range(1, n + 1):
            sub_cost = 0 if ref[i - 1] == hyp[j - 1] else 1
            d_diag, s_diag, i_diag, del_diag = prev[j - 1]
            cand = (d_diag + sub_cost, s_diag + sub_cost, i_diag, del_diag)
            d_up, s_up, i_up, del_up = prev[j]
            if d_up + 1 < cand[0]:
                cand = (d_up + 1, s_up, i_up, del_up + 1)
            d_left, s_left, i_left, del_left = cur[j - 1]
            if d_left + 1 < cand[0]:
                cand = (d_left + 1, s_left, i_left + 1, del_left)
            cur.append(cand)
        prev = cur
    dist, subs, ins, dels = prev[n]
    return dist, subs, ins, dels


def _score(refs: list[list], hyps: list[list]) -> ErrorReport:
    if len(refs) != len(hyps):
        raise ConfigError(
            f"got {len(refs)} references but {len(hyps)} hypotheses")
    subs = ins = dels = ref_len = 0
    for r, h in zip(refs, hyps):
        _, s, i, d = edit_distance(r, h)
        subs += s
        ins += i
        dels += d
        ref_len += len(r)
    return ErrorReport(substitutions=subs, insertions=ins, deletions=dels,
                       ref_length=ref_len)


def cer(refs: list[str], hyps: list[str]) -> ErrorReport:
    """Character error rate pooled over the corpus."""
    return _score([list(r) for r in refs], [list(h) for h in hyps])


def wer(refs: list[str], hyps: list[str]) -> ErrorReport:
    """Word error rate pooled over the corpus (whitespace tokens)."""
    return _score([r.split() for r in refs], [h.split() for h in hyps])
