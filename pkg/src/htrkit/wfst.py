"""Weighted finite-state transducers for explicit-LM decoding.

Everything lives in the tropical semiring over negative natural-log
scores: path weights add, search keeps the minimum. Label 0 is
reserved for epsilon on both tapes; emission input labels are alphabet
indices shifted by one (so blank, alphabet index 0, is input label 1).

The decoding graph is assembled from three parts:

  H  maps frame-level symbol sequences to their run-collapsed form
     (one state per symbol; staying loops consume repeats silently,
     moving to a different symbol emits it once),
  L  maps collapsed symbols to words, consuming the blanks that CTC
     requires between repeated characters and allows elsewhere,
  G  scores token sequences with a backoff n-gram model (one state per
     stored context, epsilon arcs for backoff).

Composed as HLG (word decoding) or, with a small blank-deleting
transducer standing in for the lexicon, H-B-G (character decoding).
The decoder runs time-synchronous Viterbi beam search over the
composed graph, scaling network posteriors by symbol priors.
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .alphabet import LabelAlphabet
from .errors import ConfigError, DataError
from .ngram import EOS, SOS, UNK, NgramLm

EPSILON = 0
LN10 = math.log(10.0)
ZERO_POSTERIOR_COST = 1e9


def sym_label(alphabet_index: int) -> int:
    """Alphabet index -> WFST input label (0 is reserved for epsilon)."""
    return alphabet_index + 1


class Wfst:
    """Mutable transducer: integer-labeled weighted arcs plus final weights."""

    def __init__(self, isyms: list[str] | None = None,
                 osyms: list[str] | None = None):
        self.num_states = 0
        self.start = -1
        self.arcs: list[tuple[int, int, int, float, int]] = []  # src,il,ol,w,dst
        self.finals: dict[int, float] = {}
        self.isyms = isyms  # position = label id; index 0 is epsilon
        self.osyms = osyms

    def add_state(self) -> int:
        self.num_states += 1
        return self.num_states - 1

    def add_states(self, n: int) -> int:
        first = self.num_states
        self.num_states += n
        return first

    def set_start(self, state: int) -> None:
        self.start = state

    def set_final(self, state: int, weight: float = 0.0) -> None:
        self.finals[state] = weight

    def add_arc(self, src: int, ilabel: int, olabel: int, weight: float,
                dst: int) -> None:
        if not (0 <= src < self.num_states and 0 <= dst < self.num_states):
            raise ConfigError("arc endpoint is not a valid state")
        if not np.isfinite(weight):
            raise ConfigError("arc weights must be finite")
        self.arcs.append((src, ilabel, olabel, float(weight), dst))

    @property
    def num_arcs(self) -> int:
        return len(self.arcs)

    def sorted_arcs(self) -> list[tuple[int, int, int, float, int]]:
        return sorted(self.arcs, key=lambda a: (a[0], a[1], a[2], a[4]))

    def compile(self) -> "_CompiledFst":
        return _CompiledFst(self)


class _CompiledFst:
    """Arc arrays in CSR layout (sorted by source) for vectorized search."""

    def __init__(self, fst: Wfst):
        if fst.start < 0:
            raise ConfigError("transducer has no start state")
        arcs = fst.sorted_arcs()
        n = fst.num_states
        self.num_states = n
        self.start = fst.start
        if arcs:
            self.src = np.array([a[0] for a in arcs], dtype=np.int64)
            self.ilabel = np.array([a[1] for a in arcs], dtype=np.int64)
            self.olabel = np.array([a[2] for a in arcs], dtype=np.int64)
            self.weight = np.array([a[3] for a in arcs], dtype=np.float64)
            self.dst = np.array([a[4] for a in arcs], dtype=np.int64)
        else:
            self.src = self.ilabel = self.olabel = self.dst = np.empty(0, np.int64)
            self.weight = np.empty(0, np.float64)
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.indptr, self.src + 1, 1)
        np.cumsum(self.indptr, out=self.indptr)
        self.final_state = np.array(sorted(fst.finals), dtype=np.int64)
        self.final_weight = np.array(
            [fst.finals[s] for s in sorted(fst.finals)], dtype=np.float64)
        self.final_map = np.full(n, np.inf)
        if self.final_state.size:
            self.final_map[self.final_state] = self.final_weight
        self.is_eps = self.ilabel == EPSILON


def _gather_arcs(indptr: np.ndarray, states: np.ndarray):
    """Flat arc indices for all arcs leaving ``states``, plus owner slots."""
    starts = indptr[states]
    counts = indptr[states + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    owner = np.repeat(np.arange(len(states)), counts)
    base = np.repeat(starts, counts)
    local = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    return base + local, owner


# ---------------------------------------------------------------------------
# Graph builders


@dataclass(frozen=True)
class SymbolPriors:
    """P(s) over the alphabet including blank; entries positive, sum 1."""

    prior: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.prior, dtype=np.float64)
        if p.ndim != 1 or (p <= 0).any() or abs(p.sum() - 1.0) > 1e-6:
            raise ConfigError("priors must be positive and sum to 1")
        object.__setattr__(self, "prior", p)


@dataclass(frozen=True)
class DecodeConfig:
    alpha: float = 0.2  # prior-scaling exponent
    beam: float = math.inf  # cost width kept around the best token
    max_active: int = 0  # token cap per frame; 0 = unlimited
    lm_weight: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beam <= 0:
            raise ConfigError("need alpha >= 0 and beam > 0")


MIN_BLANK_PRIOR = 1e-6


def estimate_priors(transcripts: list[str], alphabet: LabelAlphabet,
                    total_frames: int) -> SymbolPriors:
    """Symbol priors from training transcripts, blank treated specially.

    Real-symbol priors are add-one-smoothed transcript frequencies
    scaled by (1 - b), where the blank share b = 1 - labels/frames is
    the occupancy the frame/label ratio forces on blank (floored at a
    tiny positive value so every prior stays positive).
    """
    if not transcripts:
        raise ConfigError("no transcripts to estimate priors from")
    if total_frames <= 0:
        raise ConfigError("total_frames must be positive")
    counts = np.zeros(alphabet.size, dtype=np.float64)
    total_labels = 0
    for text in transcripts:
        for label in alphabet.encode(text):
            counts[label] += 1
            total_labels += 1
    b = max(1.0 - total_labels / total_frames, 0.0)
    b = max(b, MIN_BLANK_PRIOR)
    real = counts[1:] + 1.0
    prior = np.empty(alphabet.size)
    prior[0] = b
    prior[1:] = real / real.sum() * (1.0 - b)
    return SymbolPriors(prior)


def emission_cost(posterior_row: np.ndarray, symbol: int, priors: SymbolPriors,
                  alpha: float) -> float:
    """-log(P(s|X) / P(s)^alpha); capped when the posterior is zero."""
    p = float(posterior_row[symbol])
    if p <= 0.0:
        return ZERO_POSTERIOR_COST
    return -math.log(p) + alpha * math.log(float(priors.prior[symbol]))


def emission_cost_matrix(posteriors: np.ndarray, priors: SymbolPriors,
                         alpha: float) -> np.ndarray:
    p = np.asarray(posteriors, dtype=np.float64)
    with np.errstate(divide="ignore"):
        cost = np.where(p > 0.0, -np.log(np.maximum(p, 1e-300)),
                        ZERO_POSTERIOR_COST)
    return cost + alpha * np.log(priors.prior)


def build_h(alphabet: LabelAlphabet) -> Wfst:
    """Run-collapsing symbol transducer (blank included as a symbol).

    One state per symbol: entering from elsewhere emits the symbol
    once, the self-loop consumes repeats silently. Every state is
    final, so runs may end anywhere.
    """
    k = alphabet.size
    syms = ["<eps>", "<blank>", *alphabet.symbols]
    fst = Wfst(isyms=syms, osyms=syms)
    start = fst.add_state()
    fst.set_start(start)
    fst.set_final(start)
    states = [fst.add_state() for _ in range(k)]
    for s in range(k):
        lab = sym_label(s)
        fst.add_arc(start, lab, lab, 0.0, states[s])
        fst.add_arc(states[s], lab, EPSILON, 0.0, states[s])
        fst.set_final(states[s])
        for other in range(k):
            if other != s:
                lab_o = sym_label(other)
                fst.add_arc(states[s], lab_o, lab_o, 0.0, states[other])
    return fst


def blank_bypass(alphabet: LabelAlphabet) -> Wfst:
    """Single-state transducer deleting blanks and passing characters."""
    syms = ["<eps>", "<blank>", *alphabet.symbols]
    fst = Wfst(isyms=syms, osyms=syms)
    s = fst.add_state()
    fst.set_start(s)
    fst.set_final(s)
    fst.add_arc(s, sym_label(0), EPSILON, 0.0, s)
    for k in range(1, alphabet.size):
        fst.add_arc(s, sym_label(k), sym_label(k), 0.0, s)
    return fst


def build_l(lexicon: dict[str, str], alphabet: LabelAlphabet) -> Wfst:
    """Blank-insertion lexicon: collapsed symbols in, words out.

    Between two different characters of a spelling a blank is optional;
    between two repeated characters it is compulsory (a repeat without
    one would have collapsed). Blanks at word boundaries are optional,
    and words are separated by the space character.
    """
    words = sorted(lexicon)
    syms = ["<eps>", "<blank>", *alphabet.symbols]
    fst = Wfst(isyms=syms, osyms=["<eps>", *words])
    root = fst.add_state()
    fst.set_start(root)
    if not words:
        warnings.warn("empty lexicon: transducer accepts nothing")
        return fst
    fst.set_final(root)
    blank = sym_label(0)
    space = sym_label(alphabet.index_of(" ")) if " " in alphabet else None
    root_b = fst.add_state()  # after an optional leading blank
    fst.add_arc(root, blank, EPSILON, 0.0, root_b)
    fst.set_final(root_b)
    for wid, word in enumerate(words, start=1):
        spelling = lexicon[word]
        if not spelling:
            raise DataError(f"word {word!r} has an empty spelling")
        if " " in spelling:
            raise DataError(f"word {word!r}: spellings cannot contain spaces")
        try:
            labels = [sym_label(alphabet.index_of(c)) for c in spelling]
        except ConfigError:
            raise DataError(
                f"word {word!r}: spelling uses characters outside the alphabet"
            ) from None
        prev = None
        for pos, lab in enumerate(labels):
            state = fst.add_state()
            if pos == 0:
                fst.add_arc(root, lab, wid, 0.0, state)
                fst.add_arc(root_b, lab, wid, 0.0, state)
            else:
                gap = fst.add_state()
                fst.add_arc(prev, blank, EPSILON, 0.0, gap)
                fst.add_arc(gap, lab, EPSILON, 0.0, state)
                if lab != labels[pos - 1]:
                    fst.add_arc(prev, lab, EPSILON, 0.0, state)
            prev = state
        fst.set_final(prev)
        tail_b = fst.add_state()  # optional blank after the word
        fst.add_arc(prev, blank, EPSILON, 0.0, tail_b)
        fst.set_final(tail_b)
        if space is not None:
            fst.add_arc(prev, space, EPSILON, 0.0, root)
            fst.add_arc(tail_b, space, EPSILON, 0.0, root)
    return fst


def _grammar_fst(lm: NgramLm, token_label: dict[str, int],
                 osyms: list[str], lm_weight: float) -> Wfst:
    """Backoff-automaton form of an n-gram model over the given tokens.

    One state per stored context; token arcs carry -lm_weight * ln P,
    epsilon backoff arcs carry the backoff weight, final weights come
    from stored end-sentinel entries. Tokens without a label (the
    sentinels, out-of-lexicon words) get no arcs.
    """
    contexts: set[tuple] = {()}
    for m in range(2, lm.order + 1):
        for gram in lm.entries[m]:
            contexts.add(gram[:-1])
    fst = Wfst(isyms=osyms, osyms=osyms)
    state_of: dict[tuple, int] = {}
    for ctx in sorted(contexts, key=lambda c: (len(c), c)):
        state_of[ctx] = fst.add_state()

    def longest_context(tokens: tuple) -> tuple:
        for i in range(len(tokens)):
            if tokens[i:] in state_of:
                return tokens[i:]
        return ()

    start_ctx = longest_context((SOS,) * (lm.order - 1))
    fst.set_start(state_of[start_ctx])
    scale = lm_weight * LN10
    for m in range(1, lm.order + 1):
        for gram, logp in lm.entries[m].items():
            ctx, token = gram[:-1], gram[-1]
            if ctx not in state_of:
                continue  # an entry that is never reachable as a context chain
            if token == EOS:
                fst.set_final(state_of[ctx], -scale * logp)
                continue
            lab = token_label.get(token)
            if lab is None:
                continue
            dst_ctx = longest_context((gram if m < lm.order else gram[1:]))
            fst.add_arc(state_of[ctx], lab, lab, -scale * logp,
                        state_of[dst_ctx])
    for ctx, logbo in lm.backoffs.items():
        if ctx in state_of and ctx:
            fst.add_arc(state_of[ctx], EPSILON, EPSILON, -scale * logbo,
                        state_of[ctx[1:]])
    return fst


def build_g_char(lm: NgramLm, alphabet: LabelAlphabet,
                 lm_weight: float = 1.0) -> Wfst:
    """Character-LM grammar acceptor over collapsed character labels."""
    if lm.mode != "char":
        raise ConfigError("build_g_char needs a character-mode model")
    syms = ["<eps>", "<blank>", *alphabet.symbols]
    token_label = {c: sym_label(alphabet.index_of(c))
                   for c in lm.vocab if c in alphabet}
    return _grammar_fst(lm, token_label, syms, lm_weight)


def build_g_word(lm: NgramLm, words: list[str], lm_weight: float = 1.0) -> Wfst:
    """Word-LM grammar acceptor; label ids follow the lexicon word order."""
    if lm.mode != "word":
        raise ConfigError("build_g_word needs a word-mode model")
    osyms = ["<eps>", *words]
    token_label = {w: i for i, w in enumerate(words, start=1)}
    return _grammar_fst(lm, token_label, osyms, lm_weight)


# ---------------------------------------------------------------------------
# Composition


def compose(a: Wfst, b: Wfst) -> Wfst:
    """Weighted composition with the standard epsilon-sequencing filter.

    Matches a's output tape against b's input tape; tropical weights
    add. The three-state filter stops the same epsilon moves from being
    interleaved in more than one order. The result is trimmed to
    accessible and coaccessible states.
    """
    if a.osyms is not None and b.isyms is not None and a.osyms != b.isyms:
        raise ConfigError("composition alphabet mismatch (a.osyms != b.isyms)")
    ca, cb = a.compile(), b.compile()

    b_by_label: dict[tuple[int, int], list[int]] = {}
    for idx in range(cb.src.size):
        b_by_label.setdefault((int(cb.src[idx]), int(cb.ilabel[idx])), []).append(idx)

    out = Wfst(isyms=a.isyms, osyms=b.osyms)
    state_of: dict[tuple[int, int, int], int] = {}
    stack = []

    def get_state(qa: int, qb: int, f: int) -> int:
        key = (qa, qb, f)
        if key not in state_of:
            state_of[key] = out.add_state()
            stack.append(key)
            fa, fb = ca.final_map[qa], cb.final_map[qb]
            if np.isfinite(fa) and np.isfinite(fb):
                out.set_final(state_of[key], float(fa + fb))
        return state_of[key]

    out.set_start(get_state(ca.start, cb.start, 0))
    while stack:
        qa, qb, f = stack.pop()
        src = state_of[(qa, qb, f)]
        for ai in range(int(ca.indptr[qa]), int(ca.indptr[qa + 1])):
            a_il, a_ol = int(ca.ilabel[ai]), int(ca.olabel[ai])
            a_w, a_dst = float(ca.weight[ai]), int(ca.dst[ai])
            if a_ol == EPSILON:
                if f in (0, 1):  # a moves alone
                    out.add_arc(src, a_il, EPSILON, a_w,
                                get_state(a_dst, qb, 1))
            else:
                for bi in b_by_label.get((qb, a_ol), ()):
                    out.add_arc(src, a_il, int(cb.olabel[bi]),
                                a_w + float(cb.weight[bi]),
                                get_state(a_dst, int(cb.dst[bi]), 0))
        if f in (0, 2):  # b moves alone on its input epsilons
            for bi in b_by_label.get((qb, EPSILON), ()):
                out.add_arc(src, EPSILON, int(cb.olabel[bi]),
                            float(cb.weight[bi]),
                            get_state(qa, int(cb.dst[bi]), 2))
    return trim(out)


def trim(fst: Wfst) -> Wfst:
    """Drop states not on any start-to-final path; renumber the rest."""
    if fst.start < 0:
        return fst
    fwd: dict[int, list[int]] = {}
    bwd: dict[int, list[int]] = {}
    for src, _, _, _, dst in fst.arcs:
        fwd.setdefault(src, []).append(dst)
        bwd.setdefault(dst, []).append(src)

    def reach(seeds, adj):
        seen = set(seeds)
        frontier = list(seeds)
        while frontier:
            nxt = []
            for s in frontier:
                for t in adj.get(s, ()):
                    if t not in seen:
                        seen.add(t)
                        nxt.append(t)
            frontier = nxt
        return seen

    accessible = reach([fst.start], fwd)
    coaccessible = reach([s for s in fst.finals if s in accessible], bwd)
    keep = sorted(accessible & coaccessible)
    if not keep:
        out = Wfst(isyms=fst.isyms, osyms=fst.osyms)
        out.set_start(out.add_state())
        return out
    renum = {old: new for new, old in enumerate(keep)}
    out = Wfst(isyms=fst.isyms, osyms=fst.osyms)
    out.add_states(len(keep))
    out.set_start(renum[fst.start])
    for s, w in fst.finals.items():
        if s in renum:
            out.set_final(renum[s], w)
    for src, il, ol, w, dst in fst.arcs:
        if src in renum and dst in renum:
            out.add_arc(renum[src], il, ol, w, renum[dst])
    return out


def accepts(fst: Wfst, ilabels: list[int]) -> bool:
    """Whether some path consumes exactly ``ilabels`` and ends final."""
    compiled = fst.compile()

    def closure(states: set[int]) -> set[int]:
        frontier = list(states)
        while frontier:
            nxt = []
            for s in frontier:
                for ai in range(int(compiled.indptr[s]), int(compiled.indptr[s + 1])):
                    if int(compiled.ilabel[ai]) == EPSILON:
                        d = int(compiled.dst[ai])
                        if d not in states:
                            states.add(d)
                            nxt.append(d)
            frontier = nxt
        return states

    current = closure({compiled.start})
    for lab in ilabels:
        step = set()
        for s in current:
            for ai in range(int(compiled.indptr[s]), int(compiled.indptr[s + 1])):
                if int(compiled.ilabel[ai]) == lab:
                    step.add(int(compiled.dst[ai]))
        if not step:
            return False
        current = closure(step)
    return any(np.isfinite(compiled.final_map[s]) for s in current)


# ---------------------------------------------------------------------------
# Time-synchronous Viterbi beam search


@dataclass
class DecodeResult:
    olabels: list[int]
    output: list[str]
    cost: float
    reached_final: bool


def decode(graph: Wfst, posteriors: np.ndarray, priors: SymbolPriors,
           cfg: DecodeConfig = DecodeConfig()) -> DecodeResult:
    """Best path through the graph under prior-scaled emission costs.

    Per frame every surviving token expands its emission arcs (arc
    weight + emission cost of the consumed symbol), then epsilon arcs
    are relaxed to closure within the frame. Beam and max_active
    pruning apply after the closure. Ties break toward the lower state
    index. If no token reaches a final state, the best surviving token
    is returned with ``reached_final=False``.
    """
    p = np.asarray(posteriors, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] < 1:
        raise ConfigError("posteriors must be (T, K) with T >= 1")
    compiled = graph.compile()
    if compiled.src.size == 0 and not graph.finals:
        raise ConfigError("decode graph is empty")
    emit_cost = emission_cost_matrix(p, priors, cfg.alpha)
    if compiled.ilabel.size and compiled.ilabel.max() > p.shape[1]:
        raise ConfigError("graph consumes symbols outside the posterior alphabet")

    # token table: parent pointers + arc ids for the backtrace
    tok_state = [compiled.start]
    tok_parent = [-1]
    tok_arc = [-1]

    def new_tokens(states, costs, parents, arcs):
        base = len(tok_state)
        tok_state.extend(int(s) for s in states)
        tok_parent.extend(int(x) for x in parents)
        tok_arc.extend(int(x) for x in arcs)
        return np.arange(base, base + len(states))

    def eps_closure(states, costs, toks):
        # bounded relaxation; backoff epsilons form a DAG so few rounds run
        for _ in range(compiled.num_states + 1):
            arc_idx, owner = _gather_arcs(compiled.indptr, states)
            if arc_idx.size == 0:
                return states, costs, toks
            eps_mask = compiled.is_eps[arc_idx]
            arc_idx, owner = arc_idx[eps_mask], owner[eps_mask]
            if arc_idx.size == 0:
                return states, costs, toks
            cand_cost = costs[owner] + compiled.weight[arc_idx]
            cand_dst = compiled.dst[arc_idx]
            order = np.lexsort((arc_idx, cand_cost, cand_dst))
            cand_dst, cand_cost = cand_dst[order], cand_cost[order]
            first = np.ones(cand_dst.size, dtype=bool)
            first[1:] = cand_dst[1:] != cand_dst[:-1]
            cand_dst, cand_cost = cand_dst[first], cand_cost[first]
            sel = order[first]
            pos = {int(s): i for i, s in enumerate(states)}
            improved_rows = []
            for i in range(cand_dst.size):
                d = int(cand_dst[i])
                c = float(cand_cost[i])
                j = pos.get(d)
                if j is None or c < costs[j] - 1e-15:
                    improved_rows.append(i)
            if not improved_rows:
                return states, costs, toks
            rows = np.array(improved_rows)
            add_states = cand_dst[rows]
            add_costs = cand_cost[rows]
            add_toks = new_tokens(add_states, add_costs,
                                  toks[owner[order[first][rows]]],
                                  arc_idx[order[first][rows]])
            merged_states = np.concatenate([states, add_states])
            merged_costs = np.concatenate([costs, add_costs])
            merged_toks = np.concatenate([toks, add_toks])
            states, costs, toks = _dedupe(merged_states, merged_costs, merged_toks)
        warnings.warn("epsilon closure hit the visit cap; graph may have epsilon cycles")
        return states, costs, toks

    def _dedupe(states, costs, toks):
        order = np.lexsort((toks, costs, states))
        states, costs, toks = states[order], costs[order], toks[order]
        first = np.ones(states.size, dtype=bool)
        first[1:] = states[1:] != states[:-1]
        return states[first], costs[first], toks[first]

    states = np.array([compiled.start], dtype=np.int64)
    costs = np.array([0.0])
    toks = np.array([0], dtype=np.int64)
    states, costs, toks = eps_closure(states, costs, toks)

    for t in range(p.shape[0]):
        arc_idx, owner = _gather_arcs(compiled.indptr, states)
        if arc_idx.size:
            emit_mask = ~compiled.is_eps[arc_idx]
            arc_idx, owner = arc_idx[emit_mask], owner[emit_mask]
        if arc_idx.size == 0:
            return _backtrace(graph, compiled, tok_state, tok_parent, tok_arc,
                              states, costs, toks, reached_final=False)
        cand_cost = (costs[owner] + compiled.weight[arc_idx]
                     + emit_cost[t, compiled.ilabel[arc_idx] - 1])
        cand_dst = compiled.dst[arc_idx]
        order = np.lexsort((arc_idx, cand_cost, cand_dst))
        first = np.ones(cand_dst.size, dtype=bool)
        first[1:] = cand_dst[order][1:] != cand_dst[order][:-1]
        sel = order[first]
        states = cand_dst[sel]
        costs = cand_cost[sel]
        toks = new_tokens(states, costs, toks[owner[sel]], arc_idx[sel])
        states, costs, toks = eps_closure(states, costs, toks)
        # pruning
        best = costs.min()
        keep = costs <= best + cfg.beam
        states, costs, toks = states[keep], costs[keep], toks[keep]
        if cfg.max_active and states.size > cfg.max_active:
            cut = np.partition(costs, cfg.max_active - 1)[cfg.max_active - 1]
            keep = costs <= cut
            states, costs, toks = states[keep], costs[keep], toks[keep]
            if states.size > cfg.max_active:  # cost ties at the cut
                order = np.lexsort((states, costs))[: cfg.max_active]
                states, costs, toks = states[order], costs[order], toks[order]

    return _backtrace(graph, compiled, tok_state, tok_parent, tok_arc,
                      states, costs, toks, reached_final=True)


def _backtrace(graph, compiled, tok_state, tok_parent, tok_arc, states, costs,
               toks, reached_final):
    final_w = compiled.final_map[states]
    totals = costs + final_w
    if np.isfinite(totals).any():
        order = np.lexsort((states, totals))
        pick = order[0]
        total = float(totals[pick])
    else:
        reached_final = False
        order = np.lexsort((states, costs))
        pick = order[0]
        total = float(costs[pick])
    olabels = []
    tok = int(toks[pick])
    while tok > 0:
        arc = tok_arc[tok]
        if arc >= 0:
            ol = int(compiled.olabel[arc])
            if ol != EPSILON:
                olabels.append(ol)
        tok = tok_parent[tok]
    olabels.reverse()
    output = ([graph.osyms[o] for o in olabels] if graph.osyms is not None
              else [str(o) for o in olabels])
    return DecodeResult(olabels=olabels, output=output, cost=total,
                        reached_final=reached_final)


# ---------------------------------------------------------------------------
# Assembled decode graphs


def build_decode_graph_char(lm: NgramLm, alphabet: LabelAlphabet,
                            lm_weight: float = 1.0) -> Wfst:
    """H composed with a blank remover and the character grammar (HG)."""
    g = build_g_char(lm, alphabet, lm_weight)
    return compose(build_h(alphabet), compose(blank_bypass(alphabet), g))


def build_decode_graph_word(lm: NgramLm, lexicon: dict[str, str],
                            alphabet: LabelAlphabet,
                            lm_weight: float = 1.0) -> Wfst:
    """H composed with the blank-insertion lexicon and word grammar (HLG)."""
    words = sorted(lexicon)
    g = build_g_word(lm, words, lm_weight)
    lg = compose(build_l(lexicon, alphabet), g)
    return compose(build_h(alphabet), lg)


def read_lexicon(path) -> dict[str, str]:
    """'word TAB spelling' lines -> lexicon mapping."""
    lex = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if "\t" not in line:
                raise DataError(f"lexicon line {lineno}: expected 'word<TAB>spelling'")
            word, spelling = line.split("\t", 1)
            lex[word] = spelling
    return lex


def write_lexicon(path, lexicon: dict[str, str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for word in sorted(lexicon):
            fh.write(f"{word}\t{lexicon[word]}\n")


# ---------------------------------------------------------------------------
# Serialization: binary container plus a human-readable arc dump

_FST_MAGIC = b"CSFT"
_FST_VERSION = 1


def _write_symtab(fh, syms: list[str] | None) -> None:
    if syms is None:
        fh.write(struct.pack("<I", 0))
        return
    blob = "\x00".join(syms).encode("utf-8")
    fh.write(struct.pack("<I", len(blob) + 1))
    fh.write(blob)


def _read_symtab(fh) -> list[str] | None:
    (n,) = struct.unpack("<I", fh.read(4))
    if n == 0:
        return None
    return fh.read(n - 1).decode("utf-8").split("\x00")


def save_fst(path, fst: Wfst) -> None:
    arcs = fst.sorted_arcs()
    with open(path, "wb") as fh:
        fh.write(_FST_MAGIC)
        fh.write(struct.pack("<IIiI", _FST_VERSION, fst.num_states, fst.start,
                             len(fst.finals)))
        for s in sorted(fst.finals):
            fh.write(struct.pack("<Id", s, fst.finals[s]))
        fh.write(struct.pack("<Q", len(arcs)))
        for src, il, ol, w, dst in arcs:
            fh.write(struct.pack("<IIIdI", src, il, ol, w, dst))
        _write_symtab(fh, fst.isyms)
        _write_symtab(fh, fst.osyms)


def load_fst(path) -> Wfst:
    with open(path, "rb") as fh:
        if fh.read(4) != _FST_MAGIC:
            raise DataError("not a transducer file (bad magic)")
        version, num_states, start, num_finals = struct.unpack("<IIiI", fh.read(16))
        if version != _FST_VERSION:
            raise DataError(f"unsupported transducer version {version}")
        fst = Wfst()
        fst.add_states(num_states)
        fst.set_start(start)
        for _ in range(num_finals):
            s, w = struct.unpack("<Id", fh.read(12))
            fst.set_final(s, w)
        (num_arcs,) = struct.unpack("<Q", fh.read(8))
        for _ in range(num_arcs):
            src, il, ol, w, dst = struct.unpack("<IIIdI", fh.read(24))
            fst.add_arc(src, il, ol, w, dst)
        fst.isyms = _read_symtab(fh)
        fst.osyms = _read_symtab(fh)
    return fst


def dump_fst_text(path, fst: Wfst) -> None:
    """One arc per line (src dst ilabel olabel weight), then final lines."""
    with open(path, "w", encoding="ascii") as fh:
        for src, il, ol, w, dst in fst.sorted_arcs():
            fh.write(f"{src} {dst} {il} {ol} {w:.9g}\n")
        for s in sorted(fst.finals):
            fh.write(f"{s} {fst.finals[s]:.9g}\n")
