"""Sequential pattern mining over per-customer itemset sequences.

A pattern is a tuple of itemsets (each a sorted tuple of labels). A
sequence contains a pattern when the pattern's itemsets are subsets of
strictly increasing positions of the sequence. Support counts sequences,
not occurrences.
"""
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass


@dataclass(frozen=True)
class SequentialPattern:
    itemsets: tuple
    support: int

    @property
    def length(self):
        return sum(len(s) for s in self.itemsets)

    def __str__(self):
        return format_pattern(self.itemsets)


def format_pattern(itemsets):
    return " -> ".join("{" + ", ".join(s) + "}" for s in itemsets)


def min_support_count(fraction, n):
    if not 0 < fraction <= 1:
        raise ValueError("min_support must lie in (0, 1]")
    # rounding first keeps e.g. 0.07 * 100 from becoming 8
    return max(1, math.ceil(round(fraction * n, 9)))


def mine_patterns(db, min_support=0.01, max_length=3):
    """All patterns with support >= ceil(min_support * len(db)) and at most ``max_length`` items.

    Prefix-projection growth: each candidate keeps, per supporting sequence,
    the positions where its last itemset can end. Results are sorted by
    descending support, then pattern.
    """
    seqs = [[frozenset(s) for s in seq if s] for seq in db]
    if not seqs:
        raise ValueError("empty sequence database")
    threshold = min_support_count(min_support, len(seqs))
    found = []

    def grow(pattern, proj, length):
        found.append(SequentialPattern(pattern, len(proj)))
        if length >= max_length:
            return
        last_max = pattern[-1][-1]
        i_ext = defaultdict(dict)
        s_ext = defaultdict(dict)
        for sid, ends in proj.items():
            seq = seqs[sid]
            for j in ends:
                for x in seq[j]:
                    if x > last_max:
                        i_ext[x].setdefault(sid, []).append(j)
            for k in range(ends[0] + 1, len(seq)):
                for x in seq[k]:
                    s_ext[x].setdefault(sid, []).append(k)
        for x in sorted(i_ext):
            if len(i_ext[x]) >= threshold:
                grow(pattern[:-1] + (pattern[-1] + (x,),), i_ext[x], length + 1)
        for x in sorted(s_ext):
            if len(s_ext[x]) >= threshold:
                grow(pattern + ((x,),), s_ext[x], length + 1)

    first = defaultdict(dict)
    for sid, seq in enumerate(seqs):
        for k, itemset in enumerate(seq):
            for x in itemset:
                first[x].setdefault(sid, []).append(k)
    if max_length >= 1:
        for x in sorted(first):
            if len(first[x]) >= threshold:
                grow(((x,),), first[x], 1)
    found.sort(key=lambda p: (-p.support, p.itemsets))
    return found


def contains(sequence, itemsets):
    """Greedy leftmost embedding test, the reference definition of containment."""
    pos = 0
    for itemset in itemsets:
        need = set(itemset)
        while pos < len(sequence) and not need <= set(sequence[pos]):
            pos += 1
        if pos == len(sequence):
            return False
        pos += 1
    return True


def rank_patterns(patterns):
    return sorted(patterns, key=lambda p: (-p.support, p.itemsets))


def pattern_coverage(real_patterns, gen_patterns, k):
    """Share of the top-``k`` real patterns that also occur among the generated patterns."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = rank_patterns(real_patterns)
    if not ranked:
        raise ValueError("no real patterns to cover")
    if k > len(ranked):
        warnings.warn(f"k={k} exceeds the {len(ranked)} real patterns; dividing by "
                      f"{len(ranked)}", stacklevel=2)
    top = ranked[:k]
    gen = {p.itemsets for p in gen_patterns}
    return sum(p.itemsets in gen for p in top) / len(top)


def sequence_db(histories, catalog, level="category"):
    """Per-customer list of label sets, one per basket in week order."""
    return [[{getattr(catalog[p], level) for p in b.products} for b in h.baskets]
            for h in histories]
