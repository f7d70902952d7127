"""Brute-force reference implementations, independent of the package.

Everything here works on plain lists of (subject, predicate, object) string
tuples and scans them directly. No interning, no prebuilt indexes: these are
the slow, obviously-correct versions that the indexed implementations are
cross-checked against. Scores are exact Fractions so equality checks are
exact as well.
"""

from __future__ import annotations

from fractions import Fraction


def scan_contains(rows, row):
    """Membership by linear scan."""
    return any(candidate == row for candidate in rows)


def scan_subjects(rows, relation, obj):
    """All subjects asserting (s, relation, obj), by linear scan."""
    return {s for (s, p, o) in rows if p == relation and o == obj}


def scan_objects(rows, relation):
    """All objects occurring under a relation, by linear scan."""
    return {o for (_, p, o) in rows if p == relation}


def scan_jaccard(a, b):
    """Jaccard similarity via explicit counting loops; None when undefined."""
    intersection = sum(1 for x in a if x in b)
    union = len(a) + sum(1 for x in b if x not in a)
    if union == 0:
        return None
    return Fraction(intersection, union)


def scan_candidates(rows, seed, strict=False):
    """Candidate fake objects for a seed, straight from the definition.

    An object o2 qualifies when o2 differs from the seed object, some other
    subject asserts (s2, r, o2), and (s, r, o2) is not itself among the rows.
    Strict mode additionally drops objects sharing any row with the seed
    subject, in either position.
    """
    s, r, o = seed
    out = set()
    for (s2, p2, o2) in rows:
        if p2 != r or o2 == o or s2 == s:
            continue
        if scan_contains(rows, (s, r, o2)):
            continue
        if strict and any(
            (a == s and b == o2) or (a == o2 and b == s) for (a, _, b) in rows
        ):
            continue
        out.add(o2)
    return out


def scan_plausibility(rows, seed, fake_object):
    """Score one candidate: jaccard of the two subject sets."""
    _, r, o = seed
    return scan_jaccard(
        scan_subjects(rows, r, o), scan_subjects(rows, r, fake_object)
    )


def scan_candidate_scores(rows, seed, strict=False):
    """Candidate set and scores for one seed as a dict object -> Fraction."""
    return {
        o2: scan_plausibility(rows, seed, o2)
        for o2 in scan_candidates(rows, seed, strict=strict)
    }


def scan_extremes(rows, seed, strict=False):
    """(high_object, high_score, low_object, low_score) or None when empty.

    Ties break on the lexicographically smallest object string for both
    roles, mirroring the documented selection rule.
    """
    scores = scan_candidate_scores(rows, seed, strict=strict)
    if not scores:
        return None
    high = min(scores, key=lambda o2: (-scores[o2], o2))
    low = min(scores, key=lambda o2: (scores[o2], o2))
    return (high, scores[high], low, scores[low])


def scan_relation_candidate_scores(rows, relation):
    """Candidate scores for every seed under one relation, in one pass.

    Used by the bulk oracle-equivalence check so 200 graphs stay affordable:
    one scan of the raw rows per relation, then the same per-seed definition
    as scan_candidate_scores, expressed over the collected subject sets.
    Returns {(s, r, o): {o2: Fraction}} for every distinct row under r.
    """
    subjects_by_object: dict[str, set[str]] = {}
    seeds = set()
    for (s, p, o) in rows:
        if p != relation:
            continue
        subjects_by_object.setdefault(o, set()).add(s)
        seeds.add((s, p, o))
    out = {}
    for seed in seeds:
        s, _, o = seed
        d_real = subjects_by_object[o]
        scores = {}
        for o2, d_fake in subjects_by_object.items():
            if o2 == o:
                continue
            # s absent from a non-empty subject set means (s, r, o2) is not a
            # row and some other subject asserts o2: exactly the definition.
            if s in d_fake:
                continue
            scores[o2] = scan_jaccard(d_real, d_fake)
        out[seed] = scores
    return out


def scan_accuracy(truths, predictions, invalid="invalid", policy="exclude"):
    """Detection accuracy as the direct formula: correct over evaluated.

    Under "exclude", invalid predictions leave the denominator; under
    "count-wrong" they stay and count as incorrect. None when the
    denominator vanishes.
    """
    assert len(truths) == len(predictions)
    correct = sum(1 for t, p in zip(truths, predictions) if t == p)
    if policy == "exclude":
        denominator = sum(1 for p in predictions if p != invalid)
    else:
        denominator = len(predictions)
    if denominator == 0:
        return None
    return Fraction(correct, denominator)
