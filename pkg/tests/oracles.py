"""Naive loop-based reference implementations used as test oracles."""

from __future__ import annotations

from fractions import Fraction


def f1_weighted(preds, truths):
    k = len(truths[0])
    total = sum(sum(t) for t in truths)
    score = 0.0
    for j in range(k):
        tp = sum(1 for p, t in zip(preds, truths) if p[j] == 1 and t[j] == 1)
        fp = sum(1 for p, t in zip(preds, truths) if p[j] == 1 and t[j] == 0)
        fn = sum(1 for p, t in zip(preds, truths) if p[j] == 0 and t[j] == 1)
        support = tp + fn
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / support if support else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        score += support / total * f1
    return score


def hamming(preds, truths):
    k = len(truths[0])
    per = []
    for p, t in zip(preds, truths):
        per.append(sum(1 for a, b in zip(p, t) if a != b) / k)
    return sum(per) / len(per)


def jaccard(preds, truths):
    vals = []
    for p, t in zip(preds, truths):
        ps = {j for j, v in enumerate(p) if v}
        ts = {j for j, v in enumerate(t) if v}
        vals.append(1.0 if not ps | ts else len(ps & ts) / len(ps | ts))
    return sum(vals) / len(vals)


def exact_f1_weighted(preds, truths):
    """Rational-arithmetic variant, immune to float reassociation."""
    k = len(truths[0])
    total = sum(sum(t) for t in truths)
    score = Fraction(0)
    for j in range(k):
        tp = sum(p[j] & t[j] for p, t in zip(preds, truths))
        pp = sum(p[j] for p in preds)
        sup = sum(t[j] for t in truths)
        if tp:
            score += Fraction(sup, total) * Fraction(2 * tp, pp + sup)
    return score
