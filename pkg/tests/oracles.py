"""Independent brute-force reference implementations used to check the
production code.  Everything here is a literal transcription of the defining
formulas: explicit loops, plain Python floats, no vectorized shortcuts, and no
shared code with the package."""

import math


def supcon_oracle(embeddings, labels, temperature):
    """Double sum over anchors and their positive sets; anchors with no
    positives contribute nothing."""
    n = len(embeddings)
    total = 0.0
    for i in range(n):
        pos = [k for k in range(n) if k != i and labels[k] == labels[i]]
        if not pos:
            continue
        denom = 0.0
        for j in range(n):
            if j != i:
                denom += math.exp(_dot(embeddings[i], embeddings[j])
                                  / temperature)
        inner = 0.0
        for k in pos:
            inner += math.log(
                math.exp(_dot(embeddings[i], embeddings[k]) / temperature)
                / denom)
        total += -inner / len(pos)
    return total


def supclass_oracle(embeddings, labels, c, temperature):
    """Same double sum with anchors restricted to class c."""
    n = len(embeddings)
    total = 0.0
    for i in range(n):
        if labels[i] != c:
            continue
        pos = [k for k in range(n) if k != i and labels[k] == labels[i]]
        if not pos:
            continue
        denom = 0.0
        for j in range(n):
            if j != i:
                denom += math.exp(_dot(embeddings[i], embeddings[j])
                                  / temperature)
        inner = 0.0
        for k in pos:
            inner += math.log(
                math.exp(_dot(embeddings[i], embeddings[k]) / temperature)
                / denom)
        total += -inner / len(pos)
    return total


def hil_oracle(emb_x, emb_x_aug, emb_ben, emb_anom, w1, w2, w3, temperature):
    """Three supclass evaluations over the documented set compositions."""
    d1 = list(emb_x) + list(emb_anom)
    l1 = [0] * len(emb_x) + [1] * len(emb_anom)
    d2 = list(emb_ben) + list(emb_x_aug)
    l2 = [0] * len(emb_ben) + [1] * len(emb_x_aug)
    d3 = list(emb_ben) + list(emb_anom)
    l3 = [0] * len(emb_ben) + [1] * len(emb_anom)
    total = 0.0
    if len(d1) >= 2:
        total += w1 * supclass_oracle(d1, l1, 1, temperature)
    if len(d2) >= 2:
        total += w2 * supclass_oracle(d2, l2, 0, temperature)
    if len(d3) >= 2:
        total += w3 * supclass_oracle(d3, l3, 0, temperature)
    return total


def auroc_pairwise_oracle(scores, labels):
    """P(random positive outscores random negative), ties counting half."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def auprc_threshold_oracle(scores, labels):
    """Enumerate every distinct score as a threshold (predict positive at
    score >= threshold) and accumulate precision * recall increments."""
    n_pos = sum(1 for y in labels if y == 1)
    thresholds = sorted(set(scores), reverse=True)
    area = 0.0
    prev_recall = 0.0
    for t in thresholds:
        tp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 1)
        fp = sum(1 for s, y in zip(scores, labels) if s >= t and y == 0)
        precision = tp / (tp + fp)
        recall = tp / n_pos
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def nearest_rank_quantile_oracle(values, q):
    """Smallest value v such that at least ceil(q * n) values are <= v."""
    ordered = sorted(values)
    rank = max(1, math.ceil(q * len(ordered)))
    return ordered[rank - 1]


def _dot(a, b):
    return float(sum(float(x) * float(y) for x, y in zip(a, b)))
