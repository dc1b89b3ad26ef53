"""Slow, obviously-correct reference implementations used as test oracles.

Nothing here imports the code under test except plain data containers.
"""

import math

import numpy as np


# -- distances and ranking --------------------------------------------------

def naive_hamming(a, b):
    return sum(1 for x, y in zip(a, b) if int(x) != int(y))


def naive_weighted(w, a, b):
    acc = 0.0
    for k in range(len(w)):
        if int(a[k]) != int(b[k]):
            acc += float(w[k]) * float(w[k])
    return acc


def brute_rank(codes, query, w=None):
    """Full ranking as a list of (index, distance) sorted by (distance, index)."""
    rows = []
    for i, c in enumerate(codes):
        d = float(naive_hamming(query, c)) if w is None else naive_weighted(w, query, c)
        rows.append((d, i))
    rows.sort()
    return [(i, d) for d, i in rows]


def brute_two_phase(codes, query, w, radius, k):
    q = len(query)
    k = min(k, len(codes))
    ham = [naive_hamming(query, c) for c in codes]
    while sum(h <= radius for h in ham) < k and radius < q:
        radius += 1
    rows = sorted((naive_weighted(w, query, codes[i]), i) for i in range(len(codes)) if ham[i] <= radius)
    return [(i, d) for d, i in rows[:k]]


# -- metrics ----------------------------------------------------------------

def shares_label(a, b):
    return any(int(x) and int(y) for x, y in zip(a, b))


def naive_ap(order, query_label, db_labels, truncation=None, normalize="database"):
    rel = [shares_label(query_label, db_labels[i]) for i in order]
    if truncation is not None:
        rel = rel[:truncation]
    if normalize == "database":
        total = sum(shares_label(query_label, y) for y in db_labels)
    else:
        total = sum(rel)
    if total == 0:
        return 0.0
    hits = 0
    terms = []
    for pos, r in enumerate(rel, start=1):
        if r:
            hits += 1
            terms.append(hits / pos)
    return math.fsum(terms) / total


def naive_map(orders, query_labels, db_labels, truncation=None, normalize="database"):
    aps = [naive_ap(list(o), q, db_labels, truncation, normalize) for o, q in zip(orders, query_labels)]
    return math.fsum(aps) / len(aps)


def naive_precision_at(order, query_label, db_labels, k):
    return sum(shares_label(query_label, db_labels[i]) for i in order[:k]) / k


def naive_radius_precision(codes, query_code, query_label, db_labels, radius):
    hits = [i for i, c in enumerate(codes) if naive_hamming(query_code, c) <= radius]
    if not hits:
        return 0.0
    return sum(shares_label(query_label, db_labels[i]) for i in hits) / len(hits)


def naive_pr(order, query_label, db_labels):
    total = sum(shares_label(query_label, y) for y in db_labels)
    points = []
    hits = 0
    for pos, i in enumerate(order, start=1):
        if shares_label(query_label, db_labels[i]):
            hits += 1
            points.append((hits / total, hits / pos))
    return points


# -- network ----------------------------------------------------------------

def naive_affine_chain(layers, x):
    """Feature stack by explicit loops: tanh between layers, linear output."""
    a = [float(v) for v in x]
    for li, (w, b) in enumerate(layers):
        out = []
        for j in range(w.shape[1]):
            s = float(b[j])
            for i in range(w.shape[0]):
                s += a[i] * float(w[i, j])
            out.append(math.tanh(s) if li != len(layers) - 1 else s)
        a = out
    return np.array(a)


def longdouble_batch_loss(params, features, labels, triplets, margin, loss_balance, flat):
    """Combined batch loss evaluated in extended precision from a flat vector.

    Mirrors the trainer's objective: mean weighted triplet hinge plus
    ``loss_balance`` times mean summed log-softmax loss over the anchor,
    positive and negative of every triplet.
    """
    L = np.longdouble
    arr = {}
    pos = 0
    for name, a in params.arrays():
        arr[name] = np.asarray(flat[pos:pos + a.size], dtype=L).reshape(a.shape)
        pos += a.size
    nl = len(params.feature_layers)
    idx = np.array([(t.anchor_idx, t.positive_idx, t.negative_idx) for t in triplets])
    t = idx.shape[0]

    def feats(ix):
        a = np.asarray(features[ix], dtype=L)
        for i in range(nl):
            a = a @ arr[f"feature.{i}.weight"] + arr[f"feature.{i}.bias"]
            if i != nl - 1:
                a = np.tanh(a)
        return a

    def codes(f):
        return L(1) / (L(1) + np.exp(-(f @ arr["hash.weight"] + arr["hash.bias"])))

    fa, fp, fn = feats(idx[:, 0]), feats(idx[:, 1]), feats(idx[:, 2])
    ha, hp, hn = codes(fa), codes(fp), codes(fn)
    ya = np.asarray(labels[idx[:, 0]], dtype=L)
    w = (ya @ arr["class_weights"]) / ya.sum(axis=1, keepdims=True)
    hinge = L(margin) + np.sum(w * w * (ha - hp) ** 2, axis=1) - np.sum(w * w * (ha - hn) ** 2, axis=1)
    j_r = np.sum(np.maximum(hinge, L(0))) / t

    j_c = L(0)
    for f, col in ((fa, 0), (fp, 1), (fn, 2)):
        z = f @ arr["classifier.weight"] + arr["classifier.bias"]
        m = z.max(axis=1, keepdims=True)
        lse = m + np.log(np.exp(z - m).sum(axis=1, keepdims=True))
        y = np.asarray(labels[idx[:, col]], dtype=L)
        j_c += -np.sum(y * (z - lse))
    return j_r + L(loss_balance) * j_c / (3 * t)
