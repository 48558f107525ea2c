"""Slow, obviously-correct reference implementations shared by the test modules."""

import math


def ranked_rows(rows, q):
    """(squared distance, storage index) for every stored row, nearest first."""
    scored = []
    for idx, row in enumerate(rows):
        d2 = 0.0
        for a, b in zip(row, q):
            d2 += (float(a) - float(b)) ** 2
        scored.append((d2, idx))
    scored.sort()
    return scored


def vote(ranked, labels, k):
    nearest = ranked[:k]
    votes = {}
    for d2, idx in nearest:
        votes.setdefault(int(labels[idx]), []).append(math.sqrt(d2))
    winner = sorted(votes, key=lambda c: (-len(votes[c]), math.fsum(votes[c]), c))[0]
    return winner, [idx for _, idx in nearest]


def naive_knn(rows, labels, q, k):
    """Most votes, then smallest summed distance, then smallest class id."""
    return vote(ranked_rows(rows, q), labels, k)


def zone_density_oracle(mask, rows, cols):
    """Per-pixel loop over floor-partition zones.

    Zone i spans [floor(i*n/parts), floor((i+1)*n/parts)), so pixel y sits in
    zone floor(((y+1)*parts - 1) / n).
    """
    h, w = len(mask), len(mask[0])
    ink = [0] * (rows * cols)
    area = [0] * (rows * cols)
    for y in range(h):
        for x in range(w):
            z = (((y + 1) * rows - 1) // h) * cols + ((x + 1) * cols - 1) // w
            area[z] += 1
            ink[z] += bool(mask[y][x])
    return [i / a for i, a in zip(ink, area)]
