"""Brute-force reference implementations used only by the tests."""
import itertools
import math


def nms_bruteforce(scores, threshold, window):
    """Largest valid subset of window-maxima, lexicographically smallest on ties."""
    n = len(scores)
    cand = [
        i for i in range(n)
        if scores[i] >= threshold and scores[i] == max(scores[max(0, i - window): i + window + 1])
    ]
    best = ()
    for size in range(len(cand), 0, -1):
        valid = [c for c in itertools.combinations(cand, size)
                 if all(b - a > window for a, b in zip(c, c[1:]))]
        if valid:
            best = min(valid)
            break
    return list(best)


def match_bruteforce(est, truth, tau):
    """Max number of matches, then min total distance, over all injective assignments."""
    best = (0, 0.0)
    if len(est) > len(truth):
        est, truth = truth, est
    for perm in itertools.permutations(range(len(truth)), len(est)):
        tp, dist = 0, 0.0
        for i, j in enumerate(perm):
            d = abs(est[i] - truth[j])
            if d < tau:
                tp += 1
                dist += d
        if tp > best[0] or (tp == best[0] and dist < best[1] - 1e-12):
            best = (tp, dist)
    return best


def gmeans_bruteforce(points):
    """Threshold with the largest g-mean; ties resolve to the lower median of the tied run."""
    scored = [(math.sqrt(tpr * (1 - far)), i) for i, (_, tpr, far) in enumerate(points)]
    best_g = max(g for g, _ in scored)
    tied = [i for g, i in scored if g == best_g]
    return points[tied[(len(tied) - 1) // 2]][0], best_g
