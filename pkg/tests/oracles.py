"""Independent reference computations used only by the tests."""

import itertools
import math

from scipy import integrate


def brute_force_top_n(scores, seqs, n):
    """Exhaustive search over all size-n subsets; returns the chosen indices.

    Among subsets with maximal total score the one whose sorted seq tuple
    is smallest wins (earliest detections first).
    """
    k = min(n, len(scores))
    best_key, best = None, None
    for subset in itertools.combinations(range(len(scores)), k):
        total = math.fsum(scores[i] for i in subset)
        key = (-total, sorted(seqs[i] for i in subset))
        if best_key is None or key < best_key:
            best_key, best = key, subset
    return best


def double_sum_variability(rows, norm="L2"):
    m = len(rows)
    total = 0.0
    for i in range(m):
        for j in range(m):
            if i != j:
                d = [a - b for a, b in zip(rows[i], rows[j])]
                if norm == "L2":
                    total += math.sqrt(sum(x * x for x in d))
                elif norm == "L1":
                    total += sum(abs(x) for x in d)
                else:
                    total += max((abs(x) for x in d), default=0.0)
    return total / (m * (m - 1))


def t_density(x, dof):
    logc = math.lgamma((dof + 1) / 2) - math.lgamma(dof / 2) - 0.5 * math.log(dof * math.pi)
    return math.exp(logc - (dof + 1) / 2 * math.log1p(x * x / dof))


def welch_oracle(a, b):
    """Direct formula evaluation; p from numerically integrating the t density."""
    na, nb = len(a), len(b)
    ma, mb = sum(a) / na, sum(b) / nb
    va = sum((x - ma) ** 2 for x in a) / (na - 1)
    vb = sum((x - mb) ** 2 for x in b) / (nb - 1)
    se = math.sqrt(va / na + vb / nb)
    t = (ma - mb) / se
    dof = (va / na + vb / nb) ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    tail, _ = integrate.quad(t_density, abs(t), math.inf, args=(dof,),
                             epsabs=1e-14, epsrel=1e-12, limit=200)
    return t, dof, 2 * tail


def brute_force_medoid(rows):
    sums = [sum(math.dist(r, other) for other in rows) for r in rows]
    lo = min(sums)
    return next(i for i, s in enumerate(sums) if s <= lo + 1e-12 * max(lo, 1.0))


def brute_force_nearest(query, rows, norm="L2"):
    best = math.inf
    for r in rows:
        d = [a - b for a, b in zip(query, r)]
        if norm == "L2":
            v = math.sqrt(sum(x * x for x in d))
        elif norm == "L1":
            v = sum(abs(x) for x in d)
        else:
            v = max(abs(x) for x in d)
        best = min(best, v)
    return best
