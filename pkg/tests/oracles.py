"""Naive reference implementations used as oracles. Plain loops over Python floats,
written from the definitions without sharing code with the package."""

from __future__ import annotations

import math


def is_nan(x: float) -> bool:
    return x != x


def mean(xs):
    return sum(xs) / len(xs)


def average_ranks(xs):
    """1-based ranks with ties sharing the average of their positions."""
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def pearson(xs, ys):
    n = len(xs)
    if n < 2 or len(set(xs)) == 1 or len(set(ys)) == 1:
        return 0.0
    mx, my = mean(xs), mean(ys)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    return sxy / math.sqrt(sxx * syy)


def spearman(xs, ys):
    if len(xs) < 2:
        return 0.0
    return pearson(average_ranks(xs), average_ranks(ys))


def paired(frow, yrow):
    pairs = [(f, y) for f, y in zip(frow, yrow) if not is_nan(f) and not is_nan(y)]
    return [p[0] for p in pairs], [p[1] for p in pairs]


def daily_ic(F, Y, kind):
    out = []
    for frow, yrow in zip(F, Y):
        xs, ys = paired(frow, yrow)
        out.append(spearman(xs, ys) if kind == "spearman" else pearson(xs, ys))
    return out


def bucket_profile(F, Y, assets, q):
    """Equal-count buckets, top n % q buckets one larger, ties by asset id."""
    sums = [0.0] * q
    spreads = []
    for frow, yrow in zip(F, Y):
        items = [(frow[j], assets[j], yrow[j]) for j in range(len(assets)) if not is_nan(frow[j]) and not is_nan(yrow[j])]
        n = len(items)
        if n < q:
            continue
        items.sort(key=lambda t: (t[0], t[1]))
        base, rem = divmod(n, q)
        sizes = [base + (1 if b >= q - rem else 0) for b in range(q)]
        pos = 0
        means = []
        for size in sizes:
            chunk = items[pos : pos + size]
            means.append(sum(c[2] for c in chunk) / size)
            pos += size
        for b in range(q):
            sums[b] += means[b]
        spreads.append(means[-1] - means[0])
    return [s / len(spreads) for s in sums], spreads


def top_decile(frow, assets):
    items = [(-frow[j], assets[j], j) for j in range(len(assets)) if not is_nan(frow[j])]
    items.sort()
    k = math.ceil(len(items) / 10)
    return {t[2] for t in items[:k]}


def turnover_top_decile(F, assets):
    sets = [top_decile(row, assets) for row in F]
    dists = []
    for a, b in zip(sets, sets[1:]):
        union = a | b
        dists.append(0.0 if not union else 1.0 - len(a & b) / len(union))
    return mean(dists)


def normalized_ranks(row):
    idx = [j for j, v in enumerate(row) if not is_nan(v)]
    vals = [row[j] for j in idx]
    out = [float("nan")] * len(row)
    if not idx:
        return out
    ranks = average_ranks(vals)
    n = len(idx)
    for j, r in zip(idx, ranks):
        out[j] = (r - 1.0) / (n - 1.0) if n > 1 else 0.5
    return out


def turnover_rank(F):
    norm = [normalized_ranks(row) for row in F]
    per_pair = []
    for a, b in zip(norm, norm[1:]):
        diffs = [abs(x - y) for x, y in zip(a, b) if not is_nan(x) and not is_nan(y)]
        if diffs:
            per_pair.append(mean(diffs))
    return mean(per_pair) if per_pair else 0.0


def hac_t(xs, lag):
    """Newey-West t-statistic with Bartlett weights and divisor-T autocovariances."""
    n = len(xs)
    m = mean(xs)
    d = [x - m for x in xs]
    gamma0 = sum(v * v for v in d) / n
    lrv = gamma0
    for ell in range(1, lag + 1):
        g = sum(d[t] * d[t - ell] for t in range(ell, n)) / n
        lrv += 2.0 * (1.0 - ell / (lag + 1.0)) * g
    return m / math.sqrt(lrv / n)


def classical_t_population(xs):
    n = len(xs)
    m = mean(xs)
    sd = math.sqrt(sum((x - m) ** 2 for x in xs) / n)
    return m / (sd / math.sqrt(n))


def rolling(xs, w, fn):
    out = []
    for t in range(len(xs)):
        if t + 1 < w:
            out.append(float("nan"))
            continue
        win = xs[t - w + 1 : t + 1]
        out.append(float("nan") if any(is_nan(v) for v in win) else fn(win))
    return out


def sma(xs, w):
    return rolling(xs, w, mean)


def sample_var(win):
    m = mean(win)
    return sum((v - m) ** 2 for v in win) / (len(win) - 1)


def std(xs, w):
    return rolling(xs, w, lambda win: math.sqrt(sample_var(win)))


def var(xs, w):
    return rolling(xs, w, sample_var)


def logret(xs, lag):
    out = []
    for t in range(len(xs)):
        if t < lag or is_nan(xs[t]) or is_nan(xs[t - lag]) or xs[t] <= 0 or xs[t - lag] <= 0:
            out.append(float("nan"))
        else:
            out.append(math.log(xs[t] / xs[t - lag]))
    return out


def rel_err(a, b):
    if is_nan(a) and is_nan(b):
        return 0.0
    scale = max(abs(a), abs(b), 1e-300)
    return abs(a - b) / scale if abs(a - b) > 1e-15 else 0.0
