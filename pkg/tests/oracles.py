"""Independent reference implementations used by the tests.

Everything here is written with plain Python loops and avoids the package's
own helpers, so agreement is meaningful.
"""

import math

import numpy as np


def _edges(b):
    return b.x, b.y, b.x + b.w, b.y + b.h


def pixel_iou(a, b):
    """IoU of integer boxes by counting covered unit pixels on a grid."""
    ax1, ay1, ax2, ay2 = (int(v) for v in _edges(a))
    bx1, by1, bx2, by2 = (int(v) for v in _edges(b))
    lo_x, lo_y = min(ax1, bx1), min(ay1, by1)
    hi_x, hi_y = max(ax2, bx2), max(ay2, by2)
    grid_a = np.zeros((hi_y - lo_y, hi_x - lo_x), bool)
    grid_b = np.zeros_like(grid_a)
    grid_a[ay1 - lo_y:ay2 - lo_y, ax1 - lo_x:ax2 - lo_x] = True
    grid_b[by1 - lo_y:by2 - lo_y, bx1 - lo_x:bx2 - lo_x] = True
    union = (grid_a | grid_b).sum()
    return (grid_a & grid_b).sum() / union


def oracle_iou(a, b):
    """IoU by splitting the plane along every box edge and summing cell areas."""
    ea, eb = _edges(a), _edges(b)
    xs = sorted({ea[0], ea[2], eb[0], eb[2]})
    ys = sorted({ea[1], ea[3], eb[1], eb[3]})

    def inside(e, px, py):
        return e[0] <= px < e[2] and e[1] <= py < e[3]

    inter = union = 0.0
    for x0, x1 in zip(xs, xs[1:]):
        for y0, y1 in zip(ys, ys[1:]):
            mx, my = (x0 + x1) / 2, (y0 + y1) / 2
            in_a, in_b = inside(ea, mx, my), inside(eb, mx, my)
            cell = (x1 - x0) * (y1 - y0)
            if in_a and in_b:
                inter += cell
            if in_a or in_b:
                union += cell
    return inter / union if union > 0 else 0.0


def oracle_center_distance(a, b):
    ea, eb = _edges(a), _edges(b)
    ax, ay = (ea[0] + ea[2]) / 2, (ea[1] + ea[3]) / 2
    bx, by = (eb[0] + eb[2]) / 2, (eb[1] + eb[3]) / 2
    return math.sqrt((ax - bx) ** 2 + (ay - by) ** 2)


def oracle_rates(preds, gts, dist_px=5.0, overlap=0.6):
    """PR, SR and AUC (mean over 51 evenly spaced overlap thresholds) by looping."""
    n = hits_d = hits_o = 0
    overlaps = []
    for p, g in zip(preds, gts):
        if g is None:
            continue
        n += 1
        o = oracle_iou(p, g)
        overlaps.append(o)
        if oracle_center_distance(p, g) <= dist_px:
            hits_d += 1
        if o >= overlap:
            hits_o += 1
    curve = []
    for i in range(51):
        thr = i / 50
        curve.append(sum(1 for o in overlaps if o >= thr) / n)
    return hits_d / n, hits_o / n, sum(curve) / len(curve)


def _mean_std(values):
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n
    return mean, math.sqrt(var)


def oracle_regularizers(pos_map, neg_map, eps):
    """(R for a positive label, R for a negative label) of one map pair."""
    mp, sp = _mean_std([float(v) for v in np.ravel(pos_map)])
    mn, sn = _mean_std([float(v) for v in np.ravel(neg_map)])
    r_pos = sp / (mp + eps) + mn / (sn + eps)
    r_neg = mp / (sp + eps) + sn / (mn + eps)
    return r_pos, r_neg


def oracle_cross_entropy(scores, labels):
    """Summed binary cross-entropy with the positive probability from a 2-way softmax."""
    total = 0.0
    for (s_pos, s_neg), y in zip(scores, labels):
        m = max(s_pos, s_neg)
        log_z = m + math.log(math.exp(s_pos - m) + math.exp(s_neg - m))
        total -= y * (s_pos - log_z) + (1 - y) * (s_neg - log_z)
    return total


def oracle_filter(proposals, prev, max_dist=25.0, min_overlap=0.3):
    return [p for p in proposals
            if oracle_center_distance(p, prev) <= max_dist and oracle_iou(p, prev) >= min_overlap]


def oracle_pixel_bce(pred, target, clamp=1e-7):
    total, count = 0.0, 0
    for p, t in zip(np.ravel(pred).tolist(), np.ravel(target).tolist()):
        p = min(max(p, clamp), 1 - clamp)
        total -= t * math.log(p) + (1 - t) * math.log(1 - p)
        count += 1
    return total / count


def central_difference(f, x, h):
    """Numerical gradient of scalar ``f`` at float64 array ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f(x)
        flat[i] = old - h
        down = f(x)
        flat[i] = old
        g[i] = (up - down) / (2 * h)
    return grad
