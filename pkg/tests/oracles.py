"""Independent naive reference implementations used only by the tests.

Everything here is written as straight-line scalar code (explicit loops,
no vectorized shortcuts shared with the package) so it can serve as an
oracle for the production implementations.
"""

from __future__ import annotations

import math

import numpy as np

EPS = float(np.spacing(1))


# ---------------------------------------------------------------------------
# gaussian blur / enhancement
# ---------------------------------------------------------------------------

def naive_gaussian_blur(image: np.ndarray, sigma: float) -> np.ndarray:
    """Dense truncated-kernel convolution with edge-inclusive reflect padding."""
    h, w = image.shape
    radius = int(3.0 * sigma + 0.5)
    ax = np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * (ax[:, None] ** 2 + ax[None, :] ** 2) / sigma ** 2)
    kernel /= kernel.sum()
    padded = np.pad(image.astype(np.float64), radius, mode="symmetric")
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for di in range(2 * radius + 1):
                for dj in range(2 * radius + 1):
                    acc += kernel[di, dj] * padded[i + di, j + dj]
            out[i, j] = acc
    return out


def naive_msrcr(image: np.ndarray, scales, weights, alpha, beta, gain, offset, eps):
    """Literal per-pixel evaluation of the multi-scale retinex formula."""
    h, w, _ = image.shape
    image = image.astype(np.float64)
    retinex = np.zeros((h, w, 3))
    for c in range(3):
        for lam, sigma in zip(weights, scales):
            blurred = naive_gaussian_blur(image[:, :, c], sigma)
            for i in range(h):
                for j in range(w):
                    retinex[i, j, c] += lam * (
                        math.log(image[i, j, c] + eps) - math.log(blurred[i, j] + eps)
                    )
    out = np.zeros((h, w, 3))
    for i in range(h):
        for j in range(w):
            channel_sum = image[i, j, 0] + image[i, j, 1] + image[i, j, 2]
            for c in range(3):
                restoration = beta * (
                    math.log(alpha * image[i, j, c] + eps) - math.log(channel_sum + eps)
                )
                out[i, j, c] = gain * retinex[i, j, c] * restoration + offset
    vmin, vmax = out.min(), out.max()
    if vmax - vmin <= 1e-12:
        return np.full((h, w, 3), 0.5)
    return np.clip((out - vmin) / (vmax - vmin), 0.0, 1.0)


# ---------------------------------------------------------------------------
# metric oracles
# ---------------------------------------------------------------------------

def oracle_mae(pred: np.ndarray, gt: np.ndarray) -> float:
    total = 0.0
    for p, g in zip(pred.ravel(), gt.ravel()):
        total += abs(float(p) - float(g))
    return total / pred.size


def oracle_iou(pred: np.ndarray, gt: np.ndarray, threshold: float = 0.5) -> float:
    inter = union = 0
    for p, g in zip(pred.ravel(), gt.ravel()):
        pb = float(p) > threshold
        gb = float(g) > 0.5
        inter += pb and gb
        union += pb or gb
    return 1.0 if union == 0 else inter / union


def _oracle_object_score(values: list[float]) -> float:
    if not values:
        return 0.0
    m = sum(values) / len(values)
    if len(values) > 1:
        sd = math.sqrt(sum((v - m) ** 2 for v in values) / (len(values) - 1))
    else:
        sd = 0.0
    return 2.0 * m / (m * m + 1.0 + sd + EPS)


def _oracle_ssim(p: np.ndarray, g: np.ndarray) -> float:
    n = p.size
    if n == 0:
        return 0.0
    mp = sum(p.ravel()) / n
    mg = sum(g.ravel()) / n
    if n > 1:
        vp = sum((v - mp) ** 2 for v in p.ravel()) / (n - 1)
        vg = sum((v - mg) ** 2 for v in g.ravel()) / (n - 1)
        cov = sum((a - mp) * (b - mg) for a, b in zip(p.ravel(), g.ravel())) / (n - 1)
    else:
        vp = vg = cov = 0.0
    num = 4.0 * mp * mg * cov
    den = (mp * mp + mg * mg) * (vp + vg)
    if num != 0.0:
        return num / (den + EPS)
    return 1.0 if den == 0.0 else 0.0


def oracle_s_measure(pred: np.ndarray, gt: np.ndarray, alpha: float = 0.5) -> float:
    pred = pred.astype(np.float64)
    gt = gt.astype(np.float64)
    h, w = gt.shape
    y = gt.mean()
    if y == 0.0:
        return 1.0 - pred.mean()
    if y == 1.0:
        return float(pred.mean())

    fg_vals = [float(pred[i, j]) for i in range(h) for j in range(w) if gt[i, j] > 0.5]
    bg_vals = [1.0 - float(pred[i, j]) for i in range(h) for j in range(w) if gt[i, j] <= 0.5]
    s_object = y * _oracle_object_score(fg_vals) + (1 - y) * _oracle_object_score(bg_vals)

    rows = [i for i in range(h) for j in range(w) if gt[i, j] > 0.5]
    cols = [j for i in range(h) for j in range(w) if gt[i, j] > 0.5]
    cx = int(np.round(sum(cols) / len(cols))) + 1
    cy = int(np.round(sum(rows) / len(rows))) + 1
    area = h * w
    parts = [
        (pred[0:cy, 0:cx], gt[0:cy, 0:cx], cx * cy / area),
        (pred[0:cy, cx:w], gt[0:cy, cx:w], cy * (w - cx) / area),
        (pred[cy:h, 0:cx], gt[cy:h, 0:cx], (h - cy) * cx / area),
        (pred[cy:h, cx:w], gt[cy:h, cx:w], (h - cy) * (w - cx) / area),
    ]
    s_region = sum(wt * _oracle_ssim(p, g) for p, g, wt in parts)
    return max(alpha * s_object + (1 - alpha) * s_region, 0.0)


def oracle_e_measure(pred: np.ndarray, gt: np.ndarray) -> float:
    """Adaptive-threshold enhanced alignment, per-pixel loop."""
    pred = pred.astype(np.float64)
    gt_bin = gt > 0.5
    h, w = gt_bin.shape
    th = min(2.0 * pred.mean(), 1.0)
    pb = pred >= th
    n_fg = int(gt_bin.sum())
    total = 0.0
    if n_fg == 0:
        for i in range(h):
            for j in range(w):
                total += 1.0 - float(pb[i, j])
    elif n_fg == h * w:
        for i in range(h):
            for j in range(w):
                total += float(pb[i, j])
    else:
        mu_f = pb.mean()
        mu_g = gt_bin.mean()
        for i in range(h):
            for j in range(w):
                df = float(pb[i, j]) - mu_f
                dg = float(gt_bin[i, j]) - mu_g
                align = 2.0 * dg * df / (dg * dg + df * df + EPS)
                total += (align + 1.0) ** 2 / 4.0
    return total / (h * w)


def oracle_weighted_f(pred: np.ndarray, gt: np.ndarray, beta_sq: float = 1.0) -> float:
    """Dependency-weighted F with explicit distance-transform loops."""
    pred = pred.astype(np.float64)
    fg = gt > 0.5
    h, w = fg.shape
    fg_pixels = [(i, j) for i in range(h) for j in range(w) if fg[i, j]]
    if not fg_pixels:
        return 0.0

    err = np.abs(pred - fg.astype(np.float64))

    # distance and error propagated from the nearest foreground pixel;
    # ties resolved toward the smallest row, then column
    dist = np.zeros((h, w))
    err_t = err.copy()
    for i in range(h):
        for j in range(w):
            if fg[i, j]:
                continue
            best = None
            for (fi, fj) in fg_pixels:
                key = ((fi - i) ** 2 + (fj - j) ** 2, fi, fj)
                if best is None or key < best:
                    best = key
            dist[i, j] = math.sqrt(best[0])
            err_t[i, j] = err[best[1], best[2]]

    # 7x7 sigma-5 gaussian smoothing with zero padding
    radius = 3
    kernel = np.zeros((7, 7))
    for di in range(-radius, radius + 1):
        for dj in range(-radius, radius + 1):
            kernel[di + radius, dj + radius] = math.exp(-(di * di + dj * dj) / 50.0)
    kernel /= kernel.sum()
    smoothed = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for di in range(-radius, radius + 1):
                for dj in range(-radius, radius + 1):
                    ii, jj = i + di, j + dj
                    if 0 <= ii < h and 0 <= jj < w:
                        acc += kernel[di + radius, dj + radius] * err_t[ii, jj]
            smoothed[i, j] = acc

    ew_fg_sum = 0.0
    ew_bg_sum = 0.0
    for i in range(h):
        for j in range(w):
            if fg[i, j]:
                e = smoothed[i, j] if smoothed[i, j] < err[i, j] else err[i, j]
                ew_fg_sum += e * 1.0
            else:
                importance = 2.0 - math.exp(math.log(0.5) / 5.0 * dist[i, j])
                ew_bg_sum += err[i, j] * importance

    n_fg = len(fg_pixels)
    tp_w = n_fg - ew_fg_sum
    fp_w = ew_bg_sum
    recall = 1.0 - ew_fg_sum / n_fg
    precision = tp_w / (EPS + tp_w + fp_w)
    return (1.0 + beta_sq) * precision * recall / (EPS + recall + beta_sq * precision)


# ---------------------------------------------------------------------------
# loss oracles
# ---------------------------------------------------------------------------

def oracle_weight_map(mask: np.ndarray, kernel: int = 31) -> np.ndarray:
    """Per-pixel valid-window average pooling, then 1 + 5 |pool - mask|."""
    h, w = mask.shape
    radius = kernel // 2
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            acc = 0.0
            count = 0
            for di in range(-radius, radius + 1):
                for dj in range(-radius, radius + 1):
                    ii, jj = i + di, j + dj
                    if 0 <= ii < h and 0 <= jj < w:
                        acc += mask[ii, jj]
                        count += 1
            out[i, j] = 1.0 + 5.0 * abs(acc / count - mask[i, j])
    return out


def oracle_weighted_bce_iou(logits: np.ndarray, mask: np.ndarray,
                            weights: np.ndarray) -> float:
    """Straight-line scalar version of the hybrid loss, batch of maps."""
    b = logits.shape[0]
    total = 0.0
    for k in range(b):
        wsum = bce_acc = inter = union = 0.0
        for i in range(logits.shape[2]):
            for j in range(logits.shape[3]):
                z = float(logits[k, 0, i, j])
                m = float(mask[k, 0, i, j])
                wt = float(weights[k, 0, i, j])
                p = 1.0 / (1.0 + math.exp(-z))
                # numerically plain form is fine for the magnitudes tested
                bce = -(m * math.log(p) + (1 - m) * math.log(1 - p))
                bce_acc += wt * bce
                wsum += wt
                inter += wt * p * m
                union += wt * (p + m - p * m)
        total += bce_acc / wsum + (1.0 - inter / union)
    return total / b


# ---------------------------------------------------------------------------
# geometry oracles
# ---------------------------------------------------------------------------

def naive_bilinear_resize(image: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """align_corners=False bilinear resize with edge clamping."""
    in_h, in_w = image.shape
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        for j in range(out_w):
            sy = (i + 0.5) * in_h / out_h - 0.5
            sx = (j + 0.5) * in_w / out_w - 0.5
            y0 = math.floor(sy)
            x0 = math.floor(sx)
            wy = sy - y0
            wx = sx - x0
            acc = 0.0
            for dy, fy in ((0, 1 - wy), (1, wy)):
                for dx, fx in ((0, 1 - wx), (1, wx)):
                    yy = min(max(y0 + dy, 0), in_h - 1)
                    xx = min(max(x0 + dx, 0), in_w - 1)
                    acc += fy * fx * image[yy, xx]
            out[i, j] = acc
    return out


def _bilinear_sample_zeros(image: np.ndarray, py: float, px: float) -> float:
    """Bilinear sample with zero outside [-1, size) bounds."""
    h, w = image.shape
    if py <= -1 or py >= h or px <= -1 or px >= w:
        return 0.0
    y0 = math.floor(py)
    x0 = math.floor(px)
    wy = py - y0
    wx = px - x0
    acc = 0.0
    for yy, fy in ((y0, 1 - wy), (y0 + 1, wy)):
        for xx, fx in ((x0, 1 - wx), (x0 + 1, wx)):
            if 0 <= yy < h and 0 <= xx < w:
                acc += fy * fx * image[yy, xx]
    return acc


def naive_deform_conv2d(x: np.ndarray, offset: np.ndarray, weight: np.ndarray,
                        bias: np.ndarray, padding: int = 1) -> np.ndarray:
    """Per-output-pixel deformable convolution with bilinear sampling."""
    b, c_in, h, w = x.shape
    c_out, _, kh, kw = weight.shape
    out = np.zeros((b, c_out, h, w))
    for bi in range(b):
        for co in range(c_out):
            for y in range(h):
                for xx in range(w):
                    acc = float(bias[co])
                    for ky in range(kh):
                        for kx in range(kw):
                            k = ky * kw + kx
                            py = y - padding + ky + float(offset[bi, 2 * k, y, xx])
                            px = xx - padding + kx + float(offset[bi, 2 * k + 1, y, xx])
                            for ci in range(c_in):
                                acc += float(weight[co, ci, ky, kx]) * \
                                    _bilinear_sample_zeros(x[bi, ci], py, px)
                    out[bi, co, y, xx] = acc
    return out


def naive_conv2d(x: np.ndarray, weight: np.ndarray, padding: int = 1) -> np.ndarray:
    """Plain zero-padded cross-correlation, one batch of maps."""
    b, c_in, h, w = x.shape
    c_out, _, kh, kw = weight.shape
    out = np.zeros((b, c_out, h, w))
    for bi in range(b):
        for co in range(c_out):
            for y in range(h):
                for xx in range(w):
                    acc = 0.0
                    for ci in range(c_in):
                        for ky in range(kh):
                            for kx in range(kw):
                                yy = y - padding + ky
                                xj = xx - padding + kx
                                if 0 <= yy < h and 0 <= xj < w:
                                    acc += float(weight[co, ci, ky, kx]) * float(x[bi, ci, yy, xj])
                    out[bi, co, y, xx] = acc
    return out
