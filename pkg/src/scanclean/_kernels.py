"""Numba kernels for the per-frame hot path.

Everything here operates on plain float64/int32/bool grids so the compiled
signatures stay stable across calls. Point coordinates travel as one packed
(rows, cols, 4) array holding x, y, z, depth: neighbor probes then touch a
single cache line instead of four grids. Label grids use 0 for "unlabeled",
-1 internally for "excluded" (invalid or ground); callers receive 0 for both.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def project_scan(xyz, sin_mids, sin_lo, sin_hi, min_range, max_range, res_rad, n_rows, n_cols):
    """One-pass projection: gate, bin, and keep the nearest return per pixel.

    Ring binning happens in sine space against angle-space midpoints (an
    exact monotone transform of nearest-elevation binning); ``sin_mids`` is
    ascending, so the ascending ring index flips to a row with row 0 at the
    top. Ties at equal depth keep the earlier point.
    """
    depth_grid = np.zeros((n_rows, n_cols), np.float64)
    point_index = np.full((n_rows, n_cols), -1, np.int32)
    pts = np.zeros((n_rows, n_cols, 4), np.float64)
    n_mids = len(sin_mids)
    two_pi = 2.0 * np.pi
    kept = 0
    for i in range(xyz.shape[0]):
        x = xyz[i, 0]
        y = xyz[i, 1]
        z = xyz[i, 2]
        if not (np.isfinite(x) and np.isfinite(y) and np.isfinite(z)):
            continue
        d = np.sqrt(x * x + y * y + z * z)
        if d < min_range or d > max_range or d <= 0.0:
            continue
        sin_el = z / d
        if sin_el < sin_lo or sin_el > sin_hi:
            continue
        lo = 0
        hi = n_mids
        while lo < hi:
            mid = (lo + hi) // 2
            if sin_mids[mid] < sin_el:
                lo = mid + 1
            else:
                hi = mid
        r = n_rows - 1 - lo
        az = np.arctan2(y, x)
        if az < 0.0:
            az += two_pi
        c = int(az / res_rad)
        if c >= n_cols:
            c -= n_cols
        kept += 1
        if point_index[r, c] < 0 or d < depth_grid[r, c]:
            depth_grid[r, c] = d
            point_index[r, c] = np.int32(i)
            pts[r, c, 0] = x
            pts[r, c, 1] = y
            pts[r, c, 2] = z
            pts[r, c, 3] = d
    return depth_grid, point_index, pts, kept


@njit(cache=True, nogil=True)
def ground_walk(depth, pts, max_slope_rad, max_ground_height):
    """Per-column bottom-up ground classification.

    Walking rings from the lowest elevation upward, a return is ground while
    the slope to the previous valid return stays below the threshold and its
    height stays below the ceiling; the first non-ground return breaks the
    column for everything above it.
    """
    rows, cols = depth.shape
    mask = np.zeros((rows, cols), np.bool_)
    for c in range(cols):
        broken = False
        have_prev = False
        px = 0.0
        py = 0.0
        pz = 0.0
        for r in range(rows - 1, -1, -1):
            if depth[r, c] <= 0.0:
                continue
            if broken:
                continue
            xc = pts[r, c, 0]
            yc = pts[r, c, 1]
            zc = pts[r, c, 2]
            if not have_prev:
                is_ground = zc < max_ground_height
            else:
                dx = xc - px
                dy = yc - py
                dz = zc - pz
                if dz < 0.0:
                    dz = -dz
                slope = np.arctan2(dz, np.sqrt(dx * dx + dy * dy))
                is_ground = (slope < max_slope_rad) and (zc < max_ground_height)
            if is_ground:
                mask[r, c] = True
            else:
                broken = True
            px = xc
            py = yc
            pz = zc
            have_prev = True
    return mask


@njit(cache=True, nogil=True)
def depth_cluster_bfs(depth, excluded, sin_ah, cos_ah, sin_av, cos_av, beta0_rad):
    """Flood-fill labeling over 4-adjacency (circular in azimuth).

    Two adjacent returns merge when the angle between their connecting
    segment and the farther beam exceeds ``beta0_rad``. ``sin_ah``/``cos_ah``
    hold the per-row horizontal beam separation, ``sin_av``/``cos_av`` the
    separation between row r and r+1. Labels are assigned in row-major
    discovery order starting at 1.
    """
    rows, cols = depth.shape
    labels = np.zeros((rows, cols), np.int32)
    for r in range(rows):
        for c in range(cols):
            if excluded[r, c]:
                labels[r, c] = -1
    queue_r = np.empty(rows * cols, np.int32)
    queue_c = np.empty(rows * cols, np.int32)
    next_label = 0
    for r0 in range(rows):
        for c0 in range(cols):
            if labels[r0, c0] != 0:
                continue
            next_label += 1
            labels[r0, c0] = next_label
            head = 0
            tail = 0
            queue_r[tail] = r0
            queue_c[tail] = c0
            tail += 1
            while head < tail:
                r = queue_r[head]
                c = queue_c[head]
                head += 1
                d1 = depth[r, c]
                for k in range(4):
                    if k == 0:
                        rn = r
                        cn = c + 1 if c + 1 < cols else 0
                        sa = sin_ah[r]
                        ca = cos_ah[r]
                    elif k == 1:
                        rn = r
                        cn = c - 1 if c > 0 else cols - 1
                        sa = sin_ah[r]
                        ca = cos_ah[r]
                    elif k == 2:
                        rn = r + 1
                        cn = c
                        if rn >= rows:
                            continue
                        sa = sin_av[r]
                        ca = cos_av[r]
                    else:
                        rn = r - 1
                        cn = c
                        if rn < 0:
                            continue
                        sa = sin_av[rn]
                        ca = cos_av[rn]
                    if labels[rn, cn] != 0:
                        continue
                    d2 = depth[rn, cn]
                    if d1 >= d2:
                        far = d1
                        near = d2
                    else:
                        far = d2
                        near = d1
                    beta = np.arctan2(near * sa, far - near * ca)
                    if beta > beta0_rad:
                        labels[rn, cn] = next_label
                        queue_r[tail] = rn
                        queue_c[tail] = cn
                        tail += 1
    for r in range(rows):
        for c in range(cols):
            if labels[r, c] < 0:
                labels[r, c] = 0
    return labels, next_label


@njit(cache=True, nogil=True, fastmath=True)
def euclid_cluster_bfs(pts, excluded, w, thresh_table, fixed_threshold):
    """Flood-fill labeling over a (2w+1)^2 window (circular in azimuth).

    Two returns merge when their 3D distance falls below a depth-scaled
    threshold: ``thresh_table[r, dr + w, |dc|]`` times the smaller of the two
    depths (the table already folds in the redundancy factor and the beam
    separation sine). A positive ``fixed_threshold`` bypasses the table and
    applies one constant distance everywhere. Labels follow row-major
    discovery order starting at 1.
    """
    rows = pts.shape[0]
    cols = pts.shape[1]
    labels = np.zeros((rows, cols), np.int32)
    for r in range(rows):
        for c in range(cols):
            if excluded[r, c]:
                labels[r, c] = -1
    queue_r = np.empty(rows * cols, np.int32)
    queue_c = np.empty(rows * cols, np.int32)
    fixed_sq = fixed_threshold * fixed_threshold
    use_fixed = fixed_threshold > 0.0
    next_label = 0
    for r0 in range(rows):
        for c0 in range(cols):
            if labels[r0, c0] != 0:
                continue
            next_label += 1
            labels[r0, c0] = next_label
            head = 0
            tail = 0
            queue_r[tail] = r0
            queue_c[tail] = c0
            tail += 1
            while head < tail:
                r = queue_r[head]
                c = queue_c[head]
                head += 1
                x1 = pts[r, c, 0]
                y1 = pts[r, c, 1]
                z1 = pts[r, c, 2]
                d1 = pts[r, c, 3]
                rlo = r - w if r - w >= 0 else 0
                rhi = r + w if r + w < rows else rows - 1
                # duplicated probe loops: interior columns skip the wrap test;
                # row views hoisted out of the column loop
                if w <= c < cols - w:
                    for rn in range(rlo, rhi + 1):
                        trow = thresh_table[r, rn - r + w]
                        labrow = labels[rn]
                        prow = pts[rn]
                        for dc in range(-w, w + 1):
                            cn = c + dc
                            if labrow[cn] != 0:
                                continue
                            dx = x1 - prow[cn, 0]
                            dy = y1 - prow[cn, 1]
                            dz = z1 - prow[cn, 2]
                            dist_sq = dx * dx + dy * dy + dz * dz
                            if use_fixed:
                                thr_sq = fixed_sq
                            else:
                                d2 = prow[cn, 3]
                                near = d1 if d1 < d2 else d2
                                adc = dc if dc >= 0 else -dc
                                thr = trow[adc] * near
                                thr_sq = thr * thr
                            if dist_sq < thr_sq:
                                labrow[cn] = next_label
                                queue_r[tail] = rn
                                queue_c[tail] = cn
                                tail += 1
                else:
                    for rn in range(rlo, rhi + 1):
                        trow = thresh_table[r, rn - r + w]
                        labrow = labels[rn]
                        prow = pts[rn]
                        for dc in range(-w, w + 1):
                            cn = c + dc
                            if cn >= cols:
                                cn -= cols
                            elif cn < 0:
                                cn += cols
                            if labrow[cn] != 0:
                                continue
                            dx = x1 - prow[cn, 0]
                            dy = y1 - prow[cn, 1]
                            dz = z1 - prow[cn, 2]
                            dist_sq = dx * dx + dy * dy + dz * dz
                            if use_fixed:
                                thr_sq = fixed_sq
                            else:
                                d2 = prow[cn, 3]
                                near = d1 if d1 < d2 else d2
                                adc = dc if dc >= 0 else -dc
                                thr = trow[adc] * near
                                thr_sq = thr * thr
                            if dist_sq < thr_sq:
                                labrow[cn] = next_label
                                queue_r[tail] = rn
                                queue_c[tail] = cn
                                tail += 1
    for r in range(rows):
        for c in range(cols):
            if labels[r, c] < 0:
                labels[r, c] = 0
    return labels, next_label


@njit(cache=True, nogil=True)
def normal_window_stats(sample_r, sample_c, depth, pts, member, w, depth_gate):
    """Accumulate neighborhood counts, centroids, and covariances per sample.

    For each sample pixel, gathers the member pixels inside the w-window
    (circular in azimuth) whose depth differs from the center's by less than
    ``depth_gate``; the center always passes its own gate. Points are centered
    before the product accumulation so far-from-origin neighborhoods do not
    cancel. Covariances divide by N (population form).
    """
    m = len(sample_r)
    rows, cols = depth.shape
    counts = np.zeros(m, np.int64)
    centroids = np.zeros((m, 3), np.float64)
    covs = np.zeros((m, 3, 3), np.float64)
    side = 2 * w + 1
    buf = np.empty((side * side, 3), np.float64)
    for i in range(m):
        r0 = sample_r[i]
        c0 = sample_c[i]
        d0 = depth[r0, c0]
        n = 0
        sx = 0.0
        sy = 0.0
        sz = 0.0
        rlo = r0 - w if r0 - w >= 0 else 0
        rhi = r0 + w if r0 + w < rows else rows - 1
        for r in range(rlo, rhi + 1):
            for dc in range(-w, w + 1):
                c = c0 + dc
                if c >= cols:
                    c -= cols
                elif c < 0:
                    c += cols
                if not member[r, c]:
                    continue
                dd = depth[r, c] - d0
                if dd < 0.0:
                    dd = -dd
                if dd >= depth_gate:
                    continue
                buf[n, 0] = pts[r, c, 0]
                buf[n, 1] = pts[r, c, 1]
                buf[n, 2] = pts[r, c, 2]
                sx += buf[n, 0]
                sy += buf[n, 1]
                sz += buf[n, 2]
                n += 1
        counts[i] = n
        if n > 0:
            inv = 1.0 / n
            mx = sx * inv
            my = sy * inv
            mz = sz * inv
            centroids[i, 0] = mx
            centroids[i, 1] = my
            centroids[i, 2] = mz
            cxx = 0.0
            cxy = 0.0
            cxz = 0.0
            cyy = 0.0
            cyz = 0.0
            czz = 0.0
            for j in range(n):
                px = buf[j, 0] - mx
                py = buf[j, 1] - my
                pz = buf[j, 2] - mz
                cxx += px * px
                cxy += px * py
                cxz += px * pz
                cyy += py * py
                cyz += py * pz
                czz += pz * pz
            covs[i, 0, 0] = cxx * inv
            covs[i, 0, 1] = cxy * inv
            covs[i, 0, 2] = cxz * inv
            covs[i, 1, 1] = cyy * inv
            covs[i, 1, 2] = cyz * inv
            covs[i, 2, 2] = czz * inv
            covs[i, 1, 0] = covs[i, 0, 1]
            covs[i, 2, 0] = covs[i, 0, 2]
            covs[i, 2, 1] = covs[i, 1, 2]
    return counts, centroids, covs
