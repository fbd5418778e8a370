# numba kernels for the inner loops that numpy cannot vectorise cheaply
import numpy as np
from numba import njit


@njit(cache=True)
def _closest_dist2(px, py, pz, ax, ay, az, bx, by, bz, cx, cy, cz):
    # Ericson, Real-Time Collision Detection, 5.1.5
    abx, aby, abz = bx - ax, by - ay, bz - az
    acx, acy, acz = cx - ax, cy - ay, cz - az
    apx, apy, apz = px - ax, py - ay, pz - az
    d1 = abx * apx + aby * apy + abz * apz
    d2 = acx * apx + acy * apy + acz * apz
    if d1 <= 0.0 and d2 <= 0.0:
        return apx * apx + apy * apy + apz * apz
    bpx, bpy, bpz = px - bx, py - by, pz - bz
    d3 = abx * bpx + aby * bpy + abz * bpz
    d4 = acx * bpx + acy * bpy + acz * bpz
    if d3 >= 0.0 and d4 <= d3:
        return bpx * bpx + bpy * bpy + bpz * bpz
    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        v = d1 / (d1 - d3)
        qx, qy, qz = ax + v * abx - px, ay + v * aby - py, az + v * abz - pz
        return qx * qx + qy * qy + qz * qz
    cpx, cpy, cpz = px - cx, py - cy, pz - cz
    d5 = abx * cpx + aby * cpy + abz * cpz
    d6 = acx * cpx + acy * cpy + acz * cpz
    if d6 >= 0.0 and d5 <= d6:
        return cpx * cpx + cpy * cpy + cpz * cpz
    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        w = d2 / (d2 - d6)
        qx, qy, qz = ax + w * acx - px, ay + w * acy - py, az + w * acz - pz
        return qx * qx + qy * qy + qz * qz
    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        qx = bx + w * (cx - bx) - px
        qy = by + w * (cy - by) - py
        qz = bz + w * (cz - bz) - pz
        return qx * qx + qy * qy + qz * qz
    denom = 1.0 / (va + vb + vc)
    v = vb * denom
    w = vc * denom
    qx = ax + abx * v + acx * w - px
    qy = ay + aby * v + acy * w - py
    qz = az + abz * v + acz * w - pz
    return qx * qx + qy * qy + qz * qz


@njit(cache=True)
def point_triangle_dist2(points, tris):
    """Brute-force squared distance of every point to every triangle, min over triangles."""
    n = points.shape[0]
    out = np.empty(n)
    for i in range(n):
        best = np.inf
        for t in range(tris.shape[0]):
            d = _closest_dist2(points[i, 0], points[i, 1], points[i, 2],
                               tris[t, 0, 0], tris[t, 0, 1], tris[t, 0, 2],
                               tris[t, 1, 0], tris[t, 1, 1], tris[t, 1, 2],
                               tris[t, 2, 0], tris[t, 2, 1], tris[t, 2, 2])
            if d < best:
                best = d
        out[i] = best
    return out


@njit(cache=True)
def blocked_dist2(points, block_start, block_center, block_radius, tris):
    """Exact squared distance to a triangle set, culled per block of nearby points.

    ``points`` are sorted by block; block b owns rows block_start[b]:block_start[b+1].
    For each block, triangles farther from its center than (nearest + 2 * radius)
    cannot be the nearest triangle of any member point.
    """
    nb = block_center.shape[0]
    nt = tris.shape[0]
    out = np.empty(points.shape[0])
    dc = np.empty(nt)
    cand = np.empty(nt, dtype=np.int64)
    for b in range(nb):
        cx, cy, cz = block_center[b, 0], block_center[b, 1], block_center[b, 2]
        dmin = np.inf
        for t in range(nt):
            d = np.sqrt(_closest_dist2(cx, cy, cz,
                                       tris[t, 0, 0], tris[t, 0, 1], tris[t, 0, 2],
                                       tris[t, 1, 0], tris[t, 1, 1], tris[t, 1, 2],
                                       tris[t, 2, 0], tris[t, 2, 1], tris[t, 2, 2]))
            dc[t] = d
            if d < dmin:
                dmin = d
        lim = dmin + 2.0 * block_radius[b] + 1e-12
        nc = 0
        for t in range(nt):
            if dc[t] <= lim:
                cand[nc] = t
                nc += 1
        for i in range(block_start[b], block_start[b + 1]):
            best = np.inf
            for k in range(nc):
                t = cand[k]
                d = _closest_dist2(points[i, 0], points[i, 1], points[i, 2],
                                   tris[t, 0, 0], tris[t, 0, 1], tris[t, 0, 2],
                                   tris[t, 1, 0], tris[t, 1, 1], tris[t, 1, 2],
                                   tris[t, 2, 0], tris[t, 2, 1], tris[t, 2, 2])
                if d < best:
                    best = d
            out[i] = best
    return out


@njit(cache=True)
def winding_numbers(points, tris):
    """Generalized winding number (sum of signed solid angles / 4 pi)."""
    n = points.shape[0]
    out = np.empty(n)
    for i in range(n):
        total = 0.0
        for t in range(tris.shape[0]):
            ax = tris[t, 0, 0] - points[i, 0]
            ay = tris[t, 0, 1] - points[i, 1]
            az = tris[t, 0, 2] - points[i, 2]
            bx = tris[t, 1, 0] - points[i, 0]
            by = tris[t, 1, 1] - points[i, 1]
            bz = tris[t, 1, 2] - points[i, 2]
            cx = tris[t, 2, 0] - points[i, 0]
            cy = tris[t, 2, 1] - points[i, 1]
            cz = tris[t, 2, 2] - points[i, 2]
            la = np.sqrt(ax * ax + ay * ay + az * az)
            lb = np.sqrt(bx * bx + by * by + bz * bz)
            lc = np.sqrt(cx * cx + cy * cy + cz * cz)
            det = ax * (by * cz - bz * cy) - ay * (bx * cz - bz * cx) + az * (bx * cy - by * cx)
            den = (la * lb * lc + (ax * bx + ay * by + az * bz) * lc
                   + (bx * cx + by * cy + bz * cz) * la + (cx * ax + cy * ay + cz * az) * lb)
            total += 2.0 * np.arctan2(det, den)
        out[i] = total / (4.0 * np.pi)
    return out


@njit(cache=True)
def first_hit(origins, targets, tris, eps):
    """Smallest ray parameter s in (eps, inf) with origin + s (target - origin) on a triangle.

    Returns inf where the ray misses every triangle. Moller-Trumbore, two-sided.
    """
    n = origins.shape[0]
    out = np.full(n, np.inf)
    for i in range(n):
        ox, oy, oz = origins[i, 0], origins[i, 1], origins[i, 2]
        dx = targets[i, 0] - ox
        dy = targets[i, 1] - oy
        dz = targets[i, 2] - oz
        best = np.inf
        for t in range(tris.shape[0]):
            e1x = tris[t, 1, 0] - tris[t, 0, 0]
            e1y = tris[t, 1, 1] - tris[t, 0, 1]
            e1z = tris[t, 1, 2] - tris[t, 0, 2]
            e2x = tris[t, 2, 0] - tris[t, 0, 0]
            e2y = tris[t, 2, 1] - tris[t, 0, 1]
            e2z = tris[t, 2, 2] - tris[t, 0, 2]
            px = dy * e2z - dz * e2y
            py = dz * e2x - dx * e2z
            pz = dx * e2y - dy * e2x
            det = e1x * px + e1y * py + e1z * pz
            if abs(det) < 1e-300:
                continue
            inv = 1.0 / det
            tx = ox - tris[t, 0, 0]
            ty = oy - tris[t, 0, 1]
            tz = oz - tris[t, 0, 2]
            u = (tx * px + ty * py + tz * pz) * inv
            if u < 0.0 or u > 1.0:
                continue
            qx = ty * e1z - tz * e1y
            qy = tz * e1x - tx * e1z
            qz = tx * e1y - ty * e1x
            v = (dx * qx + dy * qy + dz * qz) * inv
            if v < 0.0 or u + v > 1.0:
                continue
            s = (e2x * qx + e2y * qy + e2z * qz) * inv
            if s > eps and s < best:
                best = s
        out[i] = best
    return out


@njit(cache=True)
def rasterize(pix, depth, width, height, buf):
    """Min-depth z-buffer over screen-space triangles, pixel centers at integer coords.

    ``pix`` (M, 3, 2) screen positions, ``depth`` (M, 3) camera-space depths.
    Depth is interpolated perspective-correctly (1/z is affine in screen space).
    Writes into ``buf`` (height, width), which must be pre-filled with +inf.
    """
    for t in range(pix.shape[0]):
        x0, y0 = pix[t, 0, 0], pix[t, 0, 1]
        x1, y1 = pix[t, 1, 0], pix[t, 1, 1]
        x2, y2 = pix[t, 2, 0], pix[t, 2, 1]
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if abs(area) < 1e-14:
            continue
        xmin = max(int(np.ceil(min(x0, min(x1, x2)))), 0)
        xmax = min(int(np.floor(max(x0, max(x1, x2)))), width - 1)
        ymin = max(int(np.ceil(min(y0, min(y1, y2)))), 0)
        ymax = min(int(np.floor(max(y0, max(y1, y2)))), height - 1)
        iz0 = 1.0 / depth[t, 0]
        iz1 = 1.0 / depth[t, 1]
        iz2 = 1.0 / depth[t, 2]
        inv = 1.0 / area
        for py in range(ymin, ymax + 1):
            for px in range(xmin, xmax + 1):
                w0 = ((x1 - px) * (y2 - py) - (x2 - px) * (y1 - py)) * inv
                w1 = ((x2 - px) * (y0 - py) - (x0 - px) * (y2 - py)) * inv
                w2 = 1.0 - w0 - w1
                if w0 < 0.0 or w1 < 0.0 or w2 < 0.0:
                    continue
                z = 1.0 / (w0 * iz0 + w1 * iz1 + w2 * iz2)
                if z < buf[py, px]:
                    buf[py, px] = z
    return buf
