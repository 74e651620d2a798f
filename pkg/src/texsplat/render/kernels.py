"""Numba tile kernels: forward compositing and the analytic backward pass.

Forward parallelizes over 16x16 tiles.  Backward parallelizes over a fixed
number of tile chunks, each owning private gradient accumulators that the
host reduces afterwards; the chunk count never depends on the thread count,
so results are bitwise reproducible under any parallelism.

Compositing rules (identical in the reference renderer):
  * contributions outside the 3-sigma conic ellipse are dropped,
  * ``alpha = min(0.99, opacity * exp(-power))``, skipped below 1/255,
  * a contribution that would push transmittance below 1e-4 is excluded
    and terminates the pixel.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

TILE = 16
N_CHUNKS = 8

MODE_VANILLA = 0
MODE_TEXTURED = 1
MODE_TEXTURED_NOSH = 2
MODE_PREFETCH = 3

F = "float64"


@njit(cache=True, inline="always")
def _sh_basis_dir(b, x, y, z):
    xx = x * x
    yy = y * y
    zz = z * z
    b[0] = 0.28209479177387814
    b[1] = -0.4886025119029199 * y
    b[2] = 0.4886025119029199 * z
    b[3] = -0.4886025119029199 * x
    b[4] = 1.0925484305920792 * x * y
    b[5] = -1.0925484305920792 * y * z
    b[6] = 0.31539156525252005 * (2.0 * zz - xx - yy)
    b[7] = -1.0925484305920792 * x * z
    b[8] = 0.5462742152960396 * (xx - yy)
    b[9] = -0.5900435899266435 * y * (3.0 * xx - yy)
    b[10] = 2.890611442640554 * x * y * z
    b[11] = -0.4570457994644658 * y * (4.0 * zz - xx - yy)
    b[12] = 0.3731763325901154 * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
    b[13] = -0.4570457994644658 * x * (4.0 * zz - xx - yy)
    b[14] = 1.445305721320277 * z * (xx - yy)
    b[15] = -0.5900435899266435 * x * (xx - 3.0 * yy)


@njit(cache=True, inline="always")
def _ray_dir(px, py, fx, fy, cx, cy, Rcam):
    xn = (px - cx) / fx
    yn = (py - cy) / fy
    dx = Rcam[0, 0] * xn + Rcam[1, 0] * yn + Rcam[2, 0]
    dy = Rcam[0, 1] * xn + Rcam[1, 1] * yn + Rcam[2, 1]
    dz = Rcam[0, 2] * xn + Rcam[1, 2] * yn + Rcam[2, 2]
    inv = 1.0 / math.sqrt(dx * dx + dy * dy + dz * dz)
    return dx * inv, dy * inv, dz * inv


@njit(cache=True, inline="always")
def _bilinear(tex, u, v):
    Ht = tex.shape[0]
    Wt = tex.shape[1]
    x = u * Wt - 0.5
    y = v * Ht - 0.5
    x0 = int(math.floor(x))
    y0 = int(math.floor(y))
    tx = x - x0
    ty = y - y0
    c0 = x0 % Wt
    if c0 < 0:
        c0 += Wt
    c1 = c0 + 1
    if c1 == Wt:
        c1 = 0
    r0 = min(max(y0, 0), Ht - 1)
    r1 = min(max(y0 + 1, 0), Ht - 1)
    w00 = (1.0 - tx) * (1.0 - ty)
    w01 = tx * (1.0 - ty)
    w10 = (1.0 - tx) * ty
    w11 = tx * ty
    r = (w00 * tex[r0, c0, 0] + w01 * tex[r0, c1, 0] +
         w10 * tex[r1, c0, 0] + w11 * tex[r1, c1, 0])
    g = (w00 * tex[r0, c0, 1] + w01 * tex[r0, c1, 1] +
         w10 * tex[r1, c0, 1] + w11 * tex[r1, c1, 1])
    bl = (w00 * tex[r0, c0, 2] + w01 * tex[r0, c1, 2] +
          w10 * tex[r1, c0, 2] + w11 * tex[r1, c1, 2])
    return r, g, bl


@njit(cache=True, parallel=True)
def forward_kernel(tile_start, tile_end, pair_gauss, ntx, width, height, mode,
                   mean2d, conic, depth, opac, sh, prefetch_rgb, normals,
                   mu, rot, bound, uv_mu, jac, tex,
                   fx, fy, cx, cy, Rcam, origin,
                   out_color, out_nosh, out_depth, out_normal, out_alpha,
                   out_T, out_nc):
    ntiles = tile_start.shape[0]
    need_sh = (mode == MODE_VANILLA) or (mode == MODE_TEXTURED)
    textured = (mode == MODE_TEXTURED) or (mode == MODE_TEXTURED_NOSH)
    for tile in prange(ntiles):
        s = tile_start[tile]
        e = tile_end[tile]
        if s == e:
            continue
        basis = np.empty(16)
        tx0 = (tile % ntx) * TILE
        ty0 = (tile // ntx) * TILE
        for py in range(ty0, min(ty0 + TILE, height)):
            for px in range(tx0, min(tx0 + TILE, width)):
                pxc = px + 0.5
                pyc = py + 0.5
                d0 = d1 = d2 = 0.0
                if textured or need_sh:
                    d0, d1, d2 = _ray_dir(pxc, pyc, fx, fy, cx, cy, Rcam)
                if need_sh:
                    _sh_basis_dir(basis, d0, d1, d2)
                T = 1.0
                cr = cg = cb = 0.0
                nr = ng = nb = 0.0
                dep = 0.0
                nx = ny = nz = 0.0
                acc_a = 0.0
                ncontrib = 0
                for k in range(s, e):
                    g = pair_gauss[k]
                    dx = pxc - mean2d[g, 0]
                    dy = pyc - mean2d[g, 1]
                    power = 0.5 * (conic[g, 0] * dx * dx + conic[g, 2] * dy * dy) \
                        + conic[g, 1] * dx * dy
                    if power > 4.5:
                        continue
                    alpha = opac[g] * math.exp(-power)
                    if alpha > 0.99:
                        alpha = 0.99
                    if alpha < 0.00392156862745098:
                        continue
                    test_T = T * (1.0 - alpha)
                    if test_T < 1e-4:
                        break
                    w = alpha * T

                    if mode == MODE_VANILLA:
                        vr = 0.5
                        vg = 0.5
                        vb = 0.5
                        for i in range(16):
                            vr += basis[i] * sh[g, i, 0]
                            vg += basis[i] * sh[g, i, 1]
                            vb += basis[i] * sh[g, i, 2]
                        cr += w * vr
                        cg += w * vg
                        cb += w * vb
                    elif mode == MODE_PREFETCH:
                        cr += w * prefetch_rgb[g, 0]
                        cg += w * prefetch_rgb[g, 1]
                        cb += w * prefetch_rgb[g, 2]
                    else:
                        n0 = normals[g, 0]
                        n1 = normals[g, 1]
                        n2 = normals[g, 2]
                        dn = d0 * n0 + d1 * n1 + d2 * n2
                        if abs(dn) < 1e-8:
                            off0 = 0.0
                            off1 = 0.0
                            off2 = 0.0
                        else:
                            tau = ((mu[g, 0] - origin[0]) * n0 + (mu[g, 1] - origin[1]) * n1 +
                                   (mu[g, 2] - origin[2]) * n2) / dn
                            dl0 = origin[0] + tau * d0 - mu[g, 0]
                            dl1 = origin[1] + tau * d1 - mu[g, 1]
                            dl2 = origin[2] + tau * d2 - mu[g, 2]
                            l0 = rot[g, 0, 0] * dl0 + rot[g, 1, 0] * dl1 + rot[g, 2, 0] * dl2
                            l1 = rot[g, 0, 1] * dl0 + rot[g, 1, 1] * dl1 + rot[g, 2, 1] * dl2
                            l2 = rot[g, 0, 2] * dl0 + rot[g, 1, 2] * dl1 + rot[g, 2, 2] * dl2
                            b0 = bound[g, 0]
                            b1 = bound[g, 1]
                            b2 = bound[g, 2]
                            l0 = min(max(l0, -b0), b0)
                            l1 = min(max(l1, -b1), b1)
                            l2 = min(max(l2, -b2), b2)
                            off0 = rot[g, 0, 0] * l0 + rot[g, 0, 1] * l1 + rot[g, 0, 2] * l2
                            off1 = rot[g, 1, 0] * l0 + rot[g, 1, 1] * l1 + rot[g, 1, 2] * l2
                            off2 = rot[g, 2, 0] * l0 + rot[g, 2, 1] * l1 + rot[g, 2, 2] * l2
                        ur = uv_mu[g, 0] + jac[g, 0, 0] * off0 + jac[g, 0, 1] * off1 + jac[g, 0, 2] * off2
                        vr_ = uv_mu[g, 1] + jac[g, 1, 0] * off0 + jac[g, 1, 1] * off1 + jac[g, 1, 2] * off2
                        u = ur - math.floor(ur)
                        v = min(max(vr_, 0.0), 1.0)
                        tr, tg, tb = _bilinear(tex, u, v)
                        if mode == MODE_TEXTURED:
                            sr = 0.0
                            sg = 0.0
                            sb = 0.0
                            for i in range(16):
                                sr += basis[i] * sh[g, i, 0]
                                sg += basis[i] * sh[g, i, 1]
                                sb += basis[i] * sh[g, i, 2]
                            cr += w * (tr + sr)
                            cg += w * (tg + sg)
                            cb += w * (tb + sb)
                            nr += w * tr
                            ng += w * tg
                            nb += w * tb
                        else:
                            cr += w * tr
                            cg += w * tg
                            cb += w * tb

                    dep += w * depth[g]
                    nx += w * normals[g, 0]
                    ny += w * normals[g, 1]
                    nz += w * normals[g, 2]
                    acc_a += w
                    T = test_T
                    ncontrib = k - s + 1

                out_color[py, px, 0] = cr
                out_color[py, px, 1] = cg
                out_color[py, px, 2] = cb
                if mode == MODE_TEXTURED:
                    out_nosh[py, px, 0] = nr
                    out_nosh[py, px, 1] = ng
                    out_nosh[py, px, 2] = nb
                out_depth[py, px] = dep
                out_normal[py, px, 0] = nx
                out_normal[py, px, 1] = ny
                out_normal[py, px, 2] = nz
                out_alpha[py, px] = acc_a
                out_T[py, px] = T
                out_nc[py, px] = ncontrib


@njit(cache=True, parallel=True)
def backward_kernel(tile_start, tile_end, pair_gauss, ntx, width, height, mode,
                    mean2d, conic, depth, opac, sh, prefetch_rgb, normals,
                    mu, rot, bound, uv_mu, jac, tex,
                    fx, fy, cx, cy, Rcam, origin,
                    final_T, n_contrib, g_color, g_nosh, g_depth, g_normal, g_alpha,
                    want_geom,
                    gb_mean2d, gb_conic, gb_opac, gb_sh, gb_mu, gb_rot,
                    gb_sclamp, gb_nvec, gb_depth, gb_prefetch, gb_tex):
    ntiles = tile_start.shape[0]
    need_sh = (mode == MODE_VANILLA) or (mode == MODE_TEXTURED)
    for chunk in prange(N_CHUNKS):
        basis = np.empty(16)
        for tile in range(chunk, ntiles, N_CHUNKS):
            s = tile_start[tile]
            e = tile_end[tile]
            if s == e:
                continue
            tx0 = (tile % ntx) * TILE
            ty0 = (tile // ntx) * TILE
            for py in range(ty0, min(ty0 + TILE, height)):
                for px in range(tx0, min(tx0 + TILE, width)):
                    nc = n_contrib[py, px]
                    if nc == 0:
                        continue
                    pxc = px + 0.5
                    pyc = py + 0.5
                    d0 = d1 = d2 = 0.0
                    if mode != MODE_PREFETCH:
                        d0, d1, d2 = _ray_dir(pxc, pyc, fx, fy, cx, cy, Rcam)
                    if need_sh:
                        _sh_basis_dir(basis, d0, d1, d2)

                    gC0 = g_color[py, px, 0]
                    gC1 = g_color[py, px, 1]
                    gC2 = g_color[py, px, 2]
                    gN0 = g_nosh[py, px, 0]
                    gN1 = g_nosh[py, px, 1]
                    gN2 = g_nosh[py, px, 2]
                    gD = g_depth[py, px]
                    gNm0 = g_normal[py, px, 0]
                    gNm1 = g_normal[py, px, 1]
                    gNm2 = g_normal[py, px, 2]
                    gA = g_alpha[py, px]

                    T_cur = final_T[py, px]
                    S = 0.0
                    for k in range(s + nc - 1, s - 1, -1):
                        g = pair_gauss[k]
                        dx = pxc - mean2d[g, 0]
                        dy = pyc - mean2d[g, 1]
                        ca = conic[g, 0]
                        cb_ = conic[g, 1]
                        cc = conic[g, 2]
                        power = 0.5 * (ca * dx * dx + cc * dy * dy) + cb_ * dx * dy
                        if power > 4.5:
                            continue
                        Gv = math.exp(-power)
                        alpha = opac[g] * Gv
                        clamped = alpha > 0.99
                        if clamped:
                            alpha = 0.99
                        if alpha < 0.00392156862745098:
                            continue
                        T_j = T_cur / (1.0 - alpha)
                        w = alpha * T_j

                        # recompute the contribution color
                        vr = vg = vb = 0.0       # full color
                        tr = tg = tb = 0.0       # texture part
                        grazing = True
                        tau = 0.0
                        dn = 0.0
                        l0 = l1 = l2 = 0.0
                        y0 = y1 = y2 = 0.0
                        uraw = 0.0
                        vraw = 0.0
                        u = 0.0
                        v = 0.0
                        if mode == MODE_VANILLA:
                            vr = 0.5
                            vg = 0.5
                            vb = 0.5
                            for i in range(16):
                                vr += basis[i] * sh[g, i, 0]
                                vg += basis[i] * sh[g, i, 1]
                                vb += basis[i] * sh[g, i, 2]
                        elif mode == MODE_PREFETCH:
                            vr = prefetch_rgb[g, 0]
                            vg = prefetch_rgb[g, 1]
                            vb = prefetch_rgb[g, 2]
                        else:
                            n0 = normals[g, 0]
                            n1 = normals[g, 1]
                            n2 = normals[g, 2]
                            dn = d0 * n0 + d1 * n1 + d2 * n2
                            if abs(dn) < 1e-8:
                                off0 = 0.0
                                off1 = 0.0
                                off2 = 0.0
                                grazing = True
                            else:
                                grazing = False
                                tau = ((mu[g, 0] - origin[0]) * n0 + (mu[g, 1] - origin[1]) * n1 +
                                       (mu[g, 2] - origin[2]) * n2) / dn
                                dl0 = origin[0] + tau * d0 - mu[g, 0]
                                dl1 = origin[1] + tau * d1 - mu[g, 1]
                                dl2 = origin[2] + tau * d2 - mu[g, 2]
                                y0 = rot[g, 0, 0] * dl0 + rot[g, 1, 0] * dl1 + rot[g, 2, 0] * dl2
                                y1 = rot[g, 0, 1] * dl0 + rot[g, 1, 1] * dl1 + rot[g, 2, 1] * dl2
                                y2 = rot[g, 0, 2] * dl0 + rot[g, 1, 2] * dl1 + rot[g, 2, 2] * dl2
                                l0 = min(max(y0, -bound[g, 0]), bound[g, 0])
                                l1 = min(max(y1, -bound[g, 1]), bound[g, 1])
                                l2 = min(max(y2, -bound[g, 2]), bound[g, 2])
                            off0 = rot[g, 0, 0] * l0 + rot[g, 0, 1] * l1 + rot[g, 0, 2] * l2
                            off1 = rot[g, 1, 0] * l0 + rot[g, 1, 1] * l1 + rot[g, 1, 2] * l2
                            off2 = rot[g, 2, 0] * l0 + rot[g, 2, 1] * l1 + rot[g, 2, 2] * l2
                            uraw = uv_mu[g, 0] + jac[g, 0, 0] * off0 + jac[g, 0, 1] * off1 + jac[g, 0, 2] * off2
                            vraw = uv_mu[g, 1] + jac[g, 1, 0] * off0 + jac[g, 1, 1] * off1 + jac[g, 1, 2] * off2
                            u = uraw - math.floor(uraw)
                            v = min(max(vraw, 0.0), 1.0)
                            tr, tg, tb = _bilinear(tex, u, v)
                            vr = tr
                            vg = tg
                            vb = tb
                            if mode == MODE_TEXTURED:
                                for i in range(16):
                                    vr += basis[i] * sh[g, i, 0]
                                    vg += basis[i] * sh[g, i, 1]
                                    vb += basis[i] * sh[g, i, 2]

                        ndot = (normals[g, 0] * gNm0 + normals[g, 1] * gNm1 +
                                normals[g, 2] * gNm2)
                        psi = vr * gC0 + vg * gC1 + vb * gC2 + depth[g] * gD + ndot + gA
                        if mode == MODE_TEXTURED:
                            psi += tr * gN0 + tg * gN1 + tb * gN2
                        dalpha = T_j * psi - S / (1.0 - alpha)
                        S += w * psi
                        T_cur = T_j

                        # alpha path
                        if not clamped:
                            do = Gv * dalpha
                            dpower = -opac[g] * Gv * dalpha
                            gb_opac[chunk, g] += do
                            gb_conic[chunk, g, 0] += dpower * 0.5 * dx * dx
                            gb_conic[chunk, g, 1] += dpower * dx * dy
                            gb_conic[chunk, g, 2] += dpower * 0.5 * dy * dy
                            gb_mean2d[chunk, g, 0] -= dpower * (ca * dx + cb_ * dy)
                            gb_mean2d[chunk, g, 1] -= dpower * (cb_ * dx + cc * dy)

                        # composited-quantity paths
                        gb_depth[chunk, g] += w * gD
                        dn0 = w * gNm0
                        dn1 = w * gNm1
                        dn2 = w * gNm2

                        if mode == MODE_VANILLA:
                            wr = w * gC0
                            wg = w * gC1
                            wb = w * gC2
                            for i in range(16):
                                gb_sh[chunk, g, i, 0] += basis[i] * wr
                                gb_sh[chunk, g, i, 1] += basis[i] * wg
                                gb_sh[chunk, g, i, 2] += basis[i] * wb
                        elif mode == MODE_PREFETCH:
                            gb_prefetch[chunk, g, 0] += w * gC0
                            gb_prefetch[chunk, g, 1] += w * gC1
                            gb_prefetch[chunk, g, 2] += w * gC2
                        else:
                            if mode == MODE_TEXTURED:
                                wr = w * gC0
                                wg = w * gC1
                                wb = w * gC2
                                for i in range(16):
                                    gb_sh[chunk, g, i, 0] += basis[i] * wr
                                    gb_sh[chunk, g, i, 1] += basis[i] * wg
                                    gb_sh[chunk, g, i, 2] += basis[i] * wb
                                gt0 = w * (gC0 + gN0)
                                gt1 = w * (gC1 + gN1)
                                gt2 = w * (gC2 + gN2)
                            else:
                                gt0 = w * gC0
                                gt1 = w * gC1
                                gt2 = w * gC2

                            # bilinear adjoint: texel grads plus sample-position grad
                            Ht = tex.shape[0]
                            Wt = tex.shape[1]
                            xq = u * Wt - 0.5
                            yq = v * Ht - 0.5
                            x0 = int(math.floor(xq))
                            yy0 = int(math.floor(yq))
                            fracx = xq - x0
                            fracy = yq - yy0
                            c0 = x0 % Wt
                            if c0 < 0:
                                c0 += Wt
                            c1 = c0 + 1
                            if c1 == Wt:
                                c1 = 0
                            r0 = min(max(yy0, 0), Ht - 1)
                            r1 = min(max(yy0 + 1, 0), Ht - 1)
                            w00 = (1.0 - fracx) * (1.0 - fracy)
                            w01 = fracx * (1.0 - fracy)
                            w10 = (1.0 - fracx) * fracy
                            w11 = fracx * fracy
                            gb_tex[chunk, r0, c0, 0] += w00 * gt0
                            gb_tex[chunk, r0, c0, 1] += w00 * gt1
                            gb_tex[chunk, r0, c0, 2] += w00 * gt2
                            gb_tex[chunk, r0, c1, 0] += w01 * gt0
                            gb_tex[chunk, r0, c1, 1] += w01 * gt1
                            gb_tex[chunk, r0, c1, 2] += w01 * gt2
                            gb_tex[chunk, r1, c0, 0] += w10 * gt0
                            gb_tex[chunk, r1, c0, 1] += w10 * gt1
                            gb_tex[chunk, r1, c0, 2] += w10 * gt2
                            gb_tex[chunk, r1, c1, 0] += w11 * gt0
                            gb_tex[chunk, r1, c1, 1] += w11 * gt1
                            gb_tex[chunk, r1, c1, 2] += w11 * gt2

                            if want_geom and not grazing:
                                # d(sample)/d(u, v) through the bilinear weights
                                ddtx = ((1.0 - fracy) * (tex[r0, c1, 0] - tex[r0, c0, 0]) + fracy * (tex[r1, c1, 0] - tex[r1, c0, 0])) * gt0 \
                                    + ((1.0 - fracy) * (tex[r0, c1, 1] - tex[r0, c0, 1]) + fracy * (tex[r1, c1, 1] - tex[r1, c0, 1])) * gt1 \
                                    + ((1.0 - fracy) * (tex[r0, c1, 2] - tex[r0, c0, 2]) + fracy * (tex[r1, c1, 2] - tex[r1, c0, 2])) * gt2
                                ddty = ((1.0 - fracx) * (tex[r1, c0, 0] - tex[r0, c0, 0]) + fracx * (tex[r1, c1, 0] - tex[r0, c1, 0])) * gt0 \
                                    + ((1.0 - fracx) * (tex[r1, c0, 1] - tex[r0, c0, 1]) + fracx * (tex[r1, c1, 1] - tex[r0, c1, 1])) * gt1 \
                                    + ((1.0 - fracx) * (tex[r1, c0, 2] - tex[r0, c0, 2]) + fracx * (tex[r1, c1, 2] - tex[r0, c1, 2])) * gt2
                                du = ddtx * Wt
                                dv = ddty * Ht if 0.0 <= vraw <= 1.0 else 0.0

                                doff0 = jac[g, 0, 0] * du + jac[g, 1, 0] * dv
                                doff1 = jac[g, 0, 1] * du + jac[g, 1, 1] * dv
                                doff2 = jac[g, 0, 2] * du + jac[g, 1, 2] * dv

                                dlc0 = rot[g, 0, 0] * doff0 + rot[g, 1, 0] * doff1 + rot[g, 2, 0] * doff2
                                dlc1 = rot[g, 0, 1] * doff0 + rot[g, 1, 1] * doff1 + rot[g, 2, 1] * doff2
                                dlc2 = rot[g, 0, 2] * doff0 + rot[g, 1, 2] * doff1 + rot[g, 2, 2] * doff2
                                # off = R @ lc
                                gb_rot[chunk, g, 0, 0] += doff0 * l0
                                gb_rot[chunk, g, 0, 1] += doff0 * l1
                                gb_rot[chunk, g, 0, 2] += doff0 * l2
                                gb_rot[chunk, g, 1, 0] += doff1 * l0
                                gb_rot[chunk, g, 1, 1] += doff1 * l1
                                gb_rot[chunk, g, 1, 2] += doff1 * l2
                                gb_rot[chunk, g, 2, 0] += doff2 * l0
                                gb_rot[chunk, g, 2, 1] += doff2 * l1
                                gb_rot[chunk, g, 2, 2] += doff2 * l2

                                dy0 = dy1 = dy2 = 0.0
                                if y0 < -bound[g, 0] or y0 > bound[g, 0]:
                                    sgn = 1.0 if y0 > 0.0 else -1.0
                                    gb_sclamp[chunk, g, 0] += sgn * bound[g, 0] * dlc0
                                else:
                                    dy0 = dlc0
                                if y1 < -bound[g, 1] or y1 > bound[g, 1]:
                                    sgn = 1.0 if y1 > 0.0 else -1.0
                                    gb_sclamp[chunk, g, 1] += sgn * bound[g, 1] * dlc1
                                else:
                                    dy1 = dlc1
                                if y2 < -bound[g, 2] or y2 > bound[g, 2]:
                                    sgn = 1.0 if y2 > 0.0 else -1.0
                                    gb_sclamp[chunk, g, 2] += sgn * bound[g, 2] * dlc2
                                else:
                                    dy2 = dlc2

                                # y = R^T delta
                                ddl0 = rot[g, 0, 0] * dy0 + rot[g, 0, 1] * dy1 + rot[g, 0, 2] * dy2
                                ddl1 = rot[g, 1, 0] * dy0 + rot[g, 1, 1] * dy1 + rot[g, 1, 2] * dy2
                                ddl2 = rot[g, 2, 0] * dy0 + rot[g, 2, 1] * dy1 + rot[g, 2, 2] * dy2
                                dl0_ = origin[0] + tau * d0 - mu[g, 0]
                                dl1_ = origin[1] + tau * d1 - mu[g, 1]
                                dl2_ = origin[2] + tau * d2 - mu[g, 2]
                                gb_rot[chunk, g, 0, 0] += dl0_ * dy0
                                gb_rot[chunk, g, 0, 1] += dl0_ * dy1
                                gb_rot[chunk, g, 0, 2] += dl0_ * dy2
                                gb_rot[chunk, g, 1, 0] += dl1_ * dy0
                                gb_rot[chunk, g, 1, 1] += dl1_ * dy1
                                gb_rot[chunk, g, 1, 2] += dl1_ * dy2
                                gb_rot[chunk, g, 2, 0] += dl2_ * dy0
                                gb_rot[chunk, g, 2, 1] += dl2_ * dy1
                                gb_rot[chunk, g, 2, 2] += dl2_ * dy2

                                # delta = I - mu; I = o + tau d
                                gb_mu[chunk, g, 0] -= ddl0
                                gb_mu[chunk, g, 1] -= ddl1
                                gb_mu[chunk, g, 2] -= ddl2
                                dtau = d0 * ddl0 + d1 * ddl1 + d2 * ddl2
                                n0 = normals[g, 0]
                                n1 = normals[g, 1]
                                n2 = normals[g, 2]
                                gb_mu[chunk, g, 0] += dtau * n0 / dn
                                gb_mu[chunk, g, 1] += dtau * n1 / dn
                                gb_mu[chunk, g, 2] += dtau * n2 / dn
                                dn0 += dtau * ((mu[g, 0] - origin[0]) - tau * d0) / dn
                                dn1 += dtau * ((mu[g, 1] - origin[1]) - tau * d1) / dn
                                dn2 += dtau * ((mu[g, 2] - origin[2]) - tau * d2) / dn

                        gb_nvec[chunk, g, 0] += dn0
                        gb_nvec[chunk, g, 1] += dn1
                        gb_nvec[chunk, g, 2] += dn2
