"""Compiled inner loops: polynomial roots, branch continuation, pullback chains.

All polynomials are ascending, padded to ``d + 1`` coefficients.  A map is
the pair ``(p, q)``; preimages of ``v`` are the roots of ``p - v q``.

Curves are stored as a *spine* (open polyline starting at the known center
point) followed by a closed *loop*.  Every vertex carries its *base* point:
the exact point it represents at the level where the curve was seeded, so
refinement can insert exact curve points instead of chord midpoints.
"""

import math

import numpy as np
from numba import njit

OK = 0
AMBIGUOUS = 1
NEWTON_FAIL = 2
CAP = 3
NOT_CLOSED = 4
ESCAPED = 5
CROSSCHECK = 6

STATUS_NAMES = {
    OK: "ok",
    AMBIGUOUS: "ambiguous branch",
    NEWTON_FAIL: "refinement did not converge",
    CAP: "vertex cap reached",
    NOT_CLOSED: "loop did not close",
    ESCAPED: "lift left the plane",
    CROSSCHECK: "enclosed critical point does not map into the disc",
}

FAR = 1e30
MAX_ABS = 1e8


@njit(cache=True)
def polyval(c, z):
    acc = 0j
    for k in range(c.size - 1, -1, -1):
        acc = acc * z + c[k]
    return acc


@njit(cache=True)
def polyval_d(c, n, z):
    """Value and derivative of c[0..n] at z."""
    acc = 0j
    dacc = 0j
    for k in range(n, -1, -1):
        dacc = dacc * z + acc
        acc = acc * z + c[k]
    return acc, dacc


@njit(cache=True)
def eval_map(p, q, z):
    qv = polyval(q, z)
    pv = polyval(p, z)
    if qv == 0:
        return complex(FAR, 0.0)
    return pv / qv


@njit(cache=True)
def deriv_map(p, q, z):
    n = p.size - 1
    pv, dp = polyval_d(p, n, z)
    qv, dq = polyval_d(q, n, z)
    return (dp * qv - pv * dq) / (qv * qv)


@njit(cache=True)
def _aberth(c, n, z, maxit):
    for _ in range(maxit):
        worst = 0.0
        for i in range(n):
            pv, dv = polyval_d(c, n, z[i])
            if pv == 0:
                continue
            if dv == 0:
                z[i] += 1e-8 * (1.0 + abs(z[i]))
                worst = 1.0
                continue
            ratio = pv / dv
            s = 0j
            for j in range(n):
                if j != i:
                    diff = z[i] - z[j]
                    if diff != 0:
                        s += 1.0 / diff
            den = 1.0 - ratio * s
            step = ratio / den if den != 0 else ratio
            z[i] -= step
            rel = abs(step) / (1.0 + abs(z[i]))
            if rel > worst:
                worst = rel
        if worst < 1e-15:
            return True
    return False


@njit(cache=True)
def roots_of(c, d, out, warm):
    """Roots of the degree-<=d polynomial c into ``out`` (length d).

    ``warm`` uses the current content of ``out`` as initial guesses.  Roots
    lost to a degree drop are reported as ``FAR``.
    """
    scale = 0.0
    for k in range(d + 1):
        if abs(c[k]) > scale:
            scale = abs(c[k])
    n = d
    while n > 0 and abs(c[n]) <= 1e-14 * scale:
        n -= 1
    for k in range(n, d):
        out[k] = complex(FAR, 0.0)
    if n == 0:
        return
    if n == 1:
        out[0] = -c[0] / c[1]
        return
    if n == 2:
        a = c[2]
        b = c[1]
        cc = c[0]
        disc = np.sqrt(b * b - 4.0 * a * cc)
        if abs(b + disc) >= abs(b - disc):
            qq = -0.5 * (b + disc)
        else:
            qq = -0.5 * (b - disc)
        if qq == 0:
            out[0] = 0j
            out[1] = 0j
        else:
            r1 = qq / a
            r2 = cc / qq
            if warm and abs(out[0] - r2) + abs(out[1] - r1) < abs(out[0] - r1) + abs(out[1] - r2):
                out[0] = r2
                out[1] = r1
            else:
                out[0] = r1
                out[1] = r2
        return
    if not warm:
        bound = 0.0
        for k in range(n):
            v = (abs(c[k]) / abs(c[n])) ** (1.0 / (n - k))
            if v > bound:
                bound = v
        for k in range(n):
            out[k] = bound * np.exp(1j * (2.0 * np.pi * k / n + 0.4))
    _aberth(c, n, out, 200)


@njit(cache=True)
def _target_coeffs(p, q, v, c):
    for k in range(p.size):
        c[k] = p[k] - v * q[k]


@njit(cache=True)
def iterate_with_deriv(p, q, z, steps):
    """f^steps(z) and its Euclidean derivative."""
    dz = 1.0 + 0j
    for _ in range(steps):
        dz *= deriv_map(p, q, z)
        z = eval_map(p, q, z)
    return z, dz


@njit(cache=True)
def newton_level(p, q, target, guess, steps, tol_scale):
    """Solve f^steps(v) = target starting at guess; returns (v, ok)."""
    if steps == 0:
        return target, True
    v = guess
    for _ in range(60):
        fv, dv = iterate_with_deriv(p, q, v, steps)
        err = fv - target
        if abs(err) <= 1e-13 * (1.0 + abs(target)):
            return v, True
        if dv == 0 or not np.isfinite(dv.real) or not np.isfinite(dv.imag):
            return v, False
        v = v - err / dv
        if abs(v - guess) > 10.0 * tol_scale:
            return v, False
    fv, dv = iterate_with_deriv(p, q, v, steps)
    return v, abs(fv - target) <= 1e-9 * (1.0 + abs(target))


@njit(cache=True)
def _base_mid(ba, bb, arc, bc, br):
    if not arc:
        return 0.5 * (ba + bb)
    u = (ba - bc) + (bb - bc)
    if abs(u) < 1e-14 * br:
        u = (ba - bc) * 1j
    return bc + br * u / abs(u)


@njit(cache=True)
def _pick(roots, d, w):
    best = 0
    d1 = 1e300
    d2 = 1e300
    for k in range(d):
        dist = abs(roots[k] - w)
        if dist < d1:
            d2 = d1
            d1 = dist
            best = k
        elif dist < d2:
            d2 = dist
    return best, d1, d2


@njit(cache=True)
def _lift_segment(p, q, d, va, ba, vb, bb, arc, bc, br, level, w, roots,
                  out_v, out_b, n_out, amb, max_depth, coeffs):
    """Continue the lift ``w`` of ``va`` along the edge va -> vb.

    Appends the lifts of inserted refinement vertices and of ``vb`` to
    ``out_v``/``out_b``.  ``roots`` holds the roots for ``va`` on entry and
    for ``vb`` on exit.  Returns (n_out, w_new, status).
    """
    cap = out_v.size
    # explicit stack of pending targets (image point, base point, depth)
    st_v = np.empty(max_depth + 2, np.complex128)
    st_b = np.empty(max_depth + 2, np.complex128)
    st_depth = np.empty(max_depth + 2, np.int64)
    top = 0
    st_v[0] = vb
    st_b[0] = bb
    st_depth[0] = 0
    cur_v = va
    cur_b = ba
    trial = np.empty(d, np.complex128)
    while top >= 0:
        tv = st_v[top]
        tb = st_b[top]
        dep = st_depth[top]
        for k in range(d):
            trial[k] = roots[k]
        _target_coeffs(p, q, tv, coeffs)
        roots_of(coeffs, d, trial, True)
        idx, d1, d2 = _pick(trial, d, w)
        # a multiple root at the current vertex: every local branch is equivalent
        _, t1, twin = _pick(roots, d, w)
        if d1 > amb * d2 and twin > 1e-9 * (1.0 + abs(w)):
            if dep >= max_depth:
                return n_out, w, AMBIGUOUS
            mb = _base_mid(cur_b, tb, arc, bc, br)
            guess = 0.5 * (cur_v + tv)
            mv, ok = newton_level(p, q, mb, guess, level, abs(tv - cur_v) + 1e-300)
            if not ok or abs(mv - guess) > abs(tv - cur_v) + 1e-12 * (1.0 + abs(guess)):
                return n_out, w, NEWTON_FAIL
            top += 1
            st_v[top] = mv
            st_b[top] = mb
            st_depth[top] = dep + 1
            continue
        w = trial[idx]
        if abs(w) > MAX_ABS:
            return n_out, w, ESCAPED
        for k in range(d):
            roots[k] = trial[k]
        if n_out >= cap:
            return n_out, w, CAP
        out_v[n_out] = w
        out_b[n_out] = tb
        n_out += 1
        cur_v = tv
        cur_b = tb
        top -= 1
    return n_out, w, OK


@njit(cache=True)
def lift_step(p, q, d, spine, spine_b, loop, loop_b, w_start, level, bc, br,
              amb, max_depth, cap):
    """Lift spine + loop one step backwards, continuing from ``w_start``.

    ``w_start`` must be (close to) a preimage of ``spine[0]``; ``level`` is the
    number of forward steps from the current image level down to the base.
    Returns (spine', spine_b', loop', loop_b', n_loops, status).
    """
    coeffs = np.empty(d + 1, np.complex128)
    roots = np.empty(d, np.complex128)
    _target_coeffs(p, q, spine[0], coeffs)
    roots_of(coeffs, d, roots, False)
    idx, d1, d2 = _pick(roots, d, w_start)
    w = roots[idx]

    sv = np.empty(cap, np.complex128)
    sb = np.empty(cap, np.complex128)
    sv[0] = w
    sb[0] = spine_b[0]
    ns = 1
    status = OK
    for k in range(1, spine.size):
        ns, w, status = _lift_segment(p, q, d, spine[k - 1], spine_b[k - 1], spine[k], spine_b[k],
                                      False, bc, br, level, w, roots, sv, sb, ns, amb, max_depth, coeffs)
        if status != OK:
            return sv[:ns], sb[:ns], sv[:0], sb[:0], 0, status

    # loop[0] coincides with the last spine vertex
    lv = np.empty(cap, np.complex128)
    lb = np.empty(cap, np.complex128)
    w0 = w
    roots0 = roots.copy()
    lv[0] = w0
    lb[0] = loop_b[0]
    nl = 1
    m = loop.size
    for rep in range(d):
        for k in range(1, m + 1):
            a = k - 1
            b = k % m
            nl, w, status = _lift_segment(p, q, d, loop[a], loop_b[a], loop[b], loop_b[b],
                                          True, bc, br, level, w, roots, lv, lb, nl, amb, max_depth, coeffs)
            if status != OK:
                return sv[:ns], sb[:ns], lv[:nl], lb[:nl], rep + 1, status
        # the last appended vertex is the lift of loop[0] after rep + 1 turns
        sep = 1e300
        for j in range(d):
            dist = abs(roots0[j] - w0)
            if dist > 0 and dist < sep:
                sep = dist
        nl -= 1
        if abs(w - w0) < 0.25 * sep:
            return sv[:ns], sb[:ns], lv[:nl], lb[:nl], rep + 1, OK
        lv[nl] = w
        lb[nl] = loop_b[0]
        nl += 1
    return sv[:ns], sb[:ns], lv[:nl], lb[:nl], d, NOT_CLOSED


@njit(cache=True)
def winding(loop, c):
    total = 0.0
    m = loop.size
    for k in range(m):
        a = loop[k] - c
        b = loop[(k + 1) % m] - c
        if a == 0 or b == 0:
            return 1
        total += np.angle(b / a)
    return int(np.round(total / (2.0 * np.pi)))


@njit(cache=True)
def chordal_diameter(pts):
    best = 0.0
    m = pts.size
    for i in range(m):
        zi = pts[i]
        si = 1.0 + abs(zi) ** 2
        for j in range(i + 1, m):
            zj = pts[j]
            dd = 2.0 * abs(zi - zj) / math.sqrt(si * (1.0 + abs(zj) ** 2))
            if dd > best:
                best = dd
    return best


@njit(cache=True)
def chordal_disc(y, r):
    k = r * r * (1.0 + abs(y) ** 2) / 4.0
    center = y / (1.0 - k)
    radius = math.sqrt(k * (1.0 + abs(y) ** 2 - k)) / (1.0 - k)
    return center, radius


@njit(cache=True)
def circle_curve(center, spine_start, ec, er, m):
    """Spine from ``spine_start`` to the circle plus the circle itself (m vertices)."""
    loop = np.empty(m, np.complex128)
    for k in range(m):
        # generic phase so that real maps do not put vertices on the real axis
        loop[k] = ec + er * np.exp(1j * (0.7853981 + 2.0 * np.pi * k / m))
    spine = np.empty(2, np.complex128)
    spine[0] = spine_start
    spine[1] = loop[0]
    return spine, loop


@njit(cache=True)
def _decimate(loop, loop_b, limit):
    if loop.size <= limit:
        return loop, loop_b
    keep = np.arange(0, loop.size, 2)
    return loop[keep].copy(), loop_b[keep].copy()


@njit(cache=True)
def inside_mult(loop, crit, mult):
    total = 0
    for i in range(crit.size):
        if winding(loop, crit[i]) != 0:
            total += mult[i]
    return total


@njit(cache=True)
def chain(p, q, d, crit, mult, cvals, aq, qdeg, orbit, n, r_chordal, m0, d_stop,
          amb, max_depth, cap, switch_ratio):
    """Pull B(orbit[n], r_chordal) back along orbit[n-1], ..., orbit[0].

    Geometric continuation is used while the component is large compared to
    its distance from the critical values; afterwards the component is
    tracked as an enclosing disc with Koebe distortion control, reseeding the
    geometry when a critical value comes close.

    Returns (status, criticality, log_chordal_diam, geometric_steps).
    Criticality is the sum of multiplicities of critical points of f found in
    the successive components; the loop stops early once it exceeds d_stop.
    """
    y = orbit[n]
    ec, er = chordal_disc(y, r_chordal)
    spine, loop = circle_curve(y, y, ec, er, m0)
    spine_b = spine.copy()
    loop_b = loop.copy()
    bc = ec
    br = er
    base_level = 0
    geo = True
    log_rho = 0.0
    crit_sum = 0
    n_geo = 0
    ncrit = crit.size
    for t in range(1, n + 1):
        img = orbit[n - t + 1]
        pre = orbit[n - t]
        if not geo:
            # enclosing disc B(img, rho) -> component around pre
            R = 1e300
            ci = -1
            for i in range(ncrit):
                dist = abs(img - cvals[i])
                if dist < R:
                    R = dist
                    ci = i
            rho = math.exp(log_rho)
            if R > 0 and log_rho < math.log(switch_ratio) + math.log(R):
                fp = abs(deriv_map(p, q, pre))
                log_rho = log_rho - math.log(fp) - 2.0 * math.log1p(-rho / R)
                continue
            if rho >= 1e-11 * (1.0 + abs(img)):
                spine, loop = circle_curve(img, img, img, rho, m0)
                spine_b = spine.copy()
                loop_b = loop.copy()
                bc = img
                br = rho
                base_level = t - 1
                geo = True
            else:
                if R < 2.0 * rho:
                    crit_sum += mult[ci]
                    if crit_sum > d_stop:
                        return OK, crit_sum, 0.0, n_geo
                    r_new = abs(pre - crit[ci]) + (2.0 * rho / aq[ci]) ** (1.0 / qdeg[ci])
                    log_rho = math.log(r_new)
                else:
                    fp = abs(deriv_map(p, q, pre))
                    if fp == 0:
                        return AMBIGUOUS, crit_sum, 0.0, n_geo
                    log_rho = log_rho - math.log(fp) - 2.0 * math.log1p(-rho / R)
                continue
        # geometric step
        spine[0] = img
        level = t - 1 - base_level
        spine, spine_b, loop, loop_b, loops, status = lift_step(
            p, q, d, spine, spine_b, loop, loop_b, pre, level, bc, br, amb, max_depth, cap)
        n_geo += 1
        if status != OK:
            return status, crit_sum, 0.0, n_geo
        spine[0] = pre
        inside = 0
        for i in range(ncrit):
            if winding(loop, crit[i]) != 0:
                inside += mult[i]
                # the image of an enclosed critical point must lie in the base disc
                z, _ = iterate_with_deriv(p, q, crit[i], t - base_level)
                if abs(z - bc) > br * (1.0 + 1e-6) + 1e-12:
                    return CROSSCHECK, crit_sum, 0.0, n_geo
        if inside != loops - 1:
            return NOT_CLOSED, crit_sum, 0.0, n_geo
        crit_sum += inside
        if crit_sum > d_stop:
            return OK, crit_sum, 0.0, n_geo
        loop, loop_b = _decimate(loop, loop_b, cap // 4)
        rho = 0.0
        for k in range(loop.size):
            dist = abs(loop[k] - pre)
            if dist > rho:
                rho = dist
        R = 1e300
        for i in range(ncrit):
            dist = abs(pre - cvals[i])
            if dist < R:
                R = dist
        if t < n and (rho < switch_ratio * R or rho < 1e-11 * (1.0 + abs(pre))):
            geo = False
            log_rho = math.log(rho)
    if geo:
        diam = chordal_diameter(loop)
        return OK, crit_sum, math.log(diam) if diam > 0 else -1e300, n_geo
    x0 = orbit[0]
    return OK, crit_sum, log_rho + math.log(2.0 * 2.0 / (1.0 + abs(x0) ** 2)), n_geo


@njit(cache=True)
def chain_all(p, q, d, crit, mult, cvals, aq, qdeg, orbit, n_max, r_chordal, m0, d_stop,
              amb, max_depth, cap, switch_ratio):
    """Run :func:`chain` for every n = 1..n_max on one orbit."""
    status = np.zeros(n_max + 1, np.int64)
    crit_out = np.zeros(n_max + 1, np.int64)
    logd = np.zeros(n_max + 1)
    ec, er = chordal_disc(orbit[0], r_chordal)
    # n = 0: the disc itself
    logd[0] = math.log(r_chordal * 2.0)
    for n in range(1, n_max + 1):
        s, c, ld, _ = chain(p, q, d, crit, mult, cvals, aq, qdeg, orbit, n, r_chordal, m0,
                            d_stop, amb, max_depth, cap, switch_ratio)
        status[n] = s
        crit_out[n] = c
        logd[n] = ld
    return status, crit_out, logd


@njit(cache=True)
def blaschke_scan(zeros, degs, grid, ts, bound_scale):
    """Scan sublevel sets {|h| < t} of the Blaschke products with the given zeros."""
    nt = ts.size
    viol = np.zeros(nt, np.int64)
    fviol = np.zeros(nt, np.int64)
    excess = np.full(nt, -np.inf)
    rmax = np.zeros(nt)
    tmax = ts.max()
    for tr in range(zeros.shape[0]):
        m = degs[tr]
        for gi in range(grid.size):
            u = grid[gi]
            # squared moduli of the factors avoid square roots in the inner loop
            h2 = 1.0
            smin2 = 1.0
            for k in range(m):
                a = zeros[tr, k]
                num = u - a
                den = 1.0 - np.conj(a) * u
                s2 = (num.real * num.real + num.imag * num.imag) / (den.real * den.real + den.imag * den.imag)
                if s2 < smin2:
                    smin2 = s2
                h2 *= s2
            if not h2 < tmax * tmax:
                continue
            h = math.sqrt(h2)
            smin = math.sqrt(smin2)
            rho = math.log((1.0 + smin) / (1.0 - smin))
            for i in range(nt):
                if h < ts[i]:
                    bound = bound_scale * (math.log(2.0 * m) - math.log1p(-ts[i]))
                    if rho - bound > excess[i]:
                        excess[i] = rho - bound
                    if rho > bound + 1e-12:
                        viol[i] += 1
                    if not smin < ts[i] ** (1.0 / m):
                        fviol[i] += 1
                    r = abs(u)
                    if r > rmax[i]:
                        rmax[i] = r
    return viol, excess, rmax, fviol


@njit(cache=True)
def backward_walks(p, q, d, starts, choices, burn):
    """Random inverse-branch walks; returns the positions after ``burn`` steps.

    ``choices`` has shape (steps, walkers) with values in [0, 1) used to pick
    a preimage.  Preimages at infinity (degree drop) are skipped.
    """
    steps, walkers = choices.shape
    out = np.empty((steps - burn) * walkers, np.complex128)
    coeffs = np.empty(d + 1, np.complex128)
    roots = np.empty(d, np.complex128)
    for w in range(walkers):
        z = starts[w]
        for s in range(steps):
            for k in range(d + 1):
                coeffs[k] = p[k] - z * q[k]
            roots_of(coeffs, d, roots, False)
            nfin = 0
            for k in range(d):
                if abs(roots[k]) < FAR:
                    nfin += 1
            pick = int(choices[s, w] * nfin)
            if pick >= nfin:
                pick = nfin - 1
            seen = 0
            for k in range(d):
                if abs(roots[k]) < FAR:
                    if seen == pick:
                        z = roots[k]
                        break
                    seen += 1
            if s >= burn:
                out[(s - burn) * walkers + w] = z
    return out


@njit(cache=True)
def escape_times(p, q, z, radius, max_iter):
    out = np.empty(z.size, np.int64)
    for i in range(z.size):
        w = z[i]
        n = 0
        while n < max_iter and abs(w) <= radius:
            w = eval_map(p, q, w)
            n += 1
        out[i] = n if abs(w) > radius else -1
    return out


@njit(cache=True)
def distance_estimates(p, z, bail, max_iter):
    """Exterior distance estimate |w| log|w| / |w'| for a polynomial; 0 when not escaping."""
    out = np.zeros(z.size)
    n = p.size - 1
    for i in range(z.size):
        w = z[i]
        dw = 1.0 + 0j
        k = 0
        while k < max_iter and abs(w) <= bail:
            v, dv = polyval_d(p, n, w)
            dw = dv * dw
            w = v
            k += 1
        if abs(w) > bail and dw != 0:
            a = abs(w)
            out[i] = 0.5 * a * math.log(a) / abs(dw)
    return out
