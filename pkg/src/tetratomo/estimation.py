"""Maximum-likelihood state reconstruction from detector clicks.

Four-outcome data are handled by the multiplier method: if the relative
frequencies are themselves admissible probabilities they are the estimate,
otherwise the estimate sits on the Bloch sphere and is fixed by a single scalar
equation for the multiplier ``mu`` of the purity constraint.

Likelihoods of the generic form ``sum_k w_k log(1 + c_k.s)`` (six-outcome
device, clicks collected with differing frames, pure-state fits of interior
data) are maximized by a batched Riemannian Newton iteration on the sphere.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bloch import REFERENCE_FRAME, STANDARD_SIX, SixFrame, TetraFrame
from .clicks import ClickCounts
from .errors import AllZeroProb, DomainError, EmptyAxis, EmptyData, InvalidProbabilities, NoRoot

INTERIOR = "interior"
BOUNDARY = "boundary"
AUTO = "auto"
FORCE_BOUNDARY = "force-boundary"

# frequencies this close to the purity bound count as interior data
CRITICAL_TOL = 1e-12
SPHERE_TOL = 1e-9

_CUBE_CORNERS = np.array(
    [[i, j, k] for i in (1, -1) for j in (1, -1) for k in (1, -1)], dtype=float
) / np.sqrt(3.0)
_AXES = np.concatenate([np.eye(3), -np.eye(3)])


@dataclass
class Estimate:
    """ML estimate ``S`` together with the fitted probabilities and multiplier."""

    S: np.ndarray
    ptilde: np.ndarray
    mu: float
    branch: str
    loglik: float
    degenerate: bool = False

    def to_json(self):
        return {
            "S": [float(x) for x in self.S],
            "ptilde": [float(x) for x in self.ptilde],
            "mu": float(self.mu),
            "branch": self.branch,
            "loglik": float(self.loglik),
            "degenerate": bool(self.degenerate),
        }


def _counts_array(counts, k):
    if isinstance(counts, ClickCounts):
        counts = counts.n
    n = np.asarray(counts, dtype=float)
    if n.shape[-1:] != (k,):
        raise ValueError(f"expected {k} counts per record, got shape {n.shape}")
    if np.any(n < 0):
        raise ValueError("counts must be non-negative")
    return n


def _frequencies(counts):
    n = _counts_array(counts, 4)
    N = n.sum(axis=-1)
    if np.any(N <= 0):
        raise EmptyData("no clicks recorded (N = 0)")
    return n, n / N[..., None]


def _loglik(n, p):
    """``sum n log p`` with the convention ``0 log 0 = 0``."""
    if np.any((n > 0) & (p <= 0)):
        raise AllZeroProb("a fitted probability vanished for an observed outcome")
    with np.errstate(divide="ignore"):
        logp = np.log(np.where(n > 0, p, 1.0))
    return np.sum(n * logp, axis=-1)


def naive_estimator(counts, frame: TetraFrame = REFERENCE_FRAME):
    """``S = 3 sum_j nu_j a_j``; may fall outside the Bloch ball."""
    _, nu = _frequencies(counts)
    return 3.0 * nu @ frame.vectors


def check_inequality(counts):
    """True when the relative frequencies are admissible probabilities (sum nu^2 <= 1/3)."""
    _, nu = _frequencies(counts)
    return np.sum(nu * nu, axis=-1) <= 1.0 / 3.0 + CRITICAL_TOL


def multiplier_residual(mu, nu):
    """Left-hand side of ``mu + 2 - 1/2 sum_j sqrt((1-mu)^2 + 12 mu nu_j) = 0``."""
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    root = np.sqrt((1.0 - mu[..., None]) ** 2 + 12.0 * mu[..., None] * nu)
    return mu + 2.0 - 0.5 * root.sum(axis=-1)


def _scaled_residual(mu, nu):
    """Residual divided by ``6 mu^2``, finite and nonzero at ``mu -> 0``.

    Zero-frequency detectors are kept separate: their term is not continuous
    in ``nu`` once ``mu > 1``.
    """
    m = mu[:, None]
    lam = 1.0 - m
    root = np.sqrt(lam * lam + 12.0 * m * nu)
    denom = lam + 6.0 * m * nu + root
    pos = nu > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pos, (3.0 * nu - 1.0) * nu / np.where(pos, denom, 1.0), 0.0)
    n_zero = np.sum(~pos, axis=-1)
    return terms.sum(axis=-1) - n_zero * np.maximum(mu - 1.0, 0.0) / (6.0 * mu * mu)


def solve_mu_batch(nu, max_iter=200):
    """Relevant root in ``(0, 2]`` of the multiplier equation, one per row of ``nu``.

    Plain bisection on the scaled residual, which is positive at ``mu -> 0``
    for data violating the purity bound.
    """
    nu = np.atleast_2d(np.asarray(nu, dtype=float))
    if np.any(np.abs(nu.sum(axis=-1) - 1.0) > 1e-9):
        raise InvalidProbabilities("frequencies must sum to 1")
    if np.any(np.sum(nu * nu, axis=-1) <= 1.0 / 3.0):
        raise DomainError("frequencies obey the purity bound; only mu = 0 applies")
    B = nu.shape[0]
    lo = np.zeros(B)
    hi = np.full(B, 2.0)
    g_hi = _scaled_residual(hi, nu)
    if np.any(g_hi > 1e-12):
        raise NoRoot(f"multiplier equation has no sign change in (0, 2]: {g_hi.max():.3g}")
    top = g_hi >= -1e-15
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        up = _scaled_residual(mid, nu) > 0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    mu = np.where(top, 2.0, 0.5 * (lo + hi))
    resid = np.abs(multiplier_residual(mu, nu))
    if np.any(resid > 1e-12):
        raise NoRoot(f"multiplier residual {resid.max():.3g} above tolerance")
    return mu


def solve_mu(nu):
    """Scalar version of :func:`solve_mu_batch`."""
    return float(solve_mu_batch(np.asarray(nu, dtype=float)[None, :])[0])


def boundary_probabilities(nu, mu):
    """Fitted probabilities on the sphere for multiplier ``mu`` (``lambda = 1 - mu``)."""
    nu = np.asarray(nu, dtype=float)
    mu = np.asarray(mu, dtype=float)[..., None]
    lam = 1.0 - mu
    root = np.sqrt(lam * lam + 12.0 * mu * nu)
    with np.errstate(divide="ignore", invalid="ignore"):
        # both forms avoid cancellation in their own range
        small = 2.0 * nu / (lam + root)
        large = (root - lam) / (6.0 * mu)
    return np.where(lam > 0, small, large)


# --------------------------------------------------------------------------
# generic sphere maximization of sum_k w_k log(1 + c_k.s)


def _objective(C, W, s):
    z = 1.0 + np.matmul(C, s[..., None])[..., 0]
    pos = W > 0
    bad = np.any(pos & (z <= 0), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.sum(np.where(pos, W * np.log(np.where(pos & (z > 0), z, 1.0)), 0.0), axis=-1)
    f[bad] = -np.inf
    return f


def _gradient_hessian(C, W, s):
    z = 1.0 + np.matmul(C, s[..., None])[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        wz = np.where(W > 0, W / z, 0.0)
        g = np.matmul(wz[:, None, :], C)[:, 0]
        Cw = (wz / np.where(W > 0, z, 1.0))[..., None] * C
        H = -np.matmul(np.swapaxes(Cw, 1, 2), C)
    return g, H


def _radial(C, W, s):
    """``s . grad`` of the log-likelihood sum."""
    z = 1.0 + np.einsum("nkc,nc->nk", C, s)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.sum(np.where(W > 0, W * (z - 1.0) / np.where(W > 0, z, 1.0), 0.0), axis=-1)


def maximize_on_sphere(C, W, starts, tol=SPHERE_TOL, max_iter=100):
    """Maximize ``sum_k W_k log(1 + C_k.s)`` over unit vectors ``s``.

    Parameters
    ----------
    C : array (B, K, 3)
        Direction vectors of each likelihood term.
    W : array (B, K)
        Non-negative weights (click counts).
    starts : array (B, M, 3)
        Starting directions; infeasible ones are ignored.

    Returns
    -------
    s : array (B, 3)
        Best local maximizer over the starts.
    f : array (B,)
        Objective value at ``s``.
    radial : array (B,)
        ``s . grad f``; non-negative when the sphere point is also the
        maximum over the ball.
    """
    C = np.asarray(C, dtype=float)
    W = np.asarray(W, dtype=float)
    starts = np.asarray(starts, dtype=float)
    B, M = starts.shape[:2]
    rows = np.repeat(np.arange(B), M)
    s = starts.reshape(B * M, 3).copy()
    norms = np.linalg.norm(s, axis=-1, keepdims=True)
    s = s / np.where(norms > 0, norms, 1.0)
    Cr, Wr = C[rows], W[rows]
    scale = np.maximum(Wr.sum(axis=-1), 1.0)
    f = _objective(Cr, Wr, s)
    active = np.isfinite(f)
    eye = np.eye(3)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        si, Ci, Wi = s[idx], Cr[idx], Wr[idx]
        g, H = _gradient_hessian(Ci, Wi, si)
        sg = np.sum(si * g, axis=-1)
        rg = g - sg[:, None] * si
        done = np.linalg.norm(rg, axis=-1) <= tol * 1e-1 * scale[idx]
        P = eye - si[:, :, None] * si[:, None, :]
        Hr = P @ H @ P - sg[:, None, None] * P
        A = Hr - si[:, :, None] * si[:, None, :]
        # saddle-free Newton: flip positive curvature so every step ascends;
        # reduces to plain Newton where the tangent Hessian is concave
        lam, Q = np.linalg.eigh(A)
        floor = 1e-12 * scale[idx][:, None]
        lam = -np.maximum(np.abs(lam), floor)
        v = np.einsum("bij,bj->bi", Q, np.einsum("bji,bj->bi", Q, rg) / -lam)
        vn = np.linalg.norm(v, axis=-1, keepdims=True)
        v = v / np.maximum(vn, 1.0)
        t = np.ones(idx.size)
        accepted = np.zeros(idx.size, dtype=bool)
        new_s = si.copy()
        new_f = f[idx].copy()
        pending = ~done
        for _ in range(50):
            k = np.flatnonzero(pending)
            if k.size == 0:
                break
            trial = si[k] + t[k, None] * v[k]
            trial /= np.linalg.norm(trial, axis=-1, keepdims=True)
            ft = _objective(Ci[k], Wi[k], trial)
            # allow a few ulps so converged rows do not halve to nothing
            fk = f[idx[k]]
            ok = ft >= fk - 8.0 * np.finfo(float).eps * np.maximum(np.abs(fk), 1.0)
            new_s[k[ok]] = trial[ok]
            new_f[k[ok]] = ft[ok]
            accepted[k[ok]] = True
            pending[k[ok]] = False
            t[k[~ok]] *= 0.5
        moved = np.linalg.norm(new_s - si, axis=-1)
        s[idx] = new_s
        f[idx] = new_f
        active[idx] = ~done & accepted & (moved > 1e-15)
    f = f.reshape(B, M)
    f_clean = np.where(np.isfinite(f), f, -np.inf)
    best = np.argmax(f_clean, axis=1)
    s = s.reshape(B, M, 3)[np.arange(B), best]
    f_best = f_clean[np.arange(B), best]
    return s, f_best, _radial(C, W, s)


def maximize_in_ball(C, W, tol=SPHERE_TOL, max_iter=200):
    """Damped Newton ascent of ``sum_k W_k log(1 + C_k.s)`` from ``s = 0`` inside the ball.

    Returns the final point and a flag telling whether it is a stationary
    point strictly inside the ball.
    """
    C = np.asarray(C, dtype=float)
    W = np.asarray(W, dtype=float)
    B = C.shape[0]
    s = np.zeros((B, 3))
    f = _objective(C, W, s)
    scale = np.maximum(W.sum(axis=-1), 1.0)
    stationary = np.zeros(B, dtype=bool)
    active = np.ones(B, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        g, H = _gradient_hessian(C[idx], W[idx], s[idx])
        gn = np.linalg.norm(g, axis=-1)
        conv = gn <= tol * 1e-1 * scale[idx]
        stationary[idx[conv]] = True
        ridge = 1e-12 * scale[idx]
        v = np.linalg.solve(-H + ridge[:, None, None] * np.eye(3), g[..., None])[..., 0]
        t = np.ones(idx.size)
        pending = ~conv
        accepted = np.zeros(idx.size, dtype=bool)
        for _ in range(60):
            k = np.flatnonzero(pending)
            if k.size == 0:
                break
            trial = s[idx[k]] + t[k, None] * v[k]
            inside = np.linalg.norm(trial, axis=-1) < 1.0
            ft = np.where(inside, _objective(C[idx[k]], W[idx[k]], trial), -np.inf)
            ok = ft >= f[idx[k]]
            s[idx[k[ok]]] = trial[ok]
            f[idx[k[ok]]] = ft[ok]
            accepted[k[ok]] = True
            pending[k[ok]] = False
            t[k[~ok]] *= 0.5
        active[idx] = ~conv & accepted
    return s, stationary


# --------------------------------------------------------------------------
# four-outcome device


def _vectors_for(frame_or_vectors, B):
    if isinstance(frame_or_vectors, TetraFrame):
        v = frame_or_vectors.vectors
    else:
        v = np.asarray(frame_or_vectors, dtype=float)
    return np.broadcast_to(v, (B, 4, 3)) if v.ndim == 2 else v


def ml_estimate_four_batch(counts, frame=REFERENCE_FRAME, mode=AUTO):
    """Vectorized four-outcome ML estimation.

    ``counts`` has shape ``(B, 4)``; ``frame`` is a :class:`TetraFrame` or an
    array of detector vectors, shape ``(4, 3)`` or ``(B, 4, 3)``.  Returns a
    dict of arrays with keys ``S``, ``ptilde``, ``mu``, ``boundary``,
    ``loglik`` and ``degenerate``.
    """
    if mode not in (AUTO, FORCE_BOUNDARY):
        raise ValueError(f"unknown mode {mode!r}")
    n, nu = _frequencies(np.atleast_2d(counts))
    B = n.shape[0]
    vec = _vectors_for(frame, B)
    violated = np.sum(nu * nu, axis=-1) > 1.0 / 3.0 + CRITICAL_TOL
    ptilde = nu.copy()
    mu = np.zeros(B)
    if np.any(violated):
        mu[violated] = solve_mu_batch(nu[violated])
        ptilde[violated] = boundary_probabilities(nu[violated], mu[violated])
    S = 3.0 * np.einsum("bj,bjc->bc", ptilde, vec)
    boundary = violated.copy()
    degenerate = np.zeros(B, dtype=bool)
    if mode == FORCE_BOUNDARY and not np.all(violated):
        idx = np.flatnonzero(~violated)
        Ci, ni = vec[idx], n[idx]
        naive = S[idx]
        length = np.linalg.norm(naive, axis=-1, keepdims=True)
        first = np.where(length > 1e-12, naive / np.where(length > 0, length, 1.0), Ci[:, 0])
        starts = np.concatenate([first[:, None, :], Ci], axis=1)
        s_sphere, _, _ = maximize_on_sphere(Ci, ni, starts)
        tie = np.all(ni == ni[:, :1], axis=-1)
        # every detector vector is an equally good maximizer; pick the first
        s_sphere[tie] = Ci[tie, 0]
        S[idx] = s_sphere
        ptilde[idx] = 0.25 * (1.0 + np.einsum("bjc,bc->bj", Ci, s_sphere))
        mu[idx] = 4.0 * _radial(Ci, ni, s_sphere) / ni.sum(axis=-1)
        boundary[idx] = True
        degenerate[idx] = tie
    loglik = _loglik(n, ptilde)
    return {
        "S": S,
        "ptilde": ptilde,
        "mu": mu,
        "boundary": boundary,
        "loglik": loglik,
        "degenerate": degenerate,
    }


def ml_estimate_four(counts, frame: TetraFrame = REFERENCE_FRAME, mode=AUTO) -> Estimate:
    """ML estimate from four-detector counts.

    ``mode="auto"`` keeps the relative frequencies when they satisfy the purity
    bound and otherwise solves for the sphere point.  ``mode="force-boundary"``
    always returns a pure state, as appropriate when the source is known to
    emit pure states.
    """
    r = ml_estimate_four_batch(np.asarray(_counts_array(counts, 4))[None, :], frame, mode)
    return Estimate(
        S=r["S"][0],
        ptilde=r["ptilde"][0],
        mu=float(r["mu"][0]),
        branch=BOUNDARY if r["boundary"][0] else INTERIOR,
        loglik=float(r["loglik"][0]),
        degenerate=bool(r["degenerate"][0]),
    )


# --------------------------------------------------------------------------
# six-outcome device


def ml_estimate_six_batch(counts, frame: SixFrame = STANDARD_SIX):
    n = np.atleast_2d(_counts_array(counts, 6))
    pairs = n.reshape(-1, 3, 2)
    totals = pairs.sum(axis=-1)
    if np.any(totals <= 0):
        raise EmptyAxis("a measurement axis has no clicks")
    local = (pairs[..., 0] - pairs[..., 1]) / totals
    S = local @ frame.axes
    outside = np.linalg.norm(local, axis=-1) > 1.0
    mu = np.zeros(n.shape[0])
    if np.any(outside):
        idx = np.flatnonzero(outside)
        C = np.broadcast_to(frame.vectors, (idx.size, 6, 3))
        first = S[idx] / np.linalg.norm(S[idx], axis=-1, keepdims=True)
        corners = np.broadcast_to(_CUBE_CORNERS @ frame.axes, (idx.size, 8, 3))
        starts = np.concatenate([first[:, None, :], corners], axis=1)
        s_sphere, _, radial = maximize_on_sphere(C, n[idx], starts)
        S[idx] = s_sphere
        mu[idx] = radial / n[idx].sum(axis=-1)
    ptilde = (1.0 + S @ frame.vectors.T) / 6.0
    return {"S": S, "ptilde": ptilde, "mu": mu, "boundary": outside, "loglik": _loglik(n, ptilde)}


def ml_estimate_six(counts, frame: SixFrame = STANDARD_SIX) -> Estimate:
    """ML estimate for the six-outcome device, counts ordered x+, x-, y+, y-, z+, z-.

    ``mu`` is the sphere-constraint multiplier ``s.grad(log L) / N`` (zero for
    interior estimates).
    """
    r = ml_estimate_six_batch(counts, frame)
    return Estimate(
        S=r["S"][0],
        ptilde=r["ptilde"][0],
        mu=float(r["mu"][0]),
        branch=BOUNDARY if r["boundary"][0] else INTERIOR,
        loglik=float(r["loglik"][0]),
    )


# --------------------------------------------------------------------------
# clicks collected with differing frames


def click_starts(C, previous=None):
    """Default starting directions for :func:`maximize_on_sphere` on raw clicks."""
    B = C.shape[0]
    centroid = C.sum(axis=1)
    norm = np.linalg.norm(centroid, axis=-1, keepdims=True)
    centroid = np.where(norm > 1e-12, centroid / np.where(norm > 0, norm, 1.0), C[:, 0])
    fixed = np.broadcast_to(np.concatenate([_CUBE_CORNERS, _AXES]), (B, 14, 3))
    parts = [centroid[:, None, :]]
    if previous is not None:
        parts.append(np.asarray(previous, dtype=float).reshape(B, 1, 3))
    parts.append(fixed)
    return np.concatenate(parts, axis=1)


def ml_estimate_clicks_batch(vectors, mode=FORCE_BOUNDARY, weights=None, previous=None):
    """Batched :func:`ml_estimate_clicks` for records of equal length, shape (B, n, 3)."""
    C = np.asarray(vectors, dtype=float)
    if C.ndim != 3 or C.shape[2] != 3 or C.shape[1] == 0:
        raise EmptyData("need at least one click vector of shape (3,) per record")
    if mode not in (AUTO, FORCE_BOUNDARY):
        raise ValueError(f"unknown mode {mode!r}")
    B = C.shape[0]
    W = np.ones(C.shape[:2]) if weights is None else np.broadcast_to(weights, C.shape[:2]).astype(float)
    N = W.sum(axis=-1)
    s, _, radial = maximize_on_sphere(C, W, click_starts(C, previous))
    branch = np.full(B, BOUNDARY, dtype=object)
    if mode == AUTO:
        low = np.flatnonzero(radial <= SPHERE_TOL * N)
        if low.size:
            inner, stationary = maximize_in_ball(C[low], W[low])
            hit = low[stationary]
            s[hit] = inner[stationary]
            radial[hit] = 0.0
            branch[hit] = INTERIOR
    p = 0.25 * (1.0 + np.einsum("bnc,bc->bn", C, s))
    out = []
    for b in range(B):
        out.append(
            Estimate(
                S=s[b],
                ptilde=p[b],
                mu=float(4.0 * radial[b] / N[b]) if branch[b] == BOUNDARY else 0.0,
                branch=branch[b],
                loglik=float(_loglik(W[b], p[b])),
            )
        )
    return out


def ml_estimate_clicks(vectors, mode=FORCE_BOUNDARY, weights=None) -> Estimate:
    """ML estimate from individual clicks, each with its own detector vector.

    Click ``i`` was registered by a detector with unit vector ``vectors[i]``,
    so its probability is ``(1 + vectors[i].s) / 4`` whatever frame was in use.
    ``ptilde`` holds these fitted probabilities per click and ``mu`` equals
    ``4 s.grad(log L) / N``, which reduces to the four-outcome multiplier for
    a single frame.

    In ``auto`` mode the maximum over the whole Bloch ball is returned.  When
    that maximum is not unique, the minimum-norm maximizer is taken.
    """
    C = np.asarray(vectors, dtype=float)
    if C.ndim != 2 or C.shape[1] != 3 or C.shape[0] == 0:
        raise EmptyData("need at least one click vector of shape (3,)")
    w = None if weights is None else np.asarray(weights, dtype=float)[None]
    return ml_estimate_clicks_batch(C[None], mode, w)[0]
