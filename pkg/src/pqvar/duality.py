"""Numerical Fenchel conjugation and the duality identities it supports.

The conjugate F*(xi) = sup_z <z, xi> - F(z) is computed by damped Newton on the
strictly concave objective.  For the strictly convex superlinear integrands in
this package the supremum is attained at the unique z with F'(z) = xi, which is
why the same iteration also inverts the gradient map.
"""

import math
from dataclasses import dataclass

import numpy as np

from .integrands import Integrand, flatten_form, frob2, inner, v_map
from .model import Regime

DEFAULT_TOL = 1e-10
MAX_ITERS = 200
CONDITION_LIMIT = 1e12


class NonConvergenceError(RuntimeError):
    """Newton failed to reach the residual tolerance; usually an ill-conditioned custom integrand."""

    def __init__(self, message, z=None, residual=None):
        super().__init__(message)
        self.z = z
        self.residual = residual


class SingularHessianError(ArithmeticError):
    """Hessian not invertible (the mu = 0, z = 0 corner)."""


@dataclass
class ConjugateResult:
    value: float
    argmax: np.ndarray
    newton_iters: int
    residual: float


def _maximize_concave(value_fn, grad_fn, neg_hess_fn, z0, tol, max_iters):
    """Damped Newton ascent for a strictly concave objective.

    grad_fn returns the gradient (N, n); neg_hess_fn the negated hessian (positive
    definite away from degenerate corners).  Falls back to scaled gradient steps
    when the hessian is singular or too ill-conditioned (Cholesky-diagonal proxy
    for the condition number).
    """
    z = np.array(z0, dtype=float)
    N, n = z.shape
    d = N * n
    val = value_fn(z)
    if not np.isfinite(val):
        raise NonConvergenceError("objective not finite at the start point", z=z)
    for it in range(max_iters):
        g = grad_fn(z)
        res = math.sqrt(float(frob2(g)))
        if not np.isfinite(res):
            raise NonConvergenceError("non-finite gradient during iteration", z=z, residual=res)
        if res <= tol:
            return z, it, res
        H = flatten_form(neg_hess_fn(z))
        gf = g.reshape(d)
        step = None
        try:
            C = np.linalg.cholesky(H)
            diag = np.diagonal(C)
            if (diag.max() / diag.min()) ** 2 <= CONDITION_LIMIT:
                step = np.linalg.solve(H, gf)
                if not np.all(np.isfinite(step)):
                    step = None
        except np.linalg.LinAlgError:
            step = None
        if step is None:
            # degenerate hessian: plain ascent scaled by the largest curvature
            step = gf / max(float(np.abs(H).sum(axis=1).max()), 1.0)
        step = step.reshape(N, n)
        t = 1.0
        accepted = False
        while t > 1e-18:
            cand = z + t * step
            cval = value_fn(cand)
            if np.isfinite(cval) and cval > val:
                z, val = cand, cval
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # the objective is flat at machine precision near the maximizer; accept
            # the full step if it contracts the first-order residual instead
            cand = z + step
            cres = math.sqrt(float(frob2(grad_fn(cand))))
            if np.isfinite(cres) and cres < res:
                z, val = cand, value_fn(cand)
            elif res <= 100 * tol:
                return z, it + 1, res
            else:
                raise NonConvergenceError("line search stalled", z=z, residual=res)
    g = grad_fn(z)
    res = math.sqrt(float(frob2(g)))
    if res <= tol:
        return z, max_iters, res
    raise NonConvergenceError(f"no convergence after {max_iters} iterations (residual {res:.3e})",
                              z=z, residual=res)


def _newton_seed(F: Integrand, xi):
    """Start from a power-branch inverse: |z0| ~ |xi|^(1/(p-1)) along xi.

    Superlinearity makes far starts expensive under damped Newton, so between
    the low- and high-order branch inverses the one with the better objective
    value wins (for unbalanced growth the low branch badly overshoots at large
    |xi|)."""
    p_lo, q_hi = F.growth_exponents()
    norm = math.sqrt(float(frob2(xi)))
    if norm == 0.0:
        return np.zeros_like(np.asarray(xi, dtype=float))
    direction = xi / max(1.0, norm)
    cands = [direction * norm ** (1.0 / (p_lo - 1.0))]
    if q_hi > p_lo:
        cands.append(direction * norm ** (1.0 / (q_hi - 1.0)))
    scores = [float(inner(z, xi) - F.value(z)) for z in cands]
    return cands[int(np.argmax(scores))]


def conjugate(F: Integrand, xi, tol=DEFAULT_TOL, max_iters=MAX_ITERS) -> ConjugateResult:
    """F*(xi) with its maximizer: solves sup_z <z, xi> - F(z)."""
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    xi = np.asarray(xi, dtype=float)

    def val(z):
        return float(inner(z, xi) - F.value(z))

    def grad(z):
        return xi - F.gradient(z)

    z, iters, res = _maximize_concave(val, grad, F.hessian, _newton_seed(F, xi), tol, max_iters)
    return ConjugateResult(value=val(z), argmax=z, newton_iters=iters, residual=res)


def inverse_gradient(F: Integrand, xi, tol=DEFAULT_TOL, max_iters=MAX_ITERS):
    """The unique z with F'(z) = xi (to tolerance); equals conjugate(F, xi).argmax."""
    return conjugate(F, xi, tol=tol, max_iters=max_iters).argmax


def conjugate_hessian(F: Integrand, z):
    """(F*)'' at xi = F'(z), i.e. the inverse of F''(z), as a (N, n, N, n) form."""
    z = np.asarray(z, dtype=float)
    N, n = z.shape[-2:]
    H = flatten_form(F.hessian(z))
    eigs = np.linalg.eigvalsh(H)
    if eigs[..., 0].min() <= 0.0 or (eigs[..., -1] / eigs[..., 0]).max() > 1e15:
        raise SingularHessianError("hessian is singular at this point (mu = 0 degenerate corner)")
    inv = np.linalg.inv(H)
    return inv.reshape(z.shape[:-2] + (N, n, N, n))


def fenchel_young_gap(F: Integrand, z, xi, tol=DEFAULT_TOL):
    """F(z) + F*(xi) - <z, xi>; nonnegative, zero exactly at xi = F'(z)."""
    z = np.asarray(z, dtype=float)
    star = conjugate(F, xi, tol=tol)
    return float(F.value(z) + star.value - inner(z, xi))


def monotonicity_ratios(F: Integrand, r: Regime, z1, z2):
    """Batched ratio <F'(z1)-F'(z2), z1-z2> / (|dV_{mu,p}|^2 + |dV_{1,q'}(F')|^2).

    Entries with z1 == z2 come back as NaN (0/0 pairs).
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    g1, g2 = F.gradient(z1), F.gradient(z2)
    num = inner(g1 - g2, z1 - z2)
    qc = r.q_conj
    den = frob2(v_map(r.mu, r.p, z1) - v_map(r.mu, r.p, z2))
    den = den + frob2(v_map(1.0, qc, g1) - v_map(1.0, qc, g2))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0.0, num / np.where(den > 0.0, den, 1.0), np.nan)
    return out


def monotonicity_ratio(F: Integrand, r: Regime, z1, z2):
    """Single-pair monotonicity ratio; None for the degenerate pair z1 == z2."""
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    if np.array_equal(z1, z2):
        return None
    out = float(monotonicity_ratios(F, r, z1, z2))
    return None if math.isnan(out) else out


def second_order_bound(F: Integrand, r: Regime, samples, h=1e-6):
    """Minimum over samples of sum_s <F''(w) d_s w, d_s w> over the squared V-field gradients.

    Each sample is a pair (w, dw) with w of shape (N, n) and dw of shape
    (n_dirs, N, n) holding the spatial derivative of w in every direction.  The
    V-field gradients are formed by chain-rule finite differences through w, so
    the check never differentiates V analytically.  Samples where both sides
    vanish (constant fields) are skipped; returns None if all are skipped.
    """
    qc = r.q_conj
    best = None
    for w, dw in samples:
        w = np.asarray(w, dtype=float)
        dw = np.asarray(dw, dtype=float)
        H = F.hessian(w)
        lhs = float(sum(inner(np.einsum("ijkl,kl->ij", H, d), d) for d in dw))
        rhs = 0.0
        for d in dw:
            dvp = (v_map(r.mu, r.p, w + h * d) - v_map(r.mu, r.p, w - h * d)) / (2 * h)
            gp = F.gradient(w + h * d)
            gm = F.gradient(w - h * d)
            dvq = (v_map(1.0, qc, gp) - v_map(1.0, qc, gm)) / (2 * h)
            rhs += float(frob2(dvp) + frob2(dvq))
        if rhs <= 0.0:
            continue
        ratio = lhs / rhs
        best = ratio if best is None else min(best, ratio)
    return best


def conjugate_difference_probe(F: Integrand, G: Integrand, samples, shape=(1, 2), seed=0,
                               radius=3.0, tol=1e-8):
    """Check convexity of F* - G* through the equivalent primal inequality.

    At sampled (z, z0) of the given (N, n) shape the inequality
        F(z+z0) - F(z0) - <F'(z0), z>
            <= G(z+w) - G(w) - <G'(w), z>,   w = (G*)'(F'(z0)),
    must hold; worst_ratio records the largest violation lhs - rhs.
    """
    from .model import CheckReport

    rng = np.random.default_rng(seed)
    worst = -math.inf
    witness = None
    for _ in range(samples):
        z = rng.normal(size=shape) * radius * rng.uniform(0.05, 1.0)
        z0 = rng.normal(size=shape) * radius * rng.uniform(0.05, 1.0)
        xi0 = F.gradient(z0)
        w = inverse_gradient(G, xi0)
        lhs = float(F.value(z + z0) - F.value(z0) - inner(xi0, z))
        rhs = float(G.value(z + w) - G.value(w) - inner(G.gradient(w), z))
        gap = lhs - rhs
        if gap > worst:
            worst = gap
            witness = np.stack([z, z0])
    passed = worst <= tol
    return CheckReport(passed=passed, worst_ratio=float(worst),
                       witness=None if passed else witness)
