"""Measurement of the regularity estimates on solved fields, plus the exact
exponent and iteration arithmetic they rely on.

V-fields are piecewise constant in the PL discretization, so their gradients
are formed on the dual grid: per-simplex values are averaged per cell and
differenced centrally between cell centers (one-sided at the array edge).
Measured left/right-hand sides are reported as ratios; fitted exponents come
from log-log least squares over amplitude sweeps and are never asserted against
the structural exponents, which are existential.
"""

import math
from dataclasses import dataclass

import numpy as np

from .integrands import Integrand, MoserWeight, frob2, v_map
from .model import DiagnosticsEntry, DiscreteField, Region, RegionError, Regime
from .growth import gehring_exponent


class InadmissibleSobolevExponent(ValueError):
    """Chosen sphere Sobolev exponent is too small for the interpolation split."""


class ScalarOnlyError(ValueError):
    """This measurement is defined for scalar fields only."""


class PreconditionViolation(RuntimeError):
    """Discrete data violates the assumed cube-wise reverse Holder inequality."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


# ------------------------------------------------------------- exponent chain


@dataclass(frozen=True)
class ExponentChain:
    regime: Regime
    sobolev_exp: float
    lam: float
    beta0: float
    alpha0: float
    kappa1: float
    kappa2: float
    b: float


def hd_exponents(r: Regime, sobolev_exp: float) -> ExponentChain:
    """Interpolation exponents for the higher-differentiability estimate.

    With s the sphere Sobolev exponent, lambda solves 2 lambda + (1-lambda) s
    = 2q/p; the chain requires s > 2q/p so that lambda lies in (0, 1].
    """
    s = float(sobolev_exp)
    p, q, n = r.p, r.q, r.n
    if s <= 2.0 * q / p:
        raise InadmissibleSobolevExponent(
            f"sobolev_exp must exceed 2q/p = {2*q/p:.6g}, got {s}")
    lam = (p * s - 2.0 * q) / (p * (s - 2.0))
    beta0 = (p * (1.0 - lam) / (2.0 * q)) * (n - 1.0 - s * (n - 3.0) / 2.0)
    alpha0 = 2.0 * q * beta0 / (lam * p)
    kappa1 = (3.0 * q - p) / (lam * p)
    kappa2 = (q - p) / (lam * p)
    return ExponentChain(regime=r, sobolev_exp=s, lam=lam, beta0=beta0,
                         alpha0=alpha0, kappa1=kappa1, kappa2=kappa2, b=kappa2 + 1.0)


def default_sobolev_exponent(r: Regime) -> float:
    """A safe default above the 2q/p threshold (the exponent is free in low dimension)."""
    return 4.0 * r.q / r.p


# ------------------------------------------------------------- V-field machinery


def v_fields(field: DiscreteField, F: Integrand, r: Regime):
    """Per-simplex V_{mu,p}(grad u) and V_{1,q'}(F'(grad u))."""
    z = field.gradients
    vp = v_map(r.mu, r.p, z)
    vq = v_map(1.0, r.q_conj, F.gradient(z))
    return vp, vq


def _noise_floor_sq(W, h, dim):
    """Squared magnitude of dual-grid differences attributable to roundoff in the
    cell averages; anything below it is a discrete zero (constant fields then
    measure exactly 0 instead of amplified last-bit noise)."""
    scale = float(np.abs(W).max(initial=0.0))
    per_component = 16.0 * np.finfo(float).eps * scale / h
    return dim * W[(0,) * dim].size * per_component ** 2


def _cell_gradient_sq(grid, per_simplex):
    """|grad_h W|^2 per cell for a per-simplex matrix field W: cell-average, then
    central differences between cell centers (one-sided at the array edge)."""
    W = grid.per_cell(per_simplex)  # (m,)*dim + (N, n)
    axes = tuple(range(grid.dim))
    grads = np.gradient(W, grid.h, axis=axes, edge_order=1)
    if grid.dim == 1:
        grads = [grads]
    total = np.zeros(W.shape[:grid.dim])
    for gpart in grads:
        total += (gpart ** 2).sum(axis=(-2, -1))
    total[total <= _noise_floor_sq(W, grid.h, grid.dim)] = 0.0
    return total  # (m,)*dim


def _region_cell_mean(grid, cell_values, region: Region):
    mask = grid.cells_in(region).reshape(cell_values.shape)
    if not mask.any():
        raise RegionError(f"no cell centers inside region {region}")
    return float(cell_values[mask].mean())


def _region_cell_integral(grid, cell_values, region: Region):
    mask = grid.cells_in(region).reshape(cell_values.shape)
    cellvol = grid.h ** grid.dim
    return float(cell_values[mask].sum() * cellvol)


def region_energy_average(field: DiscreteField, F: Integrand, region: Region) -> float:
    """Volume-weighted average of F(grad u) over simplices with barycenter in the region."""
    mask = field.grid.simplices_in(region)
    if not mask.any():
        raise RegionError(f"no simplex barycenters inside region {region}")
    vals = F.value(field.gradients[mask])
    return float(vals.mean())


def higher_diff_measure(field: DiscreteField, F: Integrand, r: Regime,
                        chain: ExponentChain, B: Region) -> DiagnosticsEntry:
    """lhs: average over B/2 of |grad_h V_{mu,p}|^2 + |grad_h V_{1,q'}(F')|^2;
    rhs: (average of F over B, plus 1) to the chain exponent b."""
    half = B.scaled(0.5)
    if not half.inside_unit_box():
        raise RegionError("B/2 must sit inside the solved unit box")
    vp, vq = v_fields(field, F, r)
    dens = _cell_gradient_sq(field.grid, vp) + _cell_gradient_sq(field.grid, vq)
    lhs = _region_cell_mean(field.grid, dens, half)
    rhs = (region_energy_average(field, F, B) + 1.0) ** chain.b
    return DiagnosticsEntry("hdes", lhs=lhs, rhs=rhs, grid=field.grid.cells_per_side)


def sup_grad_measure(field: DiscreteField, F: Integrand, B: Region,
                     b: float = 1.0) -> DiagnosticsEntry:
    """lhs: sup over simplices in B/8 of |grad u|; rhs: (avg_B F + 1)^b.

    The exponent b is supplied by the caller (a chain value or a sweep fit)."""
    eighth = B.scaled(1.0 / 8.0)
    mask = field.grid.simplices_in(eighth)
    if not mask.any():
        raise RegionError("no simplices in B/8; refine the grid or enlarge B")
    lhs = float(np.sqrt(frob2(field.gradients[mask])).max())
    rhs = (region_energy_average(field, F, B) + 1.0) ** b
    return DiagnosticsEntry("sup_grad", lhs=lhs, rhs=rhs, grid=field.grid.cells_per_side)


def reverse_holder_scan(field: DiscreteField, F: Integrand, r: Regime, t_grid,
                        B: Region, b: float = 1.0):
    """Integrability scan on a 2d solve: for each t in (1, 2) the averaged
    L^{2t} norm of the V-field gradients over B/8 against (avg_B F + 1)^b.

    Returns a list of (t, lhs, ratio); aggregation across an amplitude sweep is
    done by `best_reverse_holder_t`.
    """
    if field.grid.dim != 2:
        raise ValueError("reverse Holder scan is a 2d measurement")
    if any(not (1.0 < t < 2.0) for t in t_grid):
        raise ValueError("t_grid entries must lie in (1, 2)")
    eighth = B.scaled(1.0 / 8.0)
    vp, vq = v_fields(field, F, r)
    gp = _cell_gradient_sq(field.grid, vp)
    gq = _cell_gradient_sq(field.grid, vq)
    base = region_energy_average(field, F, B) + 1.0
    out = []
    for t in t_grid:
        mean_pow = _region_cell_mean(field.grid, gp ** t + gq ** t, eighth)
        lhs = mean_pow ** (1.0 / (2.0 * t))
        out.append((float(t), lhs, lhs / base ** b))
    return out


def best_reverse_holder_t(scans, cap: float):
    """Largest t whose ratio stays below `cap` in every scan of the sweep; None
    if no t qualifies."""
    if not scans:
        return None
    ts = [t for (t, _, _) in scans[0]]
    best = None
    for k, t in enumerate(ts):
        if all(scan[k][2] <= cap for scan in scans):
            best = t if best is None or t > best else best
    return best


@dataclass
class LogDecayResult:
    radii: list
    masses: list
    gamma: float
    decay_exponent: float
    amplitude: float
    fit_residual: float


def log_decay_profile(field: DiscreteField, F: Integrand, r: Regime, radii,
                      B: Region) -> LogDecayResult:
    """L^2 masses of the V-field gradients on shrinking balls, fitted against
    C log(r/sigma)^-(gamma+2) with gamma = (q+p)/(2q).

    The fit adjusts only the prefactor C (least squares on logs); the residual
    is the rms log deviation.  Needs at least 3 radii, decreasing, with the
    largest ball inside B/2.
    """
    radii = [float(s) for s in radii]
    if len(radii) < 3:
        raise ValueError("need at least 3 radii for a decay fit")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    half = B.scaled(0.5)
    if radii[0] >= half.radius:
        raise RegionError("largest profile ball must sit strictly inside B/2")
    vp, vq = v_fields(field, F, r)
    dens = _cell_gradient_sq(field.grid, vp) + _cell_gradient_sq(field.grid, vq)
    masses = [_region_cell_integral(field.grid, dens, Region(B.center, s, "ball"))
              for s in radii]
    gamma = (r.q + r.p) / (2.0 * r.q)
    expo = gamma + 2.0
    xs = np.array([math.log(B.radius / s) for s in radii])
    positive = [m > 0.0 for m in masses]
    if not all(positive):
        # affine data: all masses vanish and the profile is exact with C = 0
        return LogDecayResult(radii, masses, gamma, expo, 0.0, 0.0)
    ys = np.log(masses) + expo * np.log(xs)
    logC = float(ys.mean())
    resid = float(np.sqrt(((ys - logC) ** 2).mean()))
    return LogDecayResult(radii, masses, gamma, expo, math.exp(logC), resid)


# ------------------------------------------------------------- scalar estimates


@dataclass
class CaccioppoliResult:
    lhs: float
    rhs: float
    ratio: float
    alpha: float
    a_alpha: float
    big_m: float


def moser_a_alpha(alpha: float, alpha0: float = -1.0) -> float:
    """The iteration prefactor: 1 at the base power, (alpha+2)/(alpha+1) above it."""
    if alpha < alpha0:
        raise ValueError(f"alpha must be >= alpha0 = {alpha0}")
    if alpha == alpha0:
        return 1.0
    return (alpha + 2.0) / (alpha + 1.0)


def caccioppoli_check(field: DiscreteField, F: Integrand, r: Regime, alpha: float,
                      cutoff) -> CaccioppoliResult:
    """Energy estimate for powers of the gradient weight on a scalar solve.

    With eta the PL cutoff between the region pair, compares
    lhs = ||eta grad_h l_alpha(grad u)||_L2 against
    rhs = A_alpha M^(1/2) ||l_alpha(grad u) grad eta||_L2, where
    M = max(1, sup_{supp eta} |F'(grad u)|^((q-p)/(q-1))).
    """
    if field.N != 1:
        raise ScalarOnlyError("the power Caccioppoli measurement needs a scalar field")
    inner_r, outer_r = cutoff
    if inner_r.kind != outer_r.kind or inner_r.center != outer_r.center:
        raise RegionError("cutoff regions must be concentric and of the same kind")
    if not (inner_r.radius < outer_r.radius):
        raise RegionError("cutoff needs inner radius < outer radius")
    grid = field.grid
    weight = MoserWeight(r, alpha)
    l_alpha = weight.eval(field.gradients)["l_alpha"]  # per simplex
    cell_l = grid.per_cell(l_alpha)

    def eta_of(points):
        d = points - np.asarray(inner_r.center)
        dist = np.sqrt((d ** 2).sum(axis=-1)) if inner_r.kind == "ball" \
            else np.abs(d).max(axis=-1)
        ramp = (outer_r.radius - dist) / (outer_r.radius - inner_r.radius)
        return np.clip(ramp, 0.0, 1.0), dist

    eta_c, dist_c = eta_of(grid.cell_centers)
    eta_c = eta_c.reshape(cell_l.shape)
    ramp_mask = ((dist_c > inner_r.radius) & (dist_c < outer_r.radius)).reshape(cell_l.shape)
    grad_eta = np.where(ramp_mask, 1.0 / (outer_r.radius - inner_r.radius), 0.0)

    # grad_h of the scalar cell field l_alpha
    grads = np.gradient(cell_l, grid.h, axis=tuple(range(grid.dim)), edge_order=1)
    grad_l2 = sum(g ** 2 for g in (grads if isinstance(grads, list) else list(grads)))
    grad_l2[grad_l2 <= _noise_floor_sq(cell_l[..., None, None], grid.h, grid.dim)] = 0.0

    cellvol = grid.h ** grid.dim
    lhs = math.sqrt(float((eta_c ** 2 * grad_l2).sum() * cellvol))
    rhs_norm = math.sqrt(float((cell_l ** 2 * grad_eta ** 2).sum() * cellvol))

    eta_b, _ = eta_of(grid.barycenters)
    supp = eta_b > 0.0
    gnorm = np.sqrt(frob2(F.gradient(field.gradients[supp])))
    big_m = max(1.0, float(gnorm.max() ** ((r.q - r.p) / (r.q - 1.0))))
    a_alpha = moser_a_alpha(alpha)
    rhs = a_alpha * math.sqrt(big_m) * rhs_norm
    ratio = 0.0 if lhs == 0.0 else (math.inf if rhs == 0.0 else lhs / rhs)
    return CaccioppoliResult(lhs=lhs, rhs=rhs, ratio=ratio, alpha=alpha,
                             a_alpha=a_alpha, big_m=big_m)


# ------------------------------------------------------------- Moser arithmetic


@dataclass(frozen=True)
class MoserParams:
    alpha0: float
    gamma: float
    c0: float
    M: float
    tau1: float
    tau2: float

    def __post_init__(self):
        if self.alpha0 < -1.0:
            raise ValueError(f"alpha0 must be >= -1, got {self.alpha0}")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.c0 < 1.0 or self.M < 1.0:
            raise ValueError("c0 and M must be >= 1")
        if not (0.125 <= self.tau2 < self.tau1):
            raise ValueError("radii must satisfy 1/8 <= tau2 < tau1")

    @classmethod
    def from_regime(cls, r: Regime, alpha0=-1.0, c0=1.0, M=1.0, tau1=0.25, tau2=0.125):
        """gamma = (n-3)/(n-1) for n >= 4; the instantiation p/(2q) in low dimension."""
        gamma = (r.n - 3.0) / (r.n - 1.0) if r.n >= 4 else r.p / (2.0 * r.q)
        return cls(alpha0=alpha0, gamma=gamma, c0=c0, M=M, tau1=tau1, tau2=tau2)


def moser_alpha_sequence(params: MoserParams, i: int) -> float:
    """alpha_i = (2 + alpha0) / gamma^i - 2 (the closed form of the power ladder)."""
    if i < 0:
        raise ValueError("index must be >= 0")
    return (2.0 + params.alpha0) / params.gamma ** i - 2.0


def moser_bound(params: MoserParams, V0: float, tail_tol=1e-15) -> float:
    """Limit of the iterated sup bound: prefactor series evaluated to convergence.

    The bound has the shape
        C * M^(gamma/((2+alpha0)(1-gamma))) / (tau1-tau2)^a0 * V0^(2/(alpha0+2)),
    where C and a0 come from summing the per-rung factors
    [c0 A_{alpha_m}^2 (2^m/(tau1-tau2))^((gamma+1)/gamma)]^(e_m) with weights
    e_m = gamma^m / ((2+alpha0)(1-gamma)); the series is truncated once a term
    drops below tail_tol.
    """
    if V0 < 0.0:
        raise ValueError("V0 must be nonnegative")
    g = params.gamma
    a0_weight = (g + 1.0) / g
    denom = (2.0 + params.alpha0) * (1.0 - g)
    log_pref = 0.0
    a0 = 0.0
    m = 1
    while True:
        e_m = g ** m / denom
        alpha_m = moser_alpha_sequence(params, m)
        a_m = moser_a_alpha(alpha_m, params.alpha0)
        term = e_m * (math.log(params.c0) + 2.0 * math.log(a_m)
                      + a0_weight * m * math.log(2.0))
        log_pref += term
        a0 += a0_weight * e_m
        if e_m * (1.0 + a0_weight * (m + 1)) < tail_tol or m > 100000:
            break
        m += 1
    m_expo = g / denom
    gap = params.tau1 - params.tau2
    return math.exp(log_pref) * params.M ** m_expo / gap ** a0 * V0 ** (2.0 / (params.alpha0 + 2.0))


# ------------------------------------------------------------- Gehring on data


@dataclass
class GehringResult:
    t: float
    c_star: float
    c_hat: float
    lhs: float
    rhs: float
    passed: bool


def gehring_selfimprove(values: np.ndarray, M: float, m: float, c_hat=None,
                        s0: float = 1.0) -> GehringResult:
    """Self-improved integrability of per-cube averages on the unit cube.

    `values` is a dim-dimensional array of nonnegative cell averages covering
    Q_1.  Dyadic sub-cube windows are screened against
        avg_{Q_rho/2} v <= c_hat M (avg_{Q_rho} v^m)^(1/m);
    with c_hat given, a violating window raises PreconditionViolation (witness =
    (corner, size)); with c_hat None the sampled constant is recorded instead.
    The exponent t then comes from the closed form with c* = max(c_hat, s0)
    enforced, and the improved inequality
        (avg_{Q_1/2} v^t)^(1/t) <= 2^(4 dim + 4) avg_{Q_1} v
    is verified on the data.
    """
    v = np.asarray(values, dtype=float)
    if v.min() < 0.0:
        raise ValueError("cell averages must be nonnegative")
    dim = v.ndim
    side = v.shape[0]
    if any(s != side for s in v.shape):
        raise ValueError("values must be a cubic array")

    def window_ratio(corner, size):
        sl = tuple(slice(c, c + size) for c in corner)
        outer = v[sl]
        quarter = size // 4
        inner_sl = tuple(slice(c + quarter, c + size - quarter) for c in corner)
        inner = v[inner_sl]
        denom = M * float((outer ** m).mean()) ** (1.0 / m)
        if denom == 0.0:
            return 0.0 if inner.mean() == 0.0 else math.inf
        return float(inner.mean()) / denom

    sampled = []
    size = 4
    while size <= side:
        stride = max(size // 2, 1)
        for corner in np.ndindex(*(max((side - size) // stride + 1, 1),) * dim):
            corner = tuple(c * stride for c in corner)
            if any(c + size > side for c in corner):
                continue
            sampled.append(((corner, size), window_ratio(corner, size)))
        size *= 2
    observed = max(r for _, r in sampled) if sampled else 1.0
    if c_hat is None:
        c_hat = max(observed, 1.0)
    else:
        for witness, ratio in sampled:
            if ratio > c_hat * (1.0 + 1e-12):
                raise PreconditionViolation(
                    f"cube at corner {witness[0]} size {witness[1]} has ratio "
                    f"{ratio:.6g} > c_hat = {c_hat}", witness=witness)
    c_star = max(float(c_hat), float(s0), 1.0)
    t = gehring_exponent(c_star, M, m)
    lo = side // 4
    hi = side - lo
    central = v[tuple(slice(lo, hi) for _ in range(dim))]
    lhs = float((central ** t).mean() ** (1.0 / t))
    rhs = 2.0 ** (4 * dim + 4) * float(v.mean())
    return GehringResult(t=t, c_star=c_star, c_hat=float(c_hat), lhs=lhs, rhs=rhs,
                         passed=lhs <= rhs)


# ------------------------------------------------------------- stress + fits


def stress_integrability(field: DiscreteField, F: Integrand, r: Regime,
                         B: Region) -> float:
    """||F'(grad u)||_{q'}^{q'} over B divided by (energy over B + 1)."""
    mask = field.grid.simplices_in(B)
    if not mask.any():
        raise RegionError(f"no simplices inside region {B}")
    z = field.gradients[mask]
    vol = field.grid.simplex_volume
    qc = r.q_conj
    num = float(vol * (np.sqrt(frob2(F.gradient(z))) ** qc).sum())
    den = float(vol * F.value(z).sum()) + 1.0
    return num / den


def second_order_samples(field: DiscreteField, max_samples=256, seed=0):
    """(w, dw) pairs from a solved field for the pointwise second-order bound:
    w is the cell-averaged gradient, dw its dual-grid derivative in every
    direction."""
    grid = field.grid
    W = grid.per_cell(field.gradients)  # (m,)*dim + (N, n)
    parts = np.gradient(W, grid.h, axis=tuple(range(grid.dim)), edge_order=1)
    if grid.dim == 1:
        parts = [parts]
    flatW = W.reshape((-1,) + W.shape[grid.dim:])
    flatD = [g.reshape((-1,) + W.shape[grid.dim:]) for g in parts]
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(flatW), size=min(max_samples, len(flatW)), replace=False)
    return [(flatW[k], np.stack([d[k] for d in flatD])) for k in picks]


def fit_exponent(bases, lhs_values):
    """Least-squares exponent b with lhs ~ C * base^b on logs; returns (b, rms
    residual).  Needs >= 4 positive points."""
    bases = np.asarray(bases, dtype=float)
    lhs_values = np.asarray(lhs_values, dtype=float)
    keep = (bases > 0) & (lhs_values > 0)
    if keep.sum() < 4:
        raise ValueError("need at least 4 positive points to fit an exponent")
    x = np.log(bases[keep])
    y = np.log(lhs_values[keep])
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(((A @ coef - y) ** 2).mean()))
    return float(coef[0]), resid
