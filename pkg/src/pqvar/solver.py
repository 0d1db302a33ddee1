"""Regularized Dirichlet minimization on the Kuhn grid.

The discrete energy sum_T vol(T) F(grad u|_T) is the exact continuum energy of
the piecewise-linear interpolant (gradients are constant per simplex), so the
minimization scheme is isolated from quadrature artifacts.  The vanishing-
viscosity ladder adds gamma_eps ell_1(z)^q to the integrand, mollifies the
boundary data, and tracks the convergence monitors of the approximation.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .integrands import Integrand, PowerNorm, Scaled, frob2
from .model import DiscreteField, Grid, SolveReport


class NonConvergenceError(RuntimeError):
    """Newton ran out of iterations; carries the partial field and report."""

    def __init__(self, message, field=None, report=None):
        super().__init__(message)
        self.field = field
        self.report = report


class SchemeViolationError(RuntimeError):
    """A monitored quantity of the approximation ladder moved the wrong way."""


@dataclass
class Schedule:
    epsilons: list
    mollifier_widths: list | None = None
    tol_energy: float = 1e-12
    tol_residual: float = 1e-9
    max_newton_iters: int = 100

    def __post_init__(self):
        eps = list(self.epsilons)
        if not eps or any(e <= 0.0 or e > 1.0 for e in eps):
            raise ValueError("epsilons must be a non-empty list inside (0, 1]")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValueError("epsilons must be strictly decreasing")
        if self.tol_energy <= 0 or self.tol_residual <= 0:
            raise ValueError("tolerances must be positive")
        self.epsilons = eps
        if self.mollifier_widths is None:
            self.mollifier_widths = list(eps)
        elif len(self.mollifier_widths) != len(eps):
            raise ValueError("mollifier_widths must match epsilons in length")

    @classmethod
    def dyadic(cls, k: int, **kw):
        """The default ladder eps_k = 2^-k, k = 1..k_max."""
        return cls(epsilons=[2.0 ** -(i + 1) for i in range(k)], **kw)


class RegularizedIntegrand(Integrand):
    """F_eps(z) = F(z) + gamma_eps * ell_1(z)^q: strictly convex with q-growth
    from above and below regardless of the degeneracy of the base integrand."""

    def __init__(self, base: Integrand, gamma_eps: float, q: float):
        if not (0.0 < gamma_eps < 1.0):
            raise ValueError(f"gamma_eps must lie in (0, 1), got {gamma_eps}")
        self.base = base
        self.gamma_eps = float(gamma_eps)
        self.q = float(q)
        self._reg = Scaled(self.gamma_eps, PowerNorm(1.0, self.q))

    def value(self, z):
        return self.base.value(z) + self._reg.value(z)

    def gradient(self, z):
        return self.base.gradient(z) + self._reg.gradient(z)

    def hessian(self, z):
        return self.base.hessian(z) + self._reg.hessian(z)

    def growth_exponents(self):
        lo, _ = self.base.growth_exponents()
        return (min(lo, self.q), max(self.q, self.base.growth_exponents()[1]))


def gamma_eps(eps: float, grad_q_norm: float, q: float) -> float:
    """gamma_eps = (1 + 1/eps + (1/eps) ||grad u~_eps||_q^(2q))^-1."""
    if not (0.0 < eps <= 1.0):
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if grad_q_norm < 0.0:
        raise ValueError("grad_q_norm must be nonnegative")
    if q <= 1.0:
        raise ValueError(f"q must exceed 1, got {q}")
    return 1.0 / (1.0 + 1.0 / eps + grad_q_norm ** (2.0 * q) / eps)


def mollify_boundary(grid: Grid, values: np.ndarray, eps: float) -> np.ndarray:
    """Smooth the boundary rows of a nodal array by a normalized bump kernel of
    width eps over the boundary node set; data is returned exactly when eps is
    below one grid cell."""
    if eps <= 0.0:
        raise ValueError(f"mollifier width must be positive, got {eps}")
    values = np.asarray(values, dtype=float)
    out = values.copy()
    if eps <= grid.h:
        return out
    bidx = np.flatnonzero(grid.boundary_mask)
    pts = grid.node_coords[bidx]
    diff = pts[:, None, :] - pts[None, :, :]
    t2 = (diff ** 2).sum(-1) / (eps * eps)
    w = np.zeros_like(t2)
    inside = t2 < 1.0
    w[inside] = np.exp(-1.0 / (1.0 - t2[inside]))
    w /= w.sum(axis=1, keepdims=True)
    out[bidx] = w @ values[bidx]
    return out


# ----------------------------------------------------------------- assembly


def simplex_gradients(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Exact per-simplex gradients (n_simplices, N, dim) of the PL interpolant."""
    N = values.shape[1]
    grads = np.empty((grid.n_simplices, N, grid.dim))
    for t in range(grid.n_types):
        lo, hi = t * grid.n_cells, (t + 1) * grid.n_cells
        vals = values[grid.simplex_vertices[lo:hi]]
        grads[lo:hi] = np.einsum("cav,ad->cvd", vals, grid.hat_grads[t])
    return grads


def energy(F: Integrand, grid: Grid, values: np.ndarray) -> float:
    z = simplex_gradients(grid, values)
    return float(grid.simplex_volume * F.value(z).sum())


def assemble_gradient(F: Integrand, grid: Grid, values: np.ndarray) -> np.ndarray:
    """Nodal energy gradient; row (v, i) is the weak residual of the i-th
    component hat function at node v."""
    N = values.shape[1]
    g = np.zeros((grid.n_nodes, N))
    z = simplex_gradients(grid, values)
    dF = F.gradient(z)
    vol = grid.simplex_volume
    for t in range(grid.n_types):
        lo, hi = t * grid.n_cells, (t + 1) * grid.n_cells
        contrib = vol * np.einsum("cik,ak->cai", dF[lo:hi], grid.hat_grads[t])
        np.add.at(g, grid.simplex_vertices[lo:hi].ravel(),
                  contrib.reshape(-1, N))
    return g


def assemble_hessian(F: Integrand, grid: Grid, values: np.ndarray) -> sp.csr_matrix:
    """Sparse energy hessian over all nodal dofs (node-major, component-minor)."""
    N = values.shape[1]
    z = simplex_gradients(grid, values)
    H = F.hessian(z)
    vol = grid.simplex_volume
    rows, cols, data = [], [], []
    comp = np.arange(N)
    for t in range(grid.n_types):
        lo, hi = t * grid.n_cells, (t + 1) * grid.n_cells
        verts = grid.simplex_vertices[lo:hi]
        G = grid.hat_grads[t]
        blocks = vol * np.einsum("cikjl,ak,bl->cabij", H[lo:hi], G, G)
        nc = verts.shape[0]
        for a in range(grid.dim + 1):
            for b in range(grid.dim + 1):
                r = (verts[:, a, None, None] * N + comp[None, :, None])
                c = (verts[:, b, None, None] * N + comp[None, None, :])
                r, c = np.broadcast_arrays(r, c)
                rows.append(r.reshape(-1))
                cols.append(c.reshape(-1))
                data.append(blocks[:, a, b].reshape(-1))
    K = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_nodes * N, grid.n_nodes * N))
    return K.tocsr()


def el_residual(F: Integrand, fld: DiscreteField) -> float:
    """Sup norm over interior nodes of the discrete weak residual <F'(grad u), grad w>."""
    g = assemble_gradient(F, fld.grid, fld.values)
    return float(np.abs(g[fld.grid.interior_mask]).max())


def grad_lp_norm(grid: Grid, values: np.ndarray, p: float) -> float:
    """(integral of |grad u|^p)^(1/p) over the box, exact for PL fields."""
    z = simplex_gradients(grid, values)
    return float((grid.simplex_volume * frob2(z) ** (p / 2.0)).sum() ** (1.0 / p))


def w1p_norm(grid: Grid, values: np.ndarray, p: float) -> float:
    """Discrete W^{1,p} norm with a vertex-lumped zero-order part."""
    z = simplex_gradients(grid, values)
    grad_part = (grid.simplex_volume * frob2(z) ** (p / 2.0)).sum()
    lump = np.zeros(grid.n_nodes)
    np.add.at(lump, grid.simplex_vertices.ravel(),
              np.full(grid.simplex_vertices.size, grid.simplex_volume / (grid.dim + 1)))
    val_part = (lump * (values ** 2).sum(axis=1) ** (p / 2.0)).sum()
    return float((grad_part + val_part) ** (1.0 / p))


# ----------------------------------------------------------------- minimization


def minimize_dirichlet(F: Integrand, grid: Grid, boundary: np.ndarray,
                       tol_energy=1e-12, tol_residual=1e-9, max_iters=100,
                       init: np.ndarray | None = None,
                       energy_trace: list | None = None):
    """Damped Newton minimization of the discrete energy over interior nodal values.

    `boundary` is a full nodal array whose boundary rows fix the Dirichlet data;
    its interior rows seed the first iterate unless `init` is given.  The energy
    decreases monotonically; iteration stops once the relative energy decrease
    drops below tol_energy while the Euler-Lagrange residual sup-norm is below
    tol_residual.
    """
    boundary = np.asarray(boundary, dtype=float)
    if boundary.ndim == 1:
        boundary = boundary[:, None]
    N = boundary.shape[1]
    u = np.array(init if init is not None else boundary, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape != boundary.shape:
        raise ValueError(f"init shape {u.shape} does not match boundary shape {boundary.shape}")
    u[grid.boundary_mask] = boundary[grid.boundary_mask]

    int_nodes = np.flatnonzero(grid.interior_mask)
    int_dofs = (int_nodes[:, None] * N + np.arange(N)[None, :]).reshape(-1)

    E = energy(F, grid, u)
    if not math.isfinite(E):
        raise NonConvergenceError("energy not finite at the initial iterate")
    if energy_trace is not None:
        energy_trace.append(E)
    prev_E = math.inf
    residual = math.inf
    it = 0
    for it in range(1, max_iters + 1):
        g = assemble_gradient(F, grid, u)
        residual = float(np.abs(g[grid.interior_mask]).max())
        rel_dec = abs(prev_E - E) / max(abs(E), 1.0)
        if residual < tol_residual and rel_dec < tol_energy:
            it -= 1
            break
        gi = g.reshape(-1)[int_dofs]
        K = assemble_hessian(F, grid, u)
        Kii = K[int_dofs][:, int_dofs]
        try:
            step = spla.spsolve(Kii.tocsc(), -gi)
            if not np.all(np.isfinite(step)):
                raise RuntimeError("non-finite Newton step")
        except Exception:
            # singular system: fall back to a safeguarded gradient step
            scale = max(float(Kii.diagonal().max()), 1.0)
            step = -gi / scale
        du = np.zeros((grid.n_nodes * N,))
        du[int_dofs] = step
        du = du.reshape(u.shape)

        t = 1.0
        accepted = False
        while t > 1e-18:
            cand = u + t * du
            Ec = energy(F, grid, cand)
            if math.isfinite(Ec) and Ec < E:
                prev_E, E = E, Ec
                u = cand
                accepted = True
                if energy_trace is not None:
                    energy_trace.append(E)
                break
            t *= 0.5
        if not accepted:
            # energy flat to machine precision: accept the full Newton step if it
            # still contracts the first-order residual, else stop here
            cand = u + du
            gc = assemble_gradient(F, grid, cand)
            cres = float(np.abs(gc[grid.interior_mask]).max())
            if math.isfinite(cres) and cres < residual:
                prev_E, E = E, energy(F, grid, cand)
                u = cand
                continue
            if residual <= tol_residual:
                break
            raise NonConvergenceError(
                f"line search stalled at residual {residual:.3e}",
                field=DiscreteField(grid, u),
                report=SolveReport(E, residual, it))
    else:
        raise NonConvergenceError(
            f"no convergence after {max_iters} iterations (residual {residual:.3e})",
            field=DiscreteField(grid, u),
            report=SolveReport(E, residual, max_iters))

    fld = DiscreteField(grid, u)
    report = SolveReport(energy=E, residual_sup=residual, iterations=it)
    if isinstance(F, RegularizedIntegrand):
        report.gamma_eps = F.gamma_eps
    return fld, report


def harmonic_extension(grid: Grid, boundary: np.ndarray) -> np.ndarray:
    """Interior values of the discrete |z|^2 minimizer with the given boundary rows."""
    fld, _ = minimize_dirichlet(PowerNorm(0.0, 2.0), grid, boundary,
                                tol_energy=1e-13, tol_residual=1e-10, max_iters=8)
    return np.array(fld.values)


# ----------------------------------------------------------------- the scheme


@dataclass
class SchemeResult:
    reports: list
    field: DiscreteField
    energies: list
    gamma_terms: list
    w1p_increments: list
    enes_margins: list
    violations: list = field(default_factory=list)
    fields: list = field(default_factory=list)


def run_scheme(F: Integrand, r, grid: Grid, boundary: np.ndarray, schedule: Schedule,
               keep_fields=False, strict=False) -> SchemeResult:
    """The vanishing-viscosity ladder: mollify data, regularize, solve, monitor.

    Per epsilon the boundary data is mollified at the scheduled width, extended
    harmonically to estimate ||grad u~_eps||_q, and the regularized energy is
    minimized warm-started from the previous rung.  Monitors: the regularized
    energies, the viscosity terms gamma_eps ||grad u_eps||_q^q (expected to
    decrease), W^{1,p} increments between consecutive rungs, and the minimality
    margins L^-1 ||grad u||_p^p + gamma ||grad u||_q^q <= E_eps(u_eps)
    <= E_eps(u~_eps).  A non-monotone viscosity term and per-rung solver
    failures are aggregated into `violations`; with strict=True they raise
    SchemeViolationError at the end instead.
    """
    boundary = np.asarray(boundary, dtype=float)
    if boundary.ndim == 1:
        boundary = boundary[:, None]
    reports, energies, gamma_terms, increments, margins, fields = [], [], [], [], [], []
    violations = []
    prev_values = None
    fld = None
    for eps, width in zip(schedule.epsilons, schedule.mollifier_widths):
        g_eps = mollify_boundary(grid, boundary, width)
        tilde = harmonic_extension(grid, g_eps)
        norm_q = grad_lp_norm(grid, tilde, r.q)
        gam = gamma_eps(eps, norm_q, r.q)
        Feps = RegularizedIntegrand(F, gam, r.q)
        if prev_values is None:
            init = tilde
        else:
            init = prev_values.copy()
            init[grid.boundary_mask] = g_eps[grid.boundary_mask]
        try:
            fld, rep = minimize_dirichlet(Feps, grid, g_eps,
                                          tol_energy=schedule.tol_energy,
                                          tol_residual=schedule.tol_residual,
                                          max_iters=schedule.max_newton_iters,
                                          init=init)
        except NonConvergenceError as exc:
            violations.append(f"eps={eps}: {exc}")
            if exc.field is None:
                raise
            fld, rep = exc.field, exc.report
        rep.epsilon = eps
        rep.gamma_eps = gam
        reports.append(rep)
        energies.append(rep.energy)
        gterm = gam * grad_lp_norm(grid, fld.values, r.q) ** r.q
        if gamma_terms and gterm > gamma_terms[-1] * (1.0 + 1e-9):
            violations.append(
                f"viscosity term increased: {gamma_terms[-1]:.6e} -> {gterm:.6e} at eps={eps}")
        gamma_terms.append(gterm)
        lhs = grad_lp_norm(grid, fld.values, r.p) ** r.p / r.L + gterm
        e_tilde = energy(Feps, grid, tilde)
        margins.append((rep.energy - lhs, e_tilde - rep.energy))
        if prev_values is not None:
            increments.append(w1p_norm(grid, fld.values - prev_values, r.p))
        prev_values = np.array(fld.values)
        if keep_fields:
            fields.append(fld)
    if strict and violations:
        raise SchemeViolationError("; ".join(violations))
    return SchemeResult(reports=reports, field=fld, energies=energies,
                        gamma_terms=gamma_terms, w1p_increments=increments,
                        enes_margins=margins, violations=violations, fields=fields)


# ----------------------------------------------------------------- boundary data


def boundary_family(name: str, grid: Grid, amplitude: float, N: int, seed=0) -> np.ndarray:
    """Named nodal boundary data families; interior rows are filled too so the
    array can seed the first solve."""
    x = grid.node_coords
    g = np.zeros((grid.n_nodes, N))
    if name == "affine":
        for j in range(N):
            g[:, j] = amplitude * x[:, j % grid.dim]
    elif name == "sine":
        for j in range(N):
            g[:, j] = amplitude * np.sin(2.0 * np.pi * x[:, 0] + j * np.pi / 4.0)
    elif name == "sinecos":
        for j in range(N):
            g[:, j] = amplitude * np.sin(2.0 * np.pi * x[:, 0] + j * np.pi / 4.0) \
                * np.cos(2.0 * np.pi * x[:, (1 if grid.dim > 1 else 0)])
    elif name == "random":
        rng = np.random.default_rng(seed)
        g = amplitude * rng.normal(size=(grid.n_nodes, N))
    else:
        raise ValueError(f"unknown boundary family {name!r}")
    return g


# ----------------------------------------------------------------- exports


def _fmt(x):
    return f"{x:.17g}"


def export_field_csv(fld: DiscreteField, path):
    """Node snapshot: index, coordinates, values; 17 significant digits."""
    dim = fld.grid.dim
    cols = ["node"] + ["xyz"[k] for k in range(dim)] + [f"v{j+1}" for j in range(fld.N)]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(fld.grid.n_nodes):
            row = [str(i)] + [_fmt(c) for c in fld.grid.node_coords[i]] \
                + [_fmt(v) for v in fld.values[i]]
            fh.write(",".join(row) + "\n")


def export_gradients_csv(fld: DiscreteField, path):
    """Per-simplex gradient snapshot: index, barycenter, row-major gradient entries."""
    dim = fld.grid.dim
    cols = ["simplex"] + [f"b{'xyz'[k]}" for k in range(dim)] \
        + [f"g{i+1}{j+1}" for i in range(fld.N) for j in range(dim)]
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        for s in range(fld.grid.n_simplices):
            row = [str(s)] + [_fmt(c) for c in fld.grid.barycenters[s]] \
                + [_fmt(v) for v in fld.gradients[s].reshape(-1)]
            fh.write(",".join(row) + "\n")
