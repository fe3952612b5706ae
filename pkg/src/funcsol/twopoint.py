"""Two-point boundary value problems with unknown flux constants.

Solves, on the pivot interval [0, p*], problems of the form

    sum_j a_ij(U, p) U_j' + b_i(U, p) = gamma_i * b_{n+1}(U, p),
    U(0) = 0,  U(p*) = u*,

where the constants gamma are unknowns fixed by the endpoint data.
Three backends cover the three regimes:

* ``solve_fixed_point``: damped Picard iteration of the integral operator
  T[U](z) = (int_0^z A^-1) (int_0^1 A^-1)^-1 u* for symmetric elliptic
  molecular systems (b absent, b_{n+1} = 1, pivot interval [0, 1]).
* ``solve_shooting``: Newton on the shooting map S(gamma) = U(p*; gamma) - u*
  with a forward-difference Jacobian, initialized from the constant
  coefficient linearization at the origin. A near-singular Jacobian is the
  resonance signal and is reported, never silently resolved.
* ``solve_scalar``: bisection on gamma for the single equation
  dU/dp = gamma*F(U, p) with F = b/a > 0, using the strict monotonicity of
  the endpoint in gamma.

Profiles are stored as node samples on a uniform odd-count mesh and are
treated as piecewise-linear interpolants by the reconstruction layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import exprlang
from .errors import (
    BracketFailureError,
    DegenerateLinearizationError,
    FuncsolError,
    MaxIterationError,
    NonEllipticError,
    NonPositiveFError,
    SingularJacobianError,
    SingularMatrixError,
)
from .exprlang import collect_variables, parse_expression
from .numerics import (
    cumulative_simpson,
    midpoint_derivatives_4th,
    midpoint_values_4th,
    require_odd,
    simpson_integral,
)

MOLECULAR = "molecular"
DARCY = "darcy"
SCALAR = "scalar"
MODES = (MOLECULAR, DARCY, SCALAR)

SINGULAR_COND_LIMIT = 1e12
RESONANCE_COND_LIMIT = 1e8
MIN_DAMPING = 1.0 / 16.0
BOX_PAD = 0.5


@dataclass
class ProblemSpec:
    """Coefficient data for one two-point/PDE problem.

    ``a`` is an n x n matrix of expression ASTs over u_1..u_n and p;
    ``b`` is absent (zero) and ``b_next`` absent (one) in the molecular
    case. In scalar mode the single right-side coefficient of the pressure
    law is stored in both ``b[0]`` and ``b_next`` (it plays both roles).
    """

    n: int
    a: list
    b: list | None = None
    b_next: object = None
    u_star: np.ndarray = None
    p_star: float = 1.0
    mode: str = MOLECULAR

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode '{self.mode}'")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        self.u_star = np.asarray(self.u_star, dtype=float).reshape(self.n)
        self.p_star = float(self.p_star)
        if self.p_star <= 0:
            raise ValueError(f"p_star must be positive, got {self.p_star}")
        if len(self.a) != self.n or any(len(row) != self.n for row in self.a):
            raise ValueError(f"coefficient matrix must be {self.n}x{self.n}")
        if self.mode == MOLECULAR:
            if self.b is not None or self.b_next is not None:
                raise ValueError("molecular mode takes no b or b_next coefficients")
            if self.p_star != 1.0:
                raise ValueError("molecular mode uses the unit pivot interval, p_star = 1")
        if self.mode == SCALAR:
            if self.n != 1:
                raise ValueError("scalar mode requires n = 1")
            if self.b is None:
                raise ValueError("scalar mode requires the b coefficient")
            if self.b_next is None:
                self.b_next = self.b[0]
        if self.b is not None and len(self.b) != self.n:
            raise ValueError(f"b must have {self.n} entries")
        allowed = self.variables
        exprs = [e for row in self.a for e in row]
        exprs += list(self.b or [])
        if self.b_next is not None:
            exprs.append(self.b_next)
        for e in exprs:
            extra = collect_variables(e) - allowed
            if extra:
                raise ValueError(f"expression references undeclared variables {sorted(extra)}")
        if self.mode == MOLECULAR:
            for e in exprs:
                if "p" in collect_variables(e):
                    raise ValueError("molecular coefficients may depend on u_1..u_n only")

    @property
    def variables(self):
        return frozenset([f"u{i+1}" for i in range(self.n)] + ["p"])

    @classmethod
    def from_strings(cls, n, a, b=None, b_next=None, u_star=(), p_star=1.0, mode=MOLECULAR):
        allowed = [f"u{i+1}" for i in range(n)] + ["p"]
        pa = [[parse_expression(t, allowed) for t in row] for row in a]
        pb = [parse_expression(t, allowed) for t in b] if b is not None else None
        pbn = parse_expression(b_next, allowed) if b_next is not None else None
        return cls(n=n, a=pa, b=pb, b_next=pbn, u_star=u_star, p_star=p_star, mode=mode)

    def env(self, u_values, p_values):
        """Environment mapping u_i and p onto arrays of matching shapes."""
        u_values = np.asarray(u_values, dtype=float)
        out = {f"u{i+1}": u_values[i] for i in range(self.n)}
        out["p"] = p_values
        return out

    def eval_a(self, env, shape=()):
        """Evaluate the coefficient matrix as an (*shape, n, n) array."""
        out = np.empty(tuple(shape) + (self.n, self.n))
        for i in range(self.n):
            for j in range(self.n):
                out[..., i, j] = exprlang.evaluate(self.a[i][j], env)
        return out

    def eval_b(self, env, shape=()):
        out = np.zeros(tuple(shape) + (self.n,))
        if self.b is not None:
            for i in range(self.n):
                out[..., i] = exprlang.evaluate(self.b[i], env)
        return out

    def eval_b_next(self, env, shape=()):
        if self.b_next is None:
            return np.ones(shape) if shape else 1.0
        out = exprlang.evaluate(self.b_next, env)
        if shape and np.ndim(out) == 0:
            out = np.full(shape, out)
        return out


@dataclass(frozen=True)
class EllipticityBounds:
    m: float
    M: float


@dataclass(frozen=True)
class ProfileSolution:
    mesh: np.ndarray            # (m,) strictly increasing, 0 .. p_star
    profiles: np.ndarray        # (n, m) sampled U_i
    gamma: np.ndarray           # (n,)
    two_point_residual: float
    boundary_error: float
    stats: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.profiles.shape[0]


def default_box(spec: ProblemSpec, pad: float = BOX_PAD):
    """Per-variable sampling ranges around the data the iterates visit."""
    box = {}
    for i, us in enumerate(spec.u_star):
        box[f"u{i+1}"] = (min(0.0, us) - pad, max(0.0, us) + pad)
    box["p"] = (0.0, spec.p_star)
    return box


def ellipticity_bounds(spec: ProblemSpec, box=None, samples: int = 33) -> EllipticityBounds:
    """Sampled eigenvalue bounds of the symmetrized coefficient matrix.

    Sweeps a lattice over the variables the matrix actually references and
    raises NonEllipticError when the smallest sampled eigenvalue is not
    positive.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples per axis")
    if box is None:
        box = default_box(spec)
    used = sorted(set().union(*(collect_variables(e) for row in spec.a for e in row)))
    if used:
        missing = [v for v in used if v not in box]
        if missing:
            raise ValueError(f"box is missing ranges for {missing}")
        axes = [np.linspace(box[v][0], box[v][1], samples) for v in used]
        lattice = np.meshgrid(*axes, indexing="ij")
        env = {v: g.ravel() for v, g in zip(used, lattice)}
        shape = (lattice[0].size,)
    else:
        env, shape = {}, (1,)
    A = spec.eval_a(env, shape)
    sym = 0.5 * (A + np.swapaxes(A, -1, -2))
    eigs = np.linalg.eigvalsh(sym)
    m = float(eigs.min())
    M = float(eigs.max())
    if m <= 0.0:
        raise NonEllipticError(f"sampled ellipticity failed: smallest eigenvalue {m:.6g} <= 0", m=m)
    return EllipticityBounds(m=m, M=M)


def _inverse_along(spec: ProblemSpec, mesh, profiles):
    """A^-1 at every mesh node, with a condition guard."""
    m = mesh.size
    env = spec.env(profiles, mesh)
    A = spec.eval_a(env, (m,))
    conds = np.linalg.cond(A)
    worst = float(np.max(conds))
    if not np.isfinite(worst) or worst > SINGULAR_COND_LIMIT:
        k = int(np.argmax(conds))
        raise SingularMatrixError(
            f"coefficient matrix numerically singular at pivot value {mesh[k]:.6g} "
            f"(condition estimate {worst:.3e})"
        )
    return np.linalg.inv(A)


def gamma_functional(mesh, profiles, spec: ProblemSpec):
    """gamma[U] = (int_0^1 A^-1(U(t)) dt)^-1 u* by composite Simpson."""
    if spec.mode != MOLECULAR:
        raise ValueError("gamma functional applies to molecular problems")
    h = mesh[1] - mesh[0]
    Ainv = _inverse_along(spec, mesh, np.asarray(profiles, dtype=float))
    avg = simpson_integral(Ainv, h)
    cond = float(np.linalg.cond(avg))
    if not np.isfinite(cond) or cond > SINGULAR_COND_LIMIT:
        raise SingularMatrixError(f"averaged inverse matrix singular (condition {cond:.3e})")
    return np.linalg.solve(avg, spec.u_star)


def apply_fixed_point_operator(mesh, profiles, spec: ProblemSpec):
    """T[U](z) = (int_0^z A^-1)(int_0^1 A^-1)^-1 u* on the same mesh."""
    if spec.mode != MOLECULAR:
        raise ValueError("the fixed point operator applies to molecular problems")
    h = mesh[1] - mesh[0]
    Ainv = _inverse_along(spec, mesh, np.asarray(profiles, dtype=float))
    C = cumulative_simpson(Ainv, h)
    total = C[-1]
    cond = float(np.linalg.cond(total))
    if not np.isfinite(cond) or cond > SINGULAR_COND_LIMIT:
        raise SingularMatrixError(f"averaged inverse matrix singular (condition {cond:.3e})")
    w = np.linalg.solve(total, spec.u_star)
    out = (C @ w).T
    out[:, 0] = 0.0
    out[:, -1] = spec.u_star
    return out


def collocation_residual(mesh, profiles, gamma, spec: ProblemSpec) -> float:
    """Max equation defect at interior interval midpoints.

    Midpoint states and slopes come from 4th-order formulas so the defect
    tracks the integrator's own order instead of the piecewise-linear
    interpolation error.
    """
    profiles = np.asarray(profiles, dtype=float)
    h = mesh[1] - mesh[0]
    u_mid = midpoint_values_4th(profiles)
    du_mid = midpoint_derivatives_4th(profiles, h)
    p_mid = midpoint_values_4th(mesh[None, :])[0]
    k = p_mid.size
    env = spec.env(u_mid, p_mid)
    A = spec.eval_a(env, (k,))
    gamma = np.asarray(gamma, dtype=float)
    if spec.mode == SCALAR:
        b = exprlang.evaluate(spec.b[0], env)
        res = A[:, 0, 0] * du_mid[0] - gamma[0] * b
        return float(np.max(np.abs(res)))
    defect = np.einsum("kij,jk->ik", A, du_mid) + spec.eval_b(env, (k,)).T
    defect -= gamma[:, None] * spec.eval_b_next(env, (k,))[None, :]
    return float(np.max(np.abs(defect)))


def solve_fixed_point(spec: ProblemSpec, n_nodes: int = 1001, tol: float = 1e-10,
                      max_iter: int = 200, damping: float = 1.0,
                      box=None, samples: int = 33) -> ProfileSolution:
    """Damped Picard iteration on T[U], started from the linear ramp z*u*.

    The damping halves (down to 1/16) whenever the sup-norm update grows.
    Every iterate is checked against the operator bound
    sup_z |T[U](z)|_2 <= (M/m) |u*|_2 from the sampled ellipticity
    constants; if an iterate leaves the sampling box, the box grows and
    the bounds are re-sampled.
    """
    if spec.mode != MOLECULAR:
        raise ValueError("solve_fixed_point applies to molecular problems")
    if not 0.0 < damping <= 1.0:
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    m_nodes = require_odd(n_nodes)
    mesh = np.linspace(0.0, 1.0, m_nodes)
    box = dict(box) if box is not None else default_box(spec)
    bounds = ellipticity_bounds(spec, box, samples)
    u_norm = float(np.linalg.norm(spec.u_star))
    U = mesh[None, :] * spec.u_star[:, None]
    prev_update = np.inf
    bound_ratio = 0.0
    converged = False
    iterations = 0
    update = np.inf
    for iterations in range(1, max_iter + 1):
        # keep the sampled bounds valid for whatever the iterates visit
        for i in range(spec.n):
            lo, hi = box[f"u{i+1}"]
            umin, umax = float(U[i].min()), float(U[i].max())
            if umin < lo or umax > hi:
                box[f"u{i+1}"] = (min(lo, umin) - BOX_PAD, max(hi, umax) + BOX_PAD)
                bounds = ellipticity_bounds(spec, box, samples)
        TU = apply_fixed_point_operator(mesh, U, spec)
        limit = (bounds.M / bounds.m) * u_norm
        sup = float(np.max(np.linalg.norm(TU, axis=0)))
        if u_norm > 0.0:
            bound_ratio = max(bound_ratio, sup / limit)
            if sup > limit * (1.0 + 1e-9):
                raise FuncsolError(
                    f"fixed point iterate escaped the operator bound: "
                    f"sup |T[U]| = {sup:.6g} > (M/m)|u*| = {limit:.6g}"
                )
        U_new = (1.0 - damping) * U + damping * TU
        update = float(np.max(np.abs(U_new - U)))
        U = U_new
        if update <= tol:
            converged = True
            break
        if update > prev_update:
            damping = max(damping / 2.0, MIN_DAMPING)
        prev_update = update
    if not converged:
        raise MaxIterationError(
            f"fixed point iteration did not reach {tol:.3e} in {max_iter} iterations "
            f"(last update {update:.3e})", last_update=update)
    gamma = gamma_functional(mesh, U, spec)
    return ProfileSolution(
        mesh=mesh,
        profiles=U,
        gamma=gamma,
        two_point_residual=collocation_residual(mesh, U, gamma, spec),
        boundary_error=float(np.max(np.abs(U[:, -1] - spec.u_star))),
        stats={
            "method": "fixed_point",
            "iterations": iterations,
            "final_update": update,
            "damping_final": damping,
            "ellipticity_m": bounds.m,
            "ellipticity_M": bounds.M,
            "iterate_bound_ratio": bound_ratio,
        },
    )


def _rhs_batch(spec: ProblemSpec, p, U):
    """U' = A^-1 (gamma*b_next - b) right-hand side pieces for a batch.

    U has shape (k, n); returns A (k, n, n), b (k, n), b_next (k,).
    """
    k = U.shape[0]
    env = spec.env(U.T, p)
    A = spec.eval_a(env, (k,))
    b = spec.eval_b(env, (k,))
    bn = spec.eval_b_next(env, (k,))
    if np.ndim(bn) == 0:
        bn = np.full(k, bn)
    return A, b, bn


def _integrate_batch(spec: ProblemSpec, gammas, n_nodes, trajectory=False):
    """Classical RK4 on a uniform mesh, batched over a stack of gammas.

    Darcy/molecular: U' = A^-1 (gamma*b_next - b). Scalar: U' = gamma*b/a
    (the b coefficient multiplies gamma, it is not an additive flux term).
    """
    gammas = np.atleast_2d(np.asarray(gammas, dtype=float))
    k = gammas.shape[0]
    m = require_odd(n_nodes)
    mesh = np.linspace(0.0, spec.p_star, m)
    h = mesh[1] - mesh[0]
    U = np.zeros((k, spec.n))
    traj = np.empty((m, k, spec.n)) if trajectory else None
    if trajectory:
        traj[0] = U

    if spec.mode == SCALAR:
        def f(p, state):
            return gammas * np.atleast_1d(_scalar_f(spec, state[:, 0], p))[:, None]
    else:
        def f(p, state):
            A, b, bn = _rhs_batch(spec, p, state)
            rhs = gammas * bn[:, None] - b
            # cheap condition estimate |A|_F^n / |det A|; coarse but plenty
            # to trip the 1e12 singularity guard
            if spec.n == 2:
                a00, a01 = A[:, 0, 0], A[:, 0, 1]
                a10, a11 = A[:, 1, 0], A[:, 1, 1]
                det = a00 * a11 - a01 * a10
                fro2 = a00**2 + a01**2 + a10**2 + a11**2
            else:
                det = A[:, 0, 0] if spec.n == 1 else np.linalg.det(A)
                fro2 = np.einsum("kij,kij->k", A, A)
            est = np.sqrt(fro2) ** spec.n / np.maximum(np.abs(det), 1e-300)
            worst = float(np.max(est))
            if not np.isfinite(worst) or worst > SINGULAR_COND_LIMIT:
                raise SingularMatrixError(
                    f"coefficient matrix numerically singular at p = {p:.6g} "
                    f"(condition estimate {worst:.3e})"
                )
            if spec.n == 1:
                return rhs / A[:, 0, 0][:, None]
            if spec.n == 2:
                du = np.empty_like(rhs)
                du[:, 0] = (a11 * rhs[:, 0] - a01 * rhs[:, 1]) / det
                du[:, 1] = (a00 * rhs[:, 1] - a10 * rhs[:, 0]) / det
                return du
            return np.linalg.solve(A, rhs[:, :, None])[:, :, 0]

    for step in range(m - 1):
        p0 = mesh[step]
        k1 = f(p0, U)
        k2 = f(p0 + 0.5 * h, U + 0.5 * h * k1)
        k3 = f(p0 + 0.5 * h, U + 0.5 * h * k2)
        k4 = f(p0 + h, U + h * k3)
        U = U + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if trajectory:
            traj[step + 1] = U
    return mesh, (traj if trajectory else U)


def integrate_profiles(spec: ProblemSpec, gamma, n_nodes: int):
    """Integrate the initial value problem for a given gamma; returns (mesh, profiles)."""
    mesh, traj = _integrate_batch(spec, np.asarray(gamma, dtype=float)[None, :],
                                  n_nodes, trajectory=True)
    return mesh, traj[:, 0, :].T


def _origin_linearization(spec: ProblemSpec):
    """gamma0 and the shooting-map scale from the origin linearization.

    Freezing the coefficients at the origin makes the profiles linear, so
    gamma0 = (A(0) u*/p* + b(0)) / b_{n+1}(0) and the linearized map
    gamma -> U(p*) has Jacobian J0 = p* b_{n+1}(0) A(0)^-1. J0's norm is
    the natural sensitivity scale the resonance check measures against.
    """
    env0 = spec.env(np.zeros((spec.n, 1)), np.zeros(1))
    A0 = spec.eval_a(env0, (1,))[0]
    det = float(np.linalg.det(A0))
    scale = max(1.0, float(np.abs(A0).max()) ** spec.n)
    if abs(det) <= 1e-14 * scale:
        raise DegenerateLinearizationError(
            f"origin coefficient determinant D = {det:.3e} is degenerate", determinant=det)
    b0 = spec.eval_b(env0, (1,))[0]
    bn0 = spec.eval_b_next(env0, (1,))
    bn0 = float(np.asarray(bn0).ravel()[0])
    if abs(bn0) <= 1e-14:
        raise DegenerateLinearizationError(
            f"origin value of b_next ({bn0:.3e}) is degenerate", determinant=bn0)
    gamma0 = (A0 @ spec.u_star / spec.p_star + b0) / bn0
    j0_norm = float(np.linalg.norm(spec.p_star * bn0 * np.linalg.inv(A0), 2))
    return gamma0, j0_norm


def shooting_jacobian(spec: ProblemSpec, gamma, n_nodes: int = 1001):
    """Forward-difference Jacobian of gamma -> U(p*; gamma)."""
    gamma = np.asarray(gamma, dtype=float)
    steps = 1e-6 * (1.0 + np.abs(gamma))
    gammas = np.vstack([gamma, gamma + np.diag(steps)])
    _, ends = _integrate_batch(spec, gammas, n_nodes)
    return (ends[1:] - ends[0]).T / steps[None, :], ends[0]


def solve_shooting(spec: ProblemSpec, n_nodes: int = 1001, tol: float = 1e-10,
                   max_newton: int = 30) -> ProfileSolution:
    """Newton iteration on the shooting map S(gamma) = U(p*; gamma) - u*.

    The Jacobian condition is checked before accepting convergence, so a
    resonant problem (singular shooting map) raises SingularJacobianError
    even when the trivial data would satisfy the endpoint immediately.
    """
    if spec.mode not in (MOLECULAR, DARCY):
        raise ValueError("solve_shooting applies to molecular and darcy problems")
    gamma, j0_norm = _origin_linearization(spec)
    residual = np.inf
    converged = False
    cond = np.inf
    iterations = 0
    for iterations in range(1, max_newton + 1):
        J, end = shooting_jacobian(spec, gamma, n_nodes)
        # at a resonance the endpoint map loses rank, but discretization
        # error leaves a uniformly tiny, well-conditioned J; measure the
        # smallest singular value against the map's natural scale instead
        s = np.linalg.svd(J, compute_uv=False)
        smin = float(s[-1])
        cond = np.inf if smin == 0.0 else max(float(s[0]), j0_norm) / smin
        if not np.isfinite(cond) or cond > RESONANCE_COND_LIMIT:
            raise SingularJacobianError(
                f"shooting Jacobian condition estimate {cond:.3e} exceeds "
                f"{RESONANCE_COND_LIMIT:.0e}: the two-point problem is at or near "
                f"a resonance and does not determine gamma", condition=cond)
        S = end - spec.u_star
        residual = float(np.max(np.abs(S)))
        if residual <= tol:
            converged = True
            break
        gamma = gamma + np.linalg.solve(J, -S)
    if not converged:
        raise MaxIterationError(
            f"shooting did not reach {tol:.3e} in {max_newton} Newton iterations "
            f"(endpoint mismatch {residual:.3e})", last_update=residual)
    mesh, profiles = integrate_profiles(spec, gamma, n_nodes)
    return ProfileSolution(
        mesh=mesh,
        profiles=profiles,
        gamma=gamma,
        two_point_residual=collocation_residual(mesh, profiles, gamma, spec),
        boundary_error=float(np.max(np.abs(profiles[:, -1] - spec.u_star))),
        stats={
            "method": "shooting",
            "iterations": iterations,
            "jacobian_condition": cond,
        },
    )


def _scalar_f(spec: ProblemSpec, u, p):
    env = {"u1": u, "p": p}
    a = exprlang.evaluate(spec.a[0][0], env)
    if np.any(np.asarray(a) == 0.0):
        raise SingularMatrixError(f"scalar coefficient a vanished near p = {p}")
    return exprlang.evaluate(spec.b[0], env) / a


def _scalar_endpoint(spec: ProblemSpec, gamma, n_nodes):
    _, ends = _integrate_batch(spec, np.array([[gamma]]), n_nodes)
    return float(ends[0, 0])


def _check_f_positive(spec: ProblemSpec, samples: int = 65, pad: float = BOX_PAD):
    us = float(spec.u_star[0])
    ugrid = np.linspace(min(0.0, us) - pad, max(0.0, us) + pad, samples)
    pgrid = np.linspace(0.0, spec.p_star, samples)
    uu, pp = np.meshgrid(ugrid, pgrid, indexing="ij")
    F = _scalar_f(spec, uu.ravel(), pp.ravel())
    fmin = float(np.min(F))
    if fmin <= 0.0:
        raise NonPositiveFError(
            f"F = b/a must be positive on the sampled rectangle; min sampled value {fmin:.6g}")


def solve_scalar(spec: ProblemSpec, bracket_hints=None, n_nodes: int = 1001,
                 tol: float = 1e-10, max_bisect: int = 200) -> ProfileSolution:
    """Bisection on gamma for dU/dp = gamma*F(U,p), F = b/a > 0.

    ``bracket_hints``, when given, are the integrals (int_0^p* r, int_0^p* q)
    of lower/upper bounds r <= F <= q, yielding the analytic initial bracket
    [u*/int q, u*/int r]. Otherwise the bracket grows geometrically from 0.
    The endpoint map's strict monotonicity in gamma is asserted on the
    sampled pairs of every solve.
    """
    if spec.mode != SCALAR:
        raise ValueError("solve_scalar applies to scalar-mode problems")
    _check_f_positive(spec)
    u_star = float(spec.u_star[0])
    evals = {}

    def g(gam):
        if gam not in evals:
            evals[gam] = _scalar_endpoint(spec, gam, n_nodes)
        return evals[gam]

    gamma = None
    if u_star == 0.0:
        gamma = 0.0
    else:
        if bracket_hints is not None:
            r_int, q_int = float(bracket_hints[0]), float(bracket_hints[1])
            if r_int <= 0 or q_int <= 0:
                raise BracketFailureError("bracket hints must be positive integrals")
            lo, hi = sorted((u_star / q_int, u_star / r_int))
        else:
            lo = hi = 0.0
        for cand in (lo, hi):
            if abs(g(cand) - u_star) <= tol:
                gamma = cand
                break
        if gamma is None:
            # expand until the endpoint straddles the target
            step = abs(u_star) / spec.p_star
            grow = 0
            while not (g(lo) - u_star) * (g(hi) - u_star) < 0.0:
                grow += 1
                if grow > 60:
                    raise BracketFailureError(
                        f"no sign change in the endpoint map after {grow - 1} expansions "
                        f"(gamma in [{lo:.6g}, {hi:.6g}])")
                if u_star > 0:
                    if g(hi) < u_star:
                        hi += step
                    else:
                        lo -= step
                else:
                    if g(lo) > u_star:
                        lo -= step
                    else:
                        hi += step
                step *= 2.0
            for _ in range(max_bisect):
                mid = 0.5 * (lo + hi)
                gm = g(mid)
                if abs(gm - u_star) <= tol:
                    gamma = mid
                    break
                if gm < u_star:
                    lo = mid
                else:
                    hi = mid
            else:
                raise MaxIterationError(
                    f"bisection did not reach {tol:.3e} in {max_bisect} steps",
                    last_update=abs(g(0.5 * (lo + hi)) - u_star))

    # monotonicity witness: at least 5 sampled gamma pairs, strictly increasing
    probe_nodes = min(require_odd(n_nodes), 513)
    base = gamma if gamma != 0.0 else 1.0
    for fac in (0.5, 0.75, 1.25, 1.5):
        cand = base * fac
        if cand not in evals:
            evals[cand] = _scalar_endpoint(spec, cand, probe_nodes)
        if len(evals) >= 6:
            break
    pairs = sorted(evals.items())
    gs = [v for _, v in pairs]
    if any(g2 <= g1 for g1, g2 in zip(gs, gs[1:])):
        raise FuncsolError(
            "endpoint map is not strictly increasing in gamma; "
            "the positivity of F does not hold along the trajectories")

    mesh, profiles = integrate_profiles(spec, np.array([gamma]), n_nodes)
    garr = np.array([gamma])
    return ProfileSolution(
        mesh=mesh,
        profiles=profiles,
        gamma=garr,
        two_point_residual=collocation_residual(mesh, profiles, garr, spec),
        boundary_error=float(np.max(np.abs(profiles[:, -1] - spec.u_star))),
        stats={
            "method": "scalar_bisection",
            "iterations": len(evals),
            "monotone_samples": len(pairs),
        },
    )
