"""Numerical validation of reduced dynamics.

The exact algebra ends at the reduced vector field; this module checks its
predictions numerically and independently of the quasi-polynomial route:

* ``integrate_reduced`` -- classical fixed-step 4th-order integration of the
  polynomial reduced field (complex or real coordinates);
* ``reconstruct`` -- pointwise graph evaluation of a coordinate trajectory,
  ``u(x) = (u0(c(x)) + Psi(c(x), mu))(0)``, sampled on the trajectory grid;
* ``grid_convolve`` / ``residual`` -- trapezoidal convolution quadrature on a
  truncated uniform grid with a two-grid Richardson error estimate, measuring
  how well a profile satisfies ``u + K*u + F(u, mu) = 0``;
* ``find_homoclinic`` / ``find_front`` -- deterministic shooting for the two
  planar limit systems produced by ``scale_field``: the reversible pulse
  equation ``a'' = lam lin a + cub a^3`` and the damped front equation
  ``kappa a'' + c a' + a (alpha - beta a^2) = 0``;
* ``planar_pulse_system`` / ``planar_front_system`` -- structure-checked
  extraction of those planar systems from a computed reduction;
* ``pulse_profile`` / ``pulse_scaling_report`` and ``front_profile`` /
  ``front_report`` -- end-to-end drivers producing ``WaveReport`` artifacts.
"""

from dataclasses import dataclass, field as dataclass_field
from math import ceil, log, sqrt

import numpy as np
from scipy.interpolate import CubicSpline

from .jet import JetIndex, ScaledField, evaluate_field, scale_field


# ---------------------------------------------------------------------------
# containers


@dataclass
class Trajectory:
    """Solution samples of the reduced equation: ``ys[i]`` at ``xs[i]``."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.atleast_2d(np.asarray(self.ys, dtype=complex))
        if self.ys.shape[0] != self.xs.shape[0]:
            raise ValueError("trajectory sample count mismatch")


def _uniform_spacing(xs):
    d = np.diff(xs)
    h = float(d[0])
    if h <= 0 or np.abs(d - h).max() > 1e-9 * (1.0 + abs(h)):
        raise ValueError("grid must be uniform and increasing")
    return h


@dataclass
class GridProfile:
    """Uniformly sampled profile values (one row per grid point).

    Builders choose the half-width at least five times the slowest decay
    length of the profile, so that boundary values of localized profiles
    stay below 1e-6 of the peak; ``localized`` checks the latter.
    """

    xs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.values.shape[0] != self.xs.shape[0]:
            raise ValueError("profile sample count mismatch")
        if self.xs.shape[0] < 2:
            raise ValueError("profile needs at least two samples")
        _uniform_spacing(self.xs)

    @property
    def h(self):
        return float(self.xs[1] - self.xs[0])

    @property
    def halfwidth(self):
        return float(self.xs[-1] - self.xs[0]) / 2.0

    @property
    def n(self):
        return self.values.shape[1]

    def peak(self):
        return float(np.abs(self.values).max())

    def boundary_fraction(self):
        """Largest boundary magnitude relative to the peak."""
        p = self.peak()
        if p == 0.0:
            return 0.0
        edge = max(np.abs(self.values[0]).max(), np.abs(self.values[-1]).max())
        return float(edge / p)

    def localized(self, tol=1e-6):
        return self.boundary_fraction() <= tol

    def decay_length(self):
        """Tail e-folding length, estimated from running maxima.

        Per side, the length over which the running maximum grows by a
        factor e from the boundary value; infinite when the profile does
        not decay toward that side.  Oscillation-proof (uses envelopes);
        an estimate, meant for grid-sizing sanity checks.
        """
        mag = np.abs(self.values).max(axis=1)
        window = max(1, mag.shape[0] // 100)  # envelope-safe boundary level
        worst = 0.0
        for side in (mag, mag[::-1]):
            b = float(side[:window].max())
            if b == 0.0:
                continue
            run = np.maximum.accumulate(side)
            hit = np.nonzero(run >= np.e * b)[0]
            if hit.size == 0:
                return np.inf
            worst = max(worst, hit[0] * self.h)
        return worst


@dataclass
class ResidualReport:
    """Norms of the equation defect on a grid, with a quadrature estimate.

    ``values`` holds the full-grid defect; the norms exclude ``margin``
    points on each side (where the convolution stencil leaves the grid).
    ``quadrature_error`` is the two-grid Richardson estimate; ``converged``
    means it is dominated by the measured residual (or below 1e-9).
    """

    max_norm: float
    l2_norm: float
    quadrature_error: float
    converged: bool
    margin: int
    xs: np.ndarray
    values: np.ndarray

    def to_data(self):
        return {
            "max": self.max_norm,
            "l2": self.l2_norm,
            "quadrature_error": self.quadrature_error,
            "converged": self.converged,
            "margin": self.margin,
        }


@dataclass
class ShootingResult:
    """Outcome of a deterministic shooting run on a planar system."""

    success: bool
    trajectory: Trajectory
    monotone: bool | None = None
    section_value: float | None = None
    crossing_time: float | None = None
    return_distance: float | None = None
    reach_distance: float | None = None
    details: dict = dataclass_field(default_factory=dict)


@dataclass
class WaveReport:
    """Summary artifact for a verified wave family."""

    kind: str
    parameters: dict
    residual_max: float
    residual_l2: float
    slope: float | None = None
    monotone: bool | None = None
    details: dict = dataclass_field(default_factory=dict)

    def to_data(self):
        return {
            "type": self.kind,
            "parameters": self.parameters,
            "residual_max": self.residual_max,
            "residual_l2": self.residual_l2,
            "slope": self.slope,
            "monotone": self.monotone,
            "details": self.details,
        }


# ---------------------------------------------------------------------------
# integration


def _field_function(field, mu=()):
    if callable(field):
        return field
    fld = field.field if isinstance(field, ScaledField) else field
    return lambda y: evaluate_field(fld, y, mu)


def rk4_step(f, y, h):
    """One classical Runge-Kutta step."""
    k1 = f(y)
    k2 = f(y + (0.5 * h) * k1)
    k3 = f(y + (0.5 * h) * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_reduced(field, initial, span, step, mu=(), blowup=1e6):
    """Fixed-step 4th-order integration of a polynomial reduced field.

    ``field`` is a coefficient map (as produced by the jet), a scaled field,
    or a callable ``y -> dy``.  The step is adjusted to divide the span
    exactly; step-halving is the caller's accuracy check.  Raises on
    blow-up (norm above ``blowup``).
    """
    f = _field_function(field, mu)
    x0, x1 = float(span[0]), float(span[1])
    if step <= 0:
        raise ValueError("step must be positive")
    nsteps = max(1, int(round(abs(x1 - x0) / step)))
    h = (x1 - x0) / nsteps
    y = np.asarray(initial, dtype=complex)
    xs = x0 + h * np.arange(nsteps + 1)
    ys = np.empty((nsteps + 1, y.size), dtype=complex)
    ys[0] = y
    for k in range(nsteps):
        y = rk4_step(f, y, h)
        norm = np.abs(y).max()
        if not norm < blowup:
            raise RuntimeError(
                f"trajectory blow-up: |y| = {norm:.3g} at x = {xs[k + 1]:.6g}"
            )
        ys[k + 1] = y
    return Trajectory(xs, ys)


# ---------------------------------------------------------------------------
# reconstruction


def _monomial_path(idx, coords, mu):
    """``c^powers mu^mu`` along a coordinate path (vectorized JetIndex.monomial)."""
    if len(mu) < len(idx.mu) and any(idx.mu[len(mu):]):
        raise ValueError(
            f"index needs {len(idx.mu)} parameter values, got {len(mu)}"
        )
    w = np.ones(coords.shape[0], dtype=complex)
    for j, p in enumerate(idx.powers):
        if p:
            w = w * coords[:, j] ** p
    for v, r in zip(mu, idx.mu):
        if r:
            w = w * v**r
    return w


def reconstruct(J, trajectory, mu=()):
    """Profile of the manifold along a coordinate trajectory.

    The grid point at ``x`` uses the trajectory point at ``x`` through the
    graph map evaluated at the origin: ``u(x) = (u0(c(x)) + Psi(c(x)))(0)``.
    """
    mu = (mu,) if np.isscalar(mu) else tuple(mu)
    coords = trajectory.ys
    if coords.shape[1] != J.basis.size:
        raise ValueError("trajectory dimension does not match the basis")
    base = np.array([el.function.evaluate(0.0) for el in J.basis.elements])
    values = coords @ base
    for idx, psi in J.psi.items():
        w = _monomial_path(idx, coords, mu)
        if np.any(w != 0.0):
            values = values + w[:, None] * psi.evaluate(0.0)[None, :]
    return GridProfile(trajectory.xs, values)


# ---------------------------------------------------------------------------
# grid convolution and residuals


def _stencil_halfwidth(K, h, tail_tol=1e-10):
    """Stencil points per side covering the kernel's decay radius."""
    return int(ceil(K.decay_radius(tail_tol) / h))


def _interp_shifted(xs, values, shift):
    """``u(xs - shift)`` by linear interpolation with edge continuation."""
    out = np.empty_like(values)
    target = xs - shift
    for c in range(values.shape[1]):
        out[:, c] = np.interp(target, xs, values[:, c].real) + 1j * np.interp(
            target, xs, values[:, c].imag
        )
    return out


def grid_convolve(K, xs, values, tail_tol=1e-10):
    """``(K * u)(xs)`` by the trapezoidal rule on the truncated support.

    The truncation radius is the kernel decay radius at ``tail_tol``
    (relative tail mass); beyond the grid the profile is continued by its
    edge values, so localized and front-like profiles are both handled.
    Smooth kernel parts use aligned trapezoid sums; point masses shift the
    profile by interpolation.
    """
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=complex)
    if values.ndim == 1:
        values = values[:, None]
    m, n = values.shape
    if K.n != n:
        raise ValueError(f"kernel dimension {K.n} does not match profile {n}")
    h = _uniform_spacing(xs)
    out = np.zeros((m, n), dtype=complex)

    if getattr(K, "family", None) != "dirac":
        half = _stencil_halfwidth(K, h, tail_tol)
        zs = np.arange(-half, half + 1) * h
        km = K.eval_x(zs)  # (2 half + 1, n, n)
        w = np.full(zs.shape, h)
        w[0] *= 0.5
        w[-1] *= 0.5
        kw = km * w[:, None, None]
        upad = np.concatenate(
            [np.repeat(values[:1], half, axis=0), values,
             np.repeat(values[-1:], half, axis=0)]
        )
        lo = 2 * half
        for a in range(n):
            acc = np.zeros(m, dtype=complex)
            for b in range(n):
                col = kw[:, a, b]
                if np.abs(col).max() == 0.0:
                    continue
                acc += np.convolve(col, upad[:, b])[lo:lo + m]
            out[:, a] = acc

    for A, xi in K.point_masses():
        out += _interp_shifted(xs, values, xi) @ A.T
    return out


def _series_kernels(F):
    ks = []
    for t in F.terms:
        ks.extend(kern for kern, _ in t.factors if kern is not None)
        if t.outer is not None:
            ks.append(t.outer)
    return ks


def grid_nonlinearity(F, xs, values, mu=(), tail_tol=1e-10):
    """``F(u, mu)`` on the grid; numeric counterpart of the exact series.

    Mirrors the exact evaluation slot by slot: inner kernels convolve before
    the pointwise product, scalar kernels broadcast componentwise, the outer
    kernel convolves the placed product.
    """
    mu = (mu,) if np.isscalar(mu) else tuple(mu)
    xs = np.asarray(xs, dtype=float)
    values = np.asarray(values, dtype=complex)
    if values.ndim == 1:
        values = values[:, None]
    m, n = values.shape
    out = np.zeros((m, n), dtype=complex)
    for t in F.terms:
        weight = t.coeff
        for p, r in enumerate(t.mu_power):
            if r == 0:
                continue
            if p >= len(mu):
                raise ValueError(
                    f"term needs parameter {p}, only {len(mu)} supplied"
                )
            weight *= mu[p] ** r
        if weight == 0:
            continue
        prod = None
        for kern, comp in t.factors:
            if kern is None:
                s = values[:, comp]
            elif kern.n == 1 and n != 1:
                s = grid_convolve(kern, xs, values[:, [comp]], tail_tol)[:, 0]
            else:
                s = grid_convolve(kern, xs, values, tail_tol)[:, comp]
            prod = s if prod is None else prod * s
        placed = np.zeros((m, n), dtype=complex)
        if t.outer is not None and t.outer.n == 1 and n != 1:
            placed[:, t.target] = grid_convolve(
                t.outer, xs, prod[:, None], tail_tol
            )[:, 0]
        else:
            placed[:, t.target] = prod
            if t.outer is not None:
                placed = grid_convolve(t.outer, xs, placed, tail_tol)
        out += weight * placed
    return out


def _defect(K, F, xs, values, mu, tail_tol):
    return (
        values
        + grid_convolve(K, xs, values, tail_tol)
        + grid_nonlinearity(F, xs, values, mu, tail_tol)
    )


def residual(K, F, profile, mu=(), tail_tol=1e-10, require_convergence=False):
    """Defect norms of ``u + K*u + F(u, mu) = 0`` for a grid profile.

    Computes the defect on the grid and on its every-other-point coarsening;
    their difference estimates the quadrature error (the trapezoid rule is
    second order, so the coarse defect carries roughly four times the fine
    error).  Norms exclude the stencil margin at both ends.  With
    ``require_convergence`` a quadrature-dominated measurement raises.
    """
    xs, u = profile.xs, profile.values
    if K.n != profile.n:
        raise ValueError("kernel dimension does not match the profile")
    h = profile.h
    r_fine = _defect(K, F, xs, u, mu, tail_tol)
    r_coarse = _defect(K, F, xs[::2], u[::2], mu, tail_tol)

    kernels = [K] + _series_kernels(F)
    margin = max(_stencil_halfwidth(k, h, tail_tol) for k in kernels)
    margin_c = max(_stencil_halfwidth(k, 2 * h, tail_tol) for k in kernels)
    if 2 * margin >= len(xs) or 2 * margin_c >= len(xs[::2]):
        raise ValueError(
            "grid too narrow: the convolution stencil covers the whole domain"
        )
    diff = np.abs(r_fine[::2] - r_coarse).max(axis=1)
    quadrature_error = float(diff[margin_c:len(diff) - margin_c].max())

    mag = np.abs(r_fine).max(axis=1)
    inner = mag[margin:len(mag) - margin]
    max_norm = float(inner.max())
    sq = (np.abs(r_fine[margin:len(mag) - margin]) ** 2).sum()
    l2_norm = float(np.sqrt(h * sq))
    converged = quadrature_error <= max(0.5 * max_norm, 1e-9)
    if require_convergence and not converged:
        raise RuntimeError(
            f"convolution quadrature did not converge: two-grid estimate "
            f"{quadrature_error:.3g} against residual {max_norm:.3g}"
        )
    return ResidualReport(
        max_norm=max_norm,
        l2_norm=l2_norm,
        quadrature_error=quadrature_error,
        converged=converged,
        margin=margin,
        xs=xs,
        values=r_fine,
    )


# ---------------------------------------------------------------------------
# shooting: reversible pulse


def find_homoclinic(lin, cub, lam_hat=1.0, start=1e-6, step=1e-3,
                    tol_return=1e-4, max_span=None):
    """Homoclinic loop of the reversible planar system ``a'' = lam lin a + cub a^3``.

    Shoots from the one-dimensional unstable manifold of the origin (offset
    ``start`` along the eigenvector), integrates to the symmetric section
    ``a' = 0`` with the crossing time refined by bisection, then continues
    for the mirrored duration and reports the closest return to the origin.
    Deterministic: fixed steps, fixed bisection depth.
    """
    lin, cub, lam_hat = float(lin), float(cub), float(lam_hat)
    if lam_hat * lin <= 0 or cub >= 0:
        raise ValueError(
            "homoclinic shooting needs an unstable origin (lam lin > 0) and a"
            " focusing cubic (cub < 0)"
        )
    k = sqrt(lam_hat * lin)
    peak = sqrt(2.0 * lam_hat * lin / -cub)
    if max_span is None:
        max_span = 4.0 * (log(peak / start) + 5.0) / k

    def f(y):
        return np.array(
            [y[1], lam_hat * lin * y[0] + cub * y[0] ** 3], dtype=complex
        )

    y = np.array([start, start * k], dtype=complex)
    ts, ys = [0.0], [y]
    t = 0.0
    crossing = None
    while t < max_span:
        ynew = rk4_step(f, y, step)
        if ynew[1].real <= 0.0:
            lo, hi = 0.0, step
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if rk4_step(f, y, mid)[1].real <= 0.0:
                    hi = mid
                else:
                    lo = mid
            tau = 0.5 * (lo + hi)
            y = rk4_step(f, y, tau)
            if t + tau > t:
                t += tau
                ts.append(t)
                ys.append(y)
            else:
                ys[-1] = y
            crossing = t
            break
        y = ynew
        t += step
        ts.append(t)
        ys.append(y)
    half = Trajectory(np.array(ts), np.array(ys))
    if crossing is None:
        return ShootingResult(success=False, trajectory=half,
                              details={"rate": k, "reason": "no section crossing"})

    # return leg: mirror duration, track the closest approach to the origin
    nsteps = int(ceil(crossing / step))
    return_distance = np.inf
    for _ in range(nsteps):
        y = rk4_step(f, y, step)
        return_distance = min(return_distance, float(np.abs(y).max()))
    return ShootingResult(
        success=return_distance < tol_return,
        trajectory=half,
        section_value=float(half.ys[-1, 0].real),
        crossing_time=crossing,
        return_distance=return_distance,
        details={"rate": k, "peak_prediction": peak},
    )


# ---------------------------------------------------------------------------
# shooting: front


def find_front(kappa, alpha, beta, c_star, start=1e-6, step=None,
               tol_reach=1e-4, max_span=None):
    """Front of ``kappa a'' + c a' + a (alpha - beta a^2) = 0`` by shooting.

    Starts on the saddle's one-dimensional unstable manifold (eigenvector
    offset ``start`` from ``sqrt(alpha/beta)``) and integrates toward the
    rest state at the origin.  Success means the trajectory comes within
    ``tol_reach`` of the origin; the monotone flag checks the sign of the
    derivative samples (and non-negativity) up to that point.
    """
    kappa, alpha, beta = float(kappa), float(alpha), float(beta)
    c_star = float(c_star)
    if min(kappa, alpha, beta) <= 0 or c_star <= 0:
        raise ValueError("front shooting needs kappa, alpha, beta, c > 0")
    a_star = sqrt(alpha / beta)
    s_unstable = (-c_star + sqrt(c_star**2 + 8 * kappa * alpha)) / (2 * kappa)
    disc = c_star**2 - 4 * kappa * alpha
    slow = c_star / (2 * kappa) if disc < 0 else \
        (c_star - sqrt(disc)) / (2 * kappa)
    if step is None:
        step = 0.01 / max(1.0, s_unstable, c_star / kappa)
    if max_span is None:
        max_span = 3.0 * (log(a_star / start) / s_unstable
                          + log(a_star / tol_reach) / slow + 20.0)

    def f(y):
        a, p = y[0], y[1]
        return np.array(
            [p, -(c_star * p + a * (alpha - beta * a**2)) / kappa],
            dtype=complex,
        )

    y = np.array([a_star - start, -start * s_unstable], dtype=complex)
    ys = [y]
    nmax = int(ceil(max_span / step))
    reach_distance = float(np.abs(y).max())
    success = False
    for _ in range(nmax):
        y = rk4_step(f, y, step)
        ys.append(y)
        d = float(np.abs(y).max())
        reach_distance = min(reach_distance, d)
        if d <= tol_reach:
            success = True
            break
        if y[0].real < -0.5 * a_star or d > 1e6:
            break
    traj = Trajectory(step * np.arange(len(ys)), np.array(ys))
    slack = 1e-9 * a_star
    monotone = bool(
        traj.ys[:, 1].real.max() <= slack
        and traj.ys[:, 0].real.min() >= -slack
    )
    return ShootingResult(
        success=success,
        trajectory=traj,
        monotone=monotone,
        reach_distance=reach_distance,
        details={"saddle": a_star, "unstable_rate": s_unstable},
    )


# ---------------------------------------------------------------------------
# planar limit systems from a computed reduction


def _kept_entry(sf, powers, mu, slot, scale, tol):
    """Coefficient at one kept slot; off-slot weight must vanish."""
    idx = JetIndex(powers, mu)
    vec = sf.field.get(idx)
    if vec is None:
        raise ValueError(f"scaled field misses the entry {powers}|{mu}")
    off = np.abs(np.delete(vec, slot)).max() if len(vec) > 1 else 0.0
    if off > tol * scale:
        raise ValueError(
            f"scaled entry {powers}|{mu} is not concentrated on slot {slot}"
        )
    return complex(vec[slot])


def _check_real(z, name, scale, tol):
    if abs(z.imag) > tol * scale:
        raise ValueError(f"coefficient {name} is not real: {z}")
    return float(z.real)


def planar_pulse_system(sf, tol=1e-8):
    """Extract ``a'' = lam lin a + cub a^3`` from a scaled pair reduction.

    Expects the leading-order field of a reversible conjugate-pair reduction
    in coordinates ``(A, conj A, B, conj B)`` scaled with exponents
    ``(1, 1, 2, 2)``: the kept entries must be exactly the six resonant
    ones (B feeds A, the parameter and the focusing cubic feed B, plus
    conjugates).  Returns ``(lin, cub)`` with ``lin > 0 > cub``.
    """
    expected = {
        JetIndex((0, 0, 1, 0), (0,)): 0,
        JetIndex((0, 0, 0, 1), (0,)): 1,
        JetIndex((1, 0, 0, 0), (1,)): 2,
        JetIndex((0, 1, 0, 0), (1,)): 3,
        JetIndex((2, 1, 0, 0), (0,)): 2,
        JetIndex((1, 2, 0, 0), (0,)): 3,
    }
    extra = set(sf.field) - set(expected)
    if extra:
        raise ValueError(
            f"unexpected resonant entries in the scaled field: {sorted(extra, key=JetIndex.graded_key)}"
        )
    scale = max(np.abs(v).max() for v in sf.field.values()) if sf.field else 1.0
    coeffs = {
        idx: _kept_entry(sf, idx.powers, idx.mu, slot, scale, tol)
        for idx, slot in expected.items()
    }
    one = coeffs[JetIndex((0, 0, 1, 0), (0,))]
    if abs(one - 1.0) > tol * scale:
        raise ValueError("flow coupling A' = B is not normalized")
    lin = coeffs[JetIndex((1, 0, 0, 0), (1,))]
    cub = coeffs[JetIndex((2, 1, 0, 0), (0,))]
    for idx, partner in (
        (JetIndex((0, 1, 0, 0), (1,)), lin),
        (JetIndex((1, 2, 0, 0), (0,)), cub),
    ):
        if abs(coeffs[idx] - np.conj(partner)) > tol * scale:
            raise ValueError("conjugate entries of the scaled field disagree")
    lin = _check_real(lin, "lin", scale, tol)
    cub = _check_real(cub, "cub", scale, tol)
    if lin <= 0 or cub >= 0:
        raise ValueError(
            f"pulse balance needs lin > 0 > cub, got lin={lin}, cub={cub}"
        )
    return lin, cub


def planar_front_system(J, tol=1e-8):
    """Extract ``(kappa, alpha, beta)`` of the front equation from a reduction.

    Expects a reduction over a length-two chain at frequency zero with two
    formal parameters (bifurcation, wave speed).  Scales with exponents
    ``(1, 2)`` in the coordinates, ``(2, 1)`` in the parameters, checks the
    kept set is exactly ``{A' = B, B' = g0 c B + ga A + gb A^3}`` and
    returns the coefficients of ``kappa a'' + c a' + a (alpha - beta a^2) = 0``.
    """
    basis = J.basis
    if basis.size != 2 or J.nparams != 2:
        raise ValueError("front extraction expects 2 coordinates, 2 parameters")
    if max(abs(el.nu) for el in basis.elements) > 1e-6:
        raise ValueError("front extraction expects the chain at frequency zero")
    sf = scale_field(J.field, (1, 2), 1.0, (2, 1))
    expected = {
        JetIndex((0, 1), (0, 0)): 0,
        JetIndex((0, 1), (0, 1)): 1,
        JetIndex((1, 0), (1, 0)): 1,
        JetIndex((3, 0), (0, 0)): 1,
    }
    extra = set(sf.field) - set(expected)
    if extra:
        raise ValueError(
            f"unexpected resonant entries in the scaled field: {sorted(extra, key=JetIndex.graded_key)}"
        )
    scale = max(np.abs(v).max() for v in sf.field.values()) if sf.field else 1.0
    coeffs = {
        idx: _kept_entry(sf, idx.powers, idx.mu, slot, scale, tol)
        for idx, slot in expected.items()
    }
    one = coeffs[JetIndex((0, 1), (0, 0))]
    if abs(one - 1.0) > tol * scale:
        raise ValueError("flow coupling A' = B is not normalized")
    g0 = _check_real(coeffs[JetIndex((0, 1), (0, 1))], "g0", scale, tol)
    ga = _check_real(coeffs[JetIndex((1, 0), (1, 0))], "ga", scale, tol)
    gb = _check_real(coeffs[JetIndex((3, 0), (0, 0))], "gb", scale, tol)
    if g0 >= 0 or ga >= 0 or gb <= 0:
        raise ValueError(
            f"front balance needs g0, ga < 0 < gb, got ({g0}, {ga}, {gb})"
        )
    return -1.0 / g0, ga / g0, -gb / g0


# ---------------------------------------------------------------------------
# end-to-end drivers


def _pair_phases(J):
    """Carrier frequency of a conjugate-pair reduction, with sanity checks."""
    els = J.basis.elements
    if len(els) != 4 or [el.partner for el in els] != [1, 0, 3, 2]:
        raise ValueError("pulse driver expects a conjugate pair of chains")
    ell = float(els[0].nu.imag)
    if ell <= 0 or abs(els[0].nu.real) > 1e-9:
        raise ValueError("pulse driver expects imaginary pair frequencies")
    return ell


def pulse_profile(J, lam, step_x=0.1, step_scaled=1e-3, start=1e-7,
                  span_factor=0.98):
    """Reconstructed pulse at parameter ``lam > 0``.

    Scales the reduced field to its leading pulse balance, shoots the
    reversible planar homoclinic, extends it symmetrically, and maps the
    slow coordinates back through carrier phases and the graph map.
    Returns ``(GridProfile, ShootingResult)``.
    """
    if lam <= 0:
        raise ValueError("pulse reconstruction needs lam > 0")
    ell = _pair_phases(J)
    sf = scale_field(J.field, (1, 1, 2, 2), 1.0, (2,),
                     phases=(ell, -ell, ell, -ell))
    lin, cub = planar_pulse_system(sf)
    hom = find_homoclinic(lin, cub, lam_hat=1.0, start=start, step=step_scaled)
    if not hom.success:
        raise RuntimeError("no homoclinic loop detected in the scaled system")

    eps = sqrt(lam)
    T1 = hom.crossing_time
    m = int(ceil(span_factor * T1 / (eps * step_x)))
    xs = np.arange(-m, m + 1) * step_x
    # half orbit, peak at tau = 0: a even, a' odd
    tau = hom.trajectory.xs - T1
    a_half = CubicSpline(tau, hom.trajectory.ys[:, 0].real)
    p_half = CubicSpline(tau, hom.trajectory.ys[:, 1].real)
    z = eps * xs
    a = a_half(-np.abs(z))
    p = np.where(z <= 0, p_half(z), -p_half(-z))
    phase = np.exp(1j * ell * xs)
    A = eps * a * phase
    B = eps**2 * p * phase
    traj = Trajectory(xs, np.stack([A, np.conj(A), B, np.conj(B)], axis=1))
    return reconstruct(J, traj, mu=(lam,)), hom


def slope_loglog(xs, ys):
    """Least-squares slope of ``log ys`` against ``log xs``."""
    return float(
        np.polyfit(np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float)), 1)[0]
    )


def pulse_scaling_report(K, J, lams, step_x=0.1, on_profile=None, **kwargs):
    """Residual-vs-amplitude scaling of the pulse family.

    Builds the reconstructed pulse for every parameter value, measures the
    equation defect, and fits the log-log slope of residual against
    amplitude.  ``details['amplitude_ratio']`` is peak / sqrt(lam) at the
    smallest parameter.  ``on_profile(lam, profile, residual_report)`` is
    called once per parameter when supplied.
    """
    lams = sorted(float(l) for l in lams)
    rows = []
    for lam in reversed(lams):
        prof, hom = pulse_profile(J, lam, step_x=step_x, **kwargs)
        rep = residual(K, J.nonlinearity, prof, mu=(lam,))
        if on_profile is not None:
            on_profile(lam, prof, rep)
        rows.append(
            {
                "lambda": lam,
                "amplitude": prof.peak(),
                "residual_max": rep.max_norm,
                "residual_l2": rep.l2_norm,
                "return_distance": hom.return_distance,
                "quadrature_error": rep.quadrature_error,
            }
        )
    slope = None
    if len(rows) >= 2:
        slope = slope_loglog(
            [r["amplitude"] for r in rows], [r["residual_max"] for r in rows]
        )
    last = rows[-1]  # smallest parameter
    return WaveReport(
        kind="homoclinic",
        parameters={"lambda": lams},
        residual_max=last["residual_max"],
        residual_l2=last["residual_l2"],
        slope=slope,
        monotone=None,
        details={
            "sweep": rows,
            "amplitude_ratio": last["amplitude"] / sqrt(last["lambda"]),
        },
    )


def front_profile(J, epsilon, c_star, scaled_step=None, start=1e-6,
                  tol_reach=1e-4):
    """Reconstructed front at parameter ``epsilon`` and scaled speed ``c_star``.

    Extracts the planar front system from the reduction, shoots from the
    saddle, and maps the scaled trajectory back through the graph map with
    parameter values ``(epsilon^2, epsilon c_star)``.
    Returns ``(GridProfile, ShootingResult)``.
    """
    if epsilon <= 0:
        raise ValueError("front reconstruction needs epsilon > 0")
    kappa, alpha, beta = planar_front_system(J)
    fr = find_front(kappa, alpha, beta, c_star, start=start,
                    step=scaled_step, tol_reach=tol_reach)
    if not fr.success:
        raise RuntimeError("front shooting did not reach the rest state")
    xs = fr.trajectory.xs / epsilon
    ys = np.stack(
        [epsilon * fr.trajectory.ys[:, 0], epsilon**2 * fr.trajectory.ys[:, 1]],
        axis=1,
    )
    traj = Trajectory(xs, ys)
    return reconstruct(J, traj, mu=(epsilon**2, epsilon * c_star)), fr


def front_report(K, J, epsilon, c_star, on_profile=None, **kwargs):
    """Wave report for a single front run: defect norms and monotonicity.

    ``on_profile(epsilon, profile, residual_report)`` is called when supplied.
    """
    prof, fr = front_profile(J, epsilon, c_star, **kwargs)
    rep = residual(K, J.nonlinearity, prof, mu=(epsilon**2, epsilon * c_star))
    if on_profile is not None:
        on_profile(epsilon, prof, rep)
    kappa, alpha, beta = planar_front_system(J)
    return WaveReport(
        kind="front",
        parameters={"epsilon": float(epsilon), "c_star": float(c_star)},
        residual_max=rep.max_norm,
        residual_l2=rep.l2_norm,
        slope=None,
        monotone=fr.monotone,
        details={
            "reach_distance": fr.reach_distance,
            "kappa": kappa,
            "alpha": alpha,
            "beta": beta,
            "saddle": fr.details["saddle"],
            "quadrature_error": rep.quadrature_error,
        },
    )
