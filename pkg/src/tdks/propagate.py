"""Time integration of the coefficient system, forward and backward.

The one-step map is a symmetric Strang composition: an exact half-step of
the diagonal kinetic phase, a full step of everything else, and another
kinetic half-step.  For the forward problem (alpha=1) the middle stage is a
pointwise unitary phase on the grid (plus a midpoint-corrected source term
when an inhomogeneity is present), which preserves the discrete L2 norm up
to mode truncation.  The adjoint problem (alpha=0) has non-unitary coupling
terms that act through the real part of the unknown, so its middle stage is
an implicit midpoint solve by fixed-point iteration; the iteration only
sees the bounded (non-stiff) part of the operator, the stiff kinetic term
having been split off exactly.

Both stage maps are symmetric, so stepping a trajectory with the opposite
time-step sign reproduces it (used by the reversibility tests).
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .domain import norms, project, synthesize
from .potentials import density_from_grid
from .signals import zero_control
from .system import SystemContext, _bounded_apply, bilinear_B, bound_constants

BLOWUP_FACTOR = 1.0e6


class PropagationError(RuntimeError):
    pass


class BlowUpError(PropagationError):
    """Norm exceeded the blow-up guard; carries the last good time."""

    def __init__(self, message, t_last, partial=None):
        super().__init__(message)
        self.t_last = t_last
        self.partial = partial


@dataclass(eq=False)
class Trajectory:
    """Time-ordered snapshots of a solve plus per-step diagnostics."""

    times: np.ndarray
    states: np.ndarray  # (steps+1, modes, particles)
    l2: np.ndarray
    h1: np.ndarray
    re_b: np.ndarray
    im_b: np.ndarray
    alpha: int
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self):
        return float(self.times[-1])

    def state_at(self, t):
        times = self.times
        t = float(np.clip(t, times[0], times[-1]))
        i = int(np.searchsorted(times, t, side="right") - 1)
        i = min(max(i, 0), len(times) - 2)
        w = (t - times[i]) / (times[i + 1] - times[i])
        return (1.0 - w) * self.states[i] + w * self.states[i + 1]

    def export_csv(self, path):
        """Dump t followed by re/im of every coefficient, mode-major then particle."""
        steps, m, n = self.states.shape
        header = ["t"]
        for k in range(m):
            for j in range(n):
                header += [f"re_d_k{k}_p{j}", f"im_d_k{k}_p{j}"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i in range(steps):
                row = [repr(float(self.times[i]))]
                flat = self.states[i].reshape(-1)
                for z in flat:
                    row += [repr(float(z.real)), repr(float(z.imag))]
                writer.writerow(row)

    def export_diagnostics_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "l2_norm", "h1_norm", "re_b", "im_b"])
            for i in range(len(self.times)):
                writer.writerow(
                    [
                        repr(float(self.times[i])),
                        repr(float(self.l2[i])),
                        repr(float(self.h1[i])),
                        repr(float(self.re_b[i])),
                        repr(float(self.im_b[i])),
                    ]
                )


def _kinetic_phase(ctx, d, dt):
    return np.exp(-1j * ctx.basis.eigenvalues * dt)[:, None] * d


def _potential_stage_forward(ctx, t_mid, dt, d):
    psi = synthesize(ctx.basis, d)
    vext = ctx.external_at(t_mid)
    has_ks = (
        ctx.potentials.include_hartree
        or ctx.potentials.include_exchange
        or ctx.potentials.include_correlation
    )
    f = ctx.source_coefficients(t_mid)
    if f is None:
        v = vext
        if has_ks:
            v = v + ctx._ks_grid(density_from_grid(psi))
        psi = _kernels.phase_apply(psi, v, dt)
    else:
        f_grid = synthesize(ctx.basis, f)
        v = vext
        if has_ks:
            v = v + ctx._ks_grid(density_from_grid(psi))
        # midpoint density prediction: with a source the modulus is not conserved
        psi_half = psi - 0.5j * dt * (v[:, None] * psi + f_grid)
        v = vext
        if has_ks:
            v = v + ctx._ks_grid(density_from_grid(psi_half))
        psi = _kernels.phase_apply(psi, v, dt) - 1j * dt * _kernels.phase_apply(
            f_grid, v, 0.5 * dt
        )
    return project(ctx.basis, psi)


def _potential_stage_adjoint(ctx, t_mid, dt, d, tol, max_iter):
    """Implicit midpoint for the bounded part: y = d + dt*g((d+y)/2)."""

    def g(z):
        h = _bounded_apply(ctx, t_mid, z)
        f = ctx.source_coefficients(t_mid)
        if f is not None:
            h = h + f
        return -1j * h

    scale = max(1.0, float(np.linalg.norm(d)))
    y = d + dt * g(d)
    for _ in range(max_iter):
        y_new = d + dt * g(0.5 * (d + y))
        if np.linalg.norm(y_new - y) <= tol * scale:
            return y_new
        y = y_new
    raise PropagationError(
        f"fixed-point iteration did not converge within {max_iter} sweeps at t={t_mid}"
    )


def step(ctx, t, dt, d, fixed_point_tol=1e-10, fixed_point_max_iter=50):
    """Second-order one-step map d(t) -> d(t+dt); dt may be negative."""
    if dt == 0.0:
        return np.array(d, dtype=np.complex128, copy=True)
    d = np.asarray(d, dtype=np.complex128)
    if d.ndim == 1:
        d = d[:, None]
    d = _kinetic_phase(ctx, d, 0.5 * dt)
    t_mid = t + 0.5 * dt
    if ctx.alpha == 1:
        d = _potential_stage_forward(ctx, t_mid, dt, d)
    else:
        d = _potential_stage_adjoint(
            ctx, t_mid, dt, d, fixed_point_tol, fixed_point_max_iter
        )
    return _kinetic_phase(ctx, d, 0.5 * dt)


def _source_y_norm_sq(ctx, times):
    """Trapezoid of ||F(t)||_L2^2 over the solve grid (coefficient norms)."""
    if ctx.source is None:
        return 0.0
    vals = np.empty(len(times))
    for i, t in enumerate(times):
        f = ctx.source_coefficients(t)
        vals[i] = 0.0 if f is None else float(np.sum(f.real**2 + f.imag**2))
    return float(np.trapezoid(vals, times))


def _record(ctx, t, d, out, i):
    l2, h1 = norms(ctx.basis, d)
    b = bilinear_B(ctx, t, d, d)
    out["l2"][i] = l2
    out["h1"][i] = h1
    out["re_b"][i] = b.real
    out["im_b"][i] = b.imag
    return l2


def _check_envelope(ctx, traj, start_norm_sq, f_y_sq):
    ing = bound_constants(ctx, sample_times=traj.times)
    ctilde0 = (1 - ctx.alpha) * ing["c0"]
    horizon = abs(float(traj.times[-1] - traj.times[0]))
    bound = np.exp((1.0 + 2.0 * ctilde0) * horizon) * (start_norm_sq + f_y_sq)
    measured = float(np.max(traj.l2**2))
    traj.meta["l2_envelope_measured"] = measured
    traj.meta["l2_envelope_bound"] = float(bound)
    traj.meta["c0"] = ing["c0"]
    if measured > bound * 1.05 + 1e-300:
        raise PropagationError(
            f"norm growth violates the exponential envelope: {measured} > {bound}"
        )


def solve_forward(
    ctx,
    psi0,
    steps=None,
    fixed_point_tol=1e-10,
    fixed_point_max_iter=50,
):
    """Integrate the alpha=1 problem from psi0 over [0, T]."""
    if ctx.alpha != 1:
        raise PropagationError("solve_forward needs an alpha=1 context")
    spec = ctx.basis.spec
    steps = int(steps if steps is not None else spec.steps)
    dt = spec.horizon / steps
    d = np.asarray(psi0, dtype=np.complex128)
    if d.ndim == 1:
        d = d[:, None]
    m, n = d.shape
    times = np.linspace(0.0, spec.horizon, steps + 1)
    states = np.empty((steps + 1, m, n), dtype=np.complex128)
    out = {k: np.empty(steps + 1) for k in ("l2", "h1", "re_b", "im_b")}
    states[0] = d
    l2_init = _record(ctx, 0.0, d, out, 0)
    guard = max(l2_init, 1.0) * BLOWUP_FACTOR
    for i in range(steps):
        d = step(ctx, times[i], dt, d, fixed_point_tol, fixed_point_max_iter)
        states[i + 1] = d
        if not np.all(np.isfinite(d)):
            raise BlowUpError(
                f"non-finite state at t={times[i + 1]}", times[i], states[: i + 1]
            )
        l2 = _record(ctx, times[i + 1], d, out, i + 1)
        if l2 > guard:
            raise BlowUpError(
                f"norm exceeded {BLOWUP_FACTOR:g} x initial at t={times[i + 1]}",
                times[i],
                states[: i + 1],
            )
    traj = Trajectory(
        times=times,
        states=states,
        l2=out["l2"],
        h1=out["h1"],
        re_b=out["re_b"],
        im_b=out["im_b"],
        alpha=1,
        meta={"dt": dt},
    )
    _check_envelope(ctx, traj, l2_init**2, _source_y_norm_sq(ctx, times))
    return traj


def solve_adjoint(
    ctx,
    terminal,
    steps=None,
    fixed_point_tol=1e-10,
    fixed_point_max_iter=50,
):
    """Integrate the alpha=0 problem backward from the terminal state.

    Implemented as a negative-step solve in physical time; the returned
    trajectory is indexed forward (times increasing from 0 to T).  The time
    grid must be an integer refinement of the stored forward grid so the
    frozen-state interpolation error stays controlled.
    """
    if ctx.alpha != 0:
        raise PropagationError("solve_adjoint needs an alpha=0 context")
    spec = ctx.basis.spec
    steps = int(steps if steps is not None else spec.steps)
    if ctx._lambda_times is not None:
        fwd_steps = len(ctx._lambda_times) - 1
        if abs(ctx._lambda_times[-1] - spec.horizon) > 1e-12 * max(1.0, spec.horizon):
            raise PropagationError("forward trajectory does not cover [0, T]")
        if steps % fwd_steps != 0:
            raise PropagationError(
                f"adjoint grid ({steps} steps) must be an integer refinement of the "
                f"forward grid ({fwd_steps} steps)"
            )
    dt = spec.horizon / steps
    d = np.asarray(terminal, dtype=np.complex128)
    if d.ndim == 1:
        d = d[:, None]
    m, n = d.shape
    times = np.linspace(0.0, spec.horizon, steps + 1)
    states = np.empty((steps + 1, m, n), dtype=np.complex128)
    out = {k: np.empty(steps + 1) for k in ("l2", "h1", "re_b", "im_b")}
    states[steps] = d
    l2_term = _record(ctx, spec.horizon, d, out, steps)
    guard = max(l2_term, 1.0) * BLOWUP_FACTOR
    for i in range(steps, 0, -1):
        d = step(ctx, times[i], -dt, d, fixed_point_tol, fixed_point_max_iter)
        states[i - 1] = d
        if not np.all(np.isfinite(d)):
            raise BlowUpError(
                f"non-finite state at t={times[i - 1]}", times[i], states[i:]
            )
        l2 = _record(ctx, times[i - 1], d, out, i - 1)
        if l2 > guard:
            raise BlowUpError(
                f"norm exceeded {BLOWUP_FACTOR:g} x terminal at t={times[i - 1]}",
                times[i],
                states[i:],
            )
    traj = Trajectory(
        times=times,
        states=states,
        l2=out["l2"],
        h1=out["h1"],
        re_b=out["re_b"],
        im_b=out["im_b"],
        alpha=0,
        meta={"dt": dt, "direction": "backward"},
    )
    _check_envelope(ctx, traj, l2_term**2, _source_y_norm_sq(ctx, times))
    return traj


def forward_context(basis, potentials, kernel=None, control=None, source=None):
    if control is None:
        control = zero_control(basis.spec.horizon, basis.spec.steps)
    return SystemContext(
        basis=basis,
        potentials=potentials,
        kernel=kernel,
        alpha=1,
        control=control,
        source=source,
    )


def adjoint_context(basis, potentials, forward, kernel=None, control=None, source=None):
    if control is None:
        control = zero_control(basis.spec.horizon, basis.spec.steps)
    return SystemContext(
        basis=basis,
        potentials=potentials,
        kernel=kernel,
        alpha=0,
        control=control,
        forward=forward,
        source=source,
    )
