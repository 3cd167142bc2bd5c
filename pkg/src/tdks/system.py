"""Right-hand side of the coefficient ODE system and its bilinear forms.

One context serves two problems selected by ``alpha``:

  alpha=1  forward evolution  i d' = [kinetic + V_ext + V(rho(d))] d + f
  alpha=0  adjoint evolution  i d' = [kinetic + V_ext + V(rho_frozen)] d
                                      + coupling terms linear in Re<d, frozen> + f

where "frozen" is the stored forward solution interpolated in coefficient
space.  The coupling terms pair the unknown with the frozen state through
the pointwise real channel product and feed it back through the Hartree
kernel and the density derivative of the local potentials; they are
real-linear (not complex-linear), so they are applied matrix-free.  A dense
tabulated form exists purely for cross-checking.

Inner products are linear in the first argument and conjugated in the
second.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .domain import grid_inner, norms, project, synthesize
from .potentials import (
    density_from_grid,
    hartree,
    ks_potential,
    potential_sup,
    vxc_rho_derivative,
)


class SystemError(ValueError):
    pass


@dataclass(eq=False)
class SystemContext:
    """Immutable bundle of everything the ODE right-hand side needs.

    ``forward`` is required when alpha=0 and may be a trajectory-like object
    (attributes ``times`` and ``states``) or a callable t -> coefficients.
    ``source`` is an optional callable t -> grid field (nodes[, particles])
    or coefficient array (modes[, particles]).
    """

    basis: object
    potentials: object
    kernel: object = None
    alpha: int = 1
    control: object = None
    forward: object = None
    source: object = None
    _v0: np.ndarray = field(default=None, repr=False)
    _vu: np.ndarray = field(default=None, repr=False)
    _lambda_times: np.ndarray = field(default=None, repr=False)
    _lambda_states: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.alpha not in (0, 1):
            raise SystemError("alpha selects the problem instance and must be 0 or 1")
        if self.alpha == 0 and self.forward is None:
            raise SystemError("the adjoint problem (alpha=0) needs the forward solution")
        q = self.basis.node_count
        v0 = self.potentials.confinement
        vu = self.potentials.control_shape
        for name, v in (("confinement", v0), ("control_shape", vu)):
            if v is not None and v.shape[0] != q:
                raise SystemError(f"{name} field does not match the quadrature grid")
        self._v0 = v0 if v0 is not None else np.zeros(q)
        self._vu = vu if vu is not None else np.zeros(q)
        if self.potentials.include_hartree and self.kernel is None:
            raise SystemError("Hartree term enabled but no Coulomb kernel supplied")
        fw = self.forward
        if fw is not None and hasattr(fw, "times") and hasattr(fw, "states"):
            self._lambda_times = np.asarray(fw.times, dtype=np.float64)
            self._lambda_states = np.asarray(fw.states, dtype=np.complex128)

    # -- frozen forward state ------------------------------------------------

    def lambda_at(self, t):
        if self._lambda_states is not None:
            times = self._lambda_times
            t = float(np.clip(t, times[0], times[-1]))
            i = int(np.searchsorted(times, t, side="right") - 1)
            i = min(max(i, 0), len(times) - 2)
            w = (t - times[i]) / (times[i + 1] - times[i])
            return (1.0 - w) * self._lambda_states[i] + w * self._lambda_states[i + 1]
        if callable(self.forward):
            return np.asarray(self.forward(t), dtype=np.complex128)
        raise SystemError("no forward solution available")

    def u_value(self, t):
        return self.control.value(t) if self.control is not None else 0.0

    def external_at(self, t):
        return self._v0 + self.u_value(t) * self._vu

    def with_control(self, control):
        return replace(self, control=control)

    # -- assembly pieces -----------------------------------------------------

    def _ks_grid(self, rho):
        return ks_potential(self.potentials, self.kernel, rho, self.basis.spec.dimension)

    def _coupling_field(self, psi_grid, lam_grid, rho_lam):
        """Adjoint coupling applied to grid channels: (V_H(s) + dV*s) * lambda,
        where s = 2 * sum_j Re(psi_j * conj(lambda_j)) pointwise."""
        s = 2.0 * np.einsum("qj,qj->q", psi_grid.real, lam_grid.real) + 2.0 * np.einsum(
            "qj,qj->q", psi_grid.imag, lam_grid.imag
        )
        v = np.zeros_like(s)
        if self.potentials.include_hartree:
            v += hartree(self.kernel, s)
        dv = vxc_rho_derivative(self.potentials, rho_lam, self.basis.spec.dimension)
        v += dv * s
        return v[:, None] * lam_grid

    def source_coefficients(self, t):
        """Inhomogeneity projected onto the basis as (modes, particles), or None."""
        if self.source is None:
            return None
        f = np.asarray(self.source(t))
        if f.shape[0] == self.basis.node_count:
            f = project(self.basis, f.astype(np.complex128))
        else:
            f = f.astype(np.complex128)
        if f.ndim == 1:
            f = f[:, None]
        n = self.basis.spec.particles
        if f.shape == (self.basis.size, 1) and n > 1:
            f = np.repeat(f, n, axis=1)
        if f.shape != (self.basis.size, n):
            raise SystemError("source provider returned an array of unexpected shape")
        return f


def _bounded_apply(ctx, t, d):
    """All non-kinetic operator terms applied to d, as coefficients (without f)."""
    psi = synthesize(ctx.basis, d)
    fld = ctx.external_at(t)[:, None] * psi
    if ctx.alpha == 1:
        if (
            ctx.potentials.include_hartree
            or ctx.potentials.include_exchange
            or ctx.potentials.include_correlation
        ):
            rho = density_from_grid(psi)
            fld += ctx._ks_grid(rho)[:, None] * psi
    else:
        lam = synthesize(ctx.basis, ctx.lambda_at(t))
        rho_lam = density_from_grid(lam)
        fld += ctx._ks_grid(rho_lam)[:, None] * psi
        fld += ctx._coupling_field(psi, lam, rho_lam)
    return project(ctx.basis, fld)


def rhs(ctx, t, d):
    """Time derivative d' of the coefficient state at time t."""
    d = np.asarray(d, dtype=np.complex128)
    if d.ndim == 1:
        d = d[:, None]
    if not np.all(np.isfinite(d)):
        raise SystemError("right-hand side called with non-finite coefficients")
    h = ctx.basis.eigenvalues[:, None] * d + _bounded_apply(ctx, t, d)
    f = ctx.source_coefficients(t)
    if f is not None:
        h = h + f
    return -1j * h


def bilinear_B(ctx, t, psi, phi):
    """Quadratic form value B(psi, phi; u(t)); sesquilinear, kinetic + external
    plus (for alpha=0) the frozen coupling potential and the adjoint terms."""
    psi = np.atleast_2d(np.asarray(psi, dtype=np.complex128).T).T
    phi = np.atleast_2d(np.asarray(phi, dtype=np.complex128).T).T
    kin = complex(
        np.sum(ctx.basis.eigenvalues[:, None] * psi * np.conj(phi))
    )
    psi_g = synthesize(ctx.basis, psi)
    phi_g = synthesize(ctx.basis, phi)
    total = kin + grid_inner(ctx.basis, ctx.external_at(t)[:, None] * psi_g, phi_g)
    if ctx.alpha == 0:
        lam = synthesize(ctx.basis, ctx.lambda_at(t))
        rho_lam = density_from_grid(lam)
        total += grid_inner(ctx.basis, ctx._ks_grid(rho_lam)[:, None] * psi_g, phi_g)
        d_h, d_xc = _coupling_parts(ctx, psi_g, phi_g, lam, rho_lam)
        total += d_h + d_xc
    return total


def _coupling_parts(ctx, psi_g, phi_g, lam_g, rho_lam):
    s = 2.0 * np.einsum("qj,qj->q", psi_g.real, lam_g.real) + 2.0 * np.einsum(
        "qj,qj->q", psi_g.imag, lam_g.imag
    )
    if ctx.potentials.include_hartree:
        d_h = grid_inner(ctx.basis, hartree(ctx.kernel, s)[:, None] * lam_g, phi_g)
    else:
        d_h = 0.0 + 0.0j
    dv = vxc_rho_derivative(ctx.potentials, rho_lam, ctx.basis.spec.dimension)
    d_xc = grid_inner(ctx.basis, (dv * s)[:, None] * lam_g, phi_g)
    return d_h, d_xc


def adjoint_D(ctx, t, psi, phi):
    """Adjoint coupling form split into its Hartree and xc-derivative parts."""
    if ctx.alpha != 0:
        raise SystemError("the coupling form belongs to the alpha=0 problem")
    psi_g = synthesize(ctx.basis, psi)
    phi_g = synthesize(ctx.basis, phi)
    lam = synthesize(ctx.basis, ctx.lambda_at(t))
    rho_lam = density_from_grid(lam)
    return _coupling_parts(ctx, psi_g, phi_g, lam, rho_lam)


def nonlinear_G(ctx, d):
    """Projection of V(rho(d)) * Psi(d) onto every basis mode."""
    psi = synthesize(ctx.basis, d)
    rho = density_from_grid(psi)
    return project(ctx.basis, ctx._ks_grid(rho)[:, None] * psi)


def project_F(ctx, t):
    """Coefficient projection of the inhomogeneity at time t (zero if absent)."""
    f = ctx.source_coefficients(t)
    if f is None:
        m = ctx.basis.size
        n = ctx.basis.spec.particles
        return np.zeros((m, n), dtype=np.complex128)
    return f


def dense_coupling_tables(ctx, t):
    """Materialised real-linear coupling map, for cross-checking the
    matrix-free path: D(d) = T_re @ Re-part-action + T_im @ Im-part-action.

    Returns (t_re, t_im) of shape (modes*particles, modes*particles) complex,
    acting on the flattened coefficient vector.
    """
    m = ctx.basis.size
    n = ctx.basis.spec.particles
    lam = synthesize(ctx.basis, ctx.lambda_at(t))
    rho_lam = density_from_grid(lam)
    t_re = np.zeros((m * n, m * n), dtype=np.complex128)
    t_im = np.zeros((m * n, m * n), dtype=np.complex128)
    unit = np.zeros((m, n), dtype=np.complex128)
    for l in range(m):
        for j in range(n):
            unit[l, j] = 1.0
            col = project(
                ctx.basis,
                ctx._coupling_field(synthesize(ctx.basis, unit), lam, rho_lam),
            )
            t_re[:, l * n + j] = col.reshape(-1)
            unit[l, j] = 1.0j
            col = project(
                ctx.basis,
                ctx._coupling_field(synthesize(ctx.basis, unit), lam, rho_lam),
            )
            t_im[:, l * n + j] = col.reshape(-1)
            unit[l, j] = 0.0
    return t_re, t_im


def apply_dense_coupling(tables, d):
    t_re, t_im = tables
    flat_re = d.real.reshape(-1)
    flat_im = d.imag.reshape(-1)
    out = t_re @ flat_re + t_im @ flat_im
    return out.reshape(d.shape)


def bound_constants(ctx, sample_times=None):
    """Measured ingredients and the assembled form constants.

    The constants follow the proof recipes with every norm measured on the
    grid: c0 bounds the coupling form, c1 the full form against H1 norms,
    c3 closes the coercivity inequality.  For alpha=1 the coupling
    ingredients vanish identically.  With a callable forward provider the
    frozen-state sups are taken over ``sample_times``.
    """
    ing = {
        "v0_sup": potential_sup(ctx.basis, ctx._v0),
        "vu_sup": potential_sup(ctx.basis, ctx._vu),
        "u_sup": ctx.control.sup if ctx.control is not None else 0.0,
        "particles": float(ctx.basis.spec.particles),
    }
    n_part = ctx.basis.spec.particles
    if ctx.alpha == 0:
        kernel_l1 = ctx.kernel.row_sum_max if ctx.potentials.include_hartree else 0.0
        lam_sup = 0.0
        dv_rho_sup = 0.0
        v_lam_sup = 0.0
        if ctx._lambda_states is not None:
            snapshots = ctx._lambda_states
        elif sample_times is not None:
            snapshots = [ctx.lambda_at(t) for t in sample_times]
        else:
            raise SystemError(
                "bound constants for alpha=0 need stored snapshots or sample times"
            )
        for snap in snapshots:
            lam_g = synthesize(ctx.basis, snap)
            rho = density_from_grid(lam_g)
            lam_sup = max(lam_sup, float(np.abs(lam_g).max()))
            dv = vxc_rho_derivative(ctx.potentials, rho, ctx.basis.spec.dimension)
            dv_rho_sup = max(dv_rho_sup, float(np.abs(dv * rho).max()))
            v_lam_sup = max(v_lam_sup, float(np.abs(ctx._ks_grid(rho)).max()))
        c0_xc = 2.0 * n_part**2 * dv_rho_sup
        c0_h = 2.0 * n_part**1.5 * kernel_l1 * lam_sup**2
        ing.update(
            kernel_l1=kernel_l1,
            lambda_sup=lam_sup,
            dv_rho_sup=dv_rho_sup,
            v_lambda_sup=v_lam_sup,
            c0_xc=c0_xc,
            c0_h=c0_h,
        )
        c0 = c0_xc + c0_h
        coupling = c0 + v_lam_sup
    else:
        c0 = 0.0
        coupling = 0.0
        ing.update(kernel_l1=0.0, lambda_sup=0.0, dv_rho_sup=0.0, v_lambda_sup=0.0)
    ext = ing["v0_sup"] + ing["u_sup"] * ing["vu_sup"]
    ing["c0"] = c0
    ing["c1"] = 1.0 + coupling + ext
    ing["c3"] = 1.0 + coupling + ext
    return ing
