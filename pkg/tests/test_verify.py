import numpy as np
import pytest

from tdks import (
    check_coefficient_lipschitz,
    check_coulomb_lp,
    check_energy_estimates,
    check_form_bounds,
    check_galerkin_convergence,
    check_hartree_lipschitz,
    check_potential_continuity,
    check_uniqueness_gronwall,
    forward_context,
    random_coefficients,
    solve_forward,
)
from tdks.verify import make_report, probe_hartree_constant

from conftest import make_setup, unit_state


def test_coulomb_lp_closed_forms():
    r = check_coulomb_lp(3, 2, 1.0, 96)
    assert r.passed
    assert abs(r.ingredients["closed_form"] - 4 * np.pi) < 1e-12
    r = check_coulomb_lp(3, 1, 1.0, 64)
    assert r.passed
    assert abs(r.ingredients["closed_form"] - 2 * np.pi) < 1e-12
    # plain Monte-Carlo cross-check is well posed for p=1 (finite variance)
    rng = np.random.default_rng(1)
    pts = rng.uniform(-1, 1, size=(2_000_000, 3))
    d = np.linalg.norm(pts, axis=1)
    mask = d <= 1.0
    mc = 8.0 * np.mean(np.where(mask, 1.0 / np.where(mask, d, 1.0), 0.0))
    assert abs(mc / (2 * np.pi) - 1.0) < 0.01


def test_coulomb_lp_divergent_cases():
    r = check_coulomb_lp(3, 3, 1.0, 8)
    assert r.passed and r.detail == "flagged divergent"
    values = r.ingredients["values"]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert values[-1] >= 2.0 * values[0]
    assert check_coulomb_lp(2, 2, 1.0, 6).passed
    assert check_coulomb_lp(1, 2, 1.0, 8).passed


def test_coulomb_lp_rejects_bad_radius():
    with pytest.raises(ValueError):
        check_coulomb_lp(3, 2, 0.0)


def test_report_invariant():
    r = make_report("x", "ref", measured=1.0, bound=1.0, tolerance=0.0, formula="f")
    assert r.passed
    r = make_report("x", "ref", measured=1.001, bound=1.0, tolerance=0.0, formula="f")
    assert not r.passed
    r = make_report("x", "ref", measured=1.04, bound=1.0, tolerance=0.05, formula="f")
    assert r.passed
    r = make_report("x", "ref", measured=float("inf"), bound=1.0, tolerance=0.0, formula="f")
    assert not r.passed


@pytest.fixture(scope="module")
def desk():
    basis, pot, kernel = make_setup(
        lengths=(3.0,),
        grid=(32,),
        modes=(8,),
        steps=300,
        confinement={"kind": "harmonic", "amplitude": 1.0},
    )
    ctx = forward_context(basis, pot, kernel=kernel)
    return basis, pot, kernel, ctx


def test_hartree_lipschitz_stability(desk):
    basis, _, kernel, _ = desk
    r = check_hartree_lipschitz(basis, kernel, particles=1, pairs=40, seed=3)
    assert r.passed
    assert r.ingredients["c_hat"] > 0
    # identical pair contributes nothing (skip path)
    rng = np.random.default_rng(0)
    d = random_coefficients(basis, 1, rng, 1.0)

    class TwinRng:
        def __init__(self, d):
            self.d = d
            self.calls = 0

        def uniform(self, a, b):
            return 1.0

        def standard_normal(self, shape):
            self.calls += 1
            return self.d.real if self.calls % 2 else self.d.imag

    c = probe_hartree_constant(basis, kernel, 1, 1, np.random.default_rng(5))
    assert np.isfinite(c)


def test_hartree_lipschitz_scaling(desk):
    # scaled pairs stay under the same constant shape (cubic/cubic homogeneity)
    basis, _, kernel, _ = desk
    from tdks import norms, synthesize
    from tdks.potentials import hartree_pair_difference

    rng = np.random.default_rng(7)
    a = random_coefficients(basis, 1, rng, 0.8)
    b = random_coefficients(basis, 1, rng, 1.1)

    def ratio(x, y):
        _, h1x = norms(basis, x)
        _, h1y = norms(basis, y)
        num = hartree_pair_difference(basis, kernel, synthesize(basis, x), synthesize(basis, y))
        return num / ((h1x**2 + h1y**2) * np.linalg.norm(x - y))

    r1 = ratio(a, b)
    r2 = ratio(2 * a, 2 * b)
    assert np.isfinite(r1) and np.isfinite(r2)
    assert r2 < 4.0 * r1  # stays within the cubic/cubic scaling family


def test_energy_estimates_zero_solution(desk):
    basis, pot, kernel, ctx = desk
    traj = solve_forward(ctx, np.zeros((basis.size, 1)))
    reports = check_energy_estimates(traj, ctx, seed=0)
    for r in reports:
        assert r.measured == 0.0
        assert r.passed


def test_energy_estimates_free_mode():
    basis, pot, _ = make_setup(
        grid=(32,),
        modes=(8,),
        steps=200,
        include_hartree=False,
        include_exchange=False,
        include_correlation=False,
    )
    ctx = forward_context(basis, pot)
    traj = solve_forward(ctx, unit_state(basis, 0))
    reports = {r.name: r for r in check_energy_estimates(traj, ctx, seed=0)}
    env = reports["l2-envelope-alpha1"]
    assert env.passed
    assert env.measured <= 1.0 + 1e-12  # norm conserved, envelope has e^T margin
    assert env.bound >= np.exp(1.0) * (1.0 - 1e-12)


def test_energy_estimates_nonlinear_and_adjoint(desk):
    basis, pot, kernel, ctx = desk
    psi0 = unit_state(basis, 0)
    traj = solve_forward(ctx, psi0)
    fwd_reports = check_energy_estimates(traj, ctx, seed=1)
    assert all(r.passed for r in fwd_reports)

    from tdks import adjoint_context, adjoint_sources, solve_adjoint, ObjectiveSpec

    target = np.zeros_like(psi0)
    spec_obj = ObjectiveSpec(
        j1="trajectory", j2="terminal", nu=1.0, target_state=target,
        target_trajectory=lambda t: target,
    )
    term, src = adjoint_sources(spec_obj, traj)
    actx = adjoint_context(basis, pot, forward=traj, kernel=kernel, source=src)
    adj = solve_adjoint(actx, term)
    adj_reports = check_energy_estimates(adj, actx, seed=1)
    assert all(r.passed for r in adj_reports)
    names = {r.name for r in adj_reports}
    assert "l2-envelope-alpha0" in names and "x-norm-bound-alpha0" in names


def test_uniqueness_gronwall_nonlinear(desk):
    basis, pot, kernel, ctx = desk
    psi0 = unit_state(basis, 0)
    env, halving = check_uniqueness_gronwall(
        ctx, psi0, [1e-2, 1e-3], seed=2, halving_eps=1e-3
    )
    assert env.passed and halving.passed
    assert 0.4 <= halving.ingredients["ratio"] <= 0.6


def test_uniqueness_rejects_tiny_eps(desk):
    _, _, _, ctx = desk
    with pytest.raises(ValueError):
        check_uniqueness_gronwall(ctx, unit_state(ctx.basis, 0), [1e-12])


def test_gap_trivial_and_linear_cases():
    # identical data: deterministic solver gives identical trajectories
    basis, pot, kernel = make_setup(grid=(32,), modes=(6,), steps=100)
    ctx = forward_context(basis, pot, kernel=kernel)
    psi0 = unit_state(basis, 0)
    t1 = solve_forward(ctx, psi0)
    t2 = solve_forward(ctx, psi0)
    assert np.abs(t1.states - t2.states).max() == 0

    # free flow: the gap is an isometry invariant
    basis_f, pot_f, _ = make_setup(
        grid=(32,), modes=(6,), steps=100,
        include_hartree=False, include_exchange=False, include_correlation=False,
    )
    ctx_f = forward_context(basis_f, pot_f)
    rng = np.random.default_rng(3)
    delta = random_coefficients(basis_f, 1, rng, 1.0)
    a = solve_forward(ctx_f, psi0)
    b = solve_forward(ctx_f, psi0 + 1e-3 * delta)
    gap = np.sqrt(np.sum(np.abs(a.states - b.states) ** 2, axis=(1, 2)))
    assert np.abs(gap - gap[0]).max() < 1e-12 * gap[0] + 1e-15


def _convergence_builder(include_exchange=True, source=None):
    def builder(modes):
        basis, pot, kernel = make_setup(
            lengths=(3.0,),
            grid=(32,),
            modes=modes,
            steps=300,
            include_exchange=include_exchange,
            confinement={"kind": "harmonic", "amplitude": 1.0},
        )
        ctx = forward_context(basis, pot, kernel=kernel, source=source)
        return ctx, unit_state(basis, 0)

    return builder


def test_galerkin_convergence_invariant_subspace():
    def builder(modes):
        basis, pot, _ = make_setup(
            grid=(32,), modes=modes, steps=100,
            include_hartree=False, include_exchange=False, include_correlation=False,
        )
        return forward_context(basis, pot), unit_state(basis, 0)

    r = check_galerkin_convergence(builder, [[4], [6], [8]])
    assert r.passed and r.measured == 0.0


def test_galerkin_convergence_strictly_decreasing_468():
    r = check_galerkin_convergence(_convergence_builder(), [[4], [6], [8]])
    inc = r.ingredients["increments"]
    assert inc[1] < inc[0]


def test_galerkin_convergence_full_pass():
    r = check_galerkin_convergence(_convergence_builder(), [[4], [8], [12]])
    assert r.passed


def test_galerkin_convergence_with_inhomogeneity():
    basis_probe, _, _ = make_setup(lengths=(3.0,), grid=(32,), modes=(4,))

    def source(t):
        return (
            0.3
            * np.cos(2.0 * t)
            * np.sin(2 * np.pi * basis_probe.nodes[:, 0] / 3.0)
        ).astype(np.complex128)

    r = check_galerkin_convergence(_convergence_builder(source=source), [[4], [8], [12]])
    assert r.passed


def test_galerkin_convergence_needs_three(desk):
    with pytest.raises(ValueError):
        check_galerkin_convergence(_convergence_builder(), [[4], [8]])


def test_potential_continuity(desk):
    basis, pot, kernel, _ = desk
    r = check_potential_continuity(basis, pot, kernel, seed=4)
    assert r.passed
    errors = r.ingredients["errors"]
    assert all(b < a for a, b in zip(errors, errors[1:]))
    assert errors[-1] < 1e-6


def test_coefficient_lipschitz(desk):
    _, _, _, ctx = desk
    stability, growth = check_coefficient_lipschitz(ctx, radius=1.0, pairs=60, seed=5)
    assert stability.passed and growth.passed
    assert stability.ingredients["l_hat"] > 0


def test_form_bounds_both_instances(desk):
    basis, pot, kernel, ctx = desk
    reports = check_form_bounds(ctx, t=0.0, count=60, seed=6)
    assert all(r.passed for r in reports)
    names = {r.name for r in reports}
    assert "form-imag-vanishes-alpha1" in names

    from tdks import adjoint_context

    traj = solve_forward(ctx, unit_state(basis, 0))
    actx = adjoint_context(basis, pot, forward=traj, kernel=kernel)
    reports0 = check_form_bounds(actx, t=0.5, count=60, seed=6)
    assert all(r.passed for r in reports0)
    names0 = {r.name for r in reports0}
    assert "coupling-form-bound" in names0 and "form-imag-bound-alpha0" in names0


def test_checks_are_reproducible(desk):
    basis, pot, kernel, ctx = desk
    a = check_form_bounds(ctx, t=0.0, count=30, seed=7)
    b = check_form_bounds(ctx, t=0.0, count=30, seed=7)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]
