import numpy as np
import pytest

from tdks import (
    DomainSpec,
    PotentialConfig,
    PotentialError,
    build_basis,
    build_coulomb_kernel,
    correlation,
    density,
    density_from_grid,
    exchange,
    exchange_apply,
    external,
    grid_inner,
    hartree,
    random_coefficients,
    sample_field,
    synthesize,
    vxc_rho_derivative,
)

from conftest import make_setup, unit_state


@pytest.fixture(scope="module")
def setup_1d():
    return make_setup(grid=(48,), modes=(16,))


def test_density_zero_state(setup_1d):
    basis, _, _ = setup_1d
    assert np.all(density(basis, np.zeros((basis.size, 1))) == 0)


def test_density_unit_mode_integrates_to_one(setup_1d):
    basis, _, _ = setup_1d
    rho = density(basis, unit_state(basis, 0))
    assert rho.min() >= 0
    assert abs(np.sum(basis.weights * rho) - 1.0) < 1e-9


def test_density_two_particles_additive(setup_1d):
    basis, _, _ = setup_1d
    d = np.zeros((basis.size, 2), dtype=np.complex128)
    d[0, 0] = 1.0
    d[1, 1] = 1.0
    rho = density(basis, d)
    assert abs(np.sum(basis.weights * rho) - 2.0) < 1e-9


def test_hartree_zero(setup_1d):
    basis, _, kernel = setup_1d
    assert np.all(hartree(kernel, np.zeros(basis.node_count)) == 0)


def test_hartree_point_density_gives_kernel_column(setup_1d):
    basis, _, kernel = setup_1d
    q0 = basis.node_count // 3
    rho = np.zeros(basis.node_count)
    rho[q0] = 1.0 / basis.weights[q0]  # unit integral concentrated on one node
    vh = hartree(kernel, rho)
    assert np.abs(vh - kernel.matrix[:, q0] / basis.weights[q0]).max() < 1e-12


def test_hartree_positive_for_nonnegative_density(setup_1d):
    basis, _, kernel = setup_1d
    rng = np.random.default_rng(0)
    rho = density(basis, random_coefficients(basis, 2, rng, 1.0))
    assert hartree(kernel, rho).min() >= 0


def test_hartree_kernel_symmetry(setup_1d):
    basis, _, kernel = setup_1d
    rng = np.random.default_rng(1)
    r1 = density(basis, random_coefficients(basis, 1, rng, 1.0))
    r2 = density(basis, random_coefficients(basis, 1, rng, 0.7))
    lhs = np.sum(basis.weights * hartree(kernel, r1) * r2)
    rhs = np.sum(basis.weights * r1 * hartree(kernel, r2))
    assert abs(lhs - rhs) < 1e-8 * max(abs(lhs), 1.0)


def test_hartree_3d_uniform_density_monte_carlo_oracle():
    spec = DomainSpec(dimension=3, lengths=(1.0,) * 3, grid=(14,) * 3, particles=1)
    basis = build_basis(spec, (4,) * 3)
    kernel = build_coulomb_kernel(basis, 0.0)
    rho0 = 0.7
    vh = hartree(kernel, np.full(basis.node_count, rho0))
    center = int(np.argmin(((basis.nodes - 0.5) ** 2).sum(axis=1)))
    rng = np.random.default_rng(99)
    samples = rng.random((1_200_000, 3))
    mc = rho0 * np.mean(1.0 / np.linalg.norm(samples - basis.nodes[center], axis=1))
    assert abs(vh[center] / mc - 1.0) < 0.02


def test_kernel_dimension_policy():
    spec1 = DomainSpec(dimension=1, lengths=(1.0,), grid=(16,), particles=1)
    b1 = build_basis(spec1, (4,))
    with pytest.raises(PotentialError):
        build_coulomb_kernel(b1, 0.0)
    spec2 = DomainSpec(dimension=2, lengths=(1.0, 1.0), grid=(8, 8), particles=1)
    b2 = build_basis(spec2, (3, 3))
    with pytest.raises(PotentialError):
        build_coulomb_kernel(b2, 0.1)
    kernel = build_coulomb_kernel(b2, 0.0)
    assert np.isfinite(kernel.matrix).all() and kernel.matrix.min() >= 0


def test_exchange_constant_and_zero_density(setup_1d):
    basis, pot, _ = setup_1d
    ones = np.ones(basis.node_count)
    assert np.abs(exchange(pot, ones) - pot.exchange_c).max() < 1e-14
    assert np.all(exchange(pot, np.zeros(basis.node_count)) == 0)


def test_exchange_derivative_identity(setup_1d):
    # d(V_x)/drho * rho == beta * V_x pointwise
    basis, _, _ = setup_1d
    pot = PotentialConfig(coulomb_softening=0.1, include_correlation=False)
    rng = np.random.default_rng(2)
    rho = density(basis, random_coefficients(basis, 1, rng, 1.0)) + 0.01
    dv = vxc_rho_derivative(pot, rho, 1)
    assert np.abs(dv * rho - pot.exchange_beta * exchange(pot, rho)).max() < 1e-12


def test_exchange_apply_shapes(setup_1d):
    basis, pot, _ = setup_1d
    rng = np.random.default_rng(3)
    d = random_coefficients(basis, 2, rng, 1.0)
    psi = synthesize(basis, d)
    rho = density_from_grid(psi)
    out = exchange_apply(pot, rho, psi)
    assert out.shape == psi.shape
    assert np.abs(out - exchange(pot, rho)[:, None] * psi).max() == 0


def test_correlation_zero_limit_and_bound(setup_1d):
    basis, pot, _ = setup_1d
    assert np.all(correlation(pot, np.zeros(basis.node_count), 1) == 0)
    rng = np.random.default_rng(4)
    for _ in range(5):
        rho = density(basis, random_coefficients(basis, 2, rng, rng.uniform(0.1, 5.0)))
        vc = correlation(pot, rho, 1)
        assert np.abs(vc).max() <= pot.correlation_a / pot.correlation_b + 1e-15


def test_correlation_closed_form_3d():
    # rho = 3/(4 pi) gives ball radius 1, so V_c = -a/(1+b)
    pot = PotentialConfig(coulomb_softening=0.0)
    rho = np.full(5, 3.0 / (4.0 * np.pi))
    vc = correlation(pot, rho, 3)
    expect = -pot.correlation_a / (1.0 + pot.correlation_b)
    assert np.abs(vc - expect).max() < 1e-12


def test_vxc_derivative_zero_density_product(setup_1d):
    basis, pot, _ = setup_1d
    rho = np.zeros(basis.node_count)
    dv = vxc_rho_derivative(pot, rho, 1)
    assert np.all(dv * rho == 0)


def test_vxc_derivative_finite_difference_oracle(setup_1d):
    basis, pot, _ = setup_1d
    rng = np.random.default_rng(6)
    rho = density(basis, random_coefficients(basis, 1, rng, 1.0)) + 0.05
    dv = vxc_rho_derivative(pot, rho, 1)
    eps = 1e-6
    up = exchange(pot, rho + eps) + correlation(pot, rho + eps, 1)
    dn = exchange(pot, rho - eps) + correlation(pot, rho - eps, 1)
    fd = (up - dn) / (2 * eps)
    assert np.abs(dv / fd - 1.0).max() < 1e-6


def test_external_zero_control_and_linearity(setup_1d):
    basis, _, _ = setup_1d
    v0 = sample_field(basis, "harmonic", {"amplitude": 2.0})
    vu = sample_field(basis, "dipole", {"amplitude": 1.0})
    pot = PotentialConfig(coulomb_softening=0.1, confinement=v0, control_shape=vu)
    assert np.abs(external(pot, 0.0) - v0).max() == 0
    pot_b = PotentialConfig(coulomb_softening=0.1, control_shape=vu)
    assert np.abs(external(pot_b, 1.0) - vu).max() == 0
    lhs = external(pot, 0.4) + external(pot, -1.1) - v0
    assert np.abs(lhs - external(pot, 0.4 - 1.1)).max() < 1e-12


def test_exchange_local_lipschitz_surrogate(setup_1d):
    # bounded grid pairs with a stable ratio; the constant grows with the radius
    basis, _, _ = setup_1d
    pot = PotentialConfig(coulomb_softening=0.1, include_correlation=False, include_hartree=False)
    rng = np.random.default_rng(8)

    def probe(radius, pairs):
        worst = 0.0
        for _ in range(pairs):
            a = synthesize(basis, random_coefficients(basis, 1, rng, rng.uniform(0.1, 1.0) * radius))
            b = synthesize(basis, random_coefficients(basis, 1, rng, rng.uniform(0.1, 1.0) * radius))
            num = exchange_apply(pot, density_from_grid(a), a) - exchange_apply(
                pot, density_from_grid(b), b
            )
            gap = np.sqrt(np.sum(basis.weights * np.abs(a - b).sum(axis=1) ** 2))
            l2 = np.sqrt(np.sum(basis.weights[:, None] * np.abs(num) ** 2))
            worst = max(worst, l2 / gap)
        return worst

    l_small = probe(1.0, 40)
    l_small_more = probe(1.0, 80)
    assert np.isfinite(l_small) and l_small > 0
    assert l_small_more < 2.0 * l_small
    assert probe(4.0, 40) > l_small


def test_potential_config_validation():
    with pytest.raises(PotentialError):
        PotentialConfig(exchange_c=+1.0)
    with pytest.raises(PotentialError):
        PotentialConfig(exchange_beta=1.0)
    with pytest.raises(PotentialError):
        PotentialConfig(correlation_a=-0.1)
    with pytest.raises(PotentialError):
        PotentialConfig(coulomb_softening=-0.1)
    with pytest.raises(PotentialError):
        PotentialConfig(confinement=np.array([1.0, np.inf]))


def test_sample_field_presets_and_errors(setup_1d):
    basis, _, _ = setup_1d
    assert np.all(sample_field(basis, "zero") == 0)
    well = sample_field(basis, "well", {"depth": -3.0, "width_fraction": 0.5})
    assert well.min() == -3.0 and well.max() == 0.0
    dip = sample_field(basis, "dipole", {"amplitude": 2.0})
    assert abs(dip[0] + 1.0 * 2.0 * 0.5) < 1e-12  # left edge of a unit box
    arr = sample_field(basis, "array", {"values": list(range(basis.node_count))})
    assert arr[3] == 3.0
    with pytest.raises(PotentialError):
        sample_field(basis, "array", {"values": [1.0, 2.0]})
    with pytest.raises(PotentialError):
        sample_field(basis, "nope")
    with pytest.raises(PotentialError):
        sample_field(basis, "harmonic", {"amplitude": 1.0, "bogus": 2})


def test_grid_inner_conjugation_convention(setup_1d):
    basis, _, _ = setup_1d
    rng = np.random.default_rng(9)
    f = rng.standard_normal((basis.node_count, 1)) + 1j * rng.standard_normal(
        (basis.node_count, 1)
    )
    g = rng.standard_normal((basis.node_count, 1)) + 1j * rng.standard_normal(
        (basis.node_count, 1)
    )
    assert abs(grid_inner(basis, 2j * f, g) - 2j * grid_inner(basis, f, g)) < 1e-12
    assert abs(grid_inner(basis, f, 2j * g) - (-2j) * grid_inner(basis, f, g)) < 1e-12
