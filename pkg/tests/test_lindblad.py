import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from conftest import KAPPA, LAM, NBAR, OMEGA_M, TWO_PI
from ionsbm.errors import CapExceededError, ParameterError, PropagationError
from ionsbm.lindblad import (
    HERM_TOL,
    POS_TOL,
    SIGMA_X,
    SIGMA_Z,
    TRACE_TOL,
    ModeSpec,
    SpinParams,
    SystemSpec,
    build_dissipator,
    build_hamiltonian,
    destroy,
    evolve,
    expect,
    initial_state,
    liouvillian,
    mode_operator,
    number_operator,
    sigma_z_trajectory,
    spin_operator,
    spin_state,
    thermal_state,
    truncation_audit,
    unvec,
    vec,
)
from ionsbm.nonmarkov import trace_distance

DELTA_RES = TWO_PI * 1e5

# <sigma_z> for the resonant case on linspace(0, 20/Delta, 2001), every 100th sample, n_max = 15
RESONANT_GOLDEN = [
    0.9999999999999999, 0.5764912188115037, -0.040036571993815884, 0.018771456749475446,
    0.33795994480978414, 0.018672834852462628, -0.669544809873786, -0.6836094641401562,
    -0.03242018734728647, 0.2501357526506055, 0.03265632333430779, 0.06293207520632516,
    0.5129617594034833, 0.721069374844242, 0.2174314173328904, -0.38438997302730427,
    -0.28221222065910867, 0.04683993149465371, -0.22683514059106374, -0.6788884942399784,
    -0.5039805613815073,
]


def resonant_spec(n_max=15, lam=LAM):
    return SystemSpec(SpinParams(0.0, DELTA_RES), (ModeSpec(OMEGA_M, lam, KAPPA, NBAR, n_max),))


def random_density(rng, dim):
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    r = a @ a.conj().T
    return r / np.trace(r)


# conventions -----------------------------------------------------------------

def test_vectorization_is_column_stacking():
    rng = np.random.default_rng(0)
    a, b, r = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)) for _ in range(3))
    np.testing.assert_allclose(vec(a @ r @ b), np.kron(b.T, a) @ vec(r), atol=1e-12)
    np.testing.assert_array_equal(unvec(vec(r), 3), r)
    assert vec(np.array([[1, 2], [3, 4]])).tolist() == [1, 3, 2, 4]


def test_spin_is_first_factor():
    spec = SystemSpec(SpinParams(), (ModeSpec(1.0, 0.0, n_max=2),))
    sz = spin_operator(spec, SIGMA_Z).toarray()
    np.testing.assert_array_equal(sz, np.kron(SIGMA_Z, np.eye(3)))
    n = number_operator(spec, 0).toarray()
    np.testing.assert_allclose(n, np.kron(np.eye(2), np.diag([0, 1, 2])), atol=1e-15)


def test_cap():
    with pytest.raises(CapExceededError):
        SystemSpec(SpinParams(), (ModeSpec(1.0, 1.0, n_max=15),) * 3)
    assert SystemSpec(SpinParams(), (ModeSpec(1.0, 1.0, n_max=15),) * 3, max_dim=10 ** 4).dim == 2 * 16 ** 3


def test_mode_validation():
    for kw in ({"n_max": 0}, {"nbar": -1.0}, {"kappa": -1.0}, {"n_max": 2.5}):
        with pytest.raises(ParameterError):
            ModeSpec(1.0, 1.0, **kw)


# Hamiltonian -------------------------------------------------------------------

def test_hamiltonian_decoupled_spectrum():
    d, w = 0.7, 1.3
    spec = SystemSpec(SpinParams(d, 0.0), (ModeSpec(w, 0.0, n_max=6),))
    ev = np.sort(np.linalg.eigvalsh(build_hamiltonian(spec).toarray()))
    ref = np.sort([s * d / 2 + w * n for s in (1, -1) for n in range(7)])
    np.testing.assert_allclose(ev, ref, atol=1e-13)


def test_hamiltonian_hand_expansion():
    lam, w = 0.4, 1.0
    spec = SystemSpec(SpinParams(), (ModeSpec(w, lam, n_max=1),))
    h = build_hamiltonian(spec).toarray()
    # basis |up,0>, |up,1>, |down,0>, |down,1>
    ref = np.array([[0, -lam / 2, 0, 0],
                    [-lam / 2, w, 0, 0],
                    [0, 0, 0, lam / 2],
                    [0, 0, lam / 2, w]], dtype=complex)
    np.testing.assert_allclose(h, ref, atol=1e-15)


def test_hamiltonian_drive_sign():
    spec = SystemSpec(SpinParams(0.0, 2.0))
    np.testing.assert_allclose(build_hamiltonian(spec).toarray(), -1.0 * SIGMA_X, atol=1e-15)


def test_polaron_spectrum():
    w, lam = 1.0, 0.8
    spec = SystemSpec(SpinParams(), (ModeSpec(w, lam, n_max=40),))
    ev = np.sort(np.linalg.eigvalsh(build_hamiltonian(spec).toarray()))[:20]
    ref = np.repeat(w * np.arange(10) - lam ** 2 / (4 * w), 2)
    np.testing.assert_allclose(ev, ref, atol=1e-6 * w)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 2), st.floats(0, 2))
def test_hamiltonian_hermitian(d, delta, w, lam):
    spec = SystemSpec(SpinParams(d, delta), (ModeSpec(w, lam, n_max=4),))
    h = build_hamiltonian(spec).toarray()
    np.testing.assert_allclose(h, h.conj().T, atol=0)


# dissipator ------------------------------------------------------------------

def test_dissipator_zero_kappa():
    spec = SystemSpec(SpinParams(), (ModeSpec(1.0, 1.0, kappa=0.0, n_max=3),))
    assert build_dissipator(0, spec).nnz == 0


def test_dissipator_on_first_fock_state():
    k = 0.3
    spec = SystemSpec(SpinParams(), (ModeSpec(1.0, 0.0, kappa=k, n_max=3),))
    one = np.zeros((4, 4), complex)
    one[1, 1] = 1
    rho = np.kron(spin_state("up"), one)
    out = unvec(build_dissipator(0, spec) @ vec(rho), 8)
    zero = np.zeros((4, 4), complex)
    zero[0, 0] = 1
    np.testing.assert_allclose(out, 2 * k * np.kron(spin_state("up"), zero - one), atol=1e-15)


@given(st.integers(0, 10 ** 6), st.floats(0.0, 3.0))
def test_dissipator_trace_free(seed, nbar):
    spec = SystemSpec(SpinParams(), (ModeSpec(1.0, 0.0, kappa=0.5, nbar=nbar, n_max=4),))
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10))
    out = unvec(build_dissipator(0, spec) @ vec(a + a.conj().T), 10)
    assert abs(np.trace(out)) < 1e-12 * np.abs(a).max() * 10


def test_liouvillian_trace_preserving():
    spec = SystemSpec(SpinParams(0.3, 1.1), (ModeSpec(1.0, 0.5, 0.2, 0.4, 4), ModeSpec(2.0, 0.3, 0.1, 0.0, 3)),
                      spin_dephasing=0.05)
    gen = liouvillian(spec)
    ident = vec(np.eye(spec.dim))
    assert np.abs(gen.conj().T @ ident).max() < 1e-10


def test_multimode_dissipators_add():
    m1, m2 = ModeSpec(1.0, 0.5, 0.2, 0.1, 2), ModeSpec(2.0, 0.3, 0.3, 0.2, 2)
    spec = SystemSpec(SpinParams(0.1, 0.2), (m1, m2))
    h = build_hamiltonian(spec)
    d = spec.dim
    eye = np.eye(d)
    coherent = -1j * (np.kron(eye, h.toarray()) - np.kron(h.toarray().T, eye))
    total = coherent + build_dissipator(0, spec).toarray() + build_dissipator(1, spec).toarray()
    np.testing.assert_allclose(liouvillian(spec).toarray(), total, atol=1e-14)


# states ------------------------------------------------------------------------

def test_thermal_state_examples():
    np.testing.assert_array_equal(thermal_state(0.0, 4), np.diag([1, 0, 0, 0, 0]))
    p = np.diag(thermal_state(NBAR, 15)).real
    assert p[1] / p[0] == pytest.approx(0.025 / 1.025, rel=1e-14)
    n = float(np.sum(np.arange(16) * p))
    assert NBAR - 1e-6 < n <= NBAR
    with pytest.raises(ParameterError):
        thermal_state(-0.1, 3)


def test_initial_state_shapes():
    spec = resonant_spec(n_max=3)
    assert initial_state(spec, "up").shape == (8, 8)
    with pytest.raises(ParameterError):
        initial_state(spec, np.eye(3))
    with pytest.raises(ParameterError):
        initial_state(spec, "sideways")


# expectation values ------------------------------------------------------------

def test_expect_examples():
    spec = SystemSpec(SpinParams(), (ModeSpec(1.0, 0.0, nbar=NBAR, n_max=15),))
    rho = initial_state(spec, "up")
    assert expect(np.eye(spec.dim), rho) == pytest.approx(1.0, abs=1e-15)
    assert expect(spin_operator(spec, SIGMA_Z), rho) == pytest.approx(1.0, abs=1e-15)
    n = float(np.sum(np.arange(16) * np.diag(thermal_state(NBAR, 15)).real))
    assert expect(number_operator(spec, 0), rho) == pytest.approx(n, rel=1e-14)
    with pytest.raises(ParameterError):
        expect(np.eye(3), rho)
    with pytest.raises(PropagationError):
        expect(np.diag([1j, 0]), np.diag([1.0, 0.0]))


# evolution -----------------------------------------------------------------------

def test_zero_generator_is_identity():
    spec = SystemSpec(SpinParams(), (ModeSpec(0.0, 0.0, n_max=2),))
    rho0 = initial_state(spec, "plus_x")
    traj = evolve(spec, rho0, np.linspace(0, 5, 11))
    np.testing.assert_allclose(traj.states, np.broadcast_to(rho0, traj.states.shape), atol=1e-15)


def test_number_decay_law():
    k, nb, n0 = 0.37, 0.4, 2
    spec = SystemSpec(SpinParams(), (ModeSpec(1.3, 0.0, k, nb, 40),))
    fock = np.zeros((41, 41), complex)
    fock[n0, n0] = 1
    t = np.linspace(0, 6 / k, 61)
    traj = evolve(spec, np.kron(spin_state("up"), fock), t)
    got = traj.expect(number_operator(spec, 0))
    np.testing.assert_allclose(got, nb + (n0 - nb) * np.exp(-2 * k * t), rtol=1e-8)


def test_rabi_flopping():
    delta = TWO_PI * 3e3
    spec = SystemSpec(SpinParams(0.0, delta))
    t = np.linspace(0, 5 / delta, 201)
    sz = sigma_z_trajectory(spec, "up", t).sigma_z
    np.testing.assert_allclose(sz, np.cos(delta * t), atol=1e-12)
    s = sigma_z_trajectory(spec, "up", [0.0, np.pi / (2 * delta) * 0.999, np.pi / (2 * delta) * 1.001]).sigma_z
    assert s[1] > 0 > s[2]


def test_dense_exponential_agreement():
    spec = SystemSpec(SpinParams(0.4, 1.0), (ModeSpec(1.0, 0.6, 0.2, 0.3, 3), ModeSpec(0.5, 0.2, 0.1, 0.0, 3)))
    assert spec.dim <= 64
    gen = liouvillian(spec).toarray()
    rho0 = initial_state(spec, "plus_y")
    t = np.linspace(0, 4, 9)
    traj = evolve(spec, rho0, t)
    step = expm((t[1] - t[0]) * gen)
    v = vec(rho0)
    for r in traj.states:
        np.testing.assert_allclose(r, unvec(v, spec.dim), atol=1e-12)
        v = step @ v


def test_semigroup_steps():
    spec = resonant_spec(n_max=6)
    h = 0.3 / DELTA_RES
    one = evolve(spec, "up", [0.0, 2 * h]).states[-1]
    two = evolve(spec, "up", [0.0, h, 2 * h]).states[-1]
    np.testing.assert_allclose(one, two, atol=1e-12)


def test_nonuniform_grid_matches_uniform():
    spec = resonant_spec(n_max=6)
    t_u = np.linspace(0, 2 / DELTA_RES, 21)
    t_n = np.concatenate([t_u[:5], t_u[5:][::2]])
    a = evolve(spec, "up", t_u).states
    b = evolve(spec, "up", t_n).states
    np.testing.assert_allclose(b[5:], a[5:][::2], atol=1e-12)


def test_bad_time_grid():
    spec = SystemSpec(SpinParams(0.0, 1.0))
    with pytest.raises(ParameterError):
        evolve(spec, "up", [0.1, 0.2])
    with pytest.raises(ParameterError):
        evolve(spec, "up", [0.0, 0.2, 0.1])


def test_detailed_balance():
    k, nb = 0.5, 0.3
    spec = SystemSpec(SpinParams(0.2, 0.0), (ModeSpec(1.0, 0.0, k, nb, 25),))
    fock = np.zeros((26, 26), complex)
    fock[3, 3] = 1
    final = evolve(spec, np.kron(spin_state("up"), fock), [0.0, 10 / k]).states[-1]
    mode = final.reshape(2, 26, 2, 26).trace(axis1=0, axis2=2)
    assert trace_distance(mode, thermal_state(nb, 25)) <= 1e-6


@given(st.integers(0, 10 ** 6))
def test_state_invariants_random_start(seed):
    rng = np.random.default_rng(seed)
    spec = SystemSpec(SpinParams(rng.uniform(-1, 1), rng.uniform(-1, 1)),
                      (ModeSpec(1.0, rng.uniform(0, 1), rng.uniform(0, 0.5), rng.uniform(0, 1), 4),))
    rho0 = random_density(rng, spec.dim)
    traj = evolve(spec, rho0, np.linspace(0, 5, 11), check=False)
    for r in traj.states:
        assert abs(np.trace(r) - 1) <= TRACE_TOL
        assert np.abs(r - r.conj().T).max() <= HERM_TOL
        assert np.linalg.eigvalsh(r)[0] >= POS_TOL


def test_resonant_golden_trace():
    t = np.linspace(0, 20 / DELTA_RES, 2001)
    s = sigma_z_trajectory(resonant_spec(), "up", t)
    np.testing.assert_allclose(s.sigma_z[::100], RESONANT_GOLDEN, atol=1e-9)
    assert s.trace_err.max() <= TRACE_TOL and s.herm_err.max() <= HERM_TOL and s.min_eig.min() >= POS_TOL
    np.testing.assert_allclose(s.t_natural, DELTA_RES * t)
    assert np.any(np.diff(s.sigma_z[:400]) > 0)  # recurrences


def test_truncation_insensitivity():
    t = np.linspace(0, 20 / DELTA_RES, 2001)
    assert truncation_audit(resonant_spec(), "up", t) <= 1e-6


def test_destroy():
    a = destroy(4).toarray()
    np.testing.assert_allclose(a.conj().T @ a, np.diag([0, 1, 2, 3]), atol=1e-15)


def test_mode_operator_second_mode():
    spec = SystemSpec(SpinParams(), (ModeSpec(1.0, 0.0, n_max=1), ModeSpec(1.0, 0.0, n_max=2)))
    op = mode_operator(spec, 1, destroy(3)).toarray()
    np.testing.assert_array_equal(op, np.kron(np.eye(4), destroy(3).toarray()))
