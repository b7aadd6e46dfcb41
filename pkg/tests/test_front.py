import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.integrate import quad
from scipy.optimize import brentq
from scipy.special import expit
from scipy.sparse.linalg import spsolve

from pulsefront.cylinder import CylinderGrid, ProfileField
from pulsefront.errors import NearStationaryWarning, NonConvergence, TargetUnreachable, WindowTooShort
from pulsefront.front import (
    PulsatingFront,
    directional_speed_derivative,
    fit_decay,
    logistic_guess,
    resample_profile,
    shift_to_normalization,
    solve_front,
    speed_identity_residual,
    speed_identity_sides,
    sweep_directions,
    unit,
)
from pulsefront.medium import make_cubic_medium, mass_integral

SQ2 = np.sqrt(2.0)


def crossing(xi, u, level=0.5):
    k = np.nonzero((u[:-1] >= level) & (u[1:] < level))[0][0]
    return xi[k] + (u[k] - level) / (u[k] - u[k + 1]) * (xi[k + 1] - xi[k])


@pytest.fixture(scope="module")
def hom_front():
    m = make_cubic_medium(0.3)
    return m, solve_front(m, [1.0], CylinderGrid(40, 2048, 1, 1))


def test_homogeneous_speed_and_profile(hom_front):
    m, fr = hom_front
    assert fr.c == pytest.approx(0.4 / SQ2, abs=1e-3)
    xi = fr.grid.xi
    u = fr.U[:, 0]
    x0 = crossing(xi, u)
    exact = 1.0 / (1.0 + np.exp((xi - x0) / SQ2))
    assert np.abs(u - exact).max() <= 1e-3
    assert fr.residual_norm <= 1e-10
    assert fr.is_monotone()
    assert fr.U[0, 0] == 1.0 and fr.U[-1, 0] == 0.0


def test_balanced_medium_warns_and_stands():
    m = make_cubic_medium(0.5)
    with pytest.warns(NearStationaryWarning):
        fr = solve_front(m, [1.0], CylinderGrid(30, 1201, 1, 1))
    assert abs(fr.c) <= 1e-6


def test_periodic_1d_self_convergence():
    m = make_cubic_medium(0.3, [((1,), 0.1, 0.0)])
    cs = [solve_front(m, [1.0], CylinderGrid(40, n, 16, 1)).c for n in (1024, 2048)]
    assert cs[0] > 0 and cs[1] > 0
    assert abs(cs[0] - cs[1]) <= 1e-3


def test_resume_from_front_converges_immediately(hom_front):
    m, fr = hom_front
    again = solve_front(m, [1.0], fr.grid, init=fr)
    assert again.newton_iters <= 2
    assert again.c == pytest.approx(fr.c, abs=1e-12)


def test_iteration_cap_reports_residual():
    m = make_cubic_medium(0.3, [((1,), 0.1, 0.0)])
    with pytest.raises(NonConvergence) as info:
        solve_front(m, [1.0], CylinderGrid(30, 1201, 16, 1), max_iter=1)
    assert info.value.residual > 1e-10


def test_normalization_fixed_point(hom_front):
    _, fr = hom_front
    n1 = shift_to_normalization(fr)
    n2 = shift_to_normalization(n1)
    assert abs(n2.tau - n1.tau) <= 1e-8


def test_normalization_matches_quadrature_oracle():
    g = CylinderGrid(40, 4001, 1, 1)
    fr = PulsatingFront(np.array([1.0]), 0.4 / SQ2, ProfileField(g, logistic_guess(g)), "", 0.0)
    tau = shift_to_normalization(fr).tau

    def tail(t):
        return quad(lambda s: expit(-s / SQ2) ** 2, t, np.inf, epsabs=1e-14, epsrel=1e-13)[0]

    tau_star = brentq(lambda t: tail(t) - 1.0, -10, 10, xtol=1e-14)
    assert tau == pytest.approx(tau_star, abs=1e-6)


def test_normalization_translation_equivariance():
    g = CylinderGrid(40, 2001, 1, 1)
    base = logistic_guess(g)
    shifted = resample_profile(base, g, g, shift=-2.0)  # U(xi - 2)
    f0 = PulsatingFront(np.array([1.0]), 0.28, ProfileField(g, base), "", 0.0)
    f1 = PulsatingFront(np.array([1.0]), 0.28, ProfileField(g, shifted), "", 0.0)
    t0 = shift_to_normalization(f0).tau
    t1 = shift_to_normalization(f1).tau
    assert t1 - t0 == pytest.approx(2.0, abs=1e-8)


def test_normalization_needs_long_cylinder():
    g = CylinderGrid(0.3, 64, 1, 1)
    fr = PulsatingFront(np.array([1.0]), 0.28, ProfileField(g, logistic_guess(g)), "", 0.0)
    with pytest.raises(TargetUnreachable):
        shift_to_normalization(fr)


def test_identity_on_closed_form_logistic():
    m = make_cubic_medium(0.3)
    g = CylinderGrid(40, 2048, 1, 1)
    fr = PulsatingFront(np.array([1.0]), 0.4 / SQ2, ProfileField(g, logistic_guess(g)), "", 0.0)
    lhs, rhs = speed_identity_sides(fr, m)
    assert rhs == pytest.approx(1 / 30, abs=1e-14)
    assert speed_identity_residual(fr, m) <= 1e-6


def test_identity_of_solved_homogeneous_front(hom_front):
    m, fr = hom_front
    lhs, rhs = speed_identity_sides(fr, m)
    assert lhs == pytest.approx(1 / 30, abs=1e-5)
    assert speed_identity_residual(fr, m) <= 1e-4


def test_identity_standing_profile_absolute():
    m = make_cubic_medium(0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NearStationaryWarning)
        fr = solve_front(m, [1.0], CylinderGrid(30, 1201, 1, 1))
    lhs, rhs = speed_identity_sides(fr, m)
    assert abs(lhs - rhs) <= 1e-6


def test_identity_converges_second_order_in_periodic_medium():
    m = make_cubic_medium(0.35, [((1,), 0.1, 0.4)])
    res = [speed_identity_residual(solve_front(m, [1.0], CylinderGrid(30, n, 16, 1)), m) for n in (1024, 2047)]
    assert res[0] <= 1e-4
    assert res[0] / res[1] >= 3.0


@pytest.mark.parametrize("theta", [0.25, 0.3, 0.35])
def test_decay_rate_is_theta_independent(theta):
    m = make_cubic_medium(theta)
    fr = solve_front(m, [1.0], CylinderGrid(40, 2048, 1, 1))
    d = fit_decay(fr, m)
    assert d.mu_plus == pytest.approx(1 / SQ2, rel=0.02)
    # characteristic root of mu^2 - c mu - theta = 0
    assert d.mu_plus == pytest.approx((fr.c + np.sqrt(fr.c ** 2 + 4 * theta)) / 2, rel=0.02)
    assert d.satisfies_bound(m.gamma)
    assert np.sqrt(m.gamma) - 0.02 < d.mu_plus


def test_decay_reflection_swaps_sides():
    m = make_cubic_medium(0.35, [((1,), 0.1, 0.0)])
    g = CylinderGrid(40, 2048, 16, 1)
    fp = solve_front(m, [1.0], g)
    fm = solve_front(m, [-1.0], g)
    mirrored = 1.0 - fm.U[::-1]
    fake = PulsatingFront(fm.e, fm.c, ProfileField(g, mirrored), "", 0.0)
    a, b = fit_decay(fm, m), fit_decay(fake, m)
    assert b.mu_plus == pytest.approx(a.mu_minus, rel=1e-2)
    assert b.mu_minus == pytest.approx(a.mu_plus, rel=1e-2)
    assert fit_decay(fp, m).satisfies_bound(m.gamma)


def test_decay_window_too_short():
    m = make_cubic_medium(0.3)
    fr = solve_front(m, [1.0], CylinderGrid(8, 129, 1, 1))
    with pytest.raises(WindowTooShort):
        fit_decay(fr, m)


def test_sign_and_monotonicity_across_media():
    rng = np.random.default_rng(11)
    g = CylinderGrid(30, 1024, 16, 1)
    signs = set()
    for t0 in (0.25, 0.32, 0.4, 0.6, 0.7):
        m = make_cubic_medium(t0, [((1,), float(rng.uniform(0, 0.1)), float(rng.uniform(0, 6)))])
        fr = solve_front(m, [1.0], g)
        assert fr.is_monotone()
        assert np.sign(fr.c) == np.sign(mass_integral(m))
        signs.add(np.sign(fr.c))
    assert signs == {-1.0, 1.0}


def _reduced_stripe_speed(theta0, amp, L=20.0, n_xi=401, n_y=16):
    """Independent oracle for e = (0, 1) in a medium varying only in x1.

    The profile then solves c U_xi + U_xixi + U_y1y1 + f(y1, U) = 0 on a
    2-D cylinder; Newton with a sparse direct solve and a dense Fourier
    second-derivative matrix in y1.
    """
    h = 2 * L / (n_xi - 1)
    xi = np.linspace(-L, L, n_xi)
    y = np.arange(n_y) / n_y
    th = theta0 + amp * np.cos(2 * np.pi * y)
    k = np.fft.fftfreq(n_y, 1.0 / n_y)
    D2y = np.real(np.fft.ifft(-((2 * np.pi * k) ** 2)[:, None] * np.fft.fft(np.eye(n_y), axis=0), axis=0))
    I_xi = sp.identity(n_xi)
    Dxx = sp.diags([1, -2, 1], [-1, 0, 1], shape=(n_xi, n_xi)) / h ** 2
    D0 = sp.diags([-1, 1], [-1, 1], shape=(n_xi, n_xi)) / (2 * h)
    inner = np.ones(n_xi)
    inner[[0, -1]] = 0
    P = sp.diags(np.repeat(inner, n_y))
    B = sp.diags(np.repeat(1 - inner, n_y))
    Lxx = sp.kron(Dxx, sp.identity(n_y)) + sp.kron(I_xi, sp.csr_matrix(D2y))
    Dx = sp.kron(D0, sp.identity(n_y))
    U = np.repeat(1 / (1 + np.exp(xi / SQ2)), n_y)
    c = (1 - 2 * theta0) / SQ2
    TH = np.tile(th, n_xi)
    ref = Dx @ U
    target = np.repeat(np.r_[1.0, np.zeros(n_xi - 1)], n_y)
    U0 = U.copy()
    for _ in range(30):
        f = U * (1 - U) * (U - TH)
        fu = -3 * U ** 2 + 2 * (1 + TH) * U - TH
        R = P @ (c * (Dx @ U) + Lxx @ U + f) + B @ (U - target)
        ph = ref @ (U - U0)
        if max(np.abs(R).max(), abs(ph)) < 1e-12:
            break
        J = P @ (c * Dx + Lxx + sp.diags(fu)) + B
        col = P @ (Dx @ U)
        A = sp.bmat([[J, col[:, None]], [ref[None, :], None]]).tocsc()
        d = spsolve(A, -np.r_[R, ph])
        U = U + d[:-1]
        c = c + d[-1]
    return c


def test_stripe_direction_matches_reduced_problem():
    m = make_cubic_medium(0.3, [((1, 0), 0.1, 0.0)])
    fr = solve_front(m, [0.0, 1.0], CylinderGrid(20, 401, 16, 2))
    assert fr.c == pytest.approx(_reduced_stripe_speed(0.3, 0.1), abs=1e-9)


def test_homogeneous_sweep_is_isotropic():
    m = make_cubic_medium(0.3, dim=2)
    sw = sweep_directions(m, CylinderGrid(25, 801, 1, 2), 8)
    assert len(sw) == 8
    assert np.ptp(sw.speeds) <= 1e-8
    assert np.all(np.diff(sw.angles) > 0)


@pytest.fixture(scope="module")
def small_sweep():
    m = make_cubic_medium(0.3, [((1, 0), 0.08, 0.0), ((0, 1), 0.05, 0.0)])
    return m, sweep_directions(m, CylinderGrid(20, 401, 16, 2), 8)


def test_sweep_entries_are_certified(small_sweep):
    m, sw = small_sweep
    for en in sw.entries:
        assert en.front.residual_norm <= 1e-8 * (1 + abs(en.c))
        assert en.front.is_monotone()
        assert np.sign(en.c) == np.sign(mass_integral(m))
        assert en.decay.satisfies_bound(m.gamma)


def test_sweep_csv(small_sweep, tmp_path):
    _, sw = small_sweep
    sw.write_csv(tmp_path / "s.csv", config_hash="0" * 64)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[1] == "angle,c,residual,identity_residual,mu_plus,mu_minus,newton_iters"
    assert len(lines) == 2 + 8


def test_derivative_trivial_cases(small_sweep):
    m, sw = small_sweep
    fr = sw.fronts[1]
    assert directional_speed_derivative(fr, m, fr.e)[0] == 0.0
    hom = make_cubic_medium(0.3, dim=2)
    g = CylinderGrid(20, 401, 16, 2)
    fh = shift_to_normalization(solve_front(hom, unit(0.4), g))
    assert abs(directional_speed_derivative(fh, hom, unit(0.4 + np.pi / 2))[0]) <= 1e-6


def test_adjoint_derivative_matches_direct_difference(small_sweep):
    m, sw = small_sweep
    g = sw.grid
    phi, d = sw.angles[1], 1e-2
    fr = sw.fronts[1]
    val, _ = directional_speed_derivative(fr, m, unit(phi + np.pi / 2))
    cp = solve_front(m, unit(phi + d), g, init=fr).c
    cm = solve_front(m, unit(phi - d), g, init=fr).c
    fd = (cp - cm) / (2 * d)
    assert val == pytest.approx(fd, rel=1e-3)
    # scaling h scales c'
    val2, _ = directional_speed_derivative(fr, m, 2.0 * unit(phi + np.pi / 2))
    assert val2 == pytest.approx(2 * val, rel=1e-9)
