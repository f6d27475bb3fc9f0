import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from extremal_steering.dubins3d import (
    CArc,
    Frame3D,
    Goal3D,
    HArc,
    HParams,
    SSeg,
    TwoWordPath3D,
    Word3D,
    endpoint_c_arc,
    endpoint_s,
    follow,
    integrate_h_arc,
    sample_path_3d,
    solve_dubins3d,
    structure_3d,
    torsion_fixed_points,
    word_residual_3d,
)
from extremal_steering.reach import sample_reachable


def random_frames(rng, m):
    t = rng.normal(size=(m, 3))
    t /= np.linalg.norm(t, axis=1)[:, None]
    n = rng.normal(size=(m, 3))
    n -= np.sum(n * t, axis=1)[:, None] * t
    n /= np.linalg.norm(n, axis=1)[:, None]
    x = rng.uniform(-2, 2, (m, 3))
    return x, t, n


def rk4_turning(x, y, omega, length, steps=2000):
    """RK4 of x' = y, y' = u with the constant-rate turn u = omega x y."""
    h = (length / steps)[:, None]

    def f(x, y):
        return y, np.cross(omega, y)

    for _ in range(steps):
        a1, b1 = f(x, y)
        a2, b2 = f(x + 0.5 * h * a1, y + 0.5 * h * b1)
        a3, b3 = f(x + 0.5 * h * a2, y + 0.5 * h * b2)
        a4, b4 = f(x + h * a3, y + h * b3)
        x = x + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        y = y + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
    return x, y


def helix_closed_form(f0, s):
    # kappa = tau = 1: the frame spins about (T + B) / sqrt(2) at rate sqrt(2)
    T0, B0 = f0.tangent, f0.binormal
    a = (T0 + B0) / math.sqrt(2)
    r = math.sqrt(2)
    par = (T0 @ a) * a
    perp = T0 - par
    cross = np.cross(a, T0)
    pos = f0.position + s * par + math.sin(r * s) / r * perp + (1 - math.cos(r * s)) / r * cross
    tan = par + math.cos(r * s) * perp + math.sin(r * s) * cross
    return pos, tan


def raw_h_oracle(f0, params, s_end):
    """Frenet-Serret with the torsion equation integrated in tau directly."""
    g = f0.turned(params.psi)
    zeta = params.zeta

    def rhs(s, v):
        T, N, tau, td = v[3:6], v[6:9], v[9], v[10]
        B = np.cross(T, N)
        tdd = 1.5 * td**2 / tau - 2 * tau**3 + 2 * tau - zeta * tau * math.sqrt(abs(tau))
        return np.concatenate([T, N, -T + tau * B, [td, tdd]])

    v0 = np.concatenate([g.position, g.tangent, g.normal, [params.tau0, params.tau_dot0]])
    sol = solve_ivp(rhs, (0, s_end), v0, method="DOP853", rtol=1e-12, atol=1e-12)
    return sol.y[:, -1]


# --- C and S endpoints ------------------------------------------------------------


def test_c_and_s_examples():
    f = Frame3D.canonical()
    q = endpoint_c_arc(f, 0.0, math.pi / 2)
    np.testing.assert_allclose(q.position, [1, 1, 0], atol=1e-15)
    np.testing.assert_allclose(q.tangent, [0, 1, 0], atol=1e-15)
    z = endpoint_c_arc(f, 1.3, 0.0)
    np.testing.assert_array_equal(z.position, f.position)
    np.testing.assert_array_equal(z.tangent, f.tangent)
    np.testing.assert_allclose(endpoint_s(f, 4.0).position, [4, 0, 0])
    np.testing.assert_array_equal(endpoint_s(f, 0.0).position, f.position)
    ab = endpoint_s(endpoint_s(f, 1.25), 2.5).position
    np.testing.assert_allclose(ab, endpoint_s(f, 3.75).position, atol=1e-15)
    with pytest.raises(ValueError):
        endpoint_s(f, -1.0)


def test_c_arcs_match_rk4_on_1000_random_cases():
    rng = np.random.default_rng(30)
    m = 1000
    x, t, n = random_frames(rng, m)
    phi = rng.uniform(-math.pi, math.pi, m)
    length = rng.uniform(0, 3, m)
    b = np.cross(t, n)
    d = np.cos(phi)[:, None] * n + np.sin(phi)[:, None] * b
    xr, yr = rk4_turning(x, t, np.cross(t, d), length)
    for i in range(m):
        q = endpoint_c_arc(Frame3D(x[i], t[i], n[i]), phi[i], length[i])
        np.testing.assert_allclose(q.position, xr[i], atol=1e-9)
        np.testing.assert_allclose(q.tangent, yr[i], atol=1e-9)


def test_s_segments_match_rk4_on_1000_random_cases():
    rng = np.random.default_rng(31)
    m = 1000
    x, t, n = random_frames(rng, m)
    length = rng.uniform(0, 5, m)
    xr, yr = rk4_turning(x, t, np.zeros((m, 3)), length, steps=10)
    for i in range(m):
        q = endpoint_s(Frame3D(x[i], t[i], n[i]), length[i])
        np.testing.assert_allclose(q.position, xr[i], atol=1e-9)
        np.testing.assert_allclose(q.tangent, yr[i], atol=1e-9)


def test_frames_stay_orthonormal():
    rng = np.random.default_rng(32)
    f = Frame3D.canonical()
    for k in range(60):
        r = k % 3
        if r == 0:
            f = endpoint_c_arc(f, rng.uniform(-3, 3), rng.uniform(0, 5))
        elif r == 1:
            f = endpoint_s(f, rng.uniform(0, 2))
        else:
            f, _ = integrate_h_arc(f, HParams(rng.uniform(0, 2), rng.choice([-1, 1]) * rng.uniform(0.3, 2),
                                              rng.normal(scale=0.3), rng.uniform(0, 2),
                                              rng.uniform(-3, 3)))
        assert abs(np.linalg.norm(f.tangent) - 1) <= 1e-8
        assert abs(np.linalg.norm(f.normal) - 1) <= 1e-8
        assert abs(f.tangent @ f.normal) <= 1e-8


# --- H arcs -----------------------------------------------------------------------


def test_h_arc_zero_length_only_turns_normal():
    f = Frame3D.canonical()
    g, _ = integrate_h_arc(f, HParams(0.0, 1.0, psi=math.pi / 2))
    np.testing.assert_array_equal(g.position, f.position)
    np.testing.assert_allclose(g.normal, [0, 0, 1], atol=1e-15)


def test_unit_torsion_helix_matches_closed_form():
    rng = np.random.default_rng(33)
    x, t, n = random_frames(rng, 3)
    for i in range(3):
        f0 = Frame3D(x[i], t[i], n[i])
        s = 7.5
        end, trace = integrate_h_arc(f0, HParams(s, 1.0), tol=1e-12)
        pos, tan = helix_closed_form(f0, s)
        np.testing.assert_allclose(end.position, pos, atol=1e-8)
        np.testing.assert_allclose(end.tangent, tan, atol=1e-8)
        np.testing.assert_allclose(trace["tau"], 1.0, atol=1e-12)


@pytest.mark.parametrize("zeta", [0.0, 1.0, 2.0])
def test_torsion_fixed_points_stay_constant(zeta):
    roots = torsion_fixed_points(zeta)
    assert roots.size >= 2
    for tau in roots:
        np.testing.assert_allclose(-2 * tau**3 + 2 * tau - zeta * tau * math.sqrt(abs(tau)), 0.0,
                                   atol=1e-12)
        _, trace = integrate_h_arc(Frame3D.canonical(), HParams(6.0, tau, 0.0, zeta))
        assert np.max(np.abs(trace["tau"] - tau)) <= 1e-7


def test_zeta_zero_fixed_points_are_unit():
    np.testing.assert_allclose(torsion_fixed_points(0.0), [-1.0, 1.0], atol=1e-12)


def test_h_arc_matches_raw_torsion_equation():
    rng = np.random.default_rng(34)
    for _ in range(5):
        p = HParams(rng.uniform(0.5, 3.0), rng.choice([-1, 1]) * rng.uniform(0.4, 1.8),
                    rng.normal(scale=0.3), rng.uniform(-0.5, 2.0), rng.uniform(-3, 3))
        end, trace = integrate_h_arc(Frame3D.canonical(), p, tol=1e-12)
        ref = raw_h_oracle(Frame3D.canonical(), p, p.length)
        np.testing.assert_allclose(end.position, ref[:3], atol=1e-7)
        np.testing.assert_allclose(end.tangent, ref[3:6], atol=1e-7)
        np.testing.assert_allclose(trace["tau"][-1], ref[9], rtol=1e-6)


def test_h_arc_self_convergence():
    p = HParams(2.5, 0.7, 0.4, 1.2, 0.3)
    a, _ = integrate_h_arc(Frame3D.canonical(), p)
    b, _ = integrate_h_arc(Frame3D.canonical(), p, tol=1e-11)
    assert np.linalg.norm(a.position - b.position) <= 1e-7


def test_h_arc_curvature_and_torsion_by_fd():
    p = HParams(3.0, 0.8, 0.3, 1.0, 0.0)
    h = 1e-2
    s = np.arange(0.0, 3.0 + h / 2, h)
    _, tr = integrate_h_arc(Frame3D.canonical(), p, tol=1e-12, s_eval=s)
    x = tr["position"]
    d1 = (x[2:] - x[:-2]) / (2 * h)
    d2 = (x[2:] - 2 * x[1:-1] + x[:-2]) / h**2
    kappa = np.linalg.norm(np.cross(d1, d2), axis=1) / np.linalg.norm(d1, axis=1) ** 3
    np.testing.assert_allclose(kappa, 1.0, atol=1e-4)
    d3 = (x[4:] - 2 * x[3:-1] + 2 * x[1:-3] - x[:-4]) / (2 * h**3)
    c = np.cross(d1[1:-1], d2[1:-1])
    tau_fd = np.sum(c * d3, axis=1) / np.sum(c * c, axis=1)
    # integrated torsion at the same arclengths
    ref = np.array([integrate_h_arc(Frame3D.canonical(), HParams(si, 0.8, 0.3, 1.0), tol=1e-12)[1]["tau"][-1]
                    for si in s[2:-2:25]])
    np.testing.assert_allclose(tau_fd[::25], ref, atol=1e-3)


def test_h_params_validation():
    with pytest.raises(ValueError):
        HParams(1.0, 1e-9)
    with pytest.raises(ValueError):
        HParams(-1.0, 1.0)


# --- residual ---------------------------------------------------------------------


def test_straight_residual_is_zero():
    goal = Goal3D([5.0, 0, 0], [1, 0, 0])
    r = word_residual_3d(goal, 5.0, ("S", "S"), [2.0])
    np.testing.assert_allclose(r, 0.0, atol=1e-15)


def test_residual_matches_rk4_chain():
    rng = np.random.default_rng(35)
    T, m = 6.0, 20
    goal = Goal3D([1.0, 2.0, -1.0], [0.0, 0.6, 0.8])
    lens = rng.dirichlet(np.ones(6), size=m) * T
    phis = rng.uniform(-math.pi, math.pi, (m, 4))
    # all cases advance together, one primitive at a time
    x = np.zeros((m, 3))
    y = np.tile([1.0, 0.0, 0.0], (m, 1))
    nrm = np.tile([0.0, 1.0, 0.0], (m, 1))
    k = 0
    for j, c in enumerate("CSCCSC"):
        ell = lens[:, j]
        if c == "S":
            x = x + ell[:, None] * y
            continue
        d = np.cos(phis[:, k])[:, None] * nrm + np.sin(phis[:, k])[:, None] * np.cross(y, nrm)
        om = np.cross(y, d)
        x, y_new = rk4_turning(x, y, om, ell)
        cs, sn = np.cos(ell)[:, None], np.sin(ell)[:, None]
        nrm = nrm * cs + np.cross(om, nrm) * sn + om * np.sum(om * nrm, axis=1)[:, None] * (1 - cs)
        y = y_new
        k += 1
    for i in range(m):
        L, P = lens[i], phis[i]
        z = [L[0], P[0], L[1], L[2], P[1], L[3], P[2], L[4], P[3]]
        r = word_residual_3d(goal, T, ("CSC", "CSC"), z)
        np.testing.assert_allclose(r[:3], x[i] - goal.position, atol=1e-8)
        t_perp = y[i] - (y[i] @ goal.tangent) * goal.tangent
        assert abs(np.linalg.norm(r[3:]) - np.linalg.norm(t_perp)) <= 1e-8


def test_free_tangent_residual_has_three_components():
    # a lone quarter circle with plane angle 0 ends at (1, 1, 0)
    r = word_residual_3d(Goal3D([1.0, 1.0, 0.0]), math.pi / 2, ("C", ""), [0.0])
    assert r.shape == (3,)
    np.testing.assert_allclose(r, 0.0, atol=1e-15)


def test_sample_path_curvature():
    T = 3.0
    straight = TwoWordPath3D(Word3D((SSeg(T),)), Word3D(()), T, Goal3D([T, 0, 0], [1, 0, 0]))
    tr, kmax = sample_path_3d(straight, 11)
    np.testing.assert_allclose(tr.states[:, 1:3], 0.0)
    assert kmax == 0.0
    arc = TwoWordPath3D(Word3D((CArc(0.4, math.pi / 2),)), Word3D(()), math.pi / 2, Goal3D([0, 0, 0]))
    tr, kmax = sample_path_3d(arc, 201)
    assert abs(kmax - 1.0) <= 1e-4
    np.testing.assert_allclose(tr.states[-1, :3], arc.end().position, atol=1e-12)


def test_structure_merges_continuing_arcs():
    f = Frame3D.canonical()
    # splitting one circle in two keeps a single C
    first = CArc(0.3, 0.7)
    g = endpoint_c_arc(f, 0.3, 0.7)
    d_end = math.cos(0.7) * (math.cos(0.3) * f.normal + math.sin(0.3) * f.binormal) - math.sin(0.7) * f.tangent
    phi2 = math.atan2(d_end @ g.binormal, d_end @ g.normal)
    assert structure_3d([first, CArc(phi2, 0.5)], f) == "C"
    assert structure_3d([first, SSeg(0.0), CArc(phi2 + 1.0, 0.5), SSeg(1.0)], f) == "CCS"
    assert structure_3d([HArc(HParams(1.0, 1.0)), HArc(HParams(1.0, -1.0))]) == "HH"


# --- solver -----------------------------------------------------------------------


def test_straight_goal():
    paths = solve_dubins3d(Goal3D([3.0, 0, 0], [1, 0, 0]), 3.0, sequences=["S"], min_length=0.0)
    assert paths and paths[0].residual_norm <= 1e-12


def test_weak_completeness_on_forward_simulated_targets():
    T = 2.0
    cloud = sample_reachable("dubins3d", "forward", [0, 0, 0, 1, 0, 0], T, 50, 4, seed=8)
    solved = 0
    for pt in cloud.points:
        goal = Goal3D(pt[:3], pt[3:])
        paths = solve_dubins3d(goal, T, families=("cs",), stop_at_first=True)
        if paths:
            end = paths[0].end()
            err = np.linalg.norm(end.position - goal.position) + np.linalg.norm(end.tangent - goal.tangent)
            solved += err <= 1e-5
    assert solved >= 45
