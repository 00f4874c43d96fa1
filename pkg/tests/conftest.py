import numpy as np
import pytest

from resetctl import TABLE1_PARAMS, StateSpace, make_cglp_pid

# 5000 um over 9 bits
Q_TABLE1 = 5e-3 / 2**9
R_TABLE1 = 5e-3


def mass_plant(m=1.0):
    return StateSpace([[0.0, 1.0], [0.0, 0.0]], [[0.0], [1.0 / m]], [[1.0, 0.0]], [[0.0]])


def stage_plant():
    return StateSpace([[0.0, 1.0], [-243.3, -0.7413]], [[0.0], [3.038e4]], [[1.0, 0.0]], [[0.0]])


def random_stable(rng, n, m=1, p=1):
    """Random continuous system with eigenvalues in [-50, -0.5]."""
    V = rng.standard_normal((n, n)) + 3 * np.eye(n)
    lam = -rng.uniform(0.5, 50.0, n)
    A = V @ np.diag(lam) @ np.linalg.inv(V)
    return StateSpace(A, rng.standard_normal((n, m)), rng.standard_normal((p, n)),
                      rng.standard_normal((p, m)))


@pytest.fixture
def mass():
    return mass_plant()


@pytest.fixture
def table1_rc():
    return make_cglp_pid(TABLE1_PARAMS)


def random_cglp_loop(rng):
    """Random stable mass or resonant plant with a CgLp-PID tuned for unit gain at w_c."""
    from resetctl import CgLpPidParams, freq_response
    from resetctl.stability import closed_loop_A
    while True:
        wc = rng.uniform(50, 200)
        m = rng.uniform(0.5, 2.0)
        if rng.random() < 0.5:
            plant = StateSpace([[0, 1], [0, 0]], [[0], [1 / m]], [[1, 0]], [[0]])
        else:
            wn, z = rng.uniform(0.05, 0.3) * wc, rng.uniform(0.02, 0.3)
            plant = StateSpace([[0, 1], [-wn**2, -2 * z * wn]], [[0], [1 / m]], [[1, 0]], [[0]])
        kw = dict(K=1.0, omega_c=wc, omega_i=wc / 10, omega_d=wc / rng.uniform(1.5, 2.5),
                  omega_t=wc * rng.uniform(1.5, 2.5), omega_ra=wc / rng.uniform(4, 8),
                  omega_r=wc / 4, omega_f=wc * 10, gamma=rng.uniform(0, 0.8))
        kw["omega_ra"] = min(kw["omega_ra"], kw["omega_r"])
        rc = make_cglp_pid(CgLpPidParams(**kw))
        kw["K"] = 1 / abs(freq_response(rc.base, wc) * freq_response(plant, wc))
        rc = make_cglp_pid(CgLpPidParams(**kw))
        if np.all(np.linalg.eigvals(closed_loop_A(plant, rc)).real < 0):
            return plant, rc, wc


def linear_steady_state(plant, rc, ref):
    """Initial (plant, controller) states on the base-linear periodic orbit at t = 0."""
    from resetctl.stability import closed_loop_A
    A = closed_loop_A(plant, rc)
    n = plant.nstates
    B = np.concatenate([plant.B[:, 0] * rc.base.D[0, 0], rc.base.B[:, 0]])
    x0 = np.zeros(len(A))
    for a, w, ph in ref.components:
        X = np.linalg.solve(1j * w * np.eye(len(A)) - A, B) * a * np.exp(1j * ph)
        x0 += X.imag
    return x0[:n], x0[n:]
