import numpy as np
import pytest

from koopman.dynamics import InputSignal, Trajectory, simulate
from koopman.edmd import (
    assemble,
    fit,
    fit_with_control,
    pinv,
    predict_corrected,
    predict_straight,
)
from koopman.exceptions import DivergenceError, InputError
from koopman.observables import build_dictionary

A_REF = np.array([[0.9, 0.1], [0.0, 0.8]])
B_REF = np.array([[0.0], [1.0]])
IDENTITY2 = build_dictionary("identity", 2, state_dim=2)


def _linear_trajectories(n_traj, steps, seed, with_input=False):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_traj):
        x = rng.uniform(-1, 1, size=2)
        states = [x]
        inputs = []
        for _ in range(steps):
            u = rng.uniform(-1, 1) if with_input else 0.0
            inputs.append(u)
            x = A_REF @ x + (B_REF[:, 0] * u if with_input else 0.0)
            states.append(x)
        inputs.append(0.0)  # input at the final sample is unused
        times = np.arange(steps + 1) * 0.1
        out.append(Trajectory(
            dt=0.1, times=times, states=np.array(states).T,
            inputs=np.array(inputs)[None, :] if with_input else None,
        ))
    return out


def test_assemble_pair_counts():
    traj = simulate("pendulum", np.array([0.4, 0.0]), InputSignal.zero(), 3.0, 0.01, seed=1)
    snaps = assemble([traj])
    assert snaps.pairs == 300
    assert snaps.states.shape == (2, 300)
    assert snaps.next_states.shape == (2, 300)


def test_assemble_never_pairs_across_trajectories():
    t1 = Trajectory(dt=0.1, times=np.arange(3) * 0.1,
                    states=np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]]))
    t2 = Trajectory(dt=0.1, times=np.arange(3) * 0.1,
                    states=np.array([[10.0, 20.0, 30.0], [0.0, 0.0, 0.0]]))
    snaps = assemble([t1, t2])
    assert snaps.pairs == 4
    assert list(snaps.states[0]) == [1.0, 2.0, 10.0, 20.0]
    assert list(snaps.next_states[0]) == [2.0, 3.0, 20.0, 30.0]


def test_assemble_validation():
    t1 = Trajectory(dt=0.1, times=np.arange(3) * 0.1, states=np.zeros((2, 3)))
    t2 = Trajectory(dt=0.2, times=np.arange(3) * 0.2, states=np.zeros((2, 3)))
    with pytest.raises(InputError):
        assemble([t1, t2])
    with pytest.raises(InputError):
        assemble([])
    t3 = Trajectory(dt=0.1, times=np.arange(3) * 0.1, states=np.zeros((1, 3)))
    with pytest.raises(InputError):
        assemble([t1, t3])


def test_assemble_manifest_records_sources():
    trajs = [simulate("pendulum", np.array([0.2, 0.0]), InputSignal.zero(), 0.2, 0.01, seed=s)
             for s in (1, 2)]
    snaps = assemble(trajs)
    assert len(snaps.manifest["trajectories"]) == 2
    assert snaps.manifest["trajectories"][0]["samples"] == 21


def test_pinv_identity_and_rank_deficient_diagonal():
    assert np.allclose(pinv(np.eye(3)), np.eye(3), atol=1e-14)
    out = pinv(np.diag([2.0, 0.0]))
    assert np.allclose(out, np.diag([0.5, 0.0]), atol=1e-14)


def test_pinv_penrose_conditions():
    rng = np.random.default_rng(123)
    m = rng.normal(size=(5, 3))
    mp = pinv(m)
    assert np.allclose(m @ mp @ m, m, atol=1e-10)
    assert np.allclose(mp @ m @ mp, mp, atol=1e-10)
    assert np.allclose((m @ mp).T, m @ mp, atol=1e-10)
    assert np.allclose((mp @ m).T, mp @ m, atol=1e-10)


def test_fit_recovers_exact_linear_map():
    snaps = assemble(_linear_trajectories(10, 30, seed=2))
    model = fit(snaps, IDENTITY2)
    assert np.allclose(model.transition, A_REF, atol=1e-10)
    assert model.fit_residual < 1e-12
    assert model.input_matrix is None


def test_fit_fixed_point_gives_rank_one_reconstruction():
    x_star = np.array([1.0, 2.0])
    states = np.tile(x_star[:, None], (1, 4))
    traj = Trajectory(dt=0.1, times=np.arange(4) * 0.1, states=states)
    model = fit(assemble([traj]), IDENTITY2)
    assert np.allclose(model.transition @ x_star, x_star, atol=1e-12)
    expected = np.outer(x_star, x_star) / (x_star @ x_star)
    assert np.allclose(model.transition, expected, atol=1e-12)


def test_fit_warns_when_underdetermined():
    traj = Trajectory(dt=0.1, times=np.arange(3) * 0.1,
                      states=np.array([[0.1, 0.2, 0.3], [0.0, 0.1, 0.2]]))
    with pytest.warns(UserWarning, match="underdetermined"):
        fit(assemble([traj]), build_dictionary("pendulum", 6))


def test_fit_rejects_nonzero_inputs():
    trajs = _linear_trajectories(2, 10, seed=3, with_input=True)
    with pytest.raises(InputError):
        fit(assemble(trajs), IDENTITY2)


def test_fit_with_control_recovers_linear_system():
    snaps = assemble(_linear_trajectories(10, 25, seed=4, with_input=True))
    model = fit_with_control(snaps, IDENTITY2)
    assert np.allclose(model.transition, A_REF, atol=1e-8)
    assert np.allclose(model.input_matrix, B_REF, atol=1e-8)


def test_fit_with_control_zero_input_matches_autonomous_fit():
    trajs = [simulate("pendulum", np.array([0.7, 0.0]), InputSignal.zero(), 1.0, 0.01, seed=s)
             for s in (5, 6, 7)]
    dictionary = build_dictionary("pendulum", 6)
    autonomous = fit(assemble(trajs), dictionary)
    controlled = fit_with_control(assemble(trajs), dictionary)
    assert np.allclose(controlled.transition, autonomous.transition, atol=1e-8)


def test_fit_with_control_requires_inputs():
    trajs = _linear_trajectories(2, 10, seed=8)
    with pytest.raises(InputError):
        fit_with_control(assemble(trajs), IDENTITY2)


def test_fit_dictionary_dimension_mismatch():
    trajs = _linear_trajectories(2, 10, seed=9)
    with pytest.raises(InputError):
        fit(assemble(trajs), build_dictionary("identity", 3, state_dim=3))


def test_predict_straight_zero_steps():
    snaps = assemble(_linear_trajectories(4, 20, seed=10))
    model = fit(snaps, IDENTITY2)
    x0 = np.array([0.3, -0.4])
    lifted, states = predict_straight(model, x0, steps=0)
    assert lifted.shape == (2, 1)
    assert np.array_equal(states[:, 0], x0)


def test_predict_straight_matches_matrix_powers():
    model = fit(assemble(_linear_trajectories(6, 25, seed=11)), IDENTITY2)
    x0 = np.array([0.9, -0.7])
    _, states = predict_straight(model, x0, steps=100)
    x = x0.copy()
    for k in range(101):
        assert np.allclose(states[:, k], x, atol=1e-8)
        x = A_REF @ x


def test_predict_corrected_equals_straight_for_identity_dictionary():
    model = fit(assemble(_linear_trajectories(6, 25, seed=12)), IDENTITY2)
    x0 = np.array([-0.2, 0.8])
    _, straight = predict_straight(model, x0, steps=50)
    corrected = predict_corrected(model, x0, steps=50)
    assert np.allclose(straight, corrected, atol=1e-10)


def test_first_step_agreement_on_lifted_model(pendulum_model6):
    rng = np.random.default_rng(14)
    for _ in range(5):
        x0 = rng.uniform(-2, 2, size=2)
        _, straight = predict_straight(pendulum_model6, x0, steps=1)
        corrected = predict_corrected(pendulum_model6, x0, steps=1)
        assert np.allclose(straight[:, 1], corrected[:, 1], atol=1e-12)


def test_projection_consistency_of_lifted_rollout(pendulum_model6):
    lifted, states = predict_straight(pendulum_model6, np.array([1.0, 0.5]), steps=20)
    assert np.allclose(lifted[:2], states, atol=1e-14)


def test_controlled_prediction_input_handling():
    model = fit_with_control(assemble(_linear_trajectories(6, 25, seed=15, with_input=True)),
                             IDENTITY2)
    with pytest.raises(InputError):
        predict_straight(model, np.zeros(2), steps=5)  # missing u
    with pytest.raises(InputError):
        predict_straight(model, np.zeros(2), u_seq=np.zeros((1, 3)), steps=5)  # too short
    u = np.ones((1, 5)) * 0.5
    _, states = predict_straight(model, np.zeros(2), u_seq=u, steps=5)
    x = np.zeros(2)
    for k in range(5):
        x = A_REF @ x + B_REF[:, 0] * 0.5
        assert np.allclose(states[:, k + 1], x, atol=1e-8)


def test_autonomous_prediction_rejects_nonzero_u(pendulum_model6):
    with pytest.raises(InputError):
        predict_straight(pendulum_model6, np.zeros(2), u_seq=np.ones((1, 5)), steps=5)
    # an all-zero u is fine
    predict_straight(pendulum_model6, np.zeros(2), u_seq=np.zeros((1, 5)), steps=5)


def test_least_squares_optimality_of_fit():
    trajs = [simulate("pendulum", np.array([0.9, 0.0]), InputSignal.zero(), 1.0, 0.01, seed=s)
             for s in (20, 21)]
    dictionary = build_dictionary("pendulum", 6)
    snaps = assemble(trajs)
    model = fit(snaps, dictionary)
    z = dictionary.lift(snaps.states)
    z_next = dictionary.lift(snaps.next_states)
    norm_next = np.linalg.norm(z_next)
    rng = np.random.default_rng(30)
    for _ in range(10):
        delta = rng.normal(size=model.transition.shape)
        delta *= 1e-3 / np.linalg.norm(delta)
        perturbed = np.linalg.norm(z_next - (model.transition + delta) @ z) / norm_next
        assert perturbed >= model.fit_residual


def test_corrected_rollout_reports_divergence_step():
    transition = np.array([[4.0, 0.0], [0.0, 4.0]])
    model_like = fit(assemble(_linear_trajectories(4, 10, seed=16)), IDENTITY2)
    blown = type(model_like)(
        transition=transition, dt=0.1, dictionary=IDENTITY2, fit_residual=0.0)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(DivergenceError) as err:
            predict_corrected(blown, np.array([1.0, 1.0]), steps=2000)
    assert "step" in str(err.value)
