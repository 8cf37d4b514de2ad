import json

import numpy as np
import pytest

from koopman.dynamics import InputSignal, Trajectory, simulate
from koopman.edmd import assemble, fit, predict_corrected
from koopman.exceptions import FileFormatError, InputError
from koopman.fileio import (
    model_from_dict,
    model_to_dict,
    parse_trajectory_csv,
    read_model,
    read_trajectory,
    read_trajectory_set,
    trajectory_csv,
    write_model,
    write_trajectory,
    write_trajectory_set,
)
from koopman.observables import build_dictionary


def _random_trajectory(seed, with_input=False):
    rng = np.random.default_rng(seed)
    m = 7
    times = np.arange(m) * 0.01
    states = rng.normal(size=(2, m))
    inputs = rng.normal(size=(1, m)) if with_input else None
    return Trajectory(times=times, states=states, inputs=inputs, dt=0.01)


def test_csv_round_trip_exact():
    traj = _random_trajectory(3)
    back = parse_trajectory_csv(trajectory_csv(traj), "mem")
    assert np.array_equal(back.times, traj.times)
    assert np.array_equal(back.states, traj.states)
    assert back.inputs is None


def test_csv_round_trip_with_inputs():
    traj = _random_trajectory(4, with_input=True)
    text = trajectory_csv(traj)
    assert text.splitlines()[0] == "t,x1,x2,u1"
    back = parse_trajectory_csv(text, "mem")
    assert np.array_equal(back.inputs, traj.inputs)


def test_csv_preserves_full_precision():
    # repr-exact floats: 17 significant digits survive the round trip
    traj = Trajectory(
        times=np.array([0.0, 0.1]),
        states=np.array([[1 / 3, np.pi], [2 / 3, np.e]]),
        inputs=None,
        dt=0.1,
    )
    back = parse_trajectory_csv(trajectory_csv(traj), "mem")
    assert back.states[0, 0] == 1 / 3
    assert back.states[0, 1] == np.pi
    assert back.states[1, 1] == np.e


@pytest.mark.parametrize(
    "text,fragment",
    [
        ("", "empty"),
        ("a,b\n1,2\n3,4\n", "first column must be 't'"),
        ("t,x1\n0.0,1.0\n0.01\n", "row 3"),
        ("t,x1\n0.0,1.0\n0.01,oops\n", "row 3"),
        ("t,x1\n0.0,1.0\n", "at least 2"),
        ("t,x1\n0.1,1.0\n0.0,2.0\n", "increasing"),
    ],
)
def test_csv_rejects_malformed_input(text, fragment):
    with pytest.raises(FileFormatError, match=fragment):
        parse_trajectory_csv(text, "bad.csv")


def test_csv_errors_name_the_source():
    with pytest.raises(FileFormatError, match="bad.csv"):
        parse_trajectory_csv("", "bad.csv")


def test_trajectory_file_round_trip(tmp_path):
    traj = _random_trajectory(5, with_input=True)
    path = tmp_path / "traj.csv"
    write_trajectory(traj, path)
    back = read_trajectory(path)
    assert np.array_equal(back.states, traj.states)
    assert np.array_equal(back.inputs, traj.inputs)
    assert back.dt == traj.dt


def test_read_trajectory_missing_file(tmp_path):
    with pytest.raises(InputError, match="nope.csv"):
        read_trajectory(tmp_path / "nope.csv")


def test_trajectory_set_round_trip(tmp_path):
    trajs = [_random_trajectory(i) for i in range(3)]
    manifest = write_trajectory_set(trajs, tmp_path)
    assert (tmp_path / "traj_000.csv").exists()
    assert (tmp_path / "traj_manifest.json").exists()
    assert len(manifest["trajectories"]) == 3
    assert manifest["dt"] == 0.01
    back = read_trajectory_set(tmp_path / "traj_manifest.json")
    assert len(back) == 3
    for a, b in zip(trajs, back):
        assert np.array_equal(a.states, b.states)


def test_model_round_trip_preserves_predictions(pendulum_model6):
    data = model_to_dict(pendulum_model6, provenance={"note": "round trip"})
    text = json.dumps(data)
    back = model_from_dict(json.loads(text))
    assert np.array_equal(back.transition, pendulum_model6.transition)
    assert back.dt == pendulum_model6.dt
    assert back.dictionary.labels == pendulum_model6.dictionary.labels
    x0 = np.array([1.2, -0.3])
    a = predict_corrected(pendulum_model6, x0, steps=50)
    b = predict_corrected(back, x0, steps=50)
    assert np.array_equal(a, b)


def test_model_round_trip_with_input_matrix(golf_model):
    data = model_to_dict(golf_model, provenance={})
    back = model_from_dict(data)
    assert np.array_equal(back.input_matrix, golf_model.input_matrix)


def test_model_dict_shape():
    tr = simulate("duffing", np.array([1.0, 0.0]), InputSignal("zero"),
                  duration=1.0, dt=0.01)
    model = fit(assemble([tr]), build_dictionary("duffing", 6))
    data = model_to_dict(model, provenance={"who": "test"})
    assert data["format"] == "koopman-model/1"
    assert data["dictionary"]["state_dim"] == 2
    assert len(data["dictionary"]["expressions"]) == 6
    assert len(data["transition"]) == 6
    assert data["input_matrix"] is None
    assert data["provenance"] == {"who": "test"}


def test_model_file_round_trip(tmp_path, pendulum_model6):
    path = tmp_path / "model.json"
    write_model(pendulum_model6, path, provenance={"origin": "fixture"})
    back = read_model(path)
    assert np.array_equal(back.transition, pendulum_model6.transition)


def test_model_from_dict_rejects_malformed():
    with pytest.raises(FileFormatError):
        model_from_dict({"format": "koopman-model/1"})
    with pytest.raises(FileFormatError, match="format"):
        model_from_dict({"format": "other/9", "dt": 0.1})


def test_read_model_missing_file(tmp_path):
    with pytest.raises(InputError, match="absent.json"):
        read_model(tmp_path / "absent.json")


def test_read_model_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(FileFormatError, match="broken.json"):
        read_model(path)
