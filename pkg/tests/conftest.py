"""Shared fixtures. Model fits are session-scoped because several test
modules interrogate the same calibrated protocols."""

import pytest

from koopman.config import default_config
from koopman.reproduce import reference_trajectory, train_from_config


@pytest.fixture(scope="session")
def pendulum_config():
    return default_config("pendulum")


@pytest.fixture(scope="session")
def pendulum_model6(pendulum_config):
    model, _, _ = train_from_config(pendulum_config)
    return model


@pytest.fixture(scope="session")
def pendulum_reference(pendulum_config):
    return reference_trajectory(pendulum_config)


@pytest.fixture(scope="session")
def duffing_config():
    return default_config("duffing")


@pytest.fixture(scope="session")
def duffing_model6(duffing_config):
    model, _, _ = train_from_config(duffing_config)
    return model


@pytest.fixture(scope="session")
def golf_config():
    return default_config("golf")


@pytest.fixture(scope="session")
def golf_model(golf_config):
    model, _, _ = train_from_config(golf_config)
    return model


@pytest.fixture(scope="session")
def api():
    from fastapi.testclient import TestClient

    from koopman.service import create_app

    return TestClient(create_app())
