import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=50,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def artifact_dir(tmp_path_factory):
    """Shared on-disk artifact cache so expensive source Qs train once per session."""
    return str(tmp_path_factory.mktemp("artifacts"))


@pytest.fixture(scope="session")
def ip_source(artifact_dir):
    """Pendulum source Q and its greedy return, from the default pendulum pipeline."""
    from tatl.harness import Artifacts, default_config

    return Artifacts(default_config("negative_transfer"), artifact_dir).source()
