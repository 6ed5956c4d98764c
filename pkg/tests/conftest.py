import pytest

from podfed import bundled_scenario_path, load_scenario

VOCAB = "urn:podfed:vocab#"

ALICE = "https://alice.pods.org/profile#me"
BOB = "https://bob.pods.org/profile#me"
CAROL = "https://carol.pods.org/profile#me"

CONTACTS = "https://alice.pods.org/contacts"
BOB_PROFILE = "https://bob.pods.org/profile"
CAROL_PROFILE = "https://carol.pods.org/profile"


@pytest.fixture(scope="session")
def scenario_path():
    return bundled_scenario_path()


@pytest.fixture
def fed(scenario_path):
    """Bundled scenario with deterministic keys."""
    return load_scenario(scenario_path, seed=7, fixed_keys=True)


@pytest.fixture
def fed_exact(scenario_path):
    """Same scenario but with exact-membership filters: zero false positives."""
    return load_scenario(scenario_path, seed=7, fixed_keys=True, exact=True)
