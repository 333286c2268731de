import importlib.util
import random

import pytest

from blindeval import BackendStats, Client, Evaluator, SecurityConfig, keygen

HAVE_CONCRETE = importlib.util.find_spec("concrete") is not None


class Session:
    """A client and evaluator sharing one stats object."""

    def __init__(self, backend, seed):
        pair = keygen(SecurityConfig(backend=backend, rng_seed=seed, insecure_test_mode=True))
        self.pair = pair
        self.stats = BackendStats()
        self.client = Client(pair.client_key, self.stats)
        self.ev = Evaluator(pair.evaluation_key, self.stats)

    def word(self, value, width):
        return self.client.encrypt_word(value, width)

    def read(self, word):
        return self.client.decrypt_word(word)

    def bit(self, b):
        return self.client.encrypt_bit(b)

    def read_bit(self, c):
        return self.client.decrypt_bit(c)


@pytest.fixture
def clear():
    return Session("clear", 1234)


@pytest.fixture(scope="session")
def encrypted():
    if not HAVE_CONCRETE:
        pytest.skip("concrete-python is not installed")
    return Session("encrypted", 99)


@pytest.fixture
def rng():
    return random.Random(20240611)


def pytest_collection_modifyitems(items):
    for item in items:
        if "encrypted" in getattr(item, "fixturenames", ()):
            item.add_marker(pytest.mark.encrypted)


# --------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL/SKIP line per criterion

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not (rep.failed or rep.skipped)):
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, {"title": title, "status": [], "details": []})
    entry["status"].append("FAIL" if rep.failed else "SKIP" if rep.skipped else "PASS")
    entry["details"].extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        s = e["status"]
        status = "FAIL" if "FAIL" in s else "PASS" if "PASS" in s else "SKIP"
        detail = "; ".join(e["details"])
        terminalreporter.write_line(f"[{status}] {number}. {e['title']}" + (f" -- {detail}" if detail else ""))
