import pytest

from csa_sdmm.ffield import MERSENNE_61, FieldConfig, make_rng


@pytest.fixture
def F7():
    return FieldConfig(7)


@pytest.fixture
def F257():
    return FieldConfig(257)


@pytest.fixture
def F61():
    return FieldConfig(MERSENNE_61)


@pytest.fixture
def rng():
    return make_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
