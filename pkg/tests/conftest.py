import pytest

from nullvl.evaluator import EvalConfig
from nullvl.logic import kernel_2vl, kernel_2vl_syntactic, kernel_3vl, kernel_4vl_example


@pytest.fixture(scope="session")
def cfg3():
    return EvalConfig(kernel=kernel_3vl())


@pytest.fixture(scope="session")
def cfg2():
    return EvalConfig(kernel=kernel_2vl())


@pytest.fixture(scope="session")
def cfg_syn():
    return EvalConfig(kernel=kernel_2vl_syntactic())


@pytest.fixture(scope="session")
def cfg4():
    return EvalConfig(kernel=kernel_4vl_example())
