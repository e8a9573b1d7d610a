"""
Общие фикстуры тестов: типовые постановки задачи
"""

import numpy as np
import pytest

from broadwell.domain_data import INFLOW_NAMES, INIT_NAMES, ProblemData
from broadwell.fields import DataField, sinusoid_field
from broadwell.kinetics import maxwellian_arrays
from broadwell.models import GridResolution, ModelParams, QuadratureConfig, SolverConfig, SpaceTimeBox
from broadwell.solver import Solution, solve

EPS_GATE = 1.0 / 432.0


def unit_box() -> SpaceTimeBox:
    return SpaceTimeBox(a1=0.0, b1=1.0, a2=0.0, b2=1.0, T=1.0)


def unit_params(S: float = 1.0) -> ModelParams:
    return ModelParams(c=1.0, S=S)


def smooth_problem(box: SpaceTimeBox, params: ModelParams, offset: float = 0.0012,
                   amplitude: float = 0.0005) -> ProblemData:
    """Фон вида i плюс синусоида, обращающаяся в ноль на рёбрах: данные согласованы, pq ≈ 0.18"""
    domains = ProblemData.field_domains_for(box)
    fields = [
        sinusoid_field(alpha, beta, offset * (1 + 0.1 * (k % 4)), amplitude * (1 - 0.1 * k), name=name)
        for k, (name, (alpha, beta)) in enumerate(zip(INIT_NAMES + INFLOW_NAMES, domains))
    ]
    return ProblemData(box=box, params=params, init=tuple(fields[:4]), inflow=tuple(fields[4:]))


def cubic_problem(box: SpaceTimeBox, params: ModelParams, base: float = 1.0, amp: float = 0.1) -> ProblemData:
    """Следы функции g(t, x, y) = base + amp·(t³ + x³ + y³): согласованы автоматически"""

    def g(t, x, y):
        return base + amp * (np.asarray(t) ** 3 + np.asarray(x) ** 3 + np.asarray(y) ** 3)

    domains = ProblemData.field_domains_for(box)
    init = tuple(DataField.from_function(lambda x, y: g(0.0, x, y), *domains[i], name=INIT_NAMES[i])
                 for i in range(4))
    inflow = (
        DataField.from_function(lambda t, y: g(t, box.a1, y), *domains[4], name="inflow1"),
        DataField.from_function(lambda t, x: g(t, x, box.a2), *domains[5], name="inflow2"),
        DataField.from_function(lambda t, x: g(t, x, box.b2), *domains[6], name="inflow3"),
        DataField.from_function(lambda t, y: g(t, box.b1, y), *domains[7], name="inflow4"),
    )
    return ProblemData(box=box, params=params, init=init, inflow=inflow)


def c1_problem(box: SpaceTimeBox, params: ModelParams, offset: float = 0.0015,
               amplitude: float = 0.0003) -> ProblemData:
    """Общий фон плюс sin², гладко обращающийся в ноль на рёбрах: решение класса C¹, pq ≈ 0.17"""
    domains = ProblemData.field_domains_for(box)
    fields = [
        sinusoid_field(alpha, beta, offset, amplitude * (1 - 0.1 * k), power=2, name=name)
        for k, (name, (alpha, beta)) in enumerate(zip(INIT_NAMES + INFLOW_NAMES, domains))
    ]
    return ProblemData(box=box, params=params, init=tuple(fields[:4]), inflow=tuple(fields[4:]))


def c1_free_problem(box: SpaceTimeBox) -> ProblemData:
    """Свободный перенос гладких данных порядка единицы"""
    return c1_problem(box, unit_params(S=0.0), offset=0.5, amplitude=0.1)


def solver_config(n: int = 12, **kwargs) -> SolverConfig:
    return SolverConfig(grid=GridResolution(n1=n, n2=n, n3=n), **kwargs)


@pytest.fixture
def box() -> SpaceTimeBox:
    return unit_box()


@pytest.fixture
def params() -> ModelParams:
    return unit_params()


@pytest.fixture
def eps_data(box, params) -> ProblemData:
    """c = S = T = 1, единичный квадрат, все данные ε = 1/432: pq = 1/4 ровно"""
    return ProblemData.uniform(box, params, EPS_GATE)


@pytest.fixture
def zero_data(box, params) -> ProblemData:
    return ProblemData.uniform(box, params, 0.0)


@pytest.fixture
def smooth_data(box, params) -> ProblemData:
    return smooth_problem(box, params)


@pytest.fixture
def free_data(box) -> ProblemData:
    """S = 0: свободный перенос"""
    return cubic_problem(box, unit_params(S=0.0))


@pytest.fixture
def maxwellian_data(box, params) -> ProblemData:
    """Пространственно однородное максвелловское состояние малой плотности"""
    values = maxwellian_arrays(0.004, 0.1, -0.05, params)
    return ProblemData.uniform(box, params, values)


@pytest.fixture
def quad() -> QuadratureConfig:
    return QuadratureConfig()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def c1_data(box, params) -> ProblemData:
    return c1_problem(box, params)


@pytest.fixture(scope="session")
def c1_solution() -> Solution:
    """Решение на сетке 33³; общее для проверок баланса и сверки с оракулом"""
    return solve(c1_problem(unit_box(), unit_params()), solver_config(n=33, abs_tol=1e-11))
