"""
Постановка задачи: область, данные, условия согласования, нормы ‖·‖₁ и условие pq ≤ 1/4
"""

import logging
import math
from typing import Iterator, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from broadwell.fields import DataField
from broadwell.models import GateReport, ModelParams, SpaceTimeBox, Violation

logger = logging.getLogger(__name__)

INIT_NAMES = ("init1", "init2", "init3", "init4")
INFLOW_NAMES = ("inflow1", "inflow2", "inflow3", "inflow4")

# pq в пределах GATE_TOL от 1/4 считается границей условия
GATE_TOL = 1e-12


class ProblemData(BaseModel):
    """Данные начально-краевой задачи для θ = 0"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    box: SpaceTimeBox
    params: ModelParams
    init: Tuple[DataField, DataField, DataField, DataField]
    inflow: Tuple[DataField, DataField, DataField, DataField]

    @model_validator(mode="after")
    def _check_fields(self) -> "ProblemData":
        if self.params.theta != 0.0:
            raise ValueError(f"Задача ставится для θ = 0, получено θ = {self.params.theta}")
        for name, field, (alpha_range, beta_range) in self.labelled_fields():
            for label, got, expected in (("alpha", field.alpha_range, alpha_range),
                                         ("beta", field.beta_range, beta_range)):
                if not all(math.isclose(g, e, rel_tol=1e-9, abs_tol=1e-12) for g, e in zip(got, expected)):
                    raise ValueError(f"Поле {name}: диапазон {label} {got} не совпадает с {expected}")
            if field.samples.min() < 0:
                raise ValueError(f"Поле {name} отрицательно")
        return self

    def field_domains(self) -> List[Tuple[Tuple[float, float], Tuple[float, float]]]:
        """Области определения полей в порядке init1..4, inflow1..4"""
        return self.field_domains_for(self.box)

    def labelled_fields(self) -> Iterator[Tuple[str, DataField, Tuple]]:
        fields = list(self.init) + list(self.inflow)
        return zip(INIT_NAMES + INFLOW_NAMES, fields, self.field_domains())

    def scaled(self, factor: float) -> "ProblemData":
        """Та же задача с данными, умноженными на factor"""
        return ProblemData(
            box=self.box,
            params=self.params,
            init=tuple(f.scaled(factor) for f in self.init),
            inflow=tuple(f.scaled(factor) for f in self.inflow),
        )

    @classmethod
    def uniform(cls, box: SpaceTimeBox, params: ModelParams, values) -> "ProblemData":
        """Постоянные данные: одно число или четыре значения по видам"""
        values = np.broadcast_to(np.asarray(values, dtype=float), (4,))
        domains = cls.field_domains_for(box)
        init = tuple(DataField.constant(values[i], *domains[i], name=INIT_NAMES[i]) for i in range(4))
        inflow = tuple(DataField.constant(values[i], *domains[4 + i], name=INFLOW_NAMES[i]) for i in range(4))
        return cls(box=box, params=params, init=init, inflow=inflow)

    @staticmethod
    def field_domains_for(box: SpaceTimeBox):
        xy = ((box.a1, box.b1), (box.a2, box.b2))
        ty = ((0.0, box.T), (box.a2, box.b2))
        tx = ((0.0, box.T), (box.a1, box.b1))
        return [xy, xy, xy, xy, ty, tx, tx, ty]


def check_compatibility(data: ProblemData, tol: float = 1e-9) -> List[Violation]:
    """Проверить согласование начальных и граничных данных на общих рёбрах"""
    b = data.box
    n0, inflow = data.init, data.inflow
    # (вид, ребро, координаты вдоль ребра, начальное значение, граничное значение)
    edges = [
        (1, "x=a1", np.union1d(n0[0].betas, inflow[0].betas),
         lambda s: n0[0](b.a1, s), lambda s: inflow[0](0.0, s)),
        (2, "y=a2", np.union1d(n0[1].alphas, inflow[1].betas),
         lambda s: n0[1](s, b.a2), lambda s: inflow[1](0.0, s)),
        (3, "y=b2", np.union1d(n0[2].alphas, inflow[2].betas),
         lambda s: n0[2](s, b.b2), lambda s: inflow[2](0.0, s)),
        (4, "x=b1", np.union1d(n0[3].betas, inflow[3].betas),
         lambda s: n0[3](b.b1, s), lambda s: inflow[3](0.0, s)),
    ]

    violations = []
    for species, edge, coords, initial, boundary in edges:
        mismatch = np.abs(initial(coords) - boundary(coords))
        for s, m in zip(coords, mismatch):
            if m > tol:
                violations.append(Violation(species=species, edge=edge, location=float(s), magnitude=float(m)))

    if violations:
        worst = max(v.magnitude for v in violations)
        logger.warning(f"Нарушено согласование данных в {len(violations)} точках, максимум {worst:.3e}")
    return violations


def c1_norm(f: DataField) -> float:
    """max{‖f‖∞, ‖∂f/∂α‖∞, ‖∂f/∂β‖∞}"""
    da, db = f.partials()
    return float(max(np.abs(f.samples).max(), np.abs(da).max(), np.abs(db).max()))


def compute_p(box: SpaceTimeBox, params: ModelParams) -> float:
    c, S = params.c, params.S
    return 4.0 * c * S * (1.0 + 2.0 * max(4.0 * box.T, 2.0 * box.lx / c, box.ly / c))


def compute_p_prime(box: SpaceTimeBox, params: ModelParams) -> float:
    """Константа Липшица оператора: 4cS·max{T, (b1−a1)/c, (b2−a2)/c}"""
    c = params.c
    return 4.0 * c * params.S * max(box.T, box.lx / c, box.ly / c)


def q_coefficients(c: float) -> Tuple[float, ...]:
    """Множители при ‖·‖₁ полей init1..4, inflow1..4"""
    initial = max(1.0, 2.0 * c)
    mixed = max(2.0, 1.0 + c)
    return (initial, initial, initial, initial, 1.0 + c, mixed, mixed, 2.0 + c)


def compute_q(data: ProblemData) -> float:
    fields = list(data.init) + list(data.inflow)
    return max(k * c1_norm(f) for k, f in zip(q_coefficients(data.params.c), fields))


def gate_root(pq: float) -> float:
    """√(1 − 4pq) с обнулением на границе условия"""
    discriminant = 1.0 - 4.0 * pq
    return math.sqrt(discriminant) if discriminant > 4.0 * GATE_TOL else 0.0


def gate_report(data: ProblemData) -> GateReport:
    """Собрать p, q, корни pR² − R + q и априорные оценки"""
    box, params = data.box, data.params
    p = compute_p(box, params)
    q = compute_q(data)
    p_prime = compute_p_prime(box, params)
    widen = max(1.0, 2.0 / params.c)

    if p == 0.0:
        # S = 0: свободный перенос, решение ограничено самими данными
        return GateReport(p=0.0, q=q, pq=0.0, gate_ok=True, r_lo=q, r_hi=math.inf,
                          bound_B=q, bound_full=widen * q, p_prime=p_prime, free_streaming=True)

    pq = p * q
    gate_ok = pq <= 0.25 + GATE_TOL
    if not gate_ok:
        return GateReport(p=p, q=q, pq=pq, gate_ok=False, r_lo=math.nan, r_hi=math.nan,
                          bound_B=math.nan, bound_full=math.nan, p_prime=p_prime)

    root = gate_root(pq)
    r_hi = (1.0 + root) / (2.0 * p)
    r_lo = 2.0 * q / (1.0 + root)
    return GateReport(p=p, q=q, pq=pq, gate_ok=True, r_lo=r_lo, r_hi=r_hi,
                      bound_B=r_hi, bound_full=widen * r_hi, p_prime=p_prime)


def max_admissible_scale(gate: GateReport) -> float:
    """Наибольший множитель данных λ*, при котором pq ≤ 1/4"""
    if gate.pq == 0.0:
        return math.inf
    return 1.0 / (4.0 * gate.pq)


def radius_admissible(gate: GateReport, radius: float) -> bool:
    """Лежит ли R между корнями pR² − R + q (шар 𝓜_R переходит в себя)"""
    if not gate.gate_ok:
        return False
    return gate.r_lo <= radius <= gate.r_hi
