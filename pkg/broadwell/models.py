"""
Pydantic модели: параметры модели, состояния газа, геометрия, конфигурация и отчёты
"""

import math
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ModelParams(BaseModel):
    """Параметры модели B_θ"""
    model_config = ConfigDict(frozen=True)

    c: float = Field(..., gt=0, description="Скорость частиц")
    S: float = Field(..., ge=0, description="Параметр сечения столкновений")
    theta: float = Field(0.0, ge=0, lt=math.pi / 2, description="Угол ориентации модели, рад")


class Densities(BaseModel):
    """Плотности четырёх видов частиц"""
    model_config = ConfigDict(frozen=True)

    n1: float
    n2: float
    n3: float
    n4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.n1, self.n2, self.n3, self.n4], dtype=float)

    @classmethod
    def from_array(cls, values) -> "Densities":
        n1, n2, n3, n4 = (float(v) for v in values)
        return cls(n1=n1, n2=n2, n3=n3, n4=n4)


class Moments(BaseModel):
    """Макроскопические моменты: плотность и скорость"""
    model_config = ConfigDict(frozen=True)

    rho: float = Field(..., description="Полная плотность")
    u: float = Field(0.0, description="Компонента скорости по x")
    v: float = Field(0.0, description="Компонента скорости по y")


class SpaceTimeBox(BaseModel):
    """Пространственно-временной параллелепипед [0,T]×[a1,b1]×[a2,b2]"""
    model_config = ConfigDict(frozen=True)

    a1: float
    b1: float
    a2: float
    b2: float
    T: float = Field(..., gt=0, description="Горизонт по времени")

    @model_validator(mode="after")
    def _check_extents(self) -> "SpaceTimeBox":
        if not self.a1 < self.b1:
            raise ValueError(f"Требуется a1 < b1, получено a1={self.a1}, b1={self.b1}")
        if not self.a2 < self.b2:
            raise ValueError(f"Требуется a2 < b2, получено a2={self.a2}, b2={self.b2}")
        return self

    @property
    def lx(self) -> float:
        return self.b1 - self.a1

    @property
    def ly(self) -> float:
        return self.b2 - self.a2

    @property
    def area(self) -> float:
        return self.lx * self.ly

    @property
    def scale(self) -> float:
        """Характерный масштаб координат для допусков"""
        return max(1.0, abs(self.a1), abs(self.b1), abs(self.a2), abs(self.b2), self.T)


class GateReport(BaseModel):
    """Параметры условия существования pq ≤ 1/4"""
    p: float
    q: float
    pq: float
    gate_ok: bool
    r_lo: float = Field(..., description="Нижний корень pR² − R + q")
    r_hi: float = Field(..., description="Верхний корень pR² − R + q")
    bound_B: float = Field(..., description="Априорная оценка ‖N‖")
    bound_full: float = Field(..., description="max{1, 2/c}·B")
    p_prime: float = Field(..., description="Константа Липшица p′")
    free_streaming: bool = Field(False, description="S = 0: свободный перенос, p = 0")


class CharCoords(BaseModel):
    """Точка (η1, η2, η3) в преобразованном параллелепипеде"""
    model_config = ConfigDict(frozen=True)

    eta1: float
    eta2: float
    eta3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.eta1, self.eta2, self.eta3], dtype=float)

    @classmethod
    def from_array(cls, values) -> "CharCoords":
        e1, e2, e3 = (float(v) for v in values)
        return cls(eta1=e1, eta2=e2, eta3=e3)


class FootKind(str, Enum):
    """Где начинается характеристика"""
    INITIAL = "initial"
    INFLOW = "inflow"


class FootPoint(BaseModel):
    """Основание обратной характеристики"""
    species: int = Field(..., ge=1, le=4)
    kind: FootKind
    location: Tuple[float, float, float] = Field(..., description="(t, x, y) основания")
    path_length: float = Field(..., ge=0, description="Длина пути по параметру")


class QuadratureRule(str, Enum):
    """Составные квадратурные формулы"""
    TRAPEZOID = "trapezoid"
    SIMPSON = "simpson"


class QuadratureConfig(BaseModel):
    """Настройки квадратуры вдоль характеристик"""
    model_config = ConfigDict(extra="forbid")

    rule: QuadratureRule = QuadratureRule.TRAPEZOID
    max_step: Optional[float] = Field(None, gt=0, description="Максимальный шаг; по умолчанию минимальный шаг сетки")
    workers: int = Field(1, ge=1, description="Потоки для вычисления по видам")
    chunk_size: int = Field(8192, ge=1, description="Узлов в одном векторизованном блоке")


class GuessKind(str, Enum):
    """Начальное приближение итераций Пикара"""
    ZERO = "zero"
    FREE_STREAMING = "free_streaming"
    CONSTANT = "constant"


class GridResolution(BaseModel):
    """Число узлов сетки по η1, η2, η3"""
    model_config = ConfigDict(extra="forbid")

    n1: int = Field(16, ge=3)
    n2: int = Field(16, ge=3)
    n3: int = Field(16, ge=3)

    def as_tuple(self) -> Tuple[int, int, int]:
        return (self.n1, self.n2, self.n3)


class SolverConfig(BaseModel):
    """Настройки решателя"""
    model_config = ConfigDict(extra="forbid")

    max_iters: int = Field(50, ge=1)
    abs_tol: float = Field(1e-9, gt=0, description="Допуск по sup-норме разности итераций")
    use_sigma: bool = Field(False, description="Итерировать сдвинутый оператор 𝒯^σ")
    sigma: Optional[float] = Field(None, ge=0, description="σ; по умолчанию 2cS")
    guess: GuessKind = GuessKind.FREE_STREAMING
    guess_value: float = Field(0.0, description="κ для постоянного приближения")
    grid: GridResolution = Field(default_factory=GridResolution)
    quad: QuadratureConfig = Field(default_factory=QuadratureConfig)
    override_gate: bool = Field(False, description="Разрешить запуск при pq > 1/4")
    compat_tol: float = Field(1e-9, gt=0)
    divergence_window: int = Field(5, ge=1)


class StepRecord(BaseModel):
    """Одна итерация Пикара"""
    k: int = Field(..., ge=1)
    delta: float = Field(..., ge=0)
    ratio: Optional[float] = None
    wall_time: float = Field(0.0, ge=0)


class IterationStatus(str, Enum):
    """Итог итераций"""
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    DIVERGED = "diverged"


class IterationTrace(BaseModel):
    """История итераций"""
    records: List[StepRecord] = Field(default_factory=list)
    status: IterationStatus = IterationStatus.MAX_ITERS

    @field_validator("records")
    @classmethod
    def _ordered(cls, records: List[StepRecord]) -> List[StepRecord]:
        for prev, cur in zip(records, records[1:]):
            if cur.k <= prev.k:
                raise ValueError(f"Записи итераций не упорядочены: {prev.k} → {cur.k}")
        return records

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def delta_last(self) -> float:
        return self.records[-1].delta if self.records else math.inf


class Violation(BaseModel):
    """Нарушение условия согласования в углу"""
    species: int = Field(..., ge=1, le=4)
    edge: str = Field(..., description="Общее ребро начальных и граничных данных")
    location: float = Field(..., description="Координата вдоль ребра")
    magnitude: float = Field(..., ge=0)


class DerivativeBound(BaseModel):
    """Сравнение производной с теоретической оценкой"""
    name: str
    measured: float
    bound: float
    margin: float
    ok: bool


class DerivativeBoundReport(BaseModel):
    entries: List[DerivativeBound]
    points: int = Field(0, ge=0, description="Число проверенных узлов")

    @property
    def ok(self) -> bool:
        return all(entry.ok for entry in self.entries)


class ResidualReport(BaseModel):
    """Sup-невязка уравнений по видам"""
    per_species: List[float]
    points: int = Field(0, ge=0)

    @property
    def max(self) -> float:
        return max(self.per_species) if self.per_species else 0.0


class ConservationReport(BaseModel):
    """Баланс массы и импульса через границу"""
    mass_defect: float
    momentum_x_defect: float
    momentum_y_defect: float
    mass_scale: float
    relative_mass_defect: float


class CheckResult(BaseModel):
    """Строка таблицы проверок"""
    name: str
    passed: bool
    detail: str = ""


class FDGrid(BaseModel):
    """Сетка конечно-разностного оракула"""
    nx: int = Field(..., ge=2)
    ny: int = Field(..., ge=2)
    nt: int = Field(..., ge=2)
    dx: float = Field(..., gt=0)
    dy: float = Field(..., gt=0)
    dt: float = Field(..., gt=0)
    c: float = Field(..., gt=0)

    @property
    def cfl(self) -> float:
        return self.c * self.dt / min(self.dx, self.dy)


class FieldKind(str, Enum):
    """Семейства полей данных"""
    CONSTANT = "constant"
    SINUSOID = "sinusoid"
    BUMP = "bump"
    CSV = "csv"


class FieldSpec(BaseModel):
    """Описание поля данных в конфигурации"""
    model_config = ConfigDict(extra="forbid")

    kind: FieldKind = FieldKind.CONSTANT
    value: float = 0.0
    offset: float = 0.0
    amplitude: float = 0.0
    modes_a: int = Field(1, ge=0)
    modes_b: int = Field(1, ge=0)
    power: int = Field(1, ge=1)
    center_a: Optional[float] = None
    center_b: Optional[float] = None
    width_a: Optional[float] = Field(None, gt=0)
    width_b: Optional[float] = Field(None, gt=0)
    path: Optional[str] = None
    column_alpha: str = "alpha"
    column_beta: str = "beta"
    column_value: str = "value"
    samples: int = Field(33, ge=2)

    @model_validator(mode="after")
    def _csv_needs_path(self) -> "FieldSpec":
        if self.kind == FieldKind.CSV and not self.path:
            raise ValueError("Для kind = csv нужен path")
        return self
