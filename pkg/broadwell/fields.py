"""
Поля начальных и граничных данных: сетка отсчётов, билинейная интерполяция,
аналитические семейства и чтение/запись CSV
"""

import logging
import math
from pathlib import Path
from typing import Callable, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator
from scipy.interpolate import RegularGridInterpolator

from broadwell.models import FieldKind, FieldSpec

logger = logging.getLogger(__name__)

Range = Tuple[float, float]
Scalar2D = Callable[[np.ndarray, np.ndarray], np.ndarray]


class FieldError(Exception):
    """Ошибка построения или чтения поля данных"""
    pass


class FieldDomainError(FieldError):
    """Точка вне области определения поля"""
    pass


class DataField(BaseModel):
    """Скалярная функция двух переменных на прямоугольнике"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str = Field("", description="Имя поля для сообщений")
    alpha_range: Range
    beta_range: Range
    samples: np.ndarray = Field(..., description="Отсчёты на равномерной сетке, индексация (α, β)")
    nonnegative: bool = True
    func: Optional[Scalar2D] = Field(None, description="Точная формула поля, если известна")
    d_alpha: Optional[Scalar2D] = None
    d_beta: Optional[Scalar2D] = None

    _interp: Optional[RegularGridInterpolator] = PrivateAttr(default=None)

    @field_validator("samples", mode="before")
    @classmethod
    def _to_array(cls, value) -> np.ndarray:
        return np.array(value, dtype=float)

    @model_validator(mode="after")
    def _check_samples(self) -> "DataField":
        for label, (lo, hi) in (("alpha", self.alpha_range), ("beta", self.beta_range)):
            if not lo < hi:
                raise ValueError(f"Пустой диапазон {label}: [{lo}, {hi}]")
        if self.samples.ndim != 2 or min(self.samples.shape) < 2:
            raise ValueError(f"Нужно не меньше 2 отсчётов по каждой оси, форма {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError(f"Поле {self.name!r} содержит нечисловые отсчёты")
        if self.nonnegative and self.samples.min() < 0:
            raise ValueError(f"Поле {self.name!r} отрицательно: min = {self.samples.min():.6g}")
        return self

    def model_post_init(self, __context) -> None:
        self.samples.setflags(write=False)
        self._interp = RegularGridInterpolator(
            (self.alphas, self.betas), self.samples, method="linear"
        )

    @property
    def alphas(self) -> np.ndarray:
        return np.linspace(*self.alpha_range, self.samples.shape[0])

    @property
    def betas(self) -> np.ndarray:
        return np.linspace(*self.beta_range, self.samples.shape[1])

    @property
    def has_derivatives(self) -> bool:
        return self.d_alpha is not None and self.d_beta is not None

    def evaluate(self, alpha, beta, tol: float = 1e-9) -> np.ndarray:
        """Значения поля; точки вне области дальше допуска считаются ошибкой.

        Поле с формулой func вычисляется точно, иначе билинейно по отсчётам.
        Отсчёты аналитического поля равны func в узлах, а partials() берёт
        d_alpha, d_beta в тех же узлах, так что c1_norm и evaluate описывают
        одну функцию.
        """
        a, b = np.broadcast_arrays(np.asarray(alpha, dtype=float), np.asarray(beta, dtype=float))
        a = self._clip(a, self.alpha_range, tol, "alpha")
        b = self._clip(b, self.beta_range, tol, "beta")
        if a.size == 0:
            return np.empty(a.shape)
        if self.func is not None:
            return np.broadcast_to(np.asarray(self.func(a, b), dtype=float), a.shape).copy()
        points = np.stack([a, b], axis=-1).reshape(-1, 2)
        return self._interp(points).reshape(a.shape)

    __call__ = evaluate

    def _clip(self, values: np.ndarray, bounds: Range, tol: float, label: str) -> np.ndarray:
        lo, hi = bounds
        slack = tol * max(1.0, abs(lo), abs(hi))
        if values.size and (values.min() < lo - slack or values.max() > hi + slack):
            worst = values.min() if values.min() < lo - slack else values.max()
            raise FieldDomainError(
                f"Поле {self.name!r}: {label} = {worst:.17g} вне [{lo:.17g}, {hi:.17g}]"
            )
        return np.clip(values, lo, hi)

    def partials(self) -> Tuple[np.ndarray, np.ndarray]:
        """Частные производные в узлах сетки"""
        if self.has_derivatives:
            a, b = np.meshgrid(self.alphas, self.betas, indexing="ij")
            return (
                np.broadcast_to(np.asarray(self.d_alpha(a, b), dtype=float), a.shape),
                np.broadcast_to(np.asarray(self.d_beta(a, b), dtype=float), a.shape),
            )
        if min(self.samples.shape) < 3:
            raise FieldError(
                f"Поле {self.name!r}: для разностных производных нужно ≥ 3 отсчётов по оси"
            )
        da, db = np.gradient(self.samples, self.alphas, self.betas, edge_order=1)
        return da, db

    def scaled(self, factor: float) -> "DataField":
        """Поле, умноженное на неотрицательный множитель"""
        func = d_alpha = d_beta = None
        if self.func is not None:
            func = lambda a, b, f=self.func: factor * np.asarray(f(a, b))
        if self.has_derivatives:
            d_alpha = lambda a, b, f=self.d_alpha: factor * np.asarray(f(a, b))
            d_beta = lambda a, b, f=self.d_beta: factor * np.asarray(f(a, b))
        return DataField(
            name=self.name,
            alpha_range=self.alpha_range,
            beta_range=self.beta_range,
            samples=factor * self.samples,
            nonnegative=self.nonnegative,
            func=func,
            d_alpha=d_alpha,
            d_beta=d_beta,
        )

    @classmethod
    def from_function(
        cls,
        func: Scalar2D,
        alpha_range: Range,
        beta_range: Range,
        samples: int = 33,
        d_alpha: Optional[Scalar2D] = None,
        d_beta: Optional[Scalar2D] = None,
        name: str = "",
        nonnegative: bool = True,
    ) -> "DataField":
        a, b = np.meshgrid(
            np.linspace(*alpha_range, samples), np.linspace(*beta_range, samples), indexing="ij"
        )
        values = np.broadcast_to(np.asarray(func(a, b), dtype=float), a.shape)
        return cls(
            name=name,
            alpha_range=tuple(alpha_range),
            beta_range=tuple(beta_range),
            samples=values,
            nonnegative=nonnegative,
            func=func,
            d_alpha=d_alpha,
            d_beta=d_beta,
        )

    @classmethod
    def constant(cls, value: float, alpha_range: Range, beta_range: Range,
                 name: str = "", samples: int = 3) -> "DataField":
        value = float(value)
        zero = lambda a, b: np.zeros(np.broadcast(a, b).shape)
        return cls.from_function(
            lambda a, b: np.full(np.broadcast(a, b).shape, value),
            alpha_range, beta_range, samples=samples,
            d_alpha=zero, d_beta=zero, name=name, nonnegative=value >= 0,
        )

    @classmethod
    def from_csv(
        cls,
        path: Union[str, Path],
        alpha: str = "alpha",
        beta: str = "beta",
        value: str = "value",
        name: Optional[str] = None,
        nonnegative: bool = True,
    ) -> "DataField":
        """Прочитать поле из CSV с заголовком; строки образуют полную прямоугольную сетку"""
        path = Path(path)
        try:
            table = np.genfromtxt(path, delimiter=",", names=True, dtype=float, encoding="utf-8")
        except (OSError, ValueError) as e:
            raise FieldError(f"Не удалось прочитать {path}: {e}") from e

        columns = table.dtype.names or ()
        missing = [col for col in (alpha, beta, value) if col not in columns]
        if missing:
            raise FieldError(f"В {path} нет столбцов {missing}, есть {list(columns)}")

        table = np.atleast_1d(table)
        a, b, v = table[alpha], table[beta], table[value]
        alphas, betas = np.unique(a), np.unique(b)
        if alphas.size < 2 or betas.size < 2 or alphas.size * betas.size != v.size:
            raise FieldError(f"{path}: отсчёты не образуют прямоугольную сетку")
        for axis in (alphas, betas):
            steps = np.diff(axis)
            if not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
                raise FieldError(f"{path}: шаг сетки неравномерный")

        grid = np.full((alphas.size, betas.size), np.nan)
        grid[np.searchsorted(alphas, a), np.searchsorted(betas, b)] = v
        if np.isnan(grid).any():
            raise FieldError(f"{path}: в сетке есть пропуски или повторы")

        logger.debug(f"Поле из {path}: {alphas.size}×{betas.size} отсчётов")
        return cls(
            name=name or path.stem,
            alpha_range=(float(alphas[0]), float(alphas[-1])),
            beta_range=(float(betas[0]), float(betas[-1])),
            samples=grid,
            nonnegative=nonnegative,
        )

    def write_csv(self, path: Union[str, Path]) -> Path:
        """Записать отсчёты в формате alpha,beta,value"""
        path = Path(path)
        a, b = np.meshgrid(self.alphas, self.betas, indexing="ij")
        rows = np.column_stack([a.ravel(), b.ravel(), self.samples.ravel()])
        np.savetxt(path, rows, fmt="%.17g", delimiter=",", header="alpha,beta,value", comments="")
        return path


def _sine_factor(lo: float, length: float, modes: int):
    """sin(π·m·(x−lo)/L) и его производная; m = 0 даёт единицу"""
    if modes == 0:
        return (lambda x: np.ones_like(x)), (lambda x: np.zeros_like(x))
    k = math.pi * modes / length
    return (lambda x: np.sin(k * (x - lo))), (lambda x: k * np.cos(k * (x - lo)))


def sinusoid_field(
    alpha_range: Range,
    beta_range: Range,
    offset: float,
    amplitude: float,
    modes_a: int = 1,
    modes_b: int = 1,
    power: int = 1,
    samples: int = 33,
    name: str = "",
) -> DataField:
    """offset + amplitude·(sin·sin)^power с целыми числами полуволн по осям"""
    fa, dfa = _sine_factor(alpha_range[0], alpha_range[1] - alpha_range[0], modes_a)
    fb, dfb = _sine_factor(beta_range[0], beta_range[1] - beta_range[0], modes_b)

    def func(a, b):
        return offset + amplitude * (fa(a) * fb(b)) ** power

    def d_alpha(a, b):
        return amplitude * power * (fa(a) * fb(b)) ** (power - 1) * dfa(a) * fb(b)

    def d_beta(a, b):
        return amplitude * power * (fa(a) * fb(b)) ** (power - 1) * fa(a) * dfb(b)

    return DataField.from_function(func, alpha_range, beta_range, samples, d_alpha, d_beta, name=name)


def bump_field(
    alpha_range: Range,
    beta_range: Range,
    offset: float,
    amplitude: float,
    center_a: Optional[float] = None,
    center_b: Optional[float] = None,
    width_a: Optional[float] = None,
    width_b: Optional[float] = None,
    samples: int = 33,
    name: str = "",
) -> DataField:
    """Гауссов горб над постоянным фоном"""
    ca = 0.5 * sum(alpha_range) if center_a is None else center_a
    cb = 0.5 * sum(beta_range) if center_b is None else center_b
    wa = width_a or 0.1 * (alpha_range[1] - alpha_range[0])
    wb = width_b or 0.1 * (beta_range[1] - beta_range[0])

    def gauss(a, b):
        return amplitude * np.exp(-0.5 * (((a - ca) / wa) ** 2 + ((b - cb) / wb) ** 2))

    return DataField.from_function(
        lambda a, b: offset + gauss(a, b),
        alpha_range, beta_range, samples,
        d_alpha=lambda a, b: -(a - ca) / wa ** 2 * gauss(a, b),
        d_beta=lambda a, b: -(b - cb) / wb ** 2 * gauss(a, b),
        name=name,
    )


def build_field(spec: FieldSpec, alpha_range: Range, beta_range: Range,
                name: str = "", base_dir: Optional[Path] = None) -> DataField:
    """Построить поле по описанию из конфигурации"""
    if spec.kind == FieldKind.CONSTANT:
        return DataField.constant(spec.value, alpha_range, beta_range, name=name,
                                  samples=max(3, min(spec.samples, 33)))
    if spec.kind == FieldKind.SINUSOID:
        return sinusoid_field(alpha_range, beta_range, spec.offset, spec.amplitude,
                              spec.modes_a, spec.modes_b, spec.power, spec.samples, name=name)
    if spec.kind == FieldKind.BUMP:
        return bump_field(alpha_range, beta_range, spec.offset, spec.amplitude,
                          spec.center_a, spec.center_b, spec.width_a, spec.width_b,
                          spec.samples, name=name)

    path = Path(spec.path)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return DataField.from_csv(path, spec.column_alpha, spec.column_beta, spec.column_value, name=name)
