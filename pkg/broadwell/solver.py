"""
Итерации Пикара для 𝒯 и 𝒯^σ, оценки погрешности и диагностика решения
"""

import logging
import math
import time
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from broadwell.characteristics import exceptional_planes, from_eta_array, to_eta_array
from broadwell.domain_data import ProblemData, check_compatibility, compute_p_prime, gate_report, gate_root
from broadwell.kinetics import collision_sources, moment_arrays, velocity_set
from broadwell.mild_operator import (
    EtaField,
    EtaGrid,
    apply_T,
    apply_T_sigma,
    eta_partials,
    sup_distance,
)
from broadwell.models import (
    ConservationReport,
    DerivativeBound,
    DerivativeBoundReport,
    GateReport,
    GuessKind,
    IterationStatus,
    IterationTrace,
    ModelParams,
    ResidualReport,
    SolverConfig,
    SpaceTimeBox,
    StepRecord,
)

logger = logging.getLogger(__name__)


class SolverError(Exception):
    """Ошибка решателя"""
    pass


class GateViolationError(SolverError):
    """pq > 1/4 без явного разрешения"""
    pass


class DivergenceError(SolverError):
    """Разности итераций растут"""

    def __init__(self, message: str, trace: IterationTrace):
        super().__init__(message)
        self.trace = trace


def physical_derivatives(d1, d2, d3, c: float):
    """Производные по (t, x, y) через производные по η"""
    dt = 0.5 * (d2 + d3)
    dx = d1 / c - (d2 + d3) / (2.0 * c)
    dy = (d2 - d3) / (2.0 * c)
    return dt, dx, dy


class Solution:
    """Неподвижная точка на сетке по η и её представление в (t, x, y)"""

    def __init__(self, field: EtaField, data: ProblemData, gate: GateReport, trace: IterationTrace,
                 config: SolverConfig, gate_override: bool = False, sigma: Optional[float] = None):
        self.field = field
        self.data = data
        self.gate = gate
        self.trace = trace
        self.config = config
        self.gate_override = gate_override
        self.sigma = sigma

    @property
    def grid(self) -> EtaGrid:
        return self.field.grid

    def sample(self, t, x, y) -> np.ndarray:
        """Плотности в физических точках, последняя ось: виды"""
        return self.field.interpolate(to_eta_array(t, x, y, self.data.params))

    def derivatives(self, t, x, y) -> Dict[str, np.ndarray]:
        """∂/∂t, ∂/∂x, ∂/∂y центральными разностями интерполянта с шагом сетки"""
        eta = to_eta_array(t, x, y, self.data.params)
        partials = []
        for axis, h in enumerate(self.grid.spacing):
            shift = np.zeros(3)
            shift[axis] = h
            partials.append((self.field.interpolate(eta + shift) - self.field.interpolate(eta - shift)) / (2 * h))
        dt, dx, dy = physical_derivatives(*partials, self.data.params.c)
        return {"t": dt, "x": dx, "y": dy}

    def moments(self, t, x, y) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return moment_arrays(self.sample(t, x, y), self.data.params, strict=False)

    def lattice(self, nx: int, ny: int) -> Tuple[np.ndarray, np.ndarray]:
        box = self.data.box
        return np.linspace(box.a1, box.b1, nx), np.linspace(box.a2, box.b2, ny)

    def slice(self, t: float, nx: int, ny: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Срез в момент t на сетке nx × ny: (X, Y, плотности (nx, ny, 4))"""
        xs, ys = self.lattice(nx, ny)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return X, Y, self.sample(np.full_like(X, t), X, Y)


def resolve_sigma(cfg: SolverConfig, params: ModelParams) -> Optional[float]:
    if not cfg.use_sigma:
        return None
    return cfg.sigma if cfg.sigma is not None else 2.0 * params.c * params.S


def _initial_guess(grid: EtaGrid, cfg: SolverConfig, operator) -> EtaField:
    if cfg.guess == GuessKind.ZERO:
        return EtaField.zeros(grid)
    if cfg.guess == GuessKind.CONSTANT:
        return EtaField.constant(grid, cfg.guess_value)
    return operator(EtaField.zeros(grid))


def solve(data: ProblemData, cfg: SolverConfig) -> Solution:
    """Итерации N^{k+1} = 𝒯(N^k) до ‖N^{k+1} − N^k‖ ≤ abs_tol"""
    gate = gate_report(data)
    override = False
    if not gate.gate_ok:
        if not cfg.override_gate:
            raise GateViolationError(f"Условие существования нарушено: pq = {gate.pq:.6g} > 1/4")
        logger.warning(f"Запуск вне условия pq ≤ 1/4 (pq = {gate.pq:.6g}) по явному разрешению")
        override = True

    check_compatibility(data, cfg.compat_tol)

    grid = EtaGrid(data.box, data.params, cfg.grid)
    sigma = resolve_sigma(cfg, data.params)
    if sigma is None:
        operator = lambda M: apply_T(M, data, cfg.quad)
    else:
        operator = lambda M: apply_T_sigma(M, sigma, data, cfg.quad)

    logger.info(
        f"Решение: сетка {grid.shape}, p = {gate.p:.6g}, q = {gate.q:.6g}, pq = {gate.pq:.6g}, "
        f"{'𝒯^σ, σ = ' + format(sigma, '.6g') if sigma is not None else '𝒯'}, начало {cfg.guess.value}"
    )

    current = _initial_guess(grid, cfg, operator)
    records: List[StepRecord] = []
    status = IterationStatus.MAX_ITERS
    previous: Optional[float] = None
    rising = 0

    for k in range(1, cfg.max_iters + 1):
        started = time.perf_counter()
        candidate = operator(current)
        delta = sup_distance(candidate, current, on_support=True)
        ratio = delta / previous if previous else None
        records.append(StepRecord(k=k, delta=delta, ratio=ratio, wall_time=time.perf_counter() - started))
        logger.debug(f"Итерация {k}: δ = {delta:.3e}" + (f", δ/δ_prev = {ratio:.3e}" if ratio is not None else ""))

        if not math.isfinite(delta):
            trace = IterationTrace(records=records, status=IterationStatus.DIVERGED)
            raise DivergenceError(f"Нечисловая разность итераций на шаге {k}", trace)

        current = candidate
        if delta <= cfg.abs_tol:
            status = IterationStatus.CONVERGED
            break

        rising = rising + 1 if previous is not None and delta > previous else 0
        if rising >= cfg.divergence_window:
            trace = IterationTrace(records=records, status=IterationStatus.DIVERGED)
            raise DivergenceError(
                f"Разность итераций растёт {rising} шагов подряд (δ = {delta:.3e} на шаге {k})", trace
            )
        previous = delta

    trace = IterationTrace(records=records, status=status)
    if status == IterationStatus.CONVERGED:
        logger.info(f"Сошлось за {trace.iterations} итераций, δ = {trace.delta_last:.3e}")
    else:
        logger.warning(f"Не сошлось за {cfg.max_iters} итераций, δ = {trace.delta_last:.3e}")
    return Solution(current, data, gate, trace, cfg, gate_override=override, sigma=sigma)


def contraction_factor(gate: GateReport, box: SpaceTimeBox, params: ModelParams) -> float:
    """κ = (p′/p)(1 + √(1 − 4pq))"""
    if not gate.gate_ok:
        raise SolverError(f"Коэффициент сжатия определён только при pq ≤ 1/4 (pq = {gate.pq:.6g})")
    if gate.p == 0.0:
        return 0.0
    return compute_p_prime(box, params) / gate.p * (1.0 + gate_root(gate.pq))


def error_estimate(trace: IterationTrace, kappa: float) -> float:
    """Апостериорная оценка κ/(1 − κ)·δ_last расстояния до неподвижной точки"""
    if not trace.records:
        raise SolverError("Нет ни одной итерации")
    if not 0.0 <= kappa < 1.0:
        raise SolverError(f"Оценка требует 0 ≤ κ < 1, получено κ = {kappa}")
    return kappa / (1.0 - kappa) * trace.delta_last


def measured_ratios(trace: IterationTrace) -> List[float]:
    return [r.ratio for r in trace.records if r.ratio is not None]


def interior_safe_mask(grid: EtaGrid, box: SpaceTimeBox, params: ModelParams, cells: float = 1.0) -> np.ndarray:
    """Узлы, у которых соседи по осям на расстоянии cells·h лежат в 𝓟′ по ту же сторону плоскостей смены ветви"""
    c = params.c
    eta = grid.nodes
    radius = cells * grid.spacing

    def spread(weights) -> float:
        return float(np.max(np.abs(weights) * radius))

    t, x, y = (from_eta_array(eta, params)[..., k] for k in range(3))
    safe = (t - spread([1, 1, 1]) >= 0) & (t + spread([1, 1, 1]) <= box.T)
    safe &= (x - spread([c, 0, 0]) >= box.a1) & (x + spread([c, 0, 0]) <= box.b1)
    safe &= (y - spread([0, c, c]) >= box.a2) & (y + spread([0, c, c]) <= box.b2)
    for weights, level in exceptional_planes(box, params):
        safe &= np.abs(eta @ weights - level) > spread(weights)
    return safe


def _node_derivatives(sol: Solution):
    d1, d2, d3 = eta_partials(sol.field)
    return physical_derivatives(d1, d2, d3, sol.data.params.c)


def residual(sol: Solution, data: Optional[ProblemData] = None) -> ResidualReport:
    """sup |∂N_i/∂t + u_i·∇N_i − (±Q)| по узлам вдали от плоскостей смены ветви"""
    data = data or sol.data
    params = data.params
    safe = interior_safe_mask(sol.grid, data.box, params)
    if not safe.any():
        logger.warning("Нет внутренних узлов для оценки невязки, уменьшите шаг сетки")
        return ResidualReport(per_species=[0.0] * 4, points=0)

    dt, dx, dy = _node_derivatives(sol)
    velocities = velocity_set(params)
    sources = np.moveaxis(collision_sources(np.moveaxis(sol.field.values, 0, -1), params), -1, 0)
    per_species = []
    for i in range(4):
        res = dt[i] + velocities[i, 0] * dx[i] + velocities[i, 1] * dy[i] - sources[i]
        per_species.append(float(np.abs(res[safe]).max()))
    return ResidualReport(per_species=per_species, points=int(safe.sum()))


def derivative_bound_check(sol: Solution, gate: GateReport, slack: float = 1.1) -> DerivativeBoundReport:
    """Сравнить ‖∂t N‖, ‖∂x N‖, ‖∂y N‖ с B, (2/c)B, (1/c)B"""
    c = sol.data.params.c
    safe = interior_safe_mask(sol.grid, sol.data.box, sol.data.params)
    B = gate.bound_B
    bounds = {"t": B, "x": 2.0 * B / c, "y": B / c}

    entries = []
    for name, derivative in zip(("t", "x", "y"), _node_derivatives(sol)):
        measured = float(np.abs(derivative[:, safe]).max()) if safe.any() else 0.0
        bound = bounds[name]
        entries.append(DerivativeBound(
            name=name, measured=measured, bound=bound, margin=bound - measured,
            ok=measured <= bound * slack,
        ))
    return DerivativeBoundReport(entries=entries, points=int(safe.sum()))


def positivity_report(sol: Solution, rel_tol: float = 1e-8) -> Tuple[float, bool]:
    """Минимум по узлам и признак min ≥ −max(abs_tol, rel_tol·‖N‖)"""
    minimum = sol.field.min_value()
    floor = max(sol.config.abs_tol, rel_tol * sol.field.sup_norm())
    return minimum, minimum >= -floor


def bound_check(sol: Solution, slack: float = 1.05) -> Tuple[float, bool]:
    """‖N‖ и признак ‖N‖ ≤ B·slack"""
    norm = sol.field.sup_norm()
    return norm, norm <= sol.gate.bound_B * slack


def lattice_balance(ts: np.ndarray, xs: np.ndarray, ys: np.ndarray, N: np.ndarray, c: float) -> ConservationReport:
    """Баланс массы и импульса для плотностей N (nt, nx, ny, 4) на прямоугольной решётке.

    Дефект: max по t |∬ρ(t) − ∬ρ(0) − ∫₀ᵗ поток|, масштаб: max ρ · площадь.
    """

    def total(values):
        return trapezoid(trapezoid(values, ys, axis=-1), xs, axis=-1)

    def across_x(values):
        return trapezoid(values[:, -1, :] - values[:, 0, :], ys, axis=-1)

    def across_y(values):
        return trapezoid(values[:, :, -1] - values[:, :, 0], xs, axis=-1)

    def defect(content, rate):
        gained = content - content[0]
        return float(np.abs(gained - cumulative_trapezoid(rate, ts, initial=0.0)).max())

    rho = N.sum(axis=-1)
    diff14, diff23 = N[..., 0] - N[..., 3], N[..., 1] - N[..., 2]
    sum14, sum23 = N[..., 0] + N[..., 3], N[..., 1] + N[..., 2]

    mass_defect = defect(total(rho), -c * across_x(diff14) - c * across_y(diff23))
    mx_defect = defect(total(diff14), -c * across_x(sum14))
    my_defect = defect(total(diff23), -c * across_y(sum23))

    area = (xs[-1] - xs[0]) * (ys[-1] - ys[0])
    scale = float(np.abs(rho).max()) * area
    relative = mass_defect / scale if scale > 0 else (0.0 if mass_defect == 0 else math.inf)
    return ConservationReport(mass_defect=mass_defect, momentum_x_defect=mx_defect,
                              momentum_y_defect=my_defect, mass_scale=scale, relative_mass_defect=relative)


def mass_balance(sol: Solution, nt: Optional[int] = None, nx: Optional[int] = None,
                 ny: Optional[int] = None) -> ConservationReport:
    """Сравнить приращения ∬ρ, ∬(N1−N4), ∬(N2−N3) с потоками через границу за то же время"""
    n = max(sol.grid.shape)
    nt, nx, ny = nt or n, nx or n, ny or n
    ts = np.linspace(0.0, sol.data.box.T, nt)
    xs, ys = sol.lattice(nx, ny)
    T_, X, Y = np.meshgrid(ts, xs, ys, indexing="ij")
    return lattice_balance(ts, xs, ys, sol.sample(T_, X, Y), sol.data.params.c)


def guess_independence(data: ProblemData, cfg: SolverConfig, value: Optional[float] = None) -> float:
    """sup-расстояние между решениями из нулевого и постоянного приближений"""
    kappa = value if value is not None else (cfg.guess_value or gate_report(data).q)
    zero = solve(data, cfg.model_copy(update={"guess": GuessKind.ZERO}))
    constant = solve(data, cfg.model_copy(update={"guess": GuessKind.CONSTANT, "guess_value": kappa}))
    return sup_distance(zero.field, constant.field)
