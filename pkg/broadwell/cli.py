"""
Командная строка: проверка условия существования, решение, набор проверок и сравнение с оракулом
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from broadwell.config import (
    ConfigError,
    RunConfig,
    Settings,
    build_problem,
    config_manager,
    get_settings,
    load_run_config,
)
from broadwell.domain_data import ProblemData, check_compatibility, gate_report, max_admissible_scale
from broadwell.models import CheckResult, IterationStatus
from broadwell.oracle import (
    CFLViolationError,
    fd_grid_for,
    free_streaming_field,
    oracle_distance,
    upwind_solve,
)
from broadwell.report import ReportError, ReportWriter, format_value
from broadwell.solver import (
    DivergenceError,
    GateViolationError,
    Solution,
    SolverError,
    bound_check,
    contraction_factor,
    derivative_bound_check,
    error_estimate,
    guess_independence,
    mass_balance,
    positivity_report,
    residual,
    solve,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


def setup_logging(settings: Settings, log_file: Optional[Path] = None, quiet: bool = False,
                  level: Optional[str] = None):
    """Настройка системы логирования"""
    log_level = getattr(logging, (level or settings.log_level).upper(), logging.INFO)

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)
    root_logger.handlers.clear()

    if log_file is not None:
        try:
            log_file.parent.mkdir(parents=True, exist_ok=True)
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
            file_handler.setFormatter(formatter)
            root_logger.addHandler(file_handler)
        except Exception as e:
            print(f"Не удалось создать файл логов: {e}", file=sys.stderr)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    if quiet:
        console_handler.setLevel(logging.WARNING)
    root_logger.addHandler(console_handler)


def parse_slices(text: str, T: float) -> List[float]:
    try:
        slices = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--slices: ожидаются числа через запятую, получено {text!r}")
    if not slices:
        raise ConfigError("--slices: пустой список")
    for t in slices:
        if not 0.0 <= t <= T:
            raise ConfigError(f"--slices: момент {t} вне [0, {T}]")
    return slices


def gate_lines(data: ProblemData) -> List[Tuple[str, object]]:
    gate = gate_report(data)
    lines = [
        ("p", gate.p),
        ("q", gate.q),
        ("pq", gate.pq),
        ("gate", "ok" if gate.gate_ok else "violated"),
        ("r_lo", gate.r_lo),
        ("r_hi", gate.r_hi),
        ("bound_B", gate.bound_B),
        ("bound_full", gate.bound_full),
        ("p_prime", gate.p_prime),
        ("lambda_max", max_admissible_scale(gate)),
    ]
    if gate.gate_ok:
        lines.append(("kappa", contraction_factor(gate, data.box, data.params)))
    return lines


def print_lines(lines: List[Tuple[str, object]]) -> None:
    for key, value in lines:
        print(f"{key}: {format_value(value)}")


def cmd_check_gate(args, run: RunConfig, data: ProblemData, settings: Settings) -> int:
    lines = gate_lines(data)
    violations = check_compatibility(data, settings.compat_tol)
    lines.append(("compatibility_violations", len(violations)))
    print_lines(lines)
    return EXIT_OK if gate_report(data).gate_ok else EXIT_FAILED


def _prepare_output(run: RunConfig, settings: Settings) -> Path:
    output_dir = run.output_dir(settings)
    errors = config_manager.validate_paths(output_dir)
    if errors:
        raise ReportError("; ".join(errors))
    return output_dir


def free_streaming_deviation(sol: Solution, data: ProblemData, slices: List[float], nx: int, ny: int) -> float:
    """sup по срезам |N − свободный перенос данных|"""
    worst = 0.0
    for t in slices:
        X, Y, N = sol.slice(t, nx, ny)
        exact = free_streaming_field(data, np.full_like(X, t), X, Y)
        worst = max(worst, float(np.abs(N - exact).max()))
    return worst


def solution_summary(sol: Solution, data: ProblemData, run: RunConfig, slices: List[float]) -> List[Tuple[str, object]]:
    """Строки сводки запуска"""
    gate, trace = sol.gate, sol.trace
    lines = gate_lines(data)
    lines += [
        ("gate_override", sol.gate_override),
        ("operator", "T_sigma" if sol.sigma is not None else "T"),
        ("grid", "x".join(str(n) for n in sol.grid.shape)),
        ("status", trace.status.value),
        ("iterations", trace.iterations),
    ]
    for record in trace.records:
        ratio = format_value(record.ratio) if record.ratio is not None else "-"
        lines.append((f"iteration.{record.k}", f"delta={format_value(record.delta)} ratio={ratio}"))
    lines.append(("delta_last", trace.delta_last))

    if gate.gate_ok:
        kappa = contraction_factor(gate, data.box, data.params)
        if kappa < 1.0 and trace.records:
            lines.append(("error_estimate", error_estimate(trace, kappa)))

    res = residual(sol)
    for i, value in enumerate(res.per_species, start=1):
        lines.append((f"residual.n{i}", value))
    lines.append(("residual.points", res.points))

    for entry in derivative_bound_check(sol, gate, run.verify.derivative_slack).entries:
        lines.append((f"derivative.{entry.name}", f"measured={format_value(entry.measured)} "
                                                  f"bound={format_value(entry.bound)} "
                                                  f"margin={format_value(entry.margin)}"))

    minimum, nonnegative = positivity_report(sol)
    norm, within = bound_check(sol, run.verify.bound_slack)
    balance = mass_balance(sol)
    lines += [
        ("min_node_value", minimum),
        ("positivity", nonnegative),
        ("sup_norm", norm),
        ("sup_norm_within_bound", within),
        ("mass_defect", balance.mass_defect),
        ("relative_mass_defect", balance.relative_mass_defect),
        ("momentum_x_defect", balance.momentum_x_defect),
        ("momentum_y_defect", balance.momentum_y_defect),
        ("free_streaming_deviation",
         free_streaming_deviation(sol, data, slices, run.oracle.nx, run.oracle.ny)),
    ]
    return lines


def cmd_solve(args, run: RunConfig, data: ProblemData, settings: Settings) -> int:
    slices = parse_slices(args.slices, data.box.T) if args.slices else run.slices()
    output_dir = _prepare_output(run, settings)
    cfg = run.effective_solver(settings, override_gate=args.override_gate)

    sol = solve(data, cfg)
    writer = ReportWriter(output_dir)
    for t in slices:
        writer.write_slice(sol, t, run.oracle.nx, run.oracle.ny)
        if run.output.moments:
            writer.write_moments(sol, t, run.oracle.nx, run.oracle.ny)
    writer.write_summary(solution_summary(sol, data, run, slices))

    if sol.trace.status != IterationStatus.CONVERGED:
        logger.warning("Итерации не сошлись, результаты записаны как есть")
        return EXIT_FAILED
    return EXIT_OK


def _oracle_error(sol: Solution, data: ProblemData, run: RunConfig) -> float:
    nx, ny = run.oracle.nx, run.oracle.ny
    grid = fd_grid_for(data.box, data.params, nx, ny, run.oracle.time_nodes(data.box, data.params))
    return oracle_distance(upwind_solve(data, grid), sol.sample)


def verification_checks(run: RunConfig, data: ProblemData, settings: Settings,
                        override_gate: bool = False) -> List[CheckResult]:
    """Набор проверок; при нарушении условия без разрешения остальные пропускаются"""
    cfg = run.effective_solver(settings, override_gate=override_gate)
    verify = run.verify
    results: List[CheckResult] = []

    violations = check_compatibility(data, cfg.compat_tol)
    results.append(CheckResult(
        name="compatibility", passed=not violations,
        detail=f"нарушений: {len(violations)}" + (
            f", максимум {max(v.magnitude for v in violations):.3e}" if violations else ""),
    ))

    gate = gate_report(data)
    results.append(CheckResult(name="gate", passed=gate.gate_ok,
                               detail=f"pq = {gate.pq:.6g}" + ("" if gate.gate_ok else " > 1/4")))
    if not gate.gate_ok and not cfg.override_gate:
        for name in ("solve", "positivity", "bound", "derivatives", "contraction",
                     "mass_balance", "guess_independence", "oracle"):
            results.append(CheckResult(name=name, passed=False, detail="пропущено: условие pq ≤ 1/4 нарушено"))
        return results

    sol = solve(data, cfg)
    results.append(CheckResult(name="solve", passed=sol.trace.status == IterationStatus.CONVERGED,
                               detail=f"{sol.trace.status.value}, итераций {sol.trace.iterations}"))

    minimum, nonnegative = positivity_report(sol)
    results.append(CheckResult(name="positivity", passed=nonnegative, detail=f"min = {minimum:.3e}"))

    norm, within = bound_check(sol, verify.bound_slack)
    results.append(CheckResult(name="bound", passed=within,
                               detail=f"‖N‖ = {norm:.6g}, B = {gate.bound_B:.6g}"))

    derivatives = derivative_bound_check(sol, gate, verify.derivative_slack)
    results.append(CheckResult(
        name="derivatives", passed=derivatives.ok,
        detail=", ".join(f"{e.name}: {e.measured:.3g}/{e.bound:.3g}" for e in derivatives.entries),
    ))

    results.append(_contraction_check(sol, data, cfg.abs_tol))

    balance = mass_balance(sol)
    results.append(CheckResult(name="mass_balance", passed=balance.relative_mass_defect <= verify.mass_tol,
                               detail=f"относительный дефект {balance.relative_mass_defect:.3e}"))

    distance = guess_independence(data, cfg)
    results.append(CheckResult(name="guess_independence", passed=distance <= 10 * cfg.abs_tol,
                               detail=f"расстояние {distance:.3e}"))

    try:
        error = _oracle_error(sol, data, run)
        results.append(CheckResult(name="oracle", passed=error <= verify.oracle_tol,
                                   detail=f"относительная ошибка {error:.3e}"))
    except CFLViolationError as e:
        results.append(CheckResult(name="oracle", passed=False, detail=str(e)))
    return results


def _contraction_check(sol: Solution, data: ProblemData, abs_tol: float) -> CheckResult:
    """Последнее отношение разностей, измеренное выше уровня округления, не больше 1.1·κ"""
    try:
        kappa = contraction_factor(sol.gate, data.box, data.params)
    except SolverError as e:
        return CheckResult(name="contraction", passed=False, detail=str(e))
    records = sol.trace.records
    ratios = [cur.ratio for prev, cur in zip(records, records[1:])
              if cur.ratio is not None and prev.delta > 100 * abs_tol]
    if not ratios:
        return CheckResult(name="contraction", passed=True, detail=f"κ = {kappa:.4g}, отношений нет")
    last = ratios[-1]
    return CheckResult(name="contraction", passed=last <= 1.1 * kappa,
                       detail=f"δ_k/δ_(k-1) = {last:.4g}, κ = {kappa:.4g}")


def cmd_verify(args, run: RunConfig, data: ProblemData, settings: Settings) -> int:
    results = verification_checks(run, data, settings, override_gate=args.override_gate)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name.ljust(width)}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
        if not r.passed:
            logger.warning(f"Проверка {r.name} не пройдена: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED


def cmd_compare_oracle(args, run: RunConfig, data: ProblemData, settings: Settings) -> int:
    cfg = run.effective_solver(settings, override_gate=args.override_gate)
    sol = solve(data, cfg)
    error = _oracle_error(sol, data, run)
    deviation = free_streaming_deviation(sol, data, run.slices(), run.oracle.nx, run.oracle.ny)
    print_lines([
        ("relative_sup_error", error),
        ("oracle_tol", run.verify.oracle_tol),
        ("free_streaming_deviation", deviation),
        ("free_streaming_is_exact", data.params.S == 0.0),
    ])
    return EXIT_OK if error <= run.verify.oracle_tol else EXIT_FAILED


COMMANDS: Dict[str, Callable] = {
    "check-gate": cmd_check_gate,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "compare-oracle": cmd_compare_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="broadwell",
                                     description="Начально-краевая задача для четырёхскоростной модели Бродвелла")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', '-c', required=True, help='Путь к файлу запуска')
    common.add_argument('--quiet', '-q', action='store_true', help='Только предупреждения и ошибки в консоли')
    common.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        default=None, help='Уровень логирования')

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("check-gate", parents=[common], help="Вычислить p, q и проверить pq ≤ 1/4")
    for name, text in (("solve", "Решить задачу и записать результаты"),
                       ("verify", "Запустить набор проверок"),
                       ("compare-oracle", "Сравнить с конечно-разностным оракулом")):
        sub = commands.add_parser(name, parents=[common], help=text)
        sub.add_argument('--override-gate', action='store_true', help='Разрешить запуск при pq > 1/4')
        if name == "solve":
            sub.add_argument('--slices', default=None, help='Моменты времени через запятую: t0,t1,...')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_USAGE

    settings = get_settings()
    try:
        run = load_run_config(args.config)
        data = build_problem(run)
    except ConfigError as e:
        print(f"Ошибка конфигурации {args.config}: {e}", file=sys.stderr)
        return EXIT_USAGE

    log_file = None if args.command == "check-gate" else settings.log_file_path(run.output_dir(settings))
    setup_logging(settings, log_file, quiet=args.quiet, level=args.log_level)

    try:
        return COMMANDS[args.command](args, run, data, settings)
    except ConfigError as e:
        print(f"Ошибка: {e}", file=sys.stderr)
        return EXIT_USAGE
    except GateViolationError as e:
        logger.error(f"{e}; используйте --override-gate для исследовательских запусков")
        return EXIT_FAILED
    except DivergenceError as e:
        logger.error(f"Итерации расходятся: {e} (δ_last = {e.trace.delta_last:.3e})")
        return EXIT_INTERNAL
    except (ReportError, OSError) as e:
        logger.error(f"Ошибка ввода-вывода: {e}")
        return EXIT_INTERNAL
    except Exception as e:
        logger.exception(f"Внутренняя ошибка: {e}")
        return EXIT_INTERNAL
