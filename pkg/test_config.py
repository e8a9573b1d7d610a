"""
Тесты конфигурации: настройки приложения и разбор файла запуска
"""

import json
import logging

import pytest

from broadwell.config import (
    ConfigError,
    ConfigManager,
    Settings,
    build_problem,
    load_run_config,
    parse_flat,
    run_config_from_text,
)
from broadwell.models import FieldKind, GuessKind

BOX_LINES = """\
problem.a1 = 0
problem.b1 = 1
problem.a2 = 0
problem.b2 = 1
problem.T = 1
problem.c = 1
problem.S = 1
"""


class TestSettings:
    """Settings и ConfigManager"""

    def test_defaults(self):
        settings = Settings()
        assert settings.log_file_name == "broadwell.log"
        assert settings.max_workers >= 1

    def test_environment_wins_over_file_values(self, monkeypatch):
        monkeypatch.setenv("BROADWELL_MAX_WORKERS", "2")
        assert Settings(max_workers=7).max_workers == 2

    def test_manager_reads_json_and_caches(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"log_level": "DEBUG", "chunk_size": 100}), encoding="utf-8")
        manager = ConfigManager(str(path))
        settings = manager.load_settings()
        assert settings.log_level == "DEBUG" and settings.chunk_size == 100
        assert manager.load_settings() is settings
        manager.reset()
        assert manager.load_settings() is not settings

    def test_broken_json_falls_back_to_defaults(self, tmp_path, caplog):
        path = tmp_path / "config.json"
        path.write_text("{not json", encoding="utf-8")
        with caplog.at_level(logging.WARNING, logger="broadwell.config"):
            settings = ConfigManager(str(path)).load_settings()
        assert settings.chunk_size == Settings().chunk_size
        assert any(r.levelno == logging.WARNING and str(path) in r.getMessage() for r in caplog.records)

    def test_validate_paths(self, tmp_path):
        manager = ConfigManager()
        assert manager.validate_paths(tmp_path / "a" / "b") == []
        assert (tmp_path / "a" / "b").is_dir()
        blocker = tmp_path / "file"
        blocker.write_text("x", encoding="utf-8")
        assert manager.validate_paths(blocker)


class TestParseFlat:
    """Строки key = value"""

    def test_comments_and_blank_lines(self):
        entries = parse_flat("# заголовок\n\nproblem.T = 2  # горизонт\nsolver.guess=zero\n")
        assert entries == {"problem.T": ("2", 3), "solver.guess": ("zero", 4)}

    def test_missing_equals(self):
        with pytest.raises(ConfigError) as info:
            parse_flat("problem.T = 1\nproblem.c 1\n")
        assert info.value.line == 2
        assert str(info.value).startswith("строка 2")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError) as info:
            parse_flat("problem.T = 1\nproblem.c = 1\nproblem.T = 2\n")
        assert info.value.line == 3
        assert "строке 1" in info.value.message

    def test_bad_key(self):
        with pytest.raises(ConfigError) as info:
            parse_flat("problem..T = 1\n")
        assert info.value.line == 1


class TestRunConfig:
    """Разбор файла запуска"""

    def test_full_file(self, tmp_path):
        text = BOX_LINES + """\
problem.init1.kind = sinusoid
problem.init1.offset = 0.001
problem.init1.amplitude = 0.0005
problem.inflow4.kind = bump
problem.inflow4.width_a = 0.2
solver.grid.n1 = 9
solver.max_iters = 20
solver.abs_tol = 1e-10
solver.sigma.enabled = true
solver.sigma.value = 3
solver.guess = zero
oracle.nx = 17
output.dir = out
output.slices = 0.5, 1.0
verify.oracle_tol = 0.1
"""
        run = run_config_from_text(text, base_dir=tmp_path)
        assert run.box.T == 1.0 and run.params.S == 1.0
        assert run.fields["init1"].kind == FieldKind.SINUSOID
        assert run.fields["inflow4"].width_a == pytest.approx(0.2)
        assert run.solver.grid.n1 == 9 and run.solver.grid.n2 == 16
        assert run.solver.use_sigma and run.solver.sigma == pytest.approx(3.0)
        assert run.solver.guess == GuessKind.ZERO
        assert run.oracle.nx == 17
        assert run.slices() == [0.5, 1.0]
        assert run.verify.oracle_tol == pytest.approx(0.1)
        assert run.verify.mass_tol == pytest.approx(1e-3)
        assert run.lines["solver.guess"] == 18

    def test_default_slice_is_horizon(self):
        assert run_config_from_text(BOX_LINES).slices() == [1.0]

    def test_unknown_section(self):
        with pytest.raises(ConfigError) as info:
            run_config_from_text(BOX_LINES + "server.port = 8000\n")
        assert info.value.line == 8

    def test_unknown_problem_key(self):
        with pytest.raises(ConfigError) as info:
            run_config_from_text(BOX_LINES + "problem.init5.kind = constant\n")
        assert info.value.line == 8

    def test_validation_error_points_to_line(self):
        with pytest.raises(ConfigError) as info:
            run_config_from_text(BOX_LINES.replace("problem.T = 1", "problem.T = -1"))
        assert info.value.line == 5
        with pytest.raises(ConfigError) as info:
            run_config_from_text(BOX_LINES + "\nsolver.grid.n3 = 2\n")
        assert info.value.line == 9
        assert "solver.grid.n3" in info.value.message

    def test_unknown_solver_key(self):
        with pytest.raises(ConfigError) as info:
            run_config_from_text(BOX_LINES + "solver.tolerance = 1e-9\n")
        assert info.value.line == 8

    def test_renamed_key_reported_by_file_name(self):
        with pytest.raises(ConfigError) as info:
            run_config_from_text(BOX_LINES + "solver.sigma.value = -1\n")
        assert "solver.sigma.value" in info.value.message
        assert info.value.line == 8

    def test_slices_outside_horizon(self):
        with pytest.raises(ConfigError) as info:
            run_config_from_text(BOX_LINES + "output.slices = 0.5, 2\n")
        assert info.value.line == 8

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config(tmp_path / "none.cfg")


class TestBuildProblem:
    """Сборка ProblemData из описания полей"""

    def test_missing_fields_are_zero(self):
        data = build_problem(run_config_from_text(BOX_LINES + "problem.init2.value = 0.5\n"))
        assert data.init[0].evaluate(0.5, 0.5) == 0.0
        assert data.init[1].evaluate(0.5, 0.5) == pytest.approx(0.5)
        assert data.inflow[3].name == "inflow4"

    def test_csv_relative_to_config(self, tmp_path):
        (tmp_path / "init1.csv").write_text("alpha,beta,value\n0,0,1\n0,1,1\n1,0,1\n1,1,1\n", encoding="utf-8")
        path = tmp_path / "run.cfg"
        path.write_text(BOX_LINES + "problem.init1.kind = csv\nproblem.init1.path = init1.csv\n", encoding="utf-8")
        data = build_problem(load_run_config(path))
        assert data.init[0].evaluate(0.3, 0.3) == pytest.approx(1.0)

    def test_missing_csv_reports_line(self, tmp_path):
        text = BOX_LINES + "problem.init3.kind = csv\nproblem.init3.path = none.csv\n"
        with pytest.raises(ConfigError) as info:
            build_problem(run_config_from_text(text, base_dir=tmp_path))
        assert info.value.line == 8

    def test_csv_without_path(self):
        with pytest.raises(ConfigError) as info:
            run_config_from_text(BOX_LINES + "problem.inflow1.kind = csv\n")
        assert info.value.line == 8
