"""
Testes para a interface de linha de comando
"""

import json
import os
import shutil
import tempfile

import pytest
from click.testing import CliRunner

from app import __version__
from app.cli import cli
from app.types import SCAN_COLUMNS


def _first_json(text):
    """Primeiro objeto JSON da saída (logs podem vir misturados)"""
    start = text.index("{")
    value, _ = json.JSONDecoder().raw_decode(text[start:])
    return value


class TestCli:
    """Testes para os comandos verify, scan e run"""

    def setup_method(self):
        """Configuração para cada teste"""
        self.runner = CliRunner()
        self.temp_dir = tempfile.mkdtemp()

    def teardown_method(self):
        """Limpeza após cada teste"""
        shutil.rmtree(self.temp_dir)

    def _config(self, data, name="config.json"):
        path = os.path.join(self.temp_dir, name)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f)
        return path

    def test_version(self):
        """--version mostra a versão do pacote"""
        result = self.runner.invoke(cli, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.output

    def test_verify_default(self):
        """verify sem opções termina com código 0"""
        result = self.runner.invoke(cli, ["verify"])
        assert result.exit_code == 0, result.output
        assert "Falhas: 0" in result.output

    def test_verify_perturbed(self):
        """--perturb-td 0.01 termina com código não nulo"""
        result = self.runner.invoke(cli, ["verify", "--perturb-td", "0.01"])
        assert result.exit_code != 0
        assert "split_brackets" in result.output

    def test_verify_custom_case_json(self):
        """--n 8 --m 5 --json: relatório JSON aprovado"""
        result = self.runner.invoke(cli, ["verify", "--n", "8", "--m", "5", "--json"])
        assert result.exit_code == 0, result.output
        report = _first_json(result.output)
        assert report["passed"] is True
        names = {check["name"] for check in report["checks"]}
        assert "sum_fg[uniform-last N=8 m=5]" in names

    def test_verify_requires_both_n_and_m(self):
        """--n sem --m é erro de uso"""
        result = self.runner.invoke(cli, ["verify", "--n", "5"])
        assert result.exit_code == 2

    def test_run(self):
        """run emite o relatório JSON e grava --output"""
        config = self._config({"n": 3, "m": 2, "t_o": 0.9, "s": 0.0})
        output = os.path.join(self.temp_dir, "report.json")
        result = self.runner.invoke(cli, ["run", config, "--output", output])
        assert result.exit_code == 0, result.output
        report = _first_json(result.output)
        assert report["coefficients"]["t_d"] == pytest.approx(0.81)
        with open(output, encoding="utf-8") as f:
            assert json.load(f)["coefficients"]["t_d"] == pytest.approx(0.81)

    def test_run_range_rejected(self):
        """run com intervalo termina com erro"""
        config = self._config({"n": 3, "m": 2, "t_o": {"min": 0.5, "max": 0.9, "steps": 3}, "s": 0})
        result = self.runner.invoke(cli, ["run", config])
        assert result.exit_code == 1
        assert "❌ Erro na execução" in result.output

    def test_scan(self):
        """scan grava o CSV com o cabeçalho exato"""
        config = self._config({"n": 3, "m": 2, "state": "ghz",
                               "t_o": {"min": 0.8, "max": 0.95, "steps": 3},
                               "s": {"min": 0.0, "max": 1.0, "steps": 2}})
        output = os.path.join(self.temp_dir, "scan.csv")
        result = self.runner.invoke(cli, ["--threads", "2", "scan", config, "-o", output,
                                          "--no-progress"])
        assert result.exit_code == 0, result.output
        with open(output, encoding="utf-8") as f:
            lines = f.read().split("\n")
        assert lines[0] == ",".join(SCAN_COLUMNS)
        assert len([line for line in lines[1:] if line]) == 6

    def test_scan_invalid_config(self):
        """Chave desconhecida termina com erro"""
        config = self._config({"n": 3, "m": 2, "grid": 4})
        result = self.runner.invoke(cli, ["scan", config, "-o", os.path.join(self.temp_dir, "x.csv")])
        assert result.exit_code == 1
        assert "❌ Erro na varredura" in result.output

    def test_scan_unwritable_output(self):
        """Saída em diretório inexistente termina com erro"""
        config = self._config({"n": 3, "m": 2, "t_o": 0.9, "s": 0.5})
        output = os.path.join(self.temp_dir, "faltando", "scan.csv")
        result = self.runner.invoke(cli, ["scan", config, "-o", output, "--no-progress"])
        assert result.exit_code == 1

    def _reject_constant(self, token):
        raise ValueError(f"Constante não JSON: {token}")

    def test_run_monte_carlo_strict_json(self):
        """Relatório com Monte Carlo é JSON estrito (sem Infinity/NaN)"""
        config = self._config({"n": 3, "m": 2, "state": "ghz", "t_o": 0.9, "s": 1.0,
                               "mc": {"samples": 2, "seed": 1}})
        result = self.runner.invoke(cli, ["run", config])
        assert result.exit_code == 0, result.output
        text = result.output[result.output.index("{"):]
        report, _ = json.JSONDecoder(parse_constant=self._reject_constant).raw_decode(text)
        assert report["monte_carlo"]["samples"] == 2

    def test_run_single_sample_rejected(self):
        """mc.samples = 1 não tem erro padrão e é rejeitado"""
        config = self._config({"n": 3, "m": 2, "state": "ghz", "t_o": 0.9, "s": 1.0,
                               "mc": {"samples": 1, "seed": 1}})
        result = self.runner.invoke(cli, ["run", config])
        assert result.exit_code == 1
        assert "mc.samples" in result.output
