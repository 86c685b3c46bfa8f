"""
Testes para a suíte de identidades
"""

import json

import pytest

from app.types import Variant
from app.verification import IdentityCheck, IdentitySuite, VerificationReport, run_verification


@pytest.fixture(scope="module")
def default_report():
    return run_verification()


class TestIdentityCheck:
    """Testes para IdentityCheck e VerificationReport"""

    def test_to_dict(self):
        """Serialização de uma identidade"""
        check = IdentityCheck("sum_fg[x]", True, 1e-15, 1e-12, {"worst_t_o": 0.9})
        data = check.to_dict()
        assert data["name"] == "sum_fg[x]"
        assert data["passed"] is True
        assert data["informational"] is False
        assert json.loads(check.to_json())["details"]["worst_t_o"] == 0.9

    def test_informational_does_not_fail(self):
        """Identidades informativas não afetam o resultado"""
        report = VerificationReport([
            IdentityCheck("a", True, 0.0, 1.0),
            IdentityCheck("b", False, 2.0, 1.0, informational=True),
        ])
        assert report.passed
        assert report.failures == []

    def test_failure_listed(self):
        """Falha não informativa reprova o relatório"""
        report = VerificationReport([
            IdentityCheck("a", True, 0.0, 1.0),
            IdentityCheck("b", False, 2.0, 1.0, {"worst_t_o": 0.5}),
        ])
        assert not report.passed
        assert [c.name for c in report.failures] == ["b"]
        assert "❌ b" in report.to_text()


class TestDefaultSuite:
    """Testes para a execução padrão da suíte"""

    def test_all_pass(self, default_report):
        """Execução padrão passa em todas as identidades"""
        failures = [c.to_dict() for c in default_report.failures]
        assert default_report.passed, failures

    def test_identity_count(self, default_report):
        """Suíte lista dezenas de identidades"""
        assert len(default_report.checks) >= 40

    def test_expected_names(self, default_report):
        """Identidades centrais estão presentes"""
        names = {check.name for check in default_report.checks}
        for expected in ("compat_root[uniform-last N=3 m=2]",
                         "split_brackets[alt-bn N=3 m=2]",
                         "sum_fg[uniform-last N=4 m=3]",
                         "min_s_b_input[uniform-last N=4 m=2]",
                         "ideal_qnd_limit[N=3]",
                         "monte_carlo_vs_analytic[N=3 m=2]",
                         "general_compatibility_grid[N=2..8]"):
            assert expected in names

    def test_printed_discrepancies_are_informational(self, default_report):
        """Divergências impressas aparecem como informativas"""
        informational = [c for c in default_report.checks if c.informational]
        assert informational
        assert all(c.name.startswith("printed_") for c in informational)

    def test_json_report(self, default_report):
        """Relatório JSON com contagens"""
        data = json.loads(default_report.to_json())
        assert data["passed"] is True
        assert data["total"] == len(default_report.checks)
        assert data["failed"] == 0


class TestPerturbedSuite:
    """Testes com t_d deslocado"""

    def test_perturbed_td_fails(self):
        """--perturb-td 0.01 reprova a compatibilidade"""
        report = IdentitySuite(perturb_td=0.01, mc_samples=200).run()
        assert not report.passed
        failed = {check.name for check in report.failures}
        assert "split_brackets[uniform-last N=3 m=2]" in failed
        assert "compat_root[uniform-last N=3 m=2]" in failed


class TestCustomCase:
    """Testes para casos extras"""

    def test_n8_m5(self):
        """N=8, m=5: compatibilidade e restrição continuam válidas"""
        suite = IdentitySuite(custom=(8, 5), mc_samples=200)
        report = suite.run()
        custom = [c for c in report.checks if "N=8 m=5" in c.name]
        assert {c.name for c in custom} == {
            "split_brackets[uniform-last N=8 m=5]",
            "compat_root[uniform-last N=8 m=5]",
            "sum_fg[uniform-last N=8 m=5]",
        }
        assert all(c.passed for c in custom)

    def test_alt_bn_custom_variant(self):
        """Caso extra alt-bn usa a raiz numérica"""
        report = IdentitySuite(custom=(3, 2), custom_variant=Variant.ALT_BN, mc_samples=200).run()
        custom = [c for c in report.checks if c.name.endswith("[alt-bn N=3 m=2]")
                  and c.name.startswith("compat_root")]
        assert custom and all(c.passed for c in custom)
