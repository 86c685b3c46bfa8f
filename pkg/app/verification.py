"""
Suíte de identidades do esquema QND

Cada identidade compara o pipeline numérico com uma expressão fechada e
registra o desvio máximo numa grade de t_o.
"""

import json
import logging
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .entanglement import min_s_b, min_s_b_closed, uv_input, uv_output
from .gaussian import apply_symplectic, is_physical
from .quadops import LinearForm, bracket, lf_basis, lf_combine, symplectic_form
from .scheme import (
    EPS, SchemeConfig, closed_form_gains, closed_form_td, closed_readout_forms,
    coefficient_table, compatibility_residual, expected_output_forms, find_compatibility_root,
    form_tolerance, ideal_qnd_map, passive_matrix, prepare_input, readoff_gains,
    readout_forms, build_register, run_analytic, run_heisenberg, run_monte_carlo,
    solve_compatibility, splitter_schedule
)
from .types import GainOverrides, InputFamily, ModeLabel, QuadratureAxis, Side, Variant

logger = logging.getLogger(__name__)

T_GRID = (0.35, 0.5, 0.65, 0.8, 0.9, 0.97)
GENERAL_GRID = (0.1, 0.3, 0.5, 0.7, 0.9, 0.99)
WORKED_SETUPS = (
    (Variant.UNIFORM_LAST, 3, 2),
    (Variant.UNIFORM_LAST, 4, 2),
    (Variant.UNIFORM_LAST, 4, 3),
    (Variant.ALT_BN, 3, 2),
)
BRACKET_ATOL = 1e-12
MIN_S_B_RTOL = 1e-10
IDEAL_LIMIT_RTOL = 1e-3

Deviation = Tuple[float, Dict[str, Any]]


class IdentityCheck:
    """Resultado de uma identidade"""

    def __init__(self, name: str, passed: bool, max_deviation: float, tolerance: float,
                 details: Optional[Dict[str, Any]] = None, informational: bool = False):
        self.name = name
        self.passed = passed
        self.max_deviation = max_deviation
        self.tolerance = tolerance
        self.details = details or {}
        self.informational = informational

    def to_dict(self) -> Dict[str, Any]:
        """Converte resultado para dicionário"""
        return {
            "name": self.name,
            "passed": self.passed,
            "max_deviation": self.max_deviation,
            "tolerance": self.tolerance,
            "informational": self.informational,
            "details": self.details,
        }

    def to_json(self) -> str:
        """Converte resultado para JSON string"""
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)


class VerificationReport:
    """Conjunto de identidades avaliadas"""

    def __init__(self, checks: List[IdentityCheck]):
        self.checks = checks

    @property
    def passed(self) -> bool:
        """E lógico das identidades não informativas"""
        return all(check.passed for check in self.checks if not check.informational)

    @property
    def failures(self) -> List[IdentityCheck]:
        return [c for c in self.checks if not c.passed and not c.informational]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "total": len(self.checks),
            "failed": len(self.failures),
            "checks": [check.to_dict() for check in self.checks],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)

    def to_text(self) -> str:
        """Relatório legível, uma identidade por linha"""
        lines = ["🔬 Identidades do esquema QND", "=" * 80]
        for check in self.checks:
            if check.informational:
                mark = "ℹ️ "
            else:
                mark = "✅" if check.passed else "❌"
            lines.append(
                f"{mark} {check.name:<48} desvio={check.max_deviation:.3e} "
                f"tol={check.tolerance:.1e}"
            )
            if not check.passed and not check.informational and check.details:
                lines.append(f"     {json.dumps(check.details, ensure_ascii=False, default=str)}")
        lines.append("=" * 80)
        informational = sum(1 for c in self.checks if c.informational)
        lines.append(
            f"Total: {len(self.checks)} | Falhas: {len(self.failures)} | "
            f"Informativas: {informational}"
        )
        return "\n".join(lines)


def _form(n: int, terms: Dict[str, float]) -> LinearForm:
    """Forma a partir de rótulos como "q1", "pA", "qB" """
    parts = []
    for key, value in terms.items():
        axis = QuadratureAxis(key[0])
        tag = key[1:]
        if tag == "A":
            mode = ModeLabel.ancilla_a()
        elif tag == "B":
            mode = ModeLabel.ancilla_b()
        else:
            mode = ModeLabel.target(int(tag))
        parts.append((value, lf_basis(mode, axis, n)))
    return lf_combine(parts)


def _setup_name(variant: Variant, n: int, m: int) -> str:
    return f"{variant.value} N={n} m={m}"


def _target_bracket(config: SchemeConfig, t_d: float) -> Tuple[float, float]:
    pa, qb = readout_forms(build_register(config, t_d))
    return bracket(qb.target_part(), pa.target_part()), bracket(qb.ancilla_part(), pa.ancilla_part())


def _relative(value: float, reference: float) -> float:
    return abs(value - reference) / max(1.0, abs(reference))


def _tripartite_outputs(t: float) -> List[Tuple[LinearForm, LinearForm]]:
    r = np.sqrt(1 - t ** 2)
    T = t ** 2
    R = np.sqrt(1 - t ** 4)
    delta = R ** 2 - T ** 2
    return [
        (_form(3, {"q1": 1.0, "qA": r / t}),
         _form(3, {"p1": 1.0, "p3": -2 * r * R * t, "pB": -(r * t / T) * delta})),
        (_form(3, {"q2": 1.0, "qA": r / t ** 2}),
         _form(3, {"p2": 1.0, "p3": -2 * r * R, "pB": -(r / T) * delta})),
        (_form(3, {"q3": 1.0, "q1": 2 * r * R * t, "q2": 2 * r * R,
                   "qA": R * (1 - 2 * t ** 4) / t ** 2}),
         _form(3, {"p3": 1.0, "pB": R / T})),
    ]


def _alt_bn_terms(t: float) -> Tuple[float, float, float]:
    r = np.sqrt(1 - t ** 2)
    T = closed_form_td(3, 2, t, Variant.ALT_BN)
    assert T is not None
    return r, T, np.sqrt(1 - T ** 2)


def _alt_bn_outputs(t: float) -> List[Tuple[LinearForm, LinearForm]]:
    r, T, R = _alt_bn_terms(t)
    k = (r / T) * (r * T + t * R)
    w = (r / T) * (r * R - t * T)
    return [
        (_form(3, {"q1": 1.0, "qA": r / t}),
         _form(3, {"p1": 1.0, "p3": -t * k, "pB": -t * w})),
        (_form(3, {"q2": 1.0, "qA": r / t ** 2}),
         _form(3, {"p2": 1.0, "p3": -k, "pB": -w})),
        (_form(3, {"q3": 1.0, "q1": k * t, "q2": k,
                   "qA": r * (1 - t ** 4) / t ** 2 - t ** 3 * R / T}),
         _form(3, {"p3": 1.0, "pB": r / t})),
    ]


def _alt_bn_readouts(t: float) -> Tuple[LinearForm, LinearForm]:
    r, T, R = _alt_bn_terms(t)
    pa = _form(3, {"p1": -r * T * t, "p2": -r * T, "p3": t * R, "pA": t ** 2 * T, "pB": r * R})
    qb = _form(3, {"q1": -r * t ** 3, "q2": -r * t ** 2, "q3": -r * t ** 2,
                   "qA": -(1 - t ** 4), "qB": t ** 3})
    return pa, qb


def _worked_min_s_b(variant: Variant, n: int, m: int, t: float) -> Optional[float]:
    if variant is Variant.ALT_BN:
        return 2 * (1 - t ** 2) * np.sqrt(t ** 2 + (1 + t ** 2) * (1 - t ** 4)) / t
    if (n, m) in ((3, 2), (4, 3)):
        return 2 * (1 - t ** 2) / t ** 2
    if (n, m) == (4, 2):
        return 2 * (1 - t ** 2) * np.sqrt(2 - t ** 2) / t ** 3
    return None


class IdentitySuite:
    """Executa as identidades para os arranjos de referência e casos extras"""

    def __init__(self, perturb_td: float = 0.0, custom: Optional[Tuple[int, int]] = None,
                 custom_variant: Variant = Variant.UNIFORM_LAST,
                 mc_samples: int = 4000, mc_seed: int = 20240601, mc_chunk: int = 20000):
        self.perturb_td = perturb_td
        self.custom = custom
        self.custom_variant = custom_variant
        self.mc_samples = mc_samples
        self.mc_seed = mc_seed
        self.mc_chunk = mc_chunk
        self.logger = logging.getLogger(__name__)
        self.checks: List[IdentityCheck] = []

    def _config(self, variant: Variant, n: int, m: int, t: float, **kwargs: Any) -> SchemeConfig:
        return SchemeConfig(n, m, t, variant, t_d_offset=self.perturb_td, **kwargs)

    def _check(self, name: str, evaluate: Callable[[], Deviation], tolerance: float,
               informational: bool = False) -> None:
        try:
            deviation, details = evaluate()
            passed = bool(np.isfinite(deviation) and deviation <= tolerance)
        except Exception as e:
            deviation, details, passed = float("inf"), {"error": str(e)}, False
        check = IdentityCheck(name, passed, float(deviation), tolerance, details, informational)
        if not passed and not informational:
            self.logger.error(f"Identidade falhou: {name} (desvio {deviation:.3e}) {details}")
        self.checks.append(check)

    def _over_grid(self, grid: Sequence[float],
                   evaluate: Callable[[float], float]) -> Deviation:
        worst, worst_t = 0.0, None
        for t in grid:
            value = evaluate(t)
            if np.isnan(value):
                return float("inf"), {"worst_t_o": t, "error": "desvio indefinido"}
            if value > worst or worst_t is None:
                worst, worst_t = value, t
        return worst, {"worst_t_o": worst_t}

    def run(self) -> VerificationReport:
        """Executa todas as identidades"""
        self.checks = []
        for variant, n, m in WORKED_SETUPS:
            self._setup_checks(variant, n, m)
        self._printed_checks()
        self._ideal_limit_checks()
        self._monte_carlo_check()
        self._general_grid_check()
        if self.custom is not None:
            self._custom_checks(*self.custom)
        report = VerificationReport(self.checks)
        self.logger.info(
            f"Verificação: {len(report.checks)} identidades, {len(report.failures)} falhas"
        )
        return report

    # Identidades por arranjo

    def _setup_checks(self, variant: Variant, n: int, m: int) -> None:
        label = _setup_name(variant, n, m)
        uniform = variant is Variant.UNIFORM_LAST

        def compat_root(t: float) -> float:
            root = find_compatibility_root(n, m, t, variant)
            closed = closed_form_td(n, m, t, variant)
            if root is None or closed is None:
                return float("inf")
            tolerance = max(1e-10, 64.0 * EPS / closed)
            return abs(root + self.perturb_td - closed) / tolerance

        self._check(f"compat_root[{label}]", lambda: self._over_grid(T_GRID, compat_root), 1.0)

        def split_brackets(t: float) -> float:
            config = self._config(variant, n, m, t)
            t_d = solve_compatibility(n, m, t, variant) + self.perturb_td
            target, ancilla = _target_bracket(config, t_d)
            return max(abs(target), abs(ancilla))

        self._check(f"split_brackets[{label}]",
                    lambda: self._over_grid(T_GRID, split_brackets), BRACKET_ATOL)

        def unitarity(t: float) -> float:
            table = coefficient_table(self._config(variant, n, m, t))
            return abs(table.t_d ** 2 + table.r_d ** 2 - 1.0)

        self._check(f"unitarity[{label}]", lambda: self._over_grid(T_GRID, unitarity), 1e-12)

        def sum_fg(t: float) -> float:
            table = coefficient_table(self._config(variant, n, m, t))
            products = table.f * table.g
            return abs(float(products.sum())) / max(1.0, float(np.abs(products).sum()))

        self._check(f"sum_fg[{label}]", lambda: self._over_grid(T_GRID, sum_fg), 1e-12)

        def output_canonical(t: float) -> float:
            run = run_heisenberg(self._config(variant, n, m, t))
            rows = run.target_rows()
            omega = symplectic_form(n + 2)
            deviation = np.abs(rows @ omega @ rows.T - symplectic_form(n))
            return float(deviation.max()) / run.table.gain_scale ** 2

        self._check(f"output_canonical[{label}]",
                    lambda: self._over_grid(T_GRID, output_canonical), 1e-12)

        def qnd_preservation(t: float) -> float:
            run = run_heisenberg(self._config(variant, n, m, t))
            forms = run.output_forms
            worst = 0.0
            for j in range(1, n):
                expected = np.eye(n)[j - 1]
                worst = max(worst, float(np.abs(forms[j - 1][0].target_vector(QuadratureAxis.Q)
                                                - expected).max()))
            probe_p = forms[n - 1][1].target_vector(QuadratureAxis.P)
            worst = max(worst, float(np.abs(probe_p - np.eye(n)[n - 1]).max()))
            return worst / run.table.gain_scale

        self._check(f"qnd_preservation[{label}]",
                    lambda: self._over_grid(T_GRID, qnd_preservation), 1e-12)

        def sum_ab(t: float) -> float:
            config = self._config(variant, n, m, t)
            table = coefficient_table(config)
            worst = 0.0
            for uv in (uv_input(config, table), uv_output(config, table)):
                products = uv.a * uv.b
                worst = max(worst, abs(float(products.sum()))
                            / max(1.0, float(np.abs(products).sum())))
            return worst

        self._check(f"sum_ab[{label}]", lambda: self._over_grid(T_GRID, sum_ab), 1e-10)

        def min_s_b_input(t: float) -> float:
            config = self._config(variant, n, m, t)
            table = coefficient_table(config)
            brute, _ = min_s_b(uv_input(config, table))
            closed = min_s_b_closed(config, Side.INPUT, table)
            worked = _worked_min_s_b(variant, n, m, t)
            worst = _relative(brute, closed)
            if worked is not None:
                worst = max(worst, _relative(brute, worked))
            return worst

        self._check(f"min_s_b_input[{label}]",
                    lambda: self._over_grid(T_GRID, min_s_b_input), MIN_S_B_RTOL)

        if not uniform:
            return

        def output_forms(t: float) -> float:
            config = self._config(variant, n, m, t)
            table = coefficient_table(config)
            manual = self._config(variant, n, m, t,
                                  gains=GainOverrides(tuple(table.f), tuple(table.g)))
            run = run_heisenberg(manual, table)
            worst = 0.0
            for (q, p), (eq, ep) in zip(run.output_forms, expected_output_forms(config, table)):
                worst = max(worst, q.max_deviation(eq), p.max_deviation(ep))
            return worst / form_tolerance(table)

        self._check(f"output_forms[{label}]", lambda: self._over_grid(T_GRID, output_forms), 1.0)

        def readout_closed(t: float) -> float:
            config = self._config(variant, n, m, t)
            table = coefficient_table(config)
            pa, qb = readout_forms(build_register(config, table.t_d))
            worst = 0.0
            for crossing in (False, True):
                cpa, cqb = closed_readout_forms(config, table, pb_from_crossing=crossing)
                worst = max(worst, pa.max_deviation(cpa), qb.max_deviation(cqb))
            return worst

        self._check(f"readout_forms[{label}]",
                    lambda: self._over_grid(T_GRID, readout_closed), 1e-12)

        def weights_and_gains(t: float) -> float:
            config = self._config(variant, n, m, t)
            table = coefficient_table(config)
            signs = np.ones(n)
            signs[-1] = -1.0
            f, g = readoff_gains(build_register(config, table.t_d))
            return max(float(np.abs(table.u_weights - signs * table.f).max()),
                       float(np.abs(table.v_weights - signs * table.g).max()),
                       float(np.abs(f - table.f).max()),
                       float(np.abs(g - table.g).max())) / table.gain_scale

        self._check(f"uv_weights_and_gains[{label}]",
                    lambda: self._over_grid(T_GRID, weights_and_gains), 1e-12)

        def min_s_b_output(t: float) -> float:
            config = self._config(variant, n, m, t)
            table = coefficient_table(config)
            brute, _ = min_s_b(uv_output(config, table))
            worst = _relative(brute, min_s_b_closed(config, Side.OUTPUT, table))
            if (n, m) == (3, 2):
                expected = abs(1 - 2 * t ** 4) * 2 * (1 - t ** 2) / t ** 2
                worst = max(worst, _relative(brute, expected))
            return worst

        self._check(f"min_s_b_output[{label}]",
                    lambda: self._over_grid(T_GRID, min_s_b_output), MIN_S_B_RTOL)

    # Formas impressas dos exemplos trabalhados

    def _printed_checks(self) -> None:
        def compare(variant: Variant,
                    expected: Callable[[float], List[Tuple[LinearForm, LinearForm]]]
                    ) -> Callable[[float], float]:
            def evaluate(t: float) -> float:
                run = run_heisenberg(self._config(variant, 3, 2, t))
                worst = 0.0
                for (q, p), (eq, ep) in zip(run.output_forms, expected(t)):
                    worst = max(worst, q.max_deviation(eq), p.max_deviation(ep))
                return worst / form_tolerance(run.table)
            return evaluate

        self._check("tripartite_outputs[uniform-last]",
                    lambda: self._over_grid(T_GRID, compare(Variant.UNIFORM_LAST,
                                                            _tripartite_outputs)), 1.0)
        self._check("tripartite_outputs[alt-bn]",
                    lambda: self._over_grid(T_GRID, compare(Variant.ALT_BN, _alt_bn_outputs)),
                    1.0)

        def alt_bn_readouts(t: float) -> float:
            config = self._config(Variant.ALT_BN, 3, 2, t)
            pa, qb = readout_forms(build_register(config))
            epa, eqb = _alt_bn_readouts(t)
            return max(pa.max_deviation(epa), qb.max_deviation(eqb))

        self._check("tripartite_readouts[alt-bn]",
                    lambda: self._over_grid(T_GRID, alt_bn_readouts), 1e-12)

        t = 0.9
        register = build_register(SchemeConfig(4, 2, t))
        T = t ** 2 / np.sqrt(2 - t ** 2)
        R = np.sqrt(1 - T ** 2)
        pa, qb = readout_forms(register)
        q4 = qb.coefficient(ModeLabel.target(4), QuadratureAxis.Q)
        p4 = pa.coefficient(ModeLabel.target(4), QuadratureAxis.P)
        self._check("printed_readout_qB_q4[N=4 m=2]",
                    lambda: (abs(q4 - (-R * t)), {"computed": q4, "printed": -R * t}),
                    1e-12, informational=True)
        self._check("printed_readout_pA_p4[N=4 m=2]",
                    lambda: (abs(p4 - R * (2 - t ** 2)),
                             {"computed": p4, "printed": R * (2 - t ** 2)}),
                    1e-12, informational=True)

        for m in (2, 3):
            def q4_ancilla(m: int = m) -> Deviation:
                run = run_heisenberg(SchemeConfig(4, m, t))
                computed = run.output_forms[3][0].coefficient(ModeLabel.ancilla_a(),
                                                              QuadratureAxis.Q)
                printed = run.table.f[3] + 2 * run.table.r_d * t ** (2 * m - 3)
                return abs(computed - printed), {"computed": computed, "printed": printed}

            self._check(f"printed_output_q4_qA[N=4 m={m}]", q4_ancilla, 1e-12,
                        informational=True)

        def tripartite_u() -> Deviation:
            config = SchemeConfig(3, 2, t)
            uv = uv_output(config)
            r = np.sqrt(1 - t ** 2)
            printed = -r * np.array([1 / t, 1 / t ** 2, (1 - 2 * t ** 4) / t ** 2])
            return float(np.abs(uv.a - printed).max()), {
                "computed": uv.a.tolist(), "printed": printed.tolist()
            }

        self._check("printed_output_u[N=3 m=2]", tripartite_u, 1e-12, informational=True)

    # Limite ideal, Monte Carlo e grade geral

    def _ideal_limit_checks(self) -> None:
        for n in (3, 4):
            def evaluate(n: int = n) -> Deviation:
                worst = 0.0
                for family in (InputFamily.VACUUM, InputFamily.GHZ):
                    state = prepare_input(family, n, 0.5)
                    config = self._config(Variant.UNIFORM_LAST, n, n - 1, 0.9, input_state=state)
                    run = run_analytic(config)
                    assert run.output_state is not None
                    G = np.asarray(run.table.G).reshape(n - 1, 1)
                    ideal = apply_symplectic(state, ideal_qnd_map(G)).cov
                    deviation = np.abs(run.output_state.cov - ideal) / np.maximum(np.abs(ideal), 1.0)
                    worst = max(worst, float(deviation.max()))
                    if not is_physical(run.output_state):
                        return float("inf"), {"error": "estado de saída não físico"}
                return worst, {"t_o": 0.9, "ancilla_db": 60.0}

            self._check(f"ideal_qnd_limit[N={n}]", evaluate, IDEAL_LIMIT_RTOL)

    def _monte_carlo_check(self) -> None:
        def evaluate() -> Deviation:
            state = prepare_input(InputFamily.GHZ, 3, 1.0)
            config = self._config(Variant.UNIFORM_LAST, 3, 2, 0.9, input_state=state)
            result = run_monte_carlo(config, self.mc_samples, self.mc_seed, chunk=self.mc_chunk)
            z = result.max_z_score()
            return z, {"samples": result.n_samples, "seed": result.seed,
                       "within": result.within(5.0)}

        self._check("monte_carlo_vs_analytic[N=3 m=2]", evaluate, 5.0)

    def _general_grid_check(self) -> None:
        def evaluate() -> Deviation:
            worst, where = 0.0, None
            for n in range(2, 9):
                for m in range(1, n):
                    for t in GENERAL_GRID:
                        config = self._config(Variant.UNIFORM_LAST, n, m, t)
                        table = coefficient_table(config)
                        target, _ = _target_bracket(config, table.t_d)
                        products = table.f * table.g
                        fg = abs(float(products.sum())) / max(1.0, float(np.abs(products).sum()))
                        value = max(abs(target) / BRACKET_ATOL, fg / 1e-12)
                        if value > worst:
                            worst, where = value, {"n": n, "m": m, "t_o": t}
            return worst, {"worst_case": where}

        self._check("general_compatibility_grid[N=2..8]", evaluate, 1.0)

    def _custom_checks(self, n: int, m: int) -> None:
        variant = self.custom_variant
        label = _setup_name(variant, n, m)

        def residual_at_root(t: float) -> float:
            t_d = solve_compatibility(n, m, t, variant) + self.perturb_td
            matrix = passive_matrix(splitter_schedule(n, m, t, t_d, variant), n)
            return abs(2.0 * float(matrix[n + 1, :n] @ matrix[n, :n]))

        self._check(f"split_brackets[{label}]",
                    lambda: self._over_grid(GENERAL_GRID, residual_at_root), BRACKET_ATOL)

        def root_vs_closed(t: float) -> float:
            closed = closed_form_td(n, m, t, variant)
            root = find_compatibility_root(n, m, t, variant)
            if root is None:
                return float("inf")
            if closed is None:
                return abs(compatibility_residual(n, m, t, variant, root + self.perturb_td))
            return abs(root + self.perturb_td - closed) / max(1e-10, 64.0 * EPS / closed)

        self._check(f"compat_root[{label}]",
                    lambda: self._over_grid(GENERAL_GRID, root_vs_closed), 1.0)

        if variant is Variant.UNIFORM_LAST:
            def sum_fg(t: float) -> float:
                t_d = solve_compatibility(n, m, t, variant) + self.perturb_td
                f, g = closed_form_gains(n, m, t, t_d)
                products = f * g
                return abs(float(products.sum())) / max(1.0, float(np.abs(products).sum()))

            self._check(f"sum_fg[{label}]", lambda: self._over_grid(GENERAL_GRID, sum_fg), 1e-12)


def run_verification(perturb_td: float = 0.0, custom: Optional[Tuple[int, int]] = None,
                     custom_variant: Variant = Variant.UNIFORM_LAST,
                     mc_chunk: int = 20000) -> VerificationReport:
    """Atalho para IdentitySuite(...).run()"""
    return IdentitySuite(perturb_td, custom, custom_variant, mc_chunk=mc_chunk).run()
