"""
Testes para o esquema QND: cascata, compatibilidade, tabela e motores
"""

import json

import numpy as np
import pytest

from app.exceptions import CompatibilityError, ConfigError
from app.gaussian import GaussianState, apply_symplectic, is_physical, quad_variance, vacuum
from app.quadops import bracket, is_symplectic, lf_basis
from app.scheme import (
    A, B, P, Q, SchemeConfig, build_register, closed_form_gains, closed_form_td,
    closed_readout_forms, coefficient_table, compatibility_residual, expected_output_forms,
    find_compatibility_root, form_tolerance, ideal_qnd_map, passive_matrix, prepare_input,
    readoff_gains, readout_decomposition, readout_forms, resolve_td, run_analytic,
    run_heisenberg, run_monte_carlo, sample_trajectory, solve_compatibility,
    splitter_schedule, squeezing_from_db
)
from app.types import GainOverrides, InputFamily, ModeLabel, Variant

UL = Variant.UNIFORM_LAST
ALT = Variant.ALT_BN
T_VALUES = np.linspace(0.05, 0.999, 20)


def _alt_bn_td(t):
    t2 = t * t
    return t / np.sqrt(t2 + (1 + t2) * (1 - t2 * t2))


class TestSchemeConfig:
    """Testes para a validação de SchemeConfig"""

    @pytest.mark.parametrize("n,m,t_o", [(1, 1, 0.5), (3, 0, 0.5), (3, 3, 0.5),
                                         (3, 2, 0.0), (3, 2, 1.0)])
    def test_rejects_bad_geometry(self, n, m, t_o):
        """N >= 2, 1 <= m <= N−1 e t_o ∈ (0, 1)"""
        with pytest.raises(ConfigError):
            SchemeConfig(n, m, t_o)

    def test_alt_bn_only_tripartite(self):
        """alt-bn só vale para N=3, m=2"""
        SchemeConfig(3, 2, 0.8, ALT)
        with pytest.raises(ConfigError, match="alt-bn"):
            SchemeConfig(4, 2, 0.8, ALT)

    def test_input_state_size(self):
        """Estado de entrada precisa de N modos"""
        with pytest.raises(ConfigError):
            SchemeConfig(3, 2, 0.8, input_state=vacuum(2))

    def test_manual_gains_size(self):
        """Ganhos manuais precisam de N valores"""
        with pytest.raises(ConfigError):
            SchemeConfig(3, 2, 0.8, gains=GainOverrides((0.0, 0.0), (0.0, 0.0)))

    def test_default_ancilla_squeezing(self):
        """60 dB correspondem a s = ln(1000)"""
        assert squeezing_from_db(60.0) == pytest.approx(np.log(1000.0))
        assert SchemeConfig(3, 2, 0.8).s_a == pytest.approx(np.log(1000.0))


class TestSplitterSchedule:
    """Testes para a ordem e os coeficientes dos divisores de feixe"""

    def test_order(self):
        """A sobe por 1..m, B desce por N..m+1 e m..1, A termina em m+1..N"""
        schedule = splitter_schedule(4, 2, 0.8, 0.5, UL)
        order = [(sp.target, str(sp.ancilla)) for sp in schedule]
        assert order == [(1, "A"), (2, "A"), (4, "B"), (3, "B"),
                         (2, "B"), (1, "B"), (3, "A"), (4, "A")]

    def test_per_mode_ordering(self):
        """j <= m encontra A antes de B; j > m encontra B antes de A"""
        n, m = 5, 3
        schedule = splitter_schedule(n, m, 0.8, 0.5, UL)
        for j in range(1, n + 1):
            visits = [sp.ancilla for sp in schedule if sp.target == j]
            assert visits == ([A, B] if j <= m else [B, A])

    def test_last_mode_coefficients(self):
        """Sinais de r_d no modo N para cada variante"""
        t_o, t_d = 0.8, 0.5
        r_o, r_d = np.sqrt(1 - t_o ** 2), np.sqrt(1 - t_d ** 2)
        uniform = {(sp.target, sp.ancilla): (sp.t, sp.r) for sp in splitter_schedule(3, 2, t_o, t_d, UL)}
        alt = {(sp.target, sp.ancilla): (sp.t, sp.r) for sp in splitter_schedule(3, 2, t_o, t_d, ALT)}
        assert uniform[(3, B)] == pytest.approx((t_d, r_d))
        assert uniform[(3, A)] == pytest.approx((t_d, -r_d))
        assert alt[(3, B)] == pytest.approx((t_o, r_o))
        assert alt[(3, A)] == pytest.approx((t_d, -r_d))
        assert uniform[(1, A)] == pytest.approx((t_o, r_o))

    def test_passive_matrix_orthogonal(self):
        """A rede passiva é ortogonal"""
        matrix = passive_matrix(splitter_schedule(4, 3, 0.7, 0.4, UL), 4)
        assert np.allclose(matrix @ matrix.T, np.eye(6), atol=1e-14)

    def test_transparent_limit(self):
        """Com t_o → 1 as formas dos alvos são ≈ as de entrada"""
        t_o = 1 - 1e-9
        config = SchemeConfig(3, 2, t_o)
        reg = build_register(config, t_o ** 2)
        for j in range(1, 4):
            for axis in (Q, P):
                form = reg.form(ModeLabel.target(j), axis)
                assert form.max_deviation(lf_basis(ModeLabel.target(j), axis, 3)) < 1e-3


class TestCompatibility:
    """Testes para a condição de compatibilidade das leituras"""

    @pytest.mark.parametrize("t_o", [0.3, 0.6, 0.9, 0.99])
    def test_worked_closed_forms(self, t_o):
        """t_d para as quatro configurações documentadas"""
        assert solve_compatibility(3, 2, t_o, UL) == pytest.approx(t_o ** 2, abs=1e-12)
        assert solve_compatibility(4, 2, t_o, UL) == pytest.approx(
            t_o ** 2 / np.sqrt(2 - t_o ** 2), abs=1e-12)
        assert solve_compatibility(4, 3, t_o, UL) == pytest.approx(t_o ** 3, abs=1e-12)
        assert solve_compatibility(3, 2, t_o, ALT) == pytest.approx(_alt_bn_td(t_o), abs=1e-12)

    def test_general_grid(self):
        """N=2..8, todos os m: colchete restrito aos alvos nulo em t_d fechado"""
        for n in range(2, 9):
            for m in range(1, n):
                for t_o in T_VALUES:
                    closed = closed_form_td(n, m, float(t_o), UL)
                    assert solve_compatibility(n, m, float(t_o), UL) == pytest.approx(closed, rel=1e-12)
                    pa, qb = readout_forms(build_register(SchemeConfig(n, m, float(t_o)), closed))
                    assert abs(bracket(qb.target_part(), pa.target_part())) < 1e-12
                    assert abs(bracket(qb, pa)) < 1e-12

    @pytest.mark.parametrize("n,m", [(3, 2), (4, 2), (5, 1), (6, 4)])
    def test_numeric_root_matches_closed_form(self, n, m):
        """Raiz numérica concorda com a forma fechada em 1e−10"""
        for t_o in (0.5, 0.7, 0.9, 0.97):
            root = find_compatibility_root(n, m, t_o, UL)
            assert root == pytest.approx(closed_form_td(n, m, t_o, UL), abs=1e-10)

    def test_perturbed_td_breaks_compatibility(self):
        """t_d + 0.01 deixa o resíduo não nulo"""
        t_o = 0.9
        t_d = solve_compatibility(3, 2, t_o, UL)
        assert abs(compatibility_residual(3, 2, t_o, UL, t_d)) < 1e-12
        assert abs(compatibility_residual(3, 2, t_o, UL, t_d + 0.01)) > 1e-4

    def test_alt_bn_closed_form_scope(self):
        """alt-bn só tem forma fechada para N=3, m=2"""
        assert closed_form_td(4, 2, 0.8, ALT) is None
        assert closed_form_td(3, 2, 0.8, ALT) == pytest.approx(_alt_bn_td(0.8))
        t_d = solve_compatibility(3, 2, 0.8, ALT)
        assert abs(compatibility_residual(3, 2, 0.8, ALT, t_d)) < 1e-12

    def test_offset_out_of_range(self):
        """Deslocamento que leva t_d para fora de (0, 1) é erro"""
        config = SchemeConfig(3, 2, 0.99, t_d_offset=0.5)
        with pytest.raises(ConfigError):
            resolve_td(config)

    def test_compatibility_error_is_value_error(self):
        """Erros de compatibilidade são ValueError"""
        assert issubclass(CompatibilityError, ValueError)


class TestCoefficientTable:
    """Testes para a tabela de coeficientes"""

    def test_tripartite_examples(self):
        """N=3, m=2: g_3 = r_d/t_d e f_3 = −r_d t_o^{−2}"""
        t_o = 0.85
        table = coefficient_table(SchemeConfig(3, 2, t_o))
        assert table.g[2] == pytest.approx(table.r_d / table.t_d)
        assert table.f[2] == pytest.approx(-table.r_d / t_o ** 2)

    def test_tetrapartite_examples(self):
        """N=4, m=3: f_4 = −r_d t_o^{−3} e g_4 = r_d/t_d"""
        t_o = 0.8
        table = coefficient_table(SchemeConfig(4, 3, t_o))
        assert table.f[3] == pytest.approx(-table.r_d / t_o ** 3)
        assert table.g[3] == pytest.approx(table.r_d / table.t_d)

    def test_constraint_on_grid(self):
        """Σ f_j g_j = 0 e t_d² + r_d² = 1"""
        for n in range(2, 9):
            for m in range(1, n):
                for t_o in T_VALUES[::3]:
                    table = coefficient_table(SchemeConfig(n, m, float(t_o)))
                    products = table.f * table.g
                    assert abs(products.sum()) <= 1e-12 * max(1.0, np.abs(products).sum())
                    assert table.t_d ** 2 + table.r_d ** 2 == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n,m", [(3, 2), (4, 2), (4, 3), (5, 2)])
    def test_readoff_matches_closed_gains(self, n, m):
        """Ganhos lidos das formas coincidem com as expressões fechadas"""
        config = SchemeConfig(n, m, 0.9)
        t_d = resolve_td(config)
        f, g = readoff_gains(build_register(config, t_d))
        f_closed, g_closed = closed_form_gains(n, m, 0.9, t_d)
        assert np.allclose(f, f_closed, atol=1e-12)
        assert np.allclose(g, g_closed, atol=1e-12)

    def test_uv_weights(self):
        """Pesos de û e v̂ são (f_1..f_{N−1}, −f_N) e (g_1..g_{N−1}, −g_N)"""
        table = coefficient_table(SchemeConfig(4, 2, 0.9))
        assert np.allclose(table.u_weights, np.append(table.f[:-1], -table.f[-1]), atol=1e-12)
        assert np.allclose(table.v_weights, np.append(table.g[:-1], -table.g[-1]), atol=1e-12)
        assert table.readout_scale == pytest.approx(table.t_d * 0.9 ** 3)

    def test_qnd_gains(self):
        """G_j = −2 r_d t_d g_j"""
        table = coefficient_table(SchemeConfig(3, 2, 0.7))
        assert np.allclose(table.G, -2 * table.r_d * table.t_d * table.g[:2])

    def test_alt_bn_probe_rescale(self):
        """alt-bn aplica um squeeze local t_o/t_d no modo sonda"""
        t_o = 0.8
        table = coefficient_table(SchemeConfig(3, 2, t_o, ALT))
        assert table.t_d == pytest.approx(_alt_bn_td(t_o))
        assert table.probe_rescale == pytest.approx(t_o / table.t_d)
        products = table.f * table.g
        assert abs(products.sum()) < 1e-12

    def test_to_dict(self):
        """Serialização da tabela"""
        data = coefficient_table(SchemeConfig(3, 2, 0.9)).to_dict()
        assert data["t_d"] == pytest.approx(0.81)
        assert len(data["f"]) == 3
        assert len(data["G"]) == 2


class TestRunHeisenberg:
    """Testes para o pipeline simbólico"""

    def setup_method(self):
        """Configuração para cada teste"""
        self.config = SchemeConfig(4, 2, 0.88)
        self.run = run_heisenberg(self.config)

    def test_matches_closed_output_forms(self):
        """Formas de saída coincidem com as expressões fechadas"""
        tolerance = form_tolerance(self.run.table)
        expected = expected_output_forms(self.config, self.run.table)
        for (q, p), (eq, ep) in zip(self.run.output_forms, expected):
            assert q.max_deviation(eq) <= tolerance
            assert p.max_deviation(ep) <= tolerance

    def test_qnd_preservation(self):
        """q_i em q_j^out é δ_ij (j < N); p_i em p_N^out é δ_iN"""
        n = self.config.n
        forms = self.run.output_forms
        for j in range(1, n):
            for i in range(1, n + 1):
                expected = 1.0 if i == j else 0.0
                assert forms[j - 1][0].coefficient(ModeLabel.target(i), Q) == pytest.approx(
                    expected, abs=1e-12)
        for i in range(1, n + 1):
            expected = 1.0 if i == n else 0.0
            assert forms[n - 1][1].coefficient(ModeLabel.target(i), P) == pytest.approx(
                expected, abs=1e-12)

    def test_probe_coupling_is_qnd_gain(self):
        """Coeficiente de p_N em p_j^out é −G_j"""
        probe = self.config.probe
        for j in range(1, self.config.n):
            coefficient = self.run.output_forms[j - 1][1].coefficient(probe, P)
            assert coefficient == pytest.approx(-self.run.table.G[j - 1], abs=1e-12)

    def test_output_is_canonical(self):
        """Formas finais preservam os comutadores canônicos"""
        assert self.run.register.is_canonical(atol=1e-11)
        for q, p in self.run.output_forms:
            assert bracket(q, p) == pytest.approx(2.0, abs=1e-11)

    def test_readouts_commute(self):
        """[q_B^out, p_A^out] = 0"""
        assert abs(bracket(self.run.readout_qB, self.run.readout_pA)) < 1e-12

    def test_closed_readout_forms(self):
        """Leituras fechadas, com os dois coeficientes de p_B"""
        for crossing in (False, True):
            pa, qb = closed_readout_forms(self.config, self.run.table, crossing)
            assert pa.max_deviation(self.run.readout_pA) < 1e-12
            assert qb.max_deviation(self.run.readout_qB) < 1e-12

    def test_zero_manual_gains(self):
        """Ganhos manuais nulos deixam as formas da cascata"""
        zeros = tuple([0.0] * 3)
        config = SchemeConfig(3, 2, 0.9, gains=GainOverrides(zeros, zeros))
        run = run_heisenberg(config)
        reg = build_register(config)
        for j in range(1, 4):
            for axis in (Q, P):
                label = ModeLabel.target(j)
                assert run.register.form(label, axis).isclose(reg.form(label, axis))

    def test_alt_bn_probe_normalized(self):
        """alt-bn: sonda com q_N e p_N unitários após o squeeze local"""
        config = SchemeConfig(3, 2, 0.8, ALT)
        run = run_heisenberg(config)
        q3, p3 = run.output_forms[2]
        assert q3.coefficient(config.probe, Q) == pytest.approx(1.0, abs=1e-12)
        assert p3.coefficient(config.probe, P) == pytest.approx(1.0, abs=1e-12)
        assert run.register.is_canonical(atol=1e-11)

    def test_to_dict(self):
        """Relatório simbólico rotulado"""
        data = self.run.to_dict()
        assert set(data) == {"readout_pA", "readout_qB", "output_forms"}
        assert data["output_forms"]["1"]["q"]["q1"] == pytest.approx(1.0)


class TestIdealQndMap:
    """Testes para o mapa QND ideal"""

    def test_zero_is_identity(self):
        """G = 0 é a identidade"""
        assert np.allclose(ideal_qnd_map(np.zeros((2, 1))), np.eye(6))

    def test_random_gains_symplectic(self):
        """Mapa é simplético para ganhos aleatórios"""
        rng = np.random.default_rng(3)
        for shape in [(1, 1), (2, 1), (2, 2), (3, 1)]:
            assert is_symplectic(ideal_qnd_map(rng.normal(size=shape)))

    def test_single_column(self):
        """p_j → p_j − G_j p_N e q_N → q_N + Σ G_j q_j"""
        G = np.array([[0.3], [-0.7]])
        matrix = ideal_qnd_map(G)
        assert matrix[1, 5] == pytest.approx(-0.3)
        assert matrix[3, 5] == pytest.approx(0.7)
        assert matrix[4, 0] == pytest.approx(0.3)
        assert matrix[4, 2] == pytest.approx(-0.7)

    def test_non_finite(self):
        """Ganhos não finitos são rejeitados"""
        with pytest.raises(ValueError):
            ideal_qnd_map(np.array([[np.nan]]))


class TestRunAnalytic:
    """Testes para o motor analítico gaussiano"""

    def test_vacuum_without_ancilla_squeezing(self):
        """Alvos no vácuo e ancilas sem squeezing: Var(q_j^out) = 1 + f_j²"""
        config = SchemeConfig(3, 2, 0.9, s_a=0.0, s_b=0.0)
        run = run_analytic(config)
        for j in range(2):
            assert run.output_state.cov[2 * j, 2 * j] == pytest.approx(1 + run.table.f[j] ** 2)
        assert is_physical(run.output_state)

    @pytest.mark.parametrize("t_o", [0.05, 0.1, 0.2])
    def test_large_gains_output_physical(self, t_o):
        """N=8, m=7 com t_o pequeno: covariância ~1e12 ainda é física"""
        run = run_analytic(SchemeConfig(8, 7, t_o))
        assert is_physical(run.output_state)

    def test_large_ancilla_squeezing_preserves_signal(self):
        """Com squeezing alto a perturbação em q_j some"""
        state = prepare_input(InputFamily.GHZ, 3, 0.7)
        config = SchemeConfig(3, 2, 0.9, input_state=state, s_a=8.0, s_b=8.0)
        run = run_analytic(config)
        for j in range(2):
            assert run.output_state.cov[2 * j, 2 * j] == pytest.approx(state.cov[2 * j, 2 * j],
                                                                      rel=1e-5)

    @pytest.mark.parametrize("n", [3, 4])
    @pytest.mark.parametrize("family", [InputFamily.VACUUM, InputFamily.GHZ])
    def test_ideal_qnd_limit(self, n, family):
        """A 60 dB a saída coincide com o mapa QND ideal (erro relativo < 1e−3)"""
        state = prepare_input(family, n, 0.5)
        config = SchemeConfig(n, n - 1, 0.9, input_state=state)
        run = run_analytic(config)
        ideal = apply_symplectic(state, ideal_qnd_map(np.asarray(run.table.G).reshape(n - 1, 1))).cov
        deviation = np.abs(run.output_state.cov - ideal) / np.maximum(np.abs(ideal), 1.0)
        assert deviation.max() < 1e-3
        assert is_physical(run.output_state)

    def test_readout_decomposition(self):
        """V_p^A = parte dos alvos + parte das ancilas; escala com k_A"""
        state = prepare_input(InputFamily.EPR_TYPE, 3, 0.5)
        config = SchemeConfig(3, 2, 0.9, input_state=state, k_a=2.0)
        run = run_analytic(config)
        parts = readout_decomposition(run)
        assert parts.v_pa == pytest.approx(run.readout_variances[0])
        assert parts.v_qb == pytest.approx(run.readout_variances[1])
        baseline = run_analytic(SchemeConfig(3, 2, 0.9, input_state=state))
        assert run.readout_variances[0] == pytest.approx(2 * baseline.readout_variances[0])
        target_only = quad_variance(run.joint_state, run.readout_pA.target_part())
        assert parts.v_pa_target == pytest.approx(2 * target_only)


class TestMonteCarlo:
    """Testes para o motor de trajetórias"""

    def setup_method(self):
        """Configuração para cada teste"""
        self.config = SchemeConfig(3, 2, 0.9, input_state=prepare_input(InputFamily.GHZ, 3, 1.0))

    def test_single_trajectory_deterministic(self):
        """Mesma semente, mesmo registro"""
        first = sample_trajectory(self.config, np.random.default_rng(11))
        second = sample_trajectory(self.config, np.random.default_rng(11))
        assert first.records == second.records
        assert first.records[0].mode == A and first.records[0].axis == P
        assert first.records[1].mode == B and first.records[1].axis == Q
        assert np.allclose(first.state.mean, second.state.mean)
        assert first.state.n_modes == 3
        assert is_physical(first.state)

    def test_one_sample_reproducible(self):
        """n=1 com semente fixa é determinístico"""
        first = run_monte_carlo(self.config, 1, seed=5)
        second = run_monte_carlo(self.config, 1, seed=5)
        assert first.first_records == second.first_records
        assert np.array_equal(first.mean, second.mean)
        report = json.loads(json.dumps(first.to_dict(), allow_nan=False))
        assert report["cov_standard_error"][0][0] is None

    def test_rejects_zero_samples(self):
        """n_samples < 1 é erro"""
        with pytest.raises(ValueError):
            run_monte_carlo(self.config, 0, seed=0)

    def test_agrees_with_analytic(self):
        """Covariância e média empíricas dentro de 5 erros padrão"""
        result = run_monte_carlo(self.config, 4000, seed=2024, chunk=1500)
        assert result.within(5.0)
        assert result.max_z_score() <= 5.0
        assert result.to_dict()["within_5_se"] is True
        analytic = GaussianState(result.analytic_mean, result.analytic_cov)
        assert is_physical(analytic)

    def test_alt_bn_agrees_with_analytic(self):
        """Variante alt-bn com squeeze local também concorda"""
        config = SchemeConfig(3, 2, 0.8, ALT, input_state=prepare_input(InputFamily.GHZ, 3, 1.0))
        result = run_monte_carlo(config, 4000, seed=99)
        assert result.within(5.0)

    @pytest.mark.slow
    def test_agrees_with_analytic_full(self):
        """10^5 trajetórias: todas as entradas dentro de 5 erros padrão"""
        result = run_monte_carlo(self.config, 100_000, seed=1)
        assert result.within(5.0)
        assert np.all(np.abs(result.mean - result.analytic_mean)
                      <= 5 * result.mean_standard_error + 1e-9)


class TestPrepareInput:
    """Testes para a preparação dos estados de entrada"""

    def test_ghz_orientation(self):
        """GHZ orientado: posição total comprimida"""
        s, n = 0.8, 3
        state = prepare_input(InputFamily.GHZ, n, s)
        total_q = np.zeros(2 * n)
        total_q[0::2] = 1.0
        assert quad_variance(state, total_q) == pytest.approx(n * np.exp(-2 * s))

    def test_epr_type_orientation(self):
        """EPR: q_N + Σ q_j/√(N−1) e −p_N + Σ p_j/√(N−1) comprimidos"""
        s, n = 0.6, 4
        state = prepare_input(InputFamily.EPR_TYPE, n, s)
        q_comb = np.zeros(2 * n)
        q_comb[0:2 * (n - 1):2] = 1 / np.sqrt(n - 1)
        q_comb[2 * (n - 1)] = 1.0
        p_comb = np.zeros(2 * n)
        p_comb[1:2 * (n - 1):2] = 1 / np.sqrt(n - 1)
        p_comb[2 * n - 1] = -1.0
        assert quad_variance(state, q_comb) == pytest.approx(2 * np.exp(-2 * s))
        assert quad_variance(state, p_comb) == pytest.approx(2 * np.exp(-2 * s))

    def test_explicit_requires_covariance(self):
        """Família explicit sem covariância é erro"""
        with pytest.raises(ConfigError):
            prepare_input(InputFamily.EXPLICIT, 2)

    def test_explicit_size(self):
        """Covariância explícita com número errado de modos"""
        with pytest.raises(ConfigError):
            prepare_input(InputFamily.EXPLICIT, 3, covariance=np.eye(4))
