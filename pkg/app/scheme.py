"""
Esquema de interação QND N-partida mediada por duas ancilas

Cascata de divisores de feixe, leituras homodinas, feedforward, tabela de
coeficientes e os dois motores (Heisenberg simbólico e gaussiano/Monte Carlo).
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .exceptions import (
    ClosedFormMismatchError, CompatibilityError, ConfigError, NotSymplecticError
)
from .gaussian import (
    DEFAULT_CONSUMED_VARIANCE_CAP, GaussianState, apply_symplectic, displace,
    epr_type_state, from_covariance, ghz_state, homodyne_measure, homodyne_sample,
    local_squeeze, passive_symplectic, phase_shift, quad_variance, reduced,
    squeezed, tensor, vacuum
)
from .quadops import (
    COEFF_ATOL, MAX_TARGETS, LinearForm, ModeRegister, apply_beamsplitter,
    apply_feedforward, apply_local_squeeze, initial_register, is_symplectic,
    lf_basis, lf_combine
)
from .types import (
    CoefficientTable, GainOverrides, HomodyneRecord, InputFamily, ModeLabel,
    QuadratureAxis, Variant
)

logger = logging.getLogger(__name__)

Q = QuadratureAxis.Q
P = QuadratureAxis.P
A = ModeLabel.ancilla_a()
B = ModeLabel.ancilla_b()

EPS = float(np.finfo(float).eps)
ROOT_GRID = np.geomspace(1.0 - 1e-12, 1e-15, 48)
UNRESOLVABLE_TD = 1e-6


def squeezing_from_db(db: float) -> float:
    """Converte squeezing em dB para o parâmetro adimensional s"""
    return float(np.log(10.0 ** (db / 20.0)))


DEFAULT_ANCILLA_S = squeezing_from_db(60.0)


def _check_geometry(n: int, m: int, t_o: float) -> None:
    if not 2 <= n <= MAX_TARGETS:
        raise ConfigError(f"N deve estar em 2..{MAX_TARGETS}, recebido {n}")
    if not 1 <= m <= n - 1:
        raise ConfigError(f"m deve estar em 1..{n - 1}, recebido {m}")
    if not 0.0 < t_o < 1.0:
        raise ConfigError(f"t_o deve estar em (0, 1), recebido {t_o}")


@dataclass(frozen=True, eq=False)
class SchemeConfig:
    """Descrição completa de um experimento"""
    n: int
    m: int
    t_o: float
    variant: Variant = Variant.UNIFORM_LAST
    s_a: float = DEFAULT_ANCILLA_S
    s_b: float = DEFAULT_ANCILLA_S
    input_state: Optional[GaussianState] = None
    gains: Optional[GainOverrides] = None
    k_a: float = 1.0
    k_b: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    t_d_offset: float = 0.0
    consumed_variance_cap: float = DEFAULT_CONSUMED_VARIANCE_CAP

    def __post_init__(self) -> None:
        _check_geometry(self.n, self.m, self.t_o)
        if self.variant is Variant.ALT_BN and (self.n, self.m) != (3, 2):
            raise ConfigError("A variante alt-bn só está definida para N=3, m=2")
        if self.input_state is not None and self.input_state.n_modes != self.n:
            raise ConfigError(
                f"Estado de entrada tem {self.input_state.n_modes} modos, esperado {self.n}"
            )
        if self.gains is not None and (len(self.gains.phi) != self.n
                                       or len(self.gains.gamma) != self.n):
            raise ConfigError(f"Ganhos manuais precisam de {self.n} valores")
        if self.alpha <= 0 or self.beta <= 0:
            raise ConfigError("alpha e beta devem ser positivos")

    @property
    def target_state(self) -> GaussianState:
        return self.input_state if self.input_state is not None else vacuum(self.n)

    @property
    def probe(self) -> ModeLabel:
        return ModeLabel.target(self.n)


@dataclass(frozen=True)
class Splitter:
    """Um divisor de feixe da cascata (alvo j, ancila, t, r)"""
    target: int
    ancilla: ModeLabel
    t: float
    r: float


def splitter_schedule(n: int, m: int, t_o: float, t_d: float,
                      variant: Variant) -> List[Splitter]:
    """
    Sequência ordenada de divisores de feixe

    A percorre os alvos em ordem crescente (1..m, depois m+1..N) e B em ordem
    decrescente (N..m+1, depois m..1).

    Args:
        n: Número de alvos
        m: Índice de cruzamento
        t_o: Transmissão comum
        t_d: Transmissão distinta
        variant: Variante do arranjo

    Returns:
        Lista de divisores na ordem de aplicação
    """
    r_o = float(np.sqrt(1.0 - t_o * t_o))
    r_d = float(np.sqrt(1.0 - t_d * t_d))

    def coefficients(j: int, ancilla: ModeLabel) -> Tuple[float, float]:
        if j != n:
            return t_o, r_o
        if ancilla == A:
            return t_d, -r_d
        if variant is Variant.UNIFORM_LAST:
            return t_d, r_d
        return t_o, r_o

    order = ([(j, A) for j in range(1, m + 1)]
             + [(j, B) for j in range(n, m, -1)]
             + [(j, B) for j in range(m, 0, -1)]
             + [(j, A) for j in range(m + 1, n + 1)])
    return [Splitter(j, anc, *coefficients(j, anc)) for j, anc in order]


def passive_matrix(schedule: Sequence[Splitter], n: int) -> np.ndarray:
    """Matriz ortogonal (N+2)×(N+2) da rede passiva (linha = modo de saída)"""
    matrix = np.eye(n + 2)
    for sp in schedule:
        x = sp.target - 1
        y = n if sp.ancilla == A else n + 1
        row_x, row_y = matrix[x].copy(), matrix[y].copy()
        matrix[x] = sp.t * row_x + sp.r * row_y
        matrix[y] = sp.t * row_y - sp.r * row_x
    return matrix


def compatibility_residual(n: int, m: int, t_o: float, variant: Variant, t_d: float) -> float:
    """
    Comutador restrito aos alvos [ℬ_target, 𝒜_target], normalizado

    Args:
        n, m, t_o, variant: Geometria do esquema
        t_d: Transmissão distinta avaliada

    Returns:
        Σ_j B_j A_j / Σ_j |B_j A_j| (zero na condição de compatibilidade)
    """
    matrix = passive_matrix(splitter_schedule(n, m, t_o, t_d, variant), n)
    products = matrix[n + 1, :n] * matrix[n, :n]
    scale = float(np.sum(np.abs(products)))
    return float(np.sum(products)) / scale if scale > 0.0 else 0.0


def closed_form_td(n: int, m: int, t_o: float, variant: Variant) -> Optional[float]:
    """Transmissão distinta em forma fechada, quando conhecida"""
    if variant is Variant.UNIFORM_LAST:
        return float(t_o ** m / np.sqrt(2.0 - t_o ** (2 * (n - m - 1))))
    if (n, m) == (3, 2):
        t2 = t_o * t_o
        return float(t_o / np.sqrt(t2 + (1.0 + t2) * (1.0 - t2 * t2)))
    return None


def find_compatibility_root(n: int, m: int, t_o: float, variant: Variant) -> Optional[float]:
    """
    Raiz numérica do resíduo de compatibilidade

    Procura a primeira troca de sinal numa grade logarítmica decrescente em t_d
    e refina com brentq.

    Returns:
        Raiz em (0, 1) ou None se o resíduo não troca de sinal na grade
    """
    def residual(t_d: float) -> float:
        return compatibility_residual(n, m, t_o, variant, t_d)

    previous_t = float(ROOT_GRID[0])
    previous = residual(previous_t)
    if previous == 0.0:
        return previous_t
    for t_d in ROOT_GRID[1:]:
        current = residual(float(t_d))
        if current == 0.0:
            return float(t_d)
        if np.sign(current) != np.sign(previous):
            return float(brentq(residual, float(t_d), previous_t, xtol=1e-300, rtol=4 * EPS))
        previous_t, previous = float(t_d), current
    return None


@lru_cache(maxsize=4096)
def solve_compatibility(n: int, m: int, t_o: float,
                        variant: Variant = Variant.UNIFORM_LAST) -> float:
    """
    Transmissão t_d que torna compatíveis as leituras p_A e q_B

    Args:
        n: Número de alvos
        m: Índice de cruzamento
        t_o: Transmissão comum
        variant: Variante do arranjo

    Returns:
        t_d em (0, 1); o valor fechado quando existe e foi confirmado
    """
    _check_geometry(n, m, t_o)
    root = find_compatibility_root(n, m, t_o, variant)
    closed = closed_form_td(n, m, t_o, variant)
    if root is None:
        if closed is None:
            raise CompatibilityError(
                f"Sem raiz de compatibilidade para N={n}, m={m}, t_o={t_o}, {variant.value}"
            )
        logger.warning(
            f"Resíduo sem troca de sinal resolúvel (N={n}, m={m}, t_o={t_o}); "
            f"usando forma fechada t_d={closed:.6g}"
        )
        return closed
    if closed is None:
        logger.debug(f"t_d numérico N={n} m={m} t_o={t_o}: {root!r}")
        return root
    tolerance = max(1e-10, 64.0 * EPS / closed)
    deviation = abs(root - closed)
    if deviation > tolerance:
        if closed < UNRESOLVABLE_TD:
            logger.warning(
                f"t_d={closed:.3g} abaixo da resolução numérica (desvio {deviation:.3g}); "
                f"usando forma fechada"
            )
            return closed
        raise CompatibilityError(
            f"Raiz numérica {root!r} diverge da forma fechada {closed!r} "
            f"(N={n}, m={m}, t_o={t_o}, desvio {deviation:.3g})"
        )
    logger.debug(f"t_d N={n} m={m} t_o={t_o}: raiz {root!r}, fechada {closed!r}")
    return closed


def resolve_td(config: SchemeConfig) -> float:
    """t_d efetivo da configuração (raiz de compatibilidade + deslocamento opcional)"""
    t_d = solve_compatibility(config.n, config.m, config.t_o, config.variant) + config.t_d_offset
    if not 0.0 < t_d < 1.0:
        raise ConfigError(f"t_d deslocado fora de (0, 1): {t_d}")
    return t_d


def build_register(config: SchemeConfig, t_d: Optional[float] = None) -> ModeRegister:
    """
    Aplica a cascata de divisores de feixe ao registrador inicial

    Args:
        config: Configuração do esquema
        t_d: Transmissão distinta (resolvida pela configuração se omitida)

    Returns:
        Registrador após todos os divisores (antes da medida)
    """
    t_d = resolve_td(config) if t_d is None else t_d
    reg = initial_register(config.n)
    for sp in splitter_schedule(config.n, config.m, config.t_o, t_d, config.variant):
        reg = apply_beamsplitter(reg, ModeLabel.target(sp.target), sp.ancilla, sp.t, sp.r)
    return reg


def readout_forms(reg: ModeRegister) -> Tuple[LinearForm, LinearForm]:
    """Quadraturas medidas (p_A^out, q_B^out)"""
    return reg.form(A, P), reg.form(B, Q)


def readoff_gains(reg: ModeRegister) -> Tuple[np.ndarray, np.ndarray]:
    """
    Ganhos que cancelam a quadratura anti-comprimida de cada ancila

    f_j anula q_B^in em q_j e g_j anula p_A^in em p_j.

    Args:
        reg: Registrador após a cascata

    Returns:
        Vetores (f, g) de comprimento N
    """
    pa, qb = readout_forms(reg)
    qb_self = qb.coefficient(B, Q)
    pa_self = pa.coefficient(A, P)
    f = np.array([-reg.form(ModeLabel.target(j), Q).coefficient(B, Q) / qb_self
                  for j in range(1, reg.n_targets + 1)])
    g = np.array([-reg.form(ModeLabel.target(j), P).coefficient(A, P) / pa_self
                  for j in range(1, reg.n_targets + 1)])
    return f, g


def closed_form_gains(n: int, m: int, t_o: float, t_d: float) -> Tuple[np.ndarray, np.ndarray]:
    """Ganhos f_j, g_j da configuração uniform-last em forma fechada"""
    r_o = np.sqrt(1.0 - t_o * t_o)
    r_d = np.sqrt(1.0 - t_d * t_d)
    f = np.zeros(n)
    g = np.zeros(n)
    for j in range(1, n):
        if j <= m:
            f[j - 1] = -r_o * t_o ** (-j)
            g[j - 1] = -r_o / t_d * t_o ** (2 * m - n - j + 1)
        else:
            f[j - 1] = -r_o * t_o ** (j - 2 * m - 1)
            g[j - 1] = -r_o / t_d * t_o ** (j - n)
    f[n - 1] = -r_d * t_o ** (1 - n) * (2.0 - t_o ** (2 * (n - m - 1)))
    g[n - 1] = r_d / t_d
    return f, g


def _feedforward(reg: ModeRegister, f: Sequence[float], g: Sequence[float]) -> ModeRegister:
    pa, qb = readout_forms(reg)
    for j in range(1, reg.n_targets + 1):
        target = ModeLabel.target(j)
        reg = apply_feedforward(reg, target, Q, float(f[j - 1]), qb)
        reg = apply_feedforward(reg, target, P, float(g[j - 1]), pa)
    return reg


def coefficient_table(config: SchemeConfig) -> CoefficientTable:
    """
    Tabela de coeficientes da configuração

    uniform-last usa as expressões fechadas; alt-bn lê os ganhos das formas
    simbólicas e normaliza o modo sonda com um squeeze local.

    Args:
        config: Configuração do esquema

    Returns:
        CoefficientTable com t_d, r_d, f, g, G e os pesos de û, v̂
    """
    n = config.n
    t_d = resolve_td(config)
    r_d = float(np.sqrt(1.0 - t_d * t_d))
    reg = build_register(config, t_d)
    pa, qb = readout_forms(reg)
    scale = pa.coefficient(A, P)
    u_weights = pa.target_vector(P) / scale
    v_weights = qb.target_vector(Q) / scale

    if config.variant is Variant.UNIFORM_LAST:
        f, g = closed_form_gains(n, config.m, config.t_o, t_d)
        G = -2.0 * r_d * t_d * g[:n - 1]
        rescale = 1.0
    else:
        f, g = readoff_gains(reg)
        out = _feedforward(reg, f, g)
        rescale = 1.0 / out.form(config.probe, Q).coefficient(config.probe, Q)
        out = apply_local_squeeze(out, config.probe, rescale)
        G = np.array([-out.form(ModeLabel.target(j), P).coefficient(config.probe, P)
                      for j in range(1, n)])

    return CoefficientTable(
        t_d=t_d, r_d=r_d, f=f, g=g, G=G,
        u_weights=u_weights, v_weights=v_weights,
        readout_scale=float(scale), probe_rescale=float(rescale),
    )


@dataclass(frozen=True, eq=False)
class SchemeRun:
    """Resultado de uma execução do esquema"""
    config: SchemeConfig
    table: CoefficientTable
    register: ModeRegister
    readout_pA: LinearForm
    readout_qB: LinearForm
    output_state: Optional[GaussianState] = None
    readout_variances: Optional[Tuple[float, float]] = None
    joint_state: Optional[GaussianState] = None

    @property
    def output_forms(self) -> List[Tuple[LinearForm, LinearForm]]:
        return [(self.register.form(ModeLabel.target(j), Q),
                 self.register.form(ModeLabel.target(j), P))
                for j in range(1, self.config.n + 1)]

    def target_rows(self) -> np.ndarray:
        """Linhas das formas de saída dos alvos (2N × 2(N+2))"""
        return self.register.matrix()[:2 * self.config.n]

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "readout_pA": self.readout_pA.as_dict(atol=COEFF_ATOL),
            "readout_qB": self.readout_qB.as_dict(atol=COEFF_ATOL),
            "output_forms": {
                f"{j}": {"q": q.as_dict(atol=COEFF_ATOL), "p": p.as_dict(atol=COEFF_ATOL)}
                for j, (q, p) in enumerate(self.output_forms, start=1)
            },
        }
        if self.readout_variances is not None:
            data["readout_variances"] = {
                "V_pA": self.readout_variances[0],
                "V_qB": self.readout_variances[1],
            }
        return data


def form_tolerance(table: CoefficientTable) -> float:
    """Tolerância de comparação de formas após feedforward"""
    return COEFF_ATOL * table.gain_scale


def expected_output_forms(config: SchemeConfig,
                          table: CoefficientTable) -> List[Tuple[LinearForm, LinearForm]]:
    """
    Formas de saída esperadas da configuração uniform-last

    q_j = q_j − f_j q_A, p_j = p_j − G_j p_N + (r_d² − t_d²) g_j p_B (j < N);
    q_N = q_N + Σ G_j q_j − (r_d² − t_d²) f_N q_A, p_N = p_N + g_N p_B.
    """
    n = config.n
    probe = config.probe
    delta = table.r_d ** 2 - table.t_d ** 2
    forms: List[Tuple[LinearForm, LinearForm]] = []
    for j in range(1, n):
        mode = ModeLabel.target(j)
        q = lf_combine([(1.0, lf_basis(mode, Q, n)), (-table.f[j - 1], lf_basis(A, Q, n))])
        p = lf_combine([(1.0, lf_basis(mode, P, n)),
                        (-table.G[j - 1], lf_basis(probe, P, n)),
                        (delta * table.g[j - 1], lf_basis(B, P, n))])
        forms.append((q, p))
    q_terms = [(1.0, lf_basis(probe, Q, n)), (-delta * table.f[n - 1], lf_basis(A, Q, n))]
    q_terms += [(table.G[j - 1], lf_basis(ModeLabel.target(j), Q, n)) for j in range(1, n)]
    p_n = lf_combine([(1.0, lf_basis(probe, P, n)), (table.g[n - 1], lf_basis(B, P, n))])
    forms.append((lf_combine(q_terms), p_n))
    return forms


def closed_readout_forms(config: SchemeConfig, table: CoefficientTable,
                         pb_from_crossing: bool = False) -> Tuple[LinearForm, LinearForm]:
    """
    Leituras p_A^out e q_B^out em forma fechada (uniform-last)

    Args:
        config: Configuração
        table: Tabela de coeficientes
        pb_from_crossing: Usa (1 − t_o^{2m}) como coeficiente de p_B em vez de
            1 − t_d²[2 − t_o^{2(N−m−1)}]; coincidem sob compatibilidade

    Returns:
        (p_A^out, q_B^out)
    """
    n, m, t_o = config.n, config.m, config.t_o
    c = table.t_d * t_o ** (n - 1)
    if pb_from_crossing:
        pb_coefficient = 1.0 - t_o ** (2 * m)
    else:
        pb_coefficient = 1.0 - table.t_d ** 2 * (2.0 - t_o ** (2 * (n - m - 1)))
    signs = np.ones(n)
    signs[-1] = -1.0
    pa_terms = [(c * signs[j - 1] * table.f[j - 1], lf_basis(ModeLabel.target(j), P, n))
                for j in range(1, n + 1)]
    pa_terms += [(c, lf_basis(A, P, n)), (pb_coefficient, lf_basis(B, P, n))]
    qb_terms = [(c * signs[j - 1] * table.g[j - 1], lf_basis(ModeLabel.target(j), Q, n))
                for j in range(1, n + 1)]
    qb_terms += [(-(1.0 - t_o ** (2 * m)), lf_basis(A, Q, n)), (c, lf_basis(B, Q, n))]
    return lf_combine(pa_terms), lf_combine(qb_terms)


def run_heisenberg(config: SchemeConfig, table: Optional[CoefficientTable] = None) -> SchemeRun:
    """
    Pipeline simbólico completo: cascata, leituras, feedforward

    Com ganhos automáticos na variante uniform-last, confere as formas de
    saída contra as expressões fechadas.

    Args:
        config: Configuração do esquema
        table: Tabela já calculada (opcional)

    Returns:
        SchemeRun com as formas finais
    """
    table = table or coefficient_table(config)
    reg = build_register(config, table.t_d)
    pa, qb = readout_forms(reg)
    if config.gains is not None:
        out = _feedforward(reg, config.gains.phi, config.gains.gamma)
    else:
        out = _feedforward(reg, table.f, table.g)
        if table.probe_rescale != 1.0:
            out = apply_local_squeeze(out, config.probe, table.probe_rescale)

    run = SchemeRun(config, table, out, pa, qb)
    if config.gains is None and config.variant is Variant.UNIFORM_LAST:
        tolerance = form_tolerance(table)
        worst = 0.0
        for (q, p), (eq, ep) in zip(run.output_forms, expected_output_forms(config, table)):
            worst = max(worst, q.max_deviation(eq), p.max_deviation(ep))
        if worst > tolerance:
            raise ClosedFormMismatchError(
                f"Formas de saída divergem das expressões fechadas em {worst:.3g} "
                f"(tolerância {tolerance:.3g})"
            )
    return run


def ideal_qnd_map(G: np.ndarray) -> np.ndarray:
    """
    Mapa QND ideal de m sinais para N−m sondas

    q_j → q_j, p_j → p_j − Σ_k G_jk p_k (sinais); q_k → q_k + Σ_j G_jk q_j,
    p_k → p_k (sondas).

    Args:
        G: Matriz de ganhos m×(N−m)

    Returns:
        Matriz simplética 2N×2N
    """
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if not np.all(np.isfinite(G)):
        raise ValueError("Ganhos QND devem ser finitos")
    n_signal, n_probe = G.shape
    n = n_signal + n_probe
    matrix = np.eye(2 * n)
    for j in range(n_signal):
        for k in range(n_probe):
            probe = n_signal + k
            matrix[2 * j + 1, 2 * probe + 1] = -G[j, k]
            matrix[2 * probe, 2 * j] = G[j, k]
    if not is_symplectic(matrix):
        raise NotSymplecticError("Mapa QND ideal não é simplético")
    return matrix


def joint_input_state(config: SchemeConfig) -> GaussianState:
    """Alvos ⊗ A comprimida em q ⊗ B comprimida em p"""
    return tensor([config.target_state, squeezed(config.s_a, Q), squeezed(config.s_b, P)])


def run_analytic(config: SchemeConfig, table: Optional[CoefficientTable] = None) -> SchemeRun:
    """
    Estado de saída dos alvos avaliando as formas finais na covariância conjunta

    Args:
        config: Configuração do esquema
        table: Tabela já calculada (opcional)

    Returns:
        SchemeRun com output_state e variâncias de leitura
    """
    run = run_heisenberg(config, table)
    joint = joint_input_state(config)
    rows = run.target_rows()
    assert run.register.offsets is not None
    mean = rows @ joint.mean + run.register.offsets[:2 * config.n]
    cov = rows @ joint.cov @ rows.T
    output = GaussianState(mean, 0.5 * (cov + cov.T))
    variances = (config.k_a * quad_variance(joint, run.readout_pA),
                 config.k_b * quad_variance(joint, run.readout_qB))
    return SchemeRun(config, run.table, run.register, run.readout_pA, run.readout_qB,
                     output, variances, joint)


@dataclass(frozen=True)
class ReadoutDecomposition:
    """Variâncias de leitura separadas em contribuição dos alvos e das ancilas"""
    v_pa_target: float
    v_pa_ancilla: float
    v_qb_target: float
    v_qb_ancilla: float

    @property
    def v_pa(self) -> float:
        return self.v_pa_target + self.v_pa_ancilla

    @property
    def v_qb(self) -> float:
        return self.v_qb_target + self.v_qb_ancilla


def readout_decomposition(run: SchemeRun) -> ReadoutDecomposition:
    """Decompõe V_p^A e V_q^B nos termos de alvo e de ancila"""
    joint = run.joint_state or joint_input_state(run.config)
    k_a, k_b = run.config.k_a, run.config.k_b
    return ReadoutDecomposition(
        v_pa_target=k_a * quad_variance(joint, run.readout_pA.target_part()),
        v_pa_ancilla=k_a * quad_variance(joint, run.readout_pA.ancilla_part()),
        v_qb_target=k_b * quad_variance(joint, run.readout_qB.target_part()),
        v_qb_ancilla=k_b * quad_variance(joint, run.readout_qB.ancilla_part()),
    )


def _gains(config: SchemeConfig, table: CoefficientTable) -> Tuple[np.ndarray, np.ndarray, float]:
    if config.gains is not None:
        return np.array(config.gains.phi), np.array(config.gains.gamma), 1.0
    return table.f, table.g, table.probe_rescale


def _scrambled_state(config: SchemeConfig, table: CoefficientTable) -> GaussianState:
    schedule = splitter_schedule(config.n, config.m, config.t_o, table.t_d, config.variant)
    matrix = passive_symplectic(passive_matrix(schedule, config.n))
    return apply_symplectic(joint_input_state(config), matrix)


@dataclass(frozen=True)
class Trajectory:
    """Uma trajetória de medida: registros homodinos e estado condicional dos alvos"""
    records: Tuple[HomodyneRecord, HomodyneRecord]
    state: GaussianState


def sample_trajectory(config: SchemeConfig, rng: np.random.Generator,
                      table: Optional[CoefficientTable] = None) -> Trajectory:
    """
    Amostra uma trajetória com homodyne_measure e displace

    Args:
        config: Configuração do esquema
        rng: Gerador aleatório
        table: Tabela já calculada (opcional)

    Returns:
        Registros (p_A, q_B) e estado condicional dos alvos após o feedforward
    """
    table = table or coefficient_table(config)
    n = config.n
    f, g, rescale = _gains(config, table)
    cap = config.consumed_variance_cap
    state = _scrambled_state(config, table)
    record_a, state = homodyne_measure(state, n, P, rng, label=A, cap=cap)
    record_b, state = homodyne_measure(state, n + 1, Q, rng, label=B, cap=cap)
    for j in range(n):
        state = displace(state, j, Q, f[j] * record_b.outcome)
        state = displace(state, j, P, g[j] * record_a.outcome)
    if rescale != 1.0:
        state = local_squeeze(state, n - 1, rescale)
    return Trajectory((record_a, record_b), reduced(state, list(range(n))))


def _finite_or_none(values: np.ndarray) -> List[Any]:
    """Lista aninhada com None no lugar de inf/nan (JSON estrito)"""
    return np.where(np.isfinite(values), values, None).tolist()


@dataclass(frozen=True, eq=False)
class MonteCarloResult:
    """Estatística empírica dos modos alvo de saída"""
    n_samples: int
    seed: int
    mean: np.ndarray
    cov: np.ndarray
    mean_standard_error: np.ndarray
    cov_standard_error: np.ndarray
    analytic_mean: np.ndarray
    analytic_cov: np.ndarray
    first_records: Tuple[HomodyneRecord, HomodyneRecord]

    def cov_z_scores(self, floor: float = 1e-9) -> np.ndarray:
        """|empírico − analítico| (menos o piso absoluto) em unidades de erro padrão"""
        excess = np.maximum(np.abs(self.cov - self.analytic_cov) - floor, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = excess / self.cov_standard_error
        return np.where(excess == 0.0, 0.0, z)

    def max_z_score(self, floor: float = 1e-9) -> float:
        """Maior desvio normalizado entre covariâncias e médias"""
        excess = np.maximum(np.abs(self.mean - self.analytic_mean) - floor, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            mean_z = np.where(excess == 0.0, 0.0, excess / self.mean_standard_error)
        return float(max(np.max(self.cov_z_scores(floor)), np.max(mean_z)))

    def within(self, k: float = 5.0, floor: float = 1e-9) -> bool:
        """Covariância e média empíricas dentro de k erros padrão das analíticas"""
        cov_ok = np.abs(self.cov - self.analytic_cov) <= k * self.cov_standard_error + floor
        mean_ok = np.abs(self.mean - self.analytic_mean) <= k * self.mean_standard_error + floor
        return bool(np.all(cov_ok) and np.all(mean_ok))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "samples": self.n_samples,
            "seed": self.seed,
            "mean": self.mean.tolist(),
            "mean_standard_error": _finite_or_none(self.mean_standard_error),
            "cov": self.cov.tolist(),
            "cov_standard_error": _finite_or_none(self.cov_standard_error),
            "analytic_cov": self.analytic_cov.tolist(),
            "max_z_score": self.max_z_score(),
            "within_5_se": self.within(5.0),
        }


def run_monte_carlo(config: SchemeConfig, n_samples: int, seed: int,
                    chunk: int = 20000) -> MonteCarloResult:
    """
    Trajetórias de medida com feedforward, em lotes vetorizados

    A covariância empírica soma a covariância condicional (comum a todas as
    trajetórias) e a covariância amostral das médias condicionais deslocadas.

    Args:
        config: Configuração do esquema
        n_samples: Número de trajetórias (>= 1)
        seed: Semente do gerador
        chunk: Trajetórias por lote

    Returns:
        MonteCarloResult com médias, covariâncias e erros padrão
    """
    if n_samples < 1:
        raise ValueError("n_samples deve ser >= 1")
    table = coefficient_table(config)
    n = config.n
    f, g, rescale = _gains(config, table)
    cap = config.consumed_variance_cap
    scrambled = _scrambled_state(config, table)
    rng = np.random.default_rng(seed)

    batches: List[np.ndarray] = []
    conditioned: Optional[GaussianState] = None
    first: Optional[Tuple[HomodyneRecord, HomodyneRecord]] = None
    remaining = n_samples
    while remaining > 0:
        size = min(chunk, remaining)
        out_a, means, state = homodyne_sample(scrambled, n, P, rng, size=size, cap=cap)
        out_b, means, state = homodyne_sample(state, n + 1, Q, rng, means=means, cap=cap)
        means[:, 0:2 * n:2] += np.outer(out_b, f)
        means[:, 1:2 * n:2] += np.outer(out_a, g)
        if rescale != 1.0:
            means[:, 2 * (n - 1)] *= rescale
            means[:, 2 * (n - 1) + 1] /= rescale
            state = local_squeeze(state, n - 1, rescale)
        if first is None:
            first = (HomodyneRecord(A, P, float(out_a[0])), HomodyneRecord(B, Q, float(out_b[0])))
        conditioned = state
        batches.append(means[:, :2 * n])
        remaining -= size

    assert conditioned is not None and first is not None
    samples = np.vstack(batches)
    conditional_cov = reduced(conditioned, list(range(n))).cov
    mean = samples.mean(axis=0)
    if n_samples > 1:
        sample_cov = np.cov(samples, rowvar=False, ddof=1)
        diag = np.diag(sample_cov)
        cov_se = np.sqrt((np.outer(diag, diag) + sample_cov ** 2) / (n_samples - 1))
        mean_se = np.sqrt(diag / n_samples)
    else:
        sample_cov = np.zeros((2 * n, 2 * n))
        cov_se = np.full((2 * n, 2 * n), np.inf)
        mean_se = np.full(2 * n, np.inf)

    analytic = run_analytic(config, table)
    assert analytic.output_state is not None
    logger.info(f"Monte Carlo: {n_samples} trajetórias, semente {seed}")
    return MonteCarloResult(
        n_samples=n_samples, seed=seed,
        mean=mean, cov=conditional_cov + sample_cov,
        mean_standard_error=mean_se, cov_standard_error=cov_se,
        analytic_mean=np.array(analytic.output_state.mean),
        analytic_cov=np.array(analytic.output_state.cov),
        first_records=first,
    )


def prepare_input(family: InputFamily, n: int, s: float = 0.0,
                  covariance: Optional[np.ndarray] = None,
                  mean: Optional[np.ndarray] = None) -> GaussianState:
    """
    Estado de entrada dos alvos, orientado para as leituras do esquema

    ghz: GHZ com um quarto de volta de fase em todos os modos (posição total e
    momentos relativos comprimidos). epr-type: braço inteiro no modo sonda N,
    com fase π nele (posições anticorrelacionadas).

    Args:
        family: Família do estado
        n: Número de modos
        s: Squeezing do estado
        covariance: Covariância explícita (família explicit)
        mean: Médias explícitas (opcional)

    Returns:
        Estado de N modos
    """
    if family is InputFamily.VACUUM:
        return vacuum(n)
    if family is InputFamily.GHZ:
        state = ghz_state(n, s)
        for mode in range(n):
            state = phase_shift(state, mode, np.pi / 2)
        return state
    if family is InputFamily.EPR_TYPE:
        return phase_shift(epr_type_state(n, s, undivided=n), n - 1, np.pi)
    if covariance is None:
        raise ConfigError("Família explicit exige uma matriz de covariância")
    state = from_covariance(covariance, mean)
    if state.n_modes != n:
        raise ConfigError(f"Covariância explícita com {state.n_modes} modos, esperado {n}")
    return state
