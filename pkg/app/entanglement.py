"""
Certificador de emaranhamento multipartido genuíno

Constrói û = Σ a_j p̂_j e v̂ = Σ b_j q̂_j a partir dos coeficientes do esquema,
enumera bipartições, minimiza S_B e calcula Ent.
"""

import logging
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import (
    ClosedFormMismatchError, DegenerateSpecError, FormulaUnavailableError
)
from .gaussian import GaussianState, quad_variance
from .quadops import MAX_TARGETS, LinearForm, lf_basis, lf_combine
from .scheme import SchemeConfig, SchemeRun, coefficient_table
from .types import (
    Bipartition, CertResult, CoefficientTable, ModeLabel, QuadratureAxis, Side, UVSpec,
    Variant
)

logger = logging.getLogger(__name__)

CLOSED_FORM_RTOL = 1e-10
TIE_RTOL = 1e-12
DEGENERATE_RTOL = 1e-12
LOW_BITS = 20
S_B_MAP_MAX_N = 16


def uv_from_weights(a: Sequence[float], b: Sequence[float], side: Side = Side.INPUT) -> UVSpec:
    """UVSpec a partir de pesos arbitrários"""
    return UVSpec(np.asarray(a, dtype=float), np.asarray(b, dtype=float), side)


def uv_input(config: SchemeConfig, table: Optional[CoefficientTable] = None) -> UVSpec:
    """
    Pesos de û e v̂ do lado de entrada

    São as partes alvo das leituras divididas por t_d t_o^{N−1}; para
    uniform-last, a = (f_1..f_{N−1}, −f_N) e b = (g_1..g_{N−1}, −g_N).

    Args:
        config: Configuração do esquema
        table: Tabela de coeficientes (calculada se omitida)

    Returns:
        UVSpec do lado de entrada, escalado por √α e √β
    """
    table = table or coefficient_table(config)
    return UVSpec(
        np.array(table.u_weights) * np.sqrt(config.alpha),
        np.array(table.v_weights) * np.sqrt(config.beta),
        Side.INPUT,
    )


def uv_output(config: SchemeConfig, table: Optional[CoefficientTable] = None) -> UVSpec:
    """
    Pesos de û e v̂ sobre as quadraturas de saída

    a'_j = a_j, a'_N = a_N + Σ a_j G_j, b'_j = −(b_j − b_N G_j), b'_N = −b_N.
    Para uniform-last equivale a a'_N = (r_d² − t_d²) f_N, b'_j = (r_d² − t_d²) g_j,
    b'_N = g_N.

    Args:
        config: Configuração do esquema
        table: Tabela de coeficientes (calculada se omitida)

    Returns:
        UVSpec do lado de saída
    """
    table = table or coefficient_table(config)
    a = np.array(table.u_weights)
    b = np.array(table.v_weights)
    G = np.array(table.G)
    a_out = a.copy()
    a_out[-1] = a[-1] + float(a[:-1] @ G)
    b_out = np.empty_like(b)
    b_out[:-1] = -(b[:-1] - b[-1] * G)
    b_out[-1] = -b[-1]
    return UVSpec(a_out * np.sqrt(config.alpha), b_out * np.sqrt(config.beta), Side.OUTPUT)


def u_form(uv: UVSpec) -> LinearForm:
    """û como forma linear sobre os N modos alvo"""
    n = uv.n_modes
    return lf_combine([(float(w), lf_basis(ModeLabel.target(j), QuadratureAxis.P, n))
                       for j, w in enumerate(uv.a, start=1)])


def v_form(uv: UVSpec) -> LinearForm:
    """v̂ como forma linear sobre os N modos alvo"""
    n = uv.n_modes
    return lf_combine([(float(w), lf_basis(ModeLabel.target(j), QuadratureAxis.Q, n))
                       for j, w in enumerate(uv.b, start=1)])


def _bipartition_from_mask(mask: int, n: int) -> Bipartition:
    right = frozenset(k + 2 for k in range(n - 1) if mask >> k & 1)
    return Bipartition(frozenset(range(1, n + 1)) - right, right)


def enumerate_bipartitions(n: int) -> Iterator[Bipartition]:
    """
    Todas as 2^{N−1} − 1 bipartições canônicas, em ordem determinística

    O lado direito percorre os subconjuntos não vazios de {2..N} pela máscara binária.
    """
    if not 2 <= n <= MAX_TARGETS:
        raise ValueError(f"N deve estar em 2..{MAX_TARGETS}, recebido {n}")
    for mask in range(1, 2 ** (n - 1)):
        yield _bipartition_from_mask(mask, n)


def s_b(uv: UVSpec, bipartition: Bipartition) -> float:
    """S_B = |Σ_{k∈left} a_k b_k| + |Σ_{k∈right} a_k b_k|"""
    products = uv.a * uv.b
    left = sum(products[k - 1] for k in bipartition.left)
    right = sum(products[k - 1] for k in bipartition.right)
    return float(abs(left) + abs(right))


def _subset_sums(values: np.ndarray) -> np.ndarray:
    sums = np.zeros(1)
    for value in values:
        sums = np.concatenate([sums, sums + value])
    return sums


def min_s_b(uv: UVSpec) -> Tuple[float, FrozenSet[Bipartition]]:
    """
    Mínimo exaustivo de S_B sobre todas as bipartições canônicas

    Empates (dentro de 1e−12 relativo) são todos reportados.

    Args:
        uv: Pesos de û e v̂

    Returns:
        (mínimo, conjunto de bipartições que o atingem)
    """
    n = uv.n_modes
    if not 2 <= n <= MAX_TARGETS:
        raise ValueError(f"N deve estar em 2..{MAX_TARGETS}, recebido {n}")
    products = uv.a * uv.b
    total = float(products.sum())
    tie = TIE_RTOL * max(1.0, float(np.sum(np.abs(products))))
    rest = products[1:]
    low_sums = _subset_sums(rest[:LOW_BITS])
    high_sums = _subset_sums(rest[LOW_BITS:])
    low_count = low_sums.shape[0]

    best = np.inf
    candidates: List[Tuple[int, float]] = []
    for high, offset in enumerate(high_sums):
        right = low_sums + offset
        values = np.abs(right) + np.abs(total - right)
        if high == 0:
            values[0] = np.inf
        current = float(values.min())
        if current > best + tie:
            continue
        best = min(best, current)
        for low in np.flatnonzero(values <= best + tie):
            candidates.append((high * low_count + int(low), float(values[low])))

    argmin = frozenset(_bipartition_from_mask(mask, n)
                       for mask, value in candidates if value <= best + tie)
    return best, argmin


def _closed_input_value(config: SchemeConfig, table: CoefficientTable) -> float:
    scale = np.sqrt(config.alpha * config.beta)
    if config.variant is Variant.ALT_BN:
        return float(scale * 2.0 * (1.0 - config.t_o ** 2) / table.t_d)
    edge = min(abs(table.f[0] * table.g[0]), abs(table.f[-2] * table.g[-2]))
    return float(2.0 * scale * edge)


def min_s_b_closed(config: SchemeConfig, side: Side,
                   table: Optional[CoefficientTable] = None) -> float:
    """
    min S_B em forma fechada, conferido contra a força bruta

    Entrada: 2√(αβ)·min(|f_1 g_1|, |f_{N−1} g_{N−1}|) (uniform-last) ou
    2√(αβ)(1 − t_o²)/t_d (alt-bn). Saída: o mesmo valor de uniform-last vezes
    |r_d² − t_d²|.

    Args:
        config: Configuração do esquema
        side: Lado (input ou output)
        table: Tabela de coeficientes (calculada se omitida)

    Returns:
        Valor fechado

    Raises:
        FormulaUnavailableError: sem expressão para a variante/lado
        ClosedFormMismatchError: divergência com o mínimo exaustivo
    """
    table = table or coefficient_table(config)
    if side is Side.BOTH:
        raise ValueError("Escolha um único lado para a forma fechada")
    if side is Side.OUTPUT:
        if config.variant is not Variant.UNIFORM_LAST:
            raise FormulaUnavailableError("Sem forma fechada de saída para alt-bn")
        closed = abs(table.r_d ** 2 - table.t_d ** 2) * _closed_input_value(config, table)
        brute, _ = min_s_b(uv_output(config, table))
    else:
        closed = _closed_input_value(config, table)
        brute, _ = min_s_b(uv_input(config, table))
    if abs(closed - brute) > CLOSED_FORM_RTOL * max(1.0, abs(brute)):
        raise ClosedFormMismatchError(
            f"min S_B fechado {closed!r} difere da força bruta {brute!r} ({side.value})"
        )
    return closed


def output_readout_residuals(run: SchemeRun) -> Tuple[LinearForm, LinearForm]:
    """
    Leituras reescritas sobre as quadraturas de saída

    Retorna p̂_A^out − c·û' e q̂_B^out + c·v̂' (com û', v̂' avaliados nas formas de
    saída e c = t_d t_o^{N−1}); as partes alvo dos resíduos devem ser nulas.

    Args:
        run: Execução simbólica com ganhos automáticos

    Returns:
        (resíduo de p_A, resíduo de q_B)
    """
    config = SchemeConfig(run.config.n, run.config.m, run.config.t_o, run.config.variant)
    uv = uv_output(config, run.table)
    c = run.table.readout_scale
    forms = run.output_forms
    u_out = lf_combine([(float(w), p) for w, (_, p) in zip(uv.a, forms)])
    v_out = lf_combine([(float(w), q) for w, (q, _) in zip(uv.b, forms)])
    return run.readout_pA - u_out * c, run.readout_qB + v_out * c


def certify(uv: UVSpec, state: GaussianState) -> CertResult:
    """
    Testemunha Ent = (Var û + Var v̂) / (2·min S_B)

    Args:
        uv: Pesos de û e v̂
        state: Estado dos N modos (entrada ou saída do esquema)

    Returns:
        CertResult com certified ⇔ Ent < 1

    Raises:
        DegenerateSpecError: min S_B nulo
    """
    n = uv.n_modes
    if state.n_modes != n:
        raise ValueError(f"Estado com {state.n_modes} modos, pesos para {n}")
    minimum, argmin = min_s_b(uv)
    scale = float(np.sum(np.abs(uv.a * uv.b)))
    if minimum <= DEGENERATE_RTOL * max(1.0, scale):
        raise DegenerateSpecError(f"min S_B = {minimum!r}; certificador indefinido")
    var_u = quad_variance(state, u_form(uv))
    var_v = quad_variance(state, v_form(uv))
    ent = (var_u + var_v) / (2.0 * minimum)
    if n <= S_B_MAP_MAX_N:
        all_values: Dict[Bipartition, float] = {bp: s_b(uv, bp) for bp in enumerate_bipartitions(n)}
    else:
        all_values = {bp: minimum for bp in argmin}
        logger.debug(f"N={n} > {S_B_MAP_MAX_N}: s_b_all limitado às {len(argmin)} bipartições mínimas")
    logger.debug(f"Ent ({uv.side.value}) = {ent:.6g}, min S_B = {minimum:.6g}")
    return CertResult(
        var_u=var_u, var_v=var_v, s_b_all=all_values, min_s_b=minimum,
        argmin=argmin, ent=ent, certified=bool(ent < 1.0),
    )
