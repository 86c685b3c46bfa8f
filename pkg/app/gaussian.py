"""
Estados gaussianos: vetor de médias + matriz de covariância

Ordem intercalada (q_1, p_1, q_2, p_2, ...), variância do vácuo = 1.
"""

import logging
from dataclasses import dataclass
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import block_diag

from .exceptions import (
    BasisMismatchError, ConsumedModeError, NotSymplecticError, UnphysicalStateError
)
from .quadops import LinearForm, is_symplectic, symplectic_form
from .types import HomodyneRecord, ModeLabel, QuadratureAxis

logger = logging.getLogger(__name__)

SYMMETRY_ATOL = 1e-10
PHYSICALITY_TOL = 1e-9
PHYSICALITY_NORM_RTOL = 16.0
PINV_THRESHOLD = 1e-12
DEFAULT_CONSUMED_VARIANCE_CAP = 1e6


@dataclass(frozen=True, eq=False)
class GaussianState:
    """Estado gaussiano de M modos"""
    mean: np.ndarray
    cov: np.ndarray
    consumed: FrozenSet[int] = frozenset()

    def __post_init__(self) -> None:
        mean = np.array(self.mean, dtype=float)
        cov = np.array(self.cov, dtype=float)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] % 2:
            raise ValueError(f"Covariância deve ser 2M×2M, recebida {cov.shape}")
        if mean.shape != (cov.shape[0],):
            raise ValueError("Vetor de médias incompatível com a covariância")
        if not np.allclose(cov, cov.T, atol=SYMMETRY_ATOL, rtol=0.0):
            raise ValueError("Covariância não é simétrica")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "consumed", frozenset(self.consumed))

    @property
    def n_modes(self) -> int:
        return self.cov.shape[0] // 2

    @property
    def active_modes(self) -> Tuple[int, ...]:
        return tuple(k for k in range(self.n_modes) if k not in self.consumed)

    def mode_block(self, mode: int) -> np.ndarray:
        return np.array(self.cov[2 * mode:2 * mode + 2, 2 * mode:2 * mode + 2])


def _index(mode: int, axis: QuadratureAxis) -> int:
    return 2 * mode + (0 if axis is QuadratureAxis.Q else 1)


def _check_mode(state: GaussianState, mode: int) -> None:
    if not 0 <= mode < state.n_modes:
        raise ValueError(f"Modo {mode} fora do estado de {state.n_modes} modos")


def from_covariance(cov: Union[np.ndarray, Sequence[Sequence[float]]],
                    mean: Optional[Sequence[float]] = None) -> GaussianState:
    """
    Constrói um estado a partir de uma covariância explícita, validando a física

    Args:
        cov: Matriz 2M×2M em ordem intercalada
        mean: Vetor de médias (zero se omitido)

    Returns:
        Estado validado
    """
    cov = np.asarray(cov, dtype=float)
    state = GaussianState(np.zeros(cov.shape[0]) if mean is None else np.asarray(mean), cov)
    if not is_physical(state):
        nu = symplectic_eigenvalues(state)
        raise UnphysicalStateError(
            f"Covariância não física: menor autovalor simplético {nu.min():.6g} < 1"
        )
    return state


def vacuum(n_modes: int) -> GaussianState:
    """Vácuo de M modos"""
    if n_modes < 1:
        raise ValueError("Estado precisa de ao menos um modo")
    return GaussianState(np.zeros(2 * n_modes), np.eye(2 * n_modes))


def squeezed(s: float, axis: QuadratureAxis) -> GaussianState:
    """Estado comprimido de um modo (variância e^{−2s} em `axis`)"""
    if not np.isfinite(s):
        raise ValueError("Parâmetro de squeezing deve ser finito")
    low, high = np.exp(-2.0 * s), np.exp(2.0 * s)
    diag = [low, high] if axis is QuadratureAxis.Q else [high, low]
    return GaussianState(np.zeros(2), np.diag(diag))


def thermal(variance: float) -> GaussianState:
    """Estado térmico de um modo com variância `variance` nas duas quadraturas"""
    if variance < 1.0 - PHYSICALITY_TOL:
        raise UnphysicalStateError(f"Variância térmica {variance} abaixo do vácuo")
    return GaussianState(np.zeros(2), variance * np.eye(2))


def two_mode_squeezed(s: float) -> GaussianState:
    """Vácuo comprimido de dois modos"""
    if s < 0:
        raise ValueError("Squeezing de dois modos exige s >= 0")
    c, sh = np.cosh(2.0 * s), np.sinh(2.0 * s)
    cov = np.array([
        [c, 0.0, sh, 0.0],
        [0.0, c, 0.0, -sh],
        [sh, 0.0, c, 0.0],
        [0.0, -sh, 0.0, c],
    ])
    return GaussianState(np.zeros(4), cov)


def _interleave(q_block: np.ndarray, p_block: np.ndarray) -> np.ndarray:
    n = q_block.shape[0]
    cov = np.zeros((2 * n, 2 * n))
    cov[0::2, 0::2] = q_block
    cov[1::2, 1::2] = p_block
    return cov


def ghz_state(n_modes: int, s: float) -> GaussianState:
    """
    Estado GHZ de variáveis contínuas

    Posições relativas comprimidas e momento total comprimido.

    Args:
        n_modes: Número N de modos (>= 2)
        s: Squeezing das fontes

    Returns:
        Estado puro de N modos
    """
    if n_modes < 2:
        raise ValueError("Estado GHZ exige N >= 2")
    ones = np.ones((n_modes, n_modes)) / n_modes
    eye = np.eye(n_modes)
    up, down = np.exp(2.0 * s), np.exp(-2.0 * s)
    q_block = ones * up + (eye - ones) * down
    p_block = ones * down + (eye - ones) * up
    return GaussianState(np.zeros(2 * n_modes), _interleave(q_block, p_block))


def epr_type_state(n_modes: int, s: float, undivided: int = 1) -> GaussianState:
    """
    Estado tipo EPR: um braço de um vácuo comprimido de dois modos fica inteiro,
    o outro é dividido igualmente entre os N−1 modos restantes (vácuo nas portas livres)

    Args:
        n_modes: Número N de modos (>= 3)
        s: Squeezing do par
        undivided: Modo (1-based) que recebe o braço inteiro

    Returns:
        Estado de N modos
    """
    if n_modes < 3:
        raise ValueError("Estado tipo EPR exige N >= 3")
    if not 1 <= undivided <= n_modes:
        raise ValueError(f"Braço inteiro {undivided} fora de 1..{n_modes}")
    c, sh = np.cosh(2.0 * s), np.sinh(2.0 * s)
    u = undivided - 1
    others = [k for k in range(n_modes) if k != u]
    share = len(others)
    q_block = np.eye(n_modes)
    p_block = np.eye(n_modes)
    q_block[u, u] = p_block[u, u] = c
    for k in others:
        q_block[u, k] = q_block[k, u] = sh / np.sqrt(share)
        p_block[u, k] = p_block[k, u] = -sh / np.sqrt(share)
        for l in others:
            q_block[k, l] += (c - 1.0) / share
            p_block[k, l] += (c - 1.0) / share
    return GaussianState(np.zeros(2 * n_modes), _interleave(q_block, p_block))


def tensor(states: Iterable[GaussianState]) -> GaussianState:
    """Produto tensorial (soma direta das covariâncias)"""
    states = list(states)
    if not states:
        raise ValueError("tensor precisa de ao menos um estado")
    consumed = set()
    offset = 0
    for state in states:
        consumed.update(k + offset for k in state.consumed)
        offset += state.n_modes
    return GaussianState(
        np.concatenate([state.mean for state in states]),
        block_diag(*[state.cov for state in states]),
        frozenset(consumed),
    )


def apply_symplectic(state: GaussianState, matrix: np.ndarray,
                     displacement: Optional[np.ndarray] = None) -> GaussianState:
    """
    Evolução gaussiana: média ← S·média + d, cov ← S·cov·Sᵀ

    Args:
        state: Estado de entrada
        matrix: Matriz simplética 2M×2M
        displacement: Deslocamento (zero se omitido)

    Returns:
        Estado evoluído
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != state.cov.shape:
        raise BasisMismatchError(f"Matriz {matrix.shape} incompatível com estado {state.cov.shape}")
    if not is_symplectic(matrix, atol=1e-10):
        raise NotSymplecticError("Transformação não é simplética")
    mean = matrix @ state.mean
    if displacement is not None:
        mean = mean + np.asarray(displacement, dtype=float)
    cov = matrix @ state.cov @ matrix.T
    return GaussianState(mean, 0.5 * (cov + cov.T), state.consumed)


def passive_symplectic(orthogonal: np.ndarray) -> np.ndarray:
    """Matriz simplética de uma rede passiva real (mesma mistura em q e p)"""
    return np.kron(np.asarray(orthogonal, dtype=float), np.eye(2))


def phase_shift(state: GaussianState, mode: int, theta: float) -> GaussianState:
    """Rotação de fase: q ← q cosθ + p sinθ, p ← −q sinθ + p cosθ"""
    _check_mode(state, mode)
    matrix = np.eye(2 * state.n_modes)
    c, s = np.cos(theta), np.sin(theta)
    matrix[2 * mode:2 * mode + 2, 2 * mode:2 * mode + 2] = [[c, s], [-s, c]]
    return apply_symplectic(state, matrix)


def local_squeeze(state: GaussianState, mode: int, factor: float) -> GaussianState:
    """Squeeze local: q ← factor·q, p ← p/factor"""
    _check_mode(state, mode)
    matrix = np.eye(2 * state.n_modes)
    matrix[2 * mode, 2 * mode] = factor
    matrix[2 * mode + 1, 2 * mode + 1] = 1.0 / factor
    return apply_symplectic(state, matrix)


def _conditioning(state: GaussianState, index: int) -> Tuple[float, np.ndarray, np.ndarray]:
    """Variância marginal, vetor de ganho e covariância condicionada (complemento de Schur)"""
    variance = float(state.cov[index, index])
    column = np.array(state.cov[:, index])
    if variance < PINV_THRESHOLD:
        gain = np.zeros_like(column)
    else:
        gain = column / variance
    cov = np.array(state.cov) - np.outer(gain, column)
    return variance, gain, cov


def _consume(cov: np.ndarray, mode: int, axis: QuadratureAxis, cap: float) -> np.ndarray:
    block = slice(2 * mode, 2 * mode + 2)
    cov[block, :] = 0.0
    cov[:, block] = 0.0
    measured = _index(mode, axis)
    conjugate = _index(mode, axis.conjugate)
    cov[measured, measured] = 1.0 / cap
    cov[conjugate, conjugate] = cap
    return 0.5 * (cov + cov.T)


def homodyne_measure(state: GaussianState, mode: int, axis: QuadratureAxis,
                     rng: np.random.Generator, label: Optional[ModeLabel] = None,
                     cap: float = DEFAULT_CONSUMED_VARIANCE_CAP
                     ) -> Tuple[HomodyneRecord, GaussianState]:
    """
    Detecção homodina de uma quadratura com condicionamento gaussiano

    Args:
        state: Estado antes da medida
        mode: Modo medido (0-based)
        axis: Quadratura medida
        rng: Gerador aleatório
        label: Rótulo registrado no resultado (alvo mode+1 se omitido)
        cap: Variância atribuída à quadratura conjugada do modo consumido

    Returns:
        Registro da medida e estado condicionado
    """
    _check_mode(state, mode)
    if mode in state.consumed:
        raise ConsumedModeError(f"Modo {mode} já foi medido")
    index = _index(mode, axis)
    variance, gain, cov = _conditioning(state, index)
    outcome = float(state.mean[index] + np.sqrt(max(variance, 0.0)) * rng.standard_normal())
    mean = np.array(state.mean) + gain * (outcome - state.mean[index])
    mean[index] = outcome
    mean[_index(mode, axis.conjugate)] = 0.0
    record = HomodyneRecord(label or ModeLabel.target(mode + 1), axis, outcome)
    conditioned = GaussianState(mean, _consume(cov, mode, axis, cap), state.consumed | {mode})
    logger.debug(f"Homodina {axis.value}{record.mode}: resultado {outcome:.6g}, variância {variance:.6g}")
    return record, conditioned


def homodyne_sample(state: GaussianState, mode: int, axis: QuadratureAxis,
                    rng: np.random.Generator, size: Optional[int] = None,
                    means: Optional[np.ndarray] = None,
                    cap: float = DEFAULT_CONSUMED_VARIANCE_CAP
                    ) -> Tuple[np.ndarray, np.ndarray, GaussianState]:
    """
    Versão vetorizada de homodyne_measure para lotes de trajetórias

    A covariância condicionada não depende do resultado, então é única para o lote.

    Args:
        state: Estado (covariância comum; média usada se `means` for omitido)
        mode: Modo medido (0-based)
        axis: Quadratura medida
        rng: Gerador aleatório
        size: Número de trajetórias (obrigatório sem `means`)
        means: Médias por trajetória, forma (n, 2M)
        cap: Variância da conjugada do modo consumido

    Returns:
        Resultados (n,), médias condicionadas (n, 2M) e estado condicionado
    """
    _check_mode(state, mode)
    if mode in state.consumed:
        raise ConsumedModeError(f"Modo {mode} já foi medido")
    if means is None:
        if size is None:
            raise ValueError("Informe size ou means")
        means = np.tile(state.mean, (size, 1))
    means = np.asarray(means, dtype=float)
    index = _index(mode, axis)
    variance, gain, cov = _conditioning(state, index)
    outcomes = means[:, index] + np.sqrt(max(variance, 0.0)) * rng.standard_normal(means.shape[0])
    conditioned_means = means + np.outer(outcomes - means[:, index], gain)
    conditioned_means[:, index] = outcomes
    conditioned_means[:, _index(mode, axis.conjugate)] = 0.0
    conditioned = GaussianState(state.mean, _consume(cov, mode, axis, cap), state.consumed | {mode})
    return outcomes, conditioned_means, conditioned


def displace(state: GaussianState, mode: int, axis: QuadratureAxis, amount: float) -> GaussianState:
    """Desloca a média de (mode, axis) por `amount`"""
    _check_mode(state, mode)
    mean = np.array(state.mean)
    mean[_index(mode, axis)] += amount
    return GaussianState(mean, state.cov, state.consumed)


def _coefficient_vector(state: GaussianState, form: Union[LinearForm, np.ndarray]) -> np.ndarray:
    coeffs = np.asarray(form.coeffs if isinstance(form, LinearForm) else form, dtype=float)
    size = state.cov.shape[0]
    if coeffs.shape[0] > size:
        if np.any(coeffs[size:] != 0.0):
            raise BasisMismatchError("Forma envolve modos ausentes do estado")
        coeffs = coeffs[:size]
    elif coeffs.shape[0] < size:
        raise BasisMismatchError("Forma menor que o estado")
    for mode in state.consumed:
        if np.any(coeffs[2 * mode:2 * mode + 2] != 0.0):
            raise ConsumedModeError(f"Forma envolve o modo consumido {mode}")
    return coeffs


def quad_variance(state: GaussianState, form: Union[LinearForm, np.ndarray]) -> float:
    """
    Variância de uma combinação linear de quadraturas: cᵀ·cov·c

    Args:
        state: Estado
        form: Forma linear (ou vetor de coeficientes); a constante é ignorada

    Returns:
        Variância
    """
    coeffs = _coefficient_vector(state, form)
    return float(coeffs @ state.cov @ coeffs)


def quad_mean(state: GaussianState, form: LinearForm) -> float:
    """Valor médio de uma forma linear (inclui a constante)"""
    coeffs = _coefficient_vector(state, form)
    return float(coeffs @ state.mean + form.constant)


def reduced(state: GaussianState, modes: Sequence[int]) -> GaussianState:
    """Estado reduzido aos modos indicados (0-based, na ordem dada)"""
    for mode in modes:
        _check_mode(state, mode)
    index = np.array([2 * k + a for k in modes for a in (0, 1)], dtype=int)
    consumed = frozenset(i for i, k in enumerate(modes) if k in state.consumed)
    return GaussianState(state.mean[index], state.cov[np.ix_(index, index)], consumed)


def symplectic_eigenvalues(state: GaussianState) -> np.ndarray:
    """Autovalores simpléticos dos modos não consumidos (ordenados)"""
    active = reduced(state, state.active_modes) if state.consumed else state
    if active.n_modes == 0:
        return np.zeros(0)
    omega = symplectic_form(active.n_modes)
    spectrum = np.sort(np.abs(np.linalg.eigvals(1j * omega @ active.cov)))
    return spectrum[0::2]


def physicality_tolerance(state: GaussianState, tol: float = PHYSICALITY_TOL) -> float:
    """Tolerância dos autovalores simpléticos, crescendo com ‖V‖ (ganhos ~ 1/t_d)"""
    if state.n_modes == 0:
        return tol
    norm = float(np.linalg.norm(state.cov, 2))
    return max(tol, PHYSICALITY_NORM_RTOL * np.finfo(float).eps * norm)


def is_physical(state: GaussianState, tol: float = PHYSICALITY_TOL) -> bool:
    """Todos os autovalores simpléticos >= 1 − tol (tol relativa a ‖V‖ se maior)"""
    if not state.active_modes:
        return True
    active = reduced(state, state.active_modes) if state.consumed else state
    return bool(np.all(symplectic_eigenvalues(active) >= 1.0 - physicality_tolerance(active, tol)))
