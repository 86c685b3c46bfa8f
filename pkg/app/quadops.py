"""
Álgebra de Heisenberg das quadraturas

Cada quadratura é uma forma linear real sobre as quadraturas de entrada
de N modos alvo e das duas ancilas (ordem: alvos 1..N, A, B; dentro de
cada modo q antes de p). Convenção [q, p] = 2i, variância do vácuo = 1.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from .exceptions import BasisMismatchError, NonUnitaryError
from .types import ModeLabel, QuadratureAxis

logger = logging.getLogger(__name__)

KAPPA = 2.0
COEFF_ATOL = 1e-12
UNITARITY_ATOL = 1e-12
MAX_TARGETS = 32


def basis_size(n_targets: int) -> int:
    """Número de quadraturas da base fixa (N alvos + 2 ancilas)"""
    return 2 * (n_targets + 2)


def mode_index(label: ModeLabel, n_targets: int) -> int:
    """Posição 0-based do modo na base fixa"""
    return label.position(n_targets)


def quad_index(label: ModeLabel, axis: QuadratureAxis, n_targets: int) -> int:
    """Posição 0-based da quadratura (ordem intercalada q1, p1, q2, ...)"""
    return 2 * label.position(n_targets) + (0 if axis is QuadratureAxis.Q else 1)


def _all_labels(n_targets: int) -> Tuple[ModeLabel, ...]:
    targets = tuple(ModeLabel.target(j) for j in range(1, n_targets + 1))
    return targets + (ModeLabel.ancilla_a(), ModeLabel.ancilla_b())


def symplectic_form(n_modes: int) -> np.ndarray:
    """Forma simplética Ω na ordem intercalada"""
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def is_symplectic(matrix: np.ndarray, atol: float = 1e-10) -> bool:
    """
    Verifica S Ω Sᵀ = Ω

    Args:
        matrix: Matriz quadrada 2M×2M
        atol: Tolerância absoluta entrada a entrada

    Returns:
        True se a matriz é simplética
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] % 2:
        return False
    omega = symplectic_form(matrix.shape[0] // 2)
    return bool(np.allclose(matrix @ omega @ matrix.T, omega, atol=atol, rtol=0.0))


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LinearForm:
    """Quadratura expressa como combinação linear das quadraturas de entrada"""
    n_targets: int
    coeffs: np.ndarray
    constant: float = 0.0

    def __post_init__(self) -> None:
        coeffs = _frozen(self.coeffs)
        if coeffs.shape != (basis_size(self.n_targets),):
            raise BasisMismatchError(
                f"Forma com {coeffs.shape} coeficientes não pertence à base de "
                f"{self.n_targets} alvos"
            )
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "constant", float(self.constant))

    def coefficient(self, mode: ModeLabel, axis: QuadratureAxis) -> float:
        return float(self.coeffs[quad_index(mode, axis, self.n_targets)])

    def target_vector(self, axis: QuadratureAxis) -> np.ndarray:
        """Coeficientes da quadratura `axis` dos modos alvo 1..N"""
        offset = 0 if axis is QuadratureAxis.Q else 1
        return np.array(self.coeffs[offset:2 * self.n_targets:2])

    def target_part(self) -> "LinearForm":
        """Sub-forma restrita aos modos alvo"""
        coeffs = np.array(self.coeffs)
        coeffs[2 * self.n_targets:] = 0.0
        return LinearForm(self.n_targets, coeffs)

    def ancilla_part(self) -> "LinearForm":
        """Sub-forma restrita às ancilas"""
        coeffs = np.array(self.coeffs)
        coeffs[:2 * self.n_targets] = 0.0
        return LinearForm(self.n_targets, coeffs)

    def max_deviation(self, other: "LinearForm") -> float:
        if other.n_targets != self.n_targets:
            raise BasisMismatchError("Formas sobre bases diferentes")
        return float(np.max(np.abs(self.coeffs - other.coeffs)))

    def isclose(self, other: "LinearForm", atol: float = COEFF_ATOL) -> bool:
        return self.max_deviation(other) <= atol and abs(self.constant - other.constant) <= atol

    def as_dict(self, atol: float = 0.0) -> Dict[str, float]:
        """Coeficientes não nulos rotulados (ex.: {"q1": 1.0, "pA": -0.3})"""
        result: Dict[str, float] = {}
        for label in _all_labels(self.n_targets):
            for axis in QuadratureAxis:
                value = self.coefficient(label, axis)
                if abs(value) > atol:
                    result[f"{axis.value}{label}"] = value
        if self.constant:
            result["const"] = self.constant
        return result

    def __add__(self, other: "LinearForm") -> "LinearForm":
        return lf_combine([(1.0, self), (1.0, other)])

    def __sub__(self, other: "LinearForm") -> "LinearForm":
        return lf_combine([(1.0, self), (-1.0, other)])

    def __mul__(self, scalar: float) -> "LinearForm":
        return lf_combine([(scalar, self)])

    __rmul__ = __mul__

    def __neg__(self) -> "LinearForm":
        return lf_combine([(-1.0, self)])


def lf_basis(mode: ModeLabel, axis: QuadratureAxis, n_targets: int) -> LinearForm:
    """
    Forma unitária de (mode, axis)

    Args:
        mode: Modo
        axis: Quadratura
        n_targets: Número N de modos alvo da base

    Returns:
        Forma com coeficiente 1 em (mode, axis) e zero no resto
    """
    coeffs = np.zeros(basis_size(n_targets))
    coeffs[quad_index(mode, axis, n_targets)] = 1.0
    return LinearForm(n_targets, coeffs)


def lf_from_terms(terms: Mapping[Tuple[ModeLabel, QuadratureAxis], float],
                  n_targets: int, constant: float = 0.0) -> LinearForm:
    """Monta uma forma a partir de um mapa (modo, quadratura) → coeficiente"""
    coeffs = np.zeros(basis_size(n_targets))
    for (mode, axis), value in terms.items():
        coeffs[quad_index(mode, axis, n_targets)] += value
    return LinearForm(n_targets, coeffs, constant)


def lf_combine(terms: Iterable[Tuple[float, LinearForm]]) -> LinearForm:
    """
    Soma ponderada de formas coeficiente a coeficiente

    Args:
        terms: Pares (peso, forma), todos sobre a mesma base

    Returns:
        Forma resultante (constantes somadas com os mesmos pesos)
    """
    terms = list(terms)
    if not terms:
        raise ValueError("lf_combine precisa de ao menos um termo")
    n_targets = terms[0][1].n_targets
    coeffs = np.zeros(basis_size(n_targets))
    constant = 0.0
    for weight, form in terms:
        if form.n_targets != n_targets:
            raise BasisMismatchError(
                f"Bases incompatíveis: {form.n_targets} e {n_targets} alvos"
            )
        coeffs += weight * form.coeffs
        constant += weight * form.constant
    return LinearForm(n_targets, coeffs, constant)


def bracket(u: LinearForm, v: LinearForm) -> float:
    """
    Coeficiente c-número de [û, v̂]/i

    Args:
        u: Primeira forma
        v: Segunda forma

    Returns:
        κ Σ_modos (u_q v_p − u_p v_q)
    """
    if u.n_targets != v.n_targets:
        raise BasisMismatchError("Comutador entre formas de bases diferentes")
    uq, up = u.coeffs[0::2], u.coeffs[1::2]
    vq, vp = v.coeffs[0::2], v.coeffs[1::2]
    return float(KAPPA * (uq @ vp - up @ vq))


@dataclass(frozen=True, eq=False)
class ModeRegister:
    """Formas de Heisenberg de todos os modos (linha 2k = q, 2k+1 = p do modo k)"""
    n_targets: int
    rows: np.ndarray
    offsets: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        size = basis_size(self.n_targets)
        rows = _frozen(self.rows)
        if rows.shape != (size, size):
            raise BasisMismatchError(f"Registrador deve ser {size}×{size}, recebido {rows.shape}")
        offsets = np.zeros(size) if self.offsets is None else self.offsets
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "offsets", _frozen(offsets))

    def form(self, mode: ModeLabel, axis: QuadratureAxis) -> LinearForm:
        index = quad_index(mode, axis, self.n_targets)
        assert self.offsets is not None
        return LinearForm(self.n_targets, self.rows[index], float(self.offsets[index]))

    def matrix(self) -> np.ndarray:
        """Matriz de coeficientes (linha = quadratura de saída, coluna = de entrada)"""
        return np.array(self.rows)

    def is_canonical(self, atol: float = COEFF_ATOL) -> bool:
        """Todos os comutadores intra-modo valem κ e os inter-modo valem 0"""
        return is_symplectic(self.rows, atol=atol)

    def _replace(self, updates: Mapping[int, LinearForm]) -> "ModeRegister":
        rows = np.array(self.rows)
        offsets = np.array(self.offsets)
        for index, form in updates.items():
            rows[index] = form.coeffs
            offsets[index] = form.constant
        return ModeRegister(self.n_targets, rows, offsets)


def initial_register(n_targets: int) -> ModeRegister:
    """Registrador inicial: cada modo igual à sua forma de base"""
    if not 1 <= n_targets <= MAX_TARGETS:
        raise ValueError(f"Número de alvos deve estar em 1..{MAX_TARGETS}, recebido {n_targets}")
    return ModeRegister(n_targets, np.eye(basis_size(n_targets)))


def apply_beamsplitter(reg: ModeRegister, x: ModeLabel, y: ModeLabel,
                       t: float, r: float) -> ModeRegister:
    """
    Divisor de feixe entre x e y

    X_x ← t X_x + r X_y e X_y ← t X_y − r X_x, igual para q e p.

    Args:
        reg: Registrador atual
        x: Primeiro modo
        y: Segundo modo
        t: Transmissão
        r: Reflexão (com sinal)

    Returns:
        Novo registrador
    """
    if x == y:
        raise ValueError(f"Divisor de feixe precisa de dois modos distintos ({x})")
    if abs(t * t + r * r - 1.0) > UNITARITY_ATOL:
        raise NonUnitaryError(f"t² + r² = {t * t + r * r!r} ≠ 1")
    updates: Dict[int, LinearForm] = {}
    for axis in QuadratureAxis:
        fx = reg.form(x, axis)
        fy = reg.form(y, axis)
        updates[quad_index(x, axis, reg.n_targets)] = lf_combine([(t, fx), (r, fy)])
        updates[quad_index(y, axis, reg.n_targets)] = lf_combine([(t, fy), (-r, fx)])
    return reg._replace(updates)


def apply_feedforward(reg: ModeRegister, target: ModeLabel, axis: QuadratureAxis,
                      gain: float, measured: LinearForm) -> ModeRegister:
    """
    Modulação do modo alvo pelo resultado medido

    Args:
        reg: Registrador atual
        target: Modo a ser deslocado
        axis: Quadratura deslocada
        gain: Ganho aplicado ao resultado
        measured: Forma da quadratura medida

    Returns:
        Novo registrador com a forma (target, axis) + gain·measured
    """
    if measured.n_targets != reg.n_targets:
        raise BasisMismatchError("Forma medida e registrador em bases diferentes")
    if gain == 0.0:
        return reg
    index = quad_index(target, axis, reg.n_targets)
    current = reg.form(target, axis)
    return reg._replace({index: lf_combine([(1.0, current), (gain, measured)])})


def apply_local_squeeze(reg: ModeRegister, mode: ModeLabel, factor: float) -> ModeRegister:
    """
    Squeeze local de um modo: q ← factor·q, p ← p/factor

    Args:
        reg: Registrador atual
        mode: Modo afetado
        factor: Fator de escala (não nulo)

    Returns:
        Novo registrador
    """
    if factor == 0.0 or not np.isfinite(factor):
        raise ValueError(f"Fator de squeeze inválido: {factor}")
    q_form = reg.form(mode, QuadratureAxis.Q)
    p_form = reg.form(mode, QuadratureAxis.P)
    return reg._replace({
        quad_index(mode, QuadratureAxis.Q, reg.n_targets): q_form * factor,
        quad_index(mode, QuadratureAxis.P, reg.n_targets): p_form * (1.0 / factor),
    })
