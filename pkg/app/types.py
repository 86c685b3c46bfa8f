"""
Tipos e contratos para o qnd-runner
"""

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, FrozenSet, List, Optional, Tuple, Union

import numpy as np

from .exceptions import ConfigError


class ModeKind(Enum):
    """Papel de um modo no esquema"""
    TARGET = "target"
    ANCILLA_A = "A"
    ANCILLA_B = "B"


class QuadratureAxis(Enum):
    """Quadratura de um modo"""
    Q = "q"
    P = "p"

    @property
    def conjugate(self) -> "QuadratureAxis":
        return QuadratureAxis.P if self is QuadratureAxis.Q else QuadratureAxis.Q


class Variant(Enum):
    """Configurações de divisores de feixe suportadas"""
    UNIFORM_LAST = "uniform-last"
    ALT_BN = "alt-bn"


class Side(Enum):
    """Lado monitorado pelo certificador"""
    INPUT = "input"
    OUTPUT = "output"
    BOTH = "both"


class InputFamily(Enum):
    """Famílias de estado de entrada dos modos alvo"""
    VACUUM = "vacuum"
    GHZ = "ghz"
    EPR_TYPE = "epr-type"
    EXPLICIT = "explicit"


@dataclass(frozen=True)
class ModeLabel:
    """Rótulo de um modo: alvo j (1..N) ou ancila A/B"""
    kind: ModeKind
    index: int = 0

    def __post_init__(self) -> None:
        if self.kind is ModeKind.TARGET and self.index < 1:
            raise ValueError(f"Índice de modo alvo deve ser >= 1, recebido {self.index}")
        if self.kind is not ModeKind.TARGET and self.index != 0:
            raise ValueError("Ancilas não carregam índice")

    @classmethod
    def target(cls, j: int) -> "ModeLabel":
        return cls(ModeKind.TARGET, j)

    @classmethod
    def ancilla_a(cls) -> "ModeLabel":
        return cls(ModeKind.ANCILLA_A)

    @classmethod
    def ancilla_b(cls) -> "ModeLabel":
        return cls(ModeKind.ANCILLA_B)

    @property
    def is_target(self) -> bool:
        return self.kind is ModeKind.TARGET

    def position(self, n_targets: int) -> int:
        """
        Posição do modo na base fixa (alvos 1..N, depois A, depois B)

        Args:
            n_targets: Número N de modos alvo

        Returns:
            Índice 0-based do modo
        """
        if self.kind is ModeKind.TARGET:
            if self.index > n_targets:
                raise ValueError(f"Modo alvo {self.index} fora de 1..{n_targets}")
            return self.index - 1
        return n_targets if self.kind is ModeKind.ANCILLA_A else n_targets + 1

    def __str__(self) -> str:
        return str(self.index) if self.is_target else self.kind.value


@dataclass(frozen=True)
class HomodyneRecord:
    """Resultado de uma detecção homodina"""
    mode: ModeLabel
    axis: QuadratureAxis
    outcome: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.outcome):
            raise ValueError("Resultado homodino deve ser finito")

    def photocurrent(self, k: float = 1.0) -> float:
        """Fotocorrente proporcional ao resultado (constante do detector k)"""
        return k * self.outcome


@dataclass(frozen=True)
class GainOverrides:
    """Ganhos manuais de feedforward (φ_j em q, γ_j em p)"""
    phi: Tuple[float, ...]
    gamma: Tuple[float, ...]


@dataclass(frozen=True, eq=False)
class CoefficientTable:
    """Coeficientes do esquema para uma configuração compatível"""
    t_d: float
    r_d: float
    f: np.ndarray
    g: np.ndarray
    G: np.ndarray
    u_weights: np.ndarray  # parte alvo de p_A^out / escala
    v_weights: np.ndarray  # parte alvo de q_B^out / escala
    readout_scale: float
    probe_rescale: float = 1.0  # squeeze local aplicado ao modo sonda (alt-bn)

    @property
    def gain_scale(self) -> float:
        return float(max(1.0, np.max(np.abs(self.f)), np.max(np.abs(self.g))))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "t_d": self.t_d,
            "r_d": self.r_d,
            "f": self.f.tolist(),
            "g": self.g.tolist(),
            "G": self.G.tolist(),
            "u_weights": self.u_weights.tolist(),
            "v_weights": self.v_weights.tolist(),
            "readout_scale": self.readout_scale,
            "probe_rescale": self.probe_rescale,
        }


@dataclass(frozen=True, eq=False)
class UVSpec:
    """Pesos de û = Σ a_j p̂_j e v̂ = Σ b_j q̂_j"""
    a: np.ndarray
    b: np.ndarray
    side: Side

    def __post_init__(self) -> None:
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise ValueError("Vetores a e b devem ter o mesmo comprimento N")
        if self.side is Side.BOTH:
            raise ValueError("UVSpec pertence a um único lado")

    @property
    def n_modes(self) -> int:
        return int(self.a.shape[0])

    def scaled(self, factor: float) -> "UVSpec":
        return UVSpec(self.a * factor, self.b * factor, self.side)


@dataclass(frozen=True)
class Bipartition:
    """Bipartição canônica {1..N} = left ∪ right, com 1 ∈ left"""
    left: FrozenSet[int]
    right: FrozenSet[int]

    def __post_init__(self) -> None:
        if not self.left or not self.right:
            raise ValueError("Os dois lados da bipartição devem ser não vazios")
        if self.left & self.right:
            raise ValueError("Lados da bipartição devem ser disjuntos")
        if 1 not in self.left:
            raise ValueError("Forma canônica exige o modo 1 no lado esquerdo")
        if self.left | self.right != frozenset(range(1, len(self.left) + len(self.right) + 1)):
            raise ValueError("Bipartição deve cobrir os modos 1..N")

    @classmethod
    def of(cls, subset: FrozenSet[int], n: int) -> "Bipartition":
        """Cria a forma canônica a partir de qualquer um dos lados"""
        everything = frozenset(range(1, n + 1))
        left = subset if 1 in subset else everything - subset
        return cls(frozenset(left), everything - frozenset(left))

    def __str__(self) -> str:
        return (",".join(str(k) for k in sorted(self.left)) + "|"
                + ",".join(str(k) for k in sorted(self.right)))


@dataclass(frozen=True)
class CertResult:
    """Resultado do certificador de emaranhamento genuíno"""
    var_u: float
    var_v: float
    s_b_all: Dict[Bipartition, float] = field(hash=False)
    min_s_b: float
    argmin: FrozenSet[Bipartition]
    ent: float
    certified: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "var_u": self.var_u,
            "var_v": self.var_v,
            "s_b": {str(bp): value for bp, value in self.s_b_all.items()},
            "min_s_b": self.min_s_b,
            "argmin": sorted(str(bp) for bp in self.argmin),
            "ent": self.ent,
            "certified": self.certified,
        }


SCAN_COLUMNS = [
    "t_o", "t_d", "s", "var_u", "var_v", "min_s_b",
    "ent_in", "ent_out", "certified_in", "certified_out",
]


@dataclass
class ScanRow:
    """Linha de uma varredura (t_o, s)"""
    t_o: float
    t_d: float
    s: float
    var_u: Optional[float] = None
    var_v: Optional[float] = None
    min_s_b: Optional[float] = None
    ent_in: Optional[float] = None
    ent_out: Optional[float] = None
    certified_in: Optional[bool] = None
    certified_out: Optional[bool] = None

    def to_record(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in SCAN_COLUMNS}


@dataclass(frozen=True)
class RangeSpec:
    """Grade linear inclusiva {min, max, steps}"""
    min: float
    max: float
    steps: int

    def __post_init__(self) -> None:
        if self.steps < 2:
            raise ConfigError(f"Intervalo precisa de steps >= 2, recebido {self.steps}")
        if not self.min < self.max:
            raise ConfigError(f"Intervalo exige min < max ({self.min} >= {self.max})")

    def values(self) -> List[float]:
        return [float(v) for v in np.linspace(self.min, self.max, self.steps)]


ScalarOrRange = Union[float, RangeSpec]


@dataclass(frozen=True)
class MonteCarloOptions:
    """Parâmetros da simulação de trajetórias"""
    samples: int
    seed: int = 0


@dataclass(frozen=True, eq=False)
class RunConfig:
    """Configuração de execução lida do JSON"""
    n: int
    m: int
    variant: Variant
    t_o: ScalarOrRange
    s: ScalarOrRange
    state: InputFamily
    ancilla_squeeze_db: float = 60.0
    side: Side = Side.INPUT
    mc: Optional[MonteCarloOptions] = None
    alpha: float = 1.0
    beta: float = 1.0
    k_a: float = 1.0
    k_b: float = 1.0
    covariance: Optional[np.ndarray] = None
    mean: Optional[np.ndarray] = None

    @property
    def is_scalar(self) -> bool:
        return not isinstance(self.t_o, RangeSpec) and not isinstance(self.s, RangeSpec)

    def t_o_values(self) -> List[float]:
        return self.t_o.values() if isinstance(self.t_o, RangeSpec) else [float(self.t_o)]

    def s_values(self) -> List[float]:
        return self.s.values() if isinstance(self.s, RangeSpec) else [float(self.s)]

    def to_dict(self) -> Dict[str, Any]:
        """Eco da configuração para relatórios"""
        def _value(v: ScalarOrRange) -> Any:
            if isinstance(v, RangeSpec):
                return {"min": v.min, "max": v.max, "steps": v.steps}
            return v

        data: Dict[str, Any] = {
            "n": self.n,
            "m": self.m,
            "variant": self.variant.value,
            "t_o": _value(self.t_o),
            "s": _value(self.s),
            "state": self.state.value,
            "ancilla_squeeze_db": self.ancilla_squeeze_db,
            "side": self.side.value,
            "alpha": self.alpha,
            "beta": self.beta,
            "k_a": self.k_a,
            "k_b": self.k_b,
        }
        if self.covariance is not None:
            data["state"] = {"covariance": self.covariance.tolist()}
            if self.mean is not None:
                data["state"]["mean"] = self.mean.tolist()
        if self.mc is not None:
            data["mc"] = {"samples": self.mc.samples, "seed": self.mc.seed}
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)
