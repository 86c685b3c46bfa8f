"""
Exceções do qnd-runner

Todas derivam de ValueError para que chamadores possam tratar entradas
inválidas de forma uniforme.
"""


class QndError(ValueError):
    """Erro base do qnd-runner"""


class BasisMismatchError(QndError):
    """Formas ou registradores definidos sobre bases diferentes"""


class NonUnitaryError(QndError):
    """Divisor de feixe com t² + r² ≠ 1"""


class NotSymplecticError(QndError):
    """Matriz que deveria ser simplética não é"""


class ConsumedModeError(QndError):
    """Operação sobre um modo já medido"""


class UnphysicalStateError(QndError):
    """Matriz de covariância viola a incerteza (autovalor simplético < 1)"""


class CompatibilityError(QndError):
    """Condição de compatibilidade sem raiz ou em desacordo com a forma fechada"""


class ClosedFormMismatchError(QndError):
    """Resultado numérico diverge da expressão fechada esperada"""


class FormulaUnavailableError(QndError):
    """Não existe expressão fechada para a variante ou lado pedido"""


class DegenerateSpecError(QndError):
    """min S_B = 0, o certificador não está definido"""


class ConfigError(QndError):
    """Configuração de execução inválida"""
