"""
Variáveis de ambiente: substituição ${env:VAR} nas configurações e ajustes de execução
"""

import logging
import os
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from .exceptions import ConfigError

try:
    from dotenv import load_dotenv
    DOTENV_AVAILABLE = True
except ImportError:
    DOTENV_AVAILABLE = False

logger = logging.getLogger(__name__)

ENV_PATTERN = re.compile(r'\$\{env:([^}]+)\}')
NUMBER_PATTERN = re.compile(r'^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$')
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


def _dotenv_candidates() -> List[Path]:
    return [
        Path.cwd() / '.env',
        Path.cwd().parent / '.env',
        Path(__file__).parent.parent / '.env',
        Path.home() / '.env',
    ]


def find_and_load_dotenv() -> Optional[Path]:
    """
    Carrega o primeiro .env encontrado (cwd, pai, raiz do projeto, home)

    Returns:
        Caminho carregado ou None
    """
    if not DOTENV_AVAILABLE:
        logger.debug("python-dotenv não disponível, pulando carregamento de .env")
        return None
    for env_path in _dotenv_candidates():
        if env_path.exists():
            logger.info(f"Carregando variáveis de ambiente de: {env_path}")
            load_dotenv(env_path, override=False)
            return env_path
    logger.debug("Arquivo .env não encontrado")
    return None


def coerce_number(value: Any) -> Any:
    """Converte strings numéricas (resultado de substituição) em int/float"""
    if not isinstance(value, str) or not NUMBER_PATTERN.match(value.strip()):
        return value
    text = value.strip()
    if re.fullmatch(r'[+-]?\d+', text):
        return int(text)
    return float(text)


class EnvironmentVariableProcessor:
    """Substitui ${env:VAR} em estruturas de configuração"""

    def __init__(self, load_dotenv_file: bool = True):
        self.logger = logger
        self._dotenv_path: Optional[Path] = None
        if load_dotenv_file:
            self._dotenv_path = find_and_load_dotenv()

    def is_dotenv_loaded(self) -> bool:
        return self._dotenv_path is not None

    def process_string(self, text: str) -> str:
        """
        Substitui as referências ${env:NOME} de uma string

        Referências a variáveis ausentes ficam intactas e geram um aviso.

        Args:
            text: String de configuração

        Returns:
            String com as variáveis substituídas
        """
        if not isinstance(text, str):
            return text

        def replace(match: "re.Match[str]") -> str:
            name = match.group(1)
            value = os.getenv(name)
            if value is None:
                self.logger.warning(f"Variável de ambiente '{name}' não encontrada")
                return match.group(0)
            self.logger.debug(f"Substituindo {match.group(0)}")
            return value

        return ENV_PATTERN.sub(replace, text)

    def process_value(self, value: Any) -> Any:
        """Processa recursivamente strings, listas e dicionários"""
        if isinstance(value, str):
            return self.process_string(value)
        if isinstance(value, dict):
            return self.process_dict(value)
        if isinstance(value, list):
            return self.process_list(value)
        return value

    def process_dict(self, data: Dict[str, Any]) -> Dict[str, Any]:
        if not isinstance(data, dict):
            return data
        return {key: self.process_value(value) for key, value in data.items()}

    def process_list(self, data: List[Any]) -> List[Any]:
        if not isinstance(data, list):
            return data
        return [self.process_value(item) for item in data]


@dataclass(frozen=True)
class RuntimeSettings:
    """Ajustes de execução lidos do ambiente"""
    threads: int = 1
    log_level: str = "WARNING"
    consumed_variance_cap: float = 1e6
    mc_chunk: int = 20000


def _env_number(name: str, default: Union[int, float], kind: type) -> Any:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = kind(raw.strip())
    except ValueError:
        raise ConfigError(f"{name} deve ser numérico, recebido '{raw}'")
    if value <= 0:
        raise ConfigError(f"{name} deve ser positivo, recebido {value}")
    return value


def load_runtime_settings(load_env_file: bool = True) -> RuntimeSettings:
    """
    Lê QND_THREADS, QND_LOG_LEVEL, QND_CONSUMED_VARIANCE_CAP e QND_MC_CHUNK

    Args:
        load_env_file: Carrega um .env antes de ler o ambiente

    Returns:
        RuntimeSettings com os valores do ambiente ou os padrões
    """
    if load_env_file:
        find_and_load_dotenv()
    level = os.getenv("QND_LOG_LEVEL", "WARNING").strip().upper() or "WARNING"
    if level not in LOG_LEVELS:
        raise ConfigError(f"QND_LOG_LEVEL inválido: {level}")
    return RuntimeSettings(
        threads=_env_number("QND_THREADS", 1, int),
        log_level=level,
        consumed_variance_cap=_env_number("QND_CONSUMED_VARIANCE_CAP", 1e6, float),
        mc_chunk=_env_number("QND_MC_CHUNK", 20000, int),
    )
