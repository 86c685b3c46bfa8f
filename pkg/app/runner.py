"""
Orquestrador de experimentos: leitura de configurações, varreduras e relatórios
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .entanglement import certify, min_s_b_closed, uv_input, uv_output
from .env_processor import (
    EnvironmentVariableProcessor, RuntimeSettings, coerce_number, load_runtime_settings
)
from .exceptions import (
    ConfigError, DegenerateSpecError, FormulaUnavailableError, UnphysicalStateError
)
from .gaussian import GaussianState, from_covariance, is_physical
from .progress_bar import create_scan_progress_bar
from .scheme import (
    SchemeConfig, coefficient_table, prepare_input, run_analytic, run_monte_carlo,
    squeezing_from_db
)
from .types import (
    SCAN_COLUMNS, CertResult, CoefficientTable, InputFamily, MonteCarloOptions, RangeSpec,
    RunConfig, ScalarOrRange, ScanRow, Side, Variant
)

RUN_KEYS = {
    "n", "m", "variant", "t_o", "s", "state", "ancilla_squeeze_db", "side", "mc",
    "alpha", "beta", "k_a", "k_b",
}
RANGE_KEYS = {"min", "max", "steps"}
MC_KEYS = {"samples", "seed"}
STATE_KEYS = {"covariance", "mean"}

DEFAULT_T_O = RangeSpec(0.5, 0.999, 50)
DEFAULT_S = RangeSpec(0.0, 2.5, 50)


def _reject_unknown(data: Dict[str, Any], allowed: set, where: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"Chaves desconhecidas em {where}: {', '.join(unknown)}")


def _number(value: Any, key: str) -> float:
    value = coerce_number(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{key}' deve ser numérico, recebido {value!r}")
    if not np.isfinite(value):
        raise ConfigError(f"'{key}' deve ser finito")
    return float(value)


def _integer(value: Any, key: str) -> int:
    number = _number(value, key)
    if number != int(number):
        raise ConfigError(f"'{key}' deve ser inteiro, recebido {number}")
    return int(number)


class ExperimentRunner:
    """Orquestrador de execuções e varreduras do esquema QND"""

    def __init__(self, settings: Optional[RuntimeSettings] = None,
                 configure_logging: bool = True):
        """
        Inicializa o runner

        Args:
            settings: Ajustes de execução (lidos do ambiente se omitidos)
            configure_logging: Configura o logging raiz em nível INFO
        """
        if configure_logging:
            logging.basicConfig(
                level=logging.INFO,
                format='%(asctime)s - %(levelname)s - %(message)s'
            )
        self.logger = logging.getLogger(__name__)
        self.settings = settings or load_runtime_settings()
        self.env_processor = EnvironmentVariableProcessor()

    # Configuração

    def load_config(self, path: Union[str, Path]) -> RunConfig:
        """
        Lê e valida um arquivo de configuração JSON

        Args:
            path: Caminho do arquivo

        Returns:
            RunConfig validada
        """
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"JSON inválido em {path}: {e}")
        if not isinstance(data, dict):
            raise ConfigError("A configuração deve ser um objeto JSON")
        config = self._parse_run_config(data)
        self.logger.info(f"Configuração carregada de {path}: N={config.n}, m={config.m}, "
                         f"{config.variant.value}, estado {config.state.value}")
        return config

    def _parse_run_config(self, data: dict) -> RunConfig:
        """Converte dados JSON em RunConfig"""
        processed = self.env_processor.process_dict(data)
        _reject_unknown(processed, RUN_KEYS, "configuração")
        for required in ("n", "m"):
            if required not in processed:
                raise ConfigError(f"Chave obrigatória ausente: '{required}'")

        n = _integer(processed["n"], "n")
        m = _integer(processed["m"], "m")
        if not 2 <= n <= 32:
            raise ConfigError(f"n deve estar em 2..32, recebido {n}")
        if not 1 <= m <= n - 1:
            raise ConfigError(f"m deve estar em 1..{n - 1}, recebido {m}")

        try:
            variant = Variant(processed.get("variant", Variant.UNIFORM_LAST.value))
            side = Side(processed.get("side", Side.INPUT.value))
        except ValueError as e:
            raise ConfigError(str(e))
        if variant is Variant.ALT_BN and (n, m) != (3, 2):
            raise ConfigError("A variante alt-bn só está definida para n=3, m=2")

        t_o = self._parse_scalar_or_range(processed.get("t_o", DEFAULT_T_O), "t_o")
        s = self._parse_scalar_or_range(processed.get("s", DEFAULT_S), "s")
        for value in (t_o.values() if isinstance(t_o, RangeSpec) else [t_o]):
            if not 0.0 < value < 1.0:
                raise ConfigError(f"t_o deve estar em (0, 1), recebido {value}")
        if any(v < 0 for v in (s.values() if isinstance(s, RangeSpec) else [s])):
            raise ConfigError("s deve ser >= 0")

        family, covariance, mean = self._parse_state(processed.get("state", "vacuum"), n)
        mc = self._parse_mc(processed["mc"]) if processed.get("mc") is not None else None

        options = {key: _number(processed.get(key, 1.0), key)
                   for key in ("alpha", "beta", "k_a", "k_b")}
        for key in ("alpha", "beta"):
            if options[key] <= 0:
                raise ConfigError(f"'{key}' deve ser positivo")

        return RunConfig(
            n=n, m=m, variant=variant, t_o=t_o, s=s, state=family,
            ancilla_squeeze_db=_number(processed.get("ancilla_squeeze_db", 60.0),
                                       "ancilla_squeeze_db"),
            side=side, mc=mc, covariance=covariance, mean=mean, **options,
        )

    def _parse_scalar_or_range(self, value: Any, key: str) -> ScalarOrRange:
        if isinstance(value, RangeSpec):
            return value
        if isinstance(value, dict):
            _reject_unknown(value, RANGE_KEYS, f"intervalo '{key}'")
            missing = RANGE_KEYS - set(value)
            if missing:
                raise ConfigError(f"Intervalo '{key}' sem {', '.join(sorted(missing))}")
            return RangeSpec(_number(value["min"], f"{key}.min"),
                             _number(value["max"], f"{key}.max"),
                             _integer(value["steps"], f"{key}.steps"))
        return _number(value, key)

    def _parse_state(self, value: Any, n: int
                     ) -> Tuple[InputFamily, Optional[np.ndarray], Optional[np.ndarray]]:
        if isinstance(value, str):
            try:
                family = InputFamily(value)
            except ValueError:
                raise ConfigError(f"Estado desconhecido: '{value}'")
            if family is InputFamily.EXPLICIT:
                raise ConfigError("Estado explícito exige {'covariance': [[...]]}")
            if family is InputFamily.EPR_TYPE and n < 3:
                raise ConfigError("Estado epr-type exige n >= 3")
            return family, None, None

        if isinstance(value, list):
            value = {"covariance": value}
        if not isinstance(value, dict):
            raise ConfigError("'state' deve ser um nome de família ou uma covariância explícita")
        _reject_unknown(value, STATE_KEYS, "estado explícito")
        try:
            covariance = np.array([[_number(x, "covariance") for x in row]
                                   for row in value["covariance"]])
            mean = (np.array([_number(x, "mean") for x in value["mean"]])
                    if value.get("mean") is not None else None)
        except (KeyError, TypeError):
            raise ConfigError("Covariância explícita malformada")
        if covariance.shape != (2 * n, 2 * n):
            raise ConfigError(f"Covariância explícita deve ser {2 * n}×{2 * n}")
        try:
            state = from_covariance(covariance, mean)
        except UnphysicalStateError:
            raise
        except ValueError as e:
            raise ConfigError(f"Covariância explícita inválida: {e}")
        if not is_physical(state):
            raise UnphysicalStateError("Covariância explícita viola a incerteza")
        return InputFamily.EXPLICIT, covariance, mean

    def _parse_mc(self, value: Any) -> MonteCarloOptions:
        if not isinstance(value, dict):
            raise ConfigError("'mc' deve ser um objeto {samples, seed}")
        _reject_unknown(value, MC_KEYS, "mc")
        if "samples" not in value:
            raise ConfigError("'mc' exige 'samples'")
        samples = _integer(value["samples"], "mc.samples")
        if samples < 2:
            raise ConfigError("mc.samples deve ser >= 2 (erro padrão exige duas amostras)")
        return MonteCarloOptions(samples, _integer(value.get("seed", 0), "mc.seed"))

    # Avaliação

    def input_state(self, run_config: RunConfig, s: float) -> GaussianState:
        return prepare_input(run_config.state, run_config.n, s,
                             run_config.covariance, run_config.mean)

    def scheme_config(self, run_config: RunConfig, t_o: float, s: float) -> SchemeConfig:
        """SchemeConfig de um ponto (t_o, s) da configuração"""
        ancilla_s = squeezing_from_db(run_config.ancilla_squeeze_db)
        return SchemeConfig(
            n=run_config.n, m=run_config.m, t_o=t_o, variant=run_config.variant,
            s_a=ancilla_s, s_b=ancilla_s,
            input_state=self.input_state(run_config, s),
            k_a=run_config.k_a, k_b=run_config.k_b,
            alpha=run_config.alpha, beta=run_config.beta,
            consumed_variance_cap=self.settings.consumed_variance_cap,
        )

    def _certify_side(self, config: SchemeConfig, side: Side,
                      table: CoefficientTable) -> Optional[CertResult]:
        try:
            if side is Side.INPUT:
                return certify(uv_input(config, table), config.target_state)
            run = run_analytic(config, table)
            assert run.output_state is not None
            return certify(uv_output(config, table), run.output_state)
        except DegenerateSpecError as e:
            self.logger.warning(f"t_o={config.t_o}: {e}")
            return None

    def evaluate_point(self, run_config: RunConfig, t_o: float, s: float) -> ScanRow:
        """
        Avalia um ponto da grade

        Args:
            run_config: Configuração da varredura
            t_o: Transmissão comum
            s: Squeezing do estado de entrada

        Returns:
            ScanRow com os lados pedidos preenchidos
        """
        config = self.scheme_config(run_config, t_o, s)
        table = coefficient_table(config)
        row = ScanRow(t_o=t_o, t_d=table.t_d, s=s)
        side = run_config.side
        cert_in = cert_out = None
        if side in (Side.INPUT, Side.BOTH):
            cert_in = self._certify_side(config, Side.INPUT, table)
            if cert_in is not None:
                row.ent_in, row.certified_in = cert_in.ent, cert_in.certified
        if side in (Side.OUTPUT, Side.BOTH):
            cert_out = self._certify_side(config, Side.OUTPUT, table)
            if cert_out is not None:
                row.ent_out, row.certified_out = cert_out.ent, cert_out.certified
        shown = cert_in if side is not Side.OUTPUT else cert_out
        if shown is not None:
            row.var_u, row.var_v, row.min_s_b = shown.var_u, shown.var_v, shown.min_s_b
        return row

    def scan(self, run_config: RunConfig, threads: Optional[int] = None,
             progress: bool = True) -> pd.DataFrame:
        """
        Varredura (t_o, s) em paralelo, com linhas ordenadas por (t_o, s)

        Args:
            run_config: Configuração
            threads: Número de workers (QND_THREADS se omitido)
            progress: Mostra a barra de progresso em stderr

        Returns:
            DataFrame com as colunas de SCAN_COLUMNS
        """
        threads = threads or self.settings.threads
        points = [(t, s) for t in run_config.t_o_values() for s in run_config.s_values()]
        label = f"N={run_config.n} m={run_config.m} {run_config.variant.value} {run_config.state.value}"
        self.logger.info(f"Iniciando varredura {label}: {len(points)} pontos, {threads} thread(s)")

        bar = create_scan_progress_bar(len(points), label, threads) if progress else None
        if bar:
            bar.start()
        rows: List[Optional[ScanRow]] = [None] * len(points)
        with ThreadPoolExecutor(max_workers=threads) as executor:
            futures = {executor.submit(self.evaluate_point, run_config, t, s): index
                       for index, (t, s) in enumerate(points)}
            for future in as_completed(futures):
                row = future.result()
                rows[futures[future]] = row
                if bar:
                    bar.update_with_result(bool(row.certified_in or row.certified_out))
        if bar:
            bar.finish()

        self.logger.info(f"Varredura concluída: {len(points)} pontos")
        return pd.DataFrame([row.to_record() for row in rows if row is not None],
                            columns=SCAN_COLUMNS)

    @staticmethod
    def write_scan_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
        """Grava a varredura em CSV (UTF-8, '\\n', 12 dígitos significativos)"""
        path = Path(path)
        if path.parent and not path.parent.exists():
            raise ConfigError(f"Diretório de saída inexistente: {path.parent}")
        frame.to_csv(path, index=False, float_format="%.12g", lineterminator="\n",
                     encoding="utf-8", na_rep="")
        return path

    def run(self, run_config: RunConfig) -> Dict[str, Any]:
        """
        Execução de um ponto escalar com relatório completo

        Args:
            run_config: Configuração com t_o e s escalares

        Returns:
            Relatório: configuração, tabela, formas, certificados e Monte Carlo
        """
        if not run_config.is_scalar:
            raise ConfigError("t_o e s devem ser escalares em 'run'; use 'scan' para intervalos")
        t_o = run_config.t_o_values()[0]
        s = run_config.s_values()[0]
        config = self.scheme_config(run_config, t_o, s)
        table = coefficient_table(config)
        run = run_analytic(config, table)

        report: Dict[str, Any] = {
            "config": run_config.to_dict(),
            "coefficients": table.to_dict(),
            **run.to_dict(),
        }
        for side in (Side.INPUT, Side.OUTPUT):
            if run_config.side not in (side, Side.BOTH):
                continue
            cert = self._certify_side(config, side, table)
            entry: Dict[str, Any] = cert.to_dict() if cert is not None else {"degenerate": True}
            try:
                entry["min_s_b_closed"] = min_s_b_closed(config, side, table)
            except FormulaUnavailableError:
                entry["min_s_b_closed"] = None
            report[f"certificate_{side.value}"] = entry

        if run_config.mc is not None:
            result = run_monte_carlo(config, run_config.mc.samples, run_config.mc.seed,
                                     chunk=self.settings.mc_chunk)
            report["monte_carlo"] = result.to_dict()
        self.logger.info(f"Execução concluída: t_o={t_o}, s={s}, t_d={table.t_d:.12g}")
        return report
