"""
Interface de linha de comando do qnd-runner
"""

import json
import logging
import sys
from typing import Optional

import click

from . import __version__
from .env_processor import LOG_LEVELS, RuntimeSettings, load_runtime_settings
from .runner import ExperimentRunner
from .types import Variant
from .verification import run_verification


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
    )
    logging.getLogger().setLevel(level)


@click.group()
@click.version_option(version=__version__)
@click.option('--threads', type=click.IntRange(min=1), default=None,
              help='Workers das varreduras (padrão: QND_THREADS ou 1)')
@click.option('--log-level', type=click.Choice(LOG_LEVELS, case_sensitive=False), default=None,
              help='Nível de log (padrão: QND_LOG_LEVEL ou WARNING)')
@click.pass_context
def cli(ctx: click.Context, threads: Optional[int], log_level: Optional[str]):
    """qnd-runner - Simulador da interação QND N-partida mediada por ancilas"""
    try:
        settings = load_runtime_settings()
    except Exception as e:
        click.echo(f"❌ Erro no ambiente: {e}", err=True)
        sys.exit(1)
    if threads is not None:
        settings = RuntimeSettings(threads, settings.log_level,
                                   settings.consumed_variance_cap, settings.mc_chunk)
    _configure_logging((log_level or settings.log_level).upper())
    ctx.obj = settings


@cli.command()
@click.option('--n', 'n', type=int, default=None, help='N de um caso extra')
@click.option('--m', 'm', type=int, default=None, help='m de um caso extra')
@click.option('--variant', type=click.Choice([v.value for v in Variant]),
              default=Variant.UNIFORM_LAST.value, help='Variante do caso extra')
@click.option('--perturb-td', 'perturb_td', type=float, default=0.0,
              help='Desloca cada t_d resolvido antes de avaliar as identidades')
@click.option('--json', 'as_json', is_flag=True, help='Relatório em JSON')
@click.pass_obj
def verify(settings: RuntimeSettings, n: Optional[int], m: Optional[int], variant: str,
           perturb_td: float, as_json: bool):
    """Executa a suíte de identidades do esquema"""
    try:
        if (n is None) != (m is None):
            raise click.UsageError("--n e --m devem ser informados juntos")
        custom = (n, m) if n is not None and m is not None else None
        report = run_verification(perturb_td, custom, Variant(variant),
                                  mc_chunk=settings.mc_chunk)
    except click.UsageError:
        raise
    except Exception as e:
        click.echo(f"❌ Erro na verificação: {e}", err=True)
        sys.exit(1)

    click.echo(report.to_json() if as_json else report.to_text())
    if not report.passed:
        for check in report.failures:
            click.echo(f"❌ Falhou: {check.name}", err=True)
        sys.exit(1)


@cli.command()
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('-o', '--output', 'output', required=True, type=click.Path(dir_okay=False),
              help='Arquivo CSV de saída')
@click.option('--no-progress', is_flag=True, help='Não mostra a barra de progresso')
@click.pass_obj
def scan(settings: RuntimeSettings, config_path: str, output: str, no_progress: bool):
    """Varre a grade (t_o, s) e grava o CSV"""
    try:
        runner = ExperimentRunner(settings, configure_logging=False)
        run_config = runner.load_config(config_path)
        frame = runner.scan(run_config, progress=not no_progress)
        path = runner.write_scan_csv(frame, output)
    except Exception as e:
        click.echo(f"❌ Erro na varredura: {e}", err=True)
        sys.exit(1)

    certified = int(frame["certified_in"].fillna(False).astype(bool).sum()
                    + frame["certified_out"].fillna(False).astype(bool).sum())
    click.echo(f"✅ {len(frame)} pontos gravados em {path} ({certified} certificados)", err=True)


@cli.command()
@click.argument('config_path', type=click.Path(exists=True, dir_okay=False))
@click.option('--output', 'output', type=click.Path(dir_okay=False), default=None,
              help='Também grava o relatório JSON neste arquivo')
@click.pass_obj
def run(settings: RuntimeSettings, config_path: str, output: Optional[str]):
    """Executa um ponto escalar e emite o relatório JSON"""
    try:
        runner = ExperimentRunner(settings, configure_logging=False)
        run_config = runner.load_config(config_path)
        report = runner.run(run_config)
        text = json.dumps(report, ensure_ascii=False, indent=2, default=float)
        if output:
            with open(output, 'w', encoding='utf-8') as f:
                f.write(text + "\n")
    except Exception as e:
        click.echo(f"❌ Erro na execução: {e}", err=True)
        sys.exit(1)

    click.echo(text)


if __name__ == '__main__':
    cli()
