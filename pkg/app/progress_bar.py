"""
Barra de progresso para varreduras (t_o, s)
"""

import sys
import time
from typing import Optional, TextIO


class ProgressBar:
    """Barra de progresso textual escrita em stderr"""

    def __init__(self, total: int, description: str = "Processando",
                 width: int = 50, show_eta: bool = True, stream: Optional[TextIO] = None):
        """
        Inicializa a barra de progresso

        Args:
            total: Número total de itens
            description: Descrição do processo
            width: Largura da barra em caracteres
            show_eta: Se deve mostrar estimativa de tempo
            stream: Destino da saída (stderr por padrão)
        """
        self.total = total
        self.description = description
        self.width = width
        self.show_eta = show_eta
        self.stream = stream or sys.stderr
        self.current = 0
        self.start_time: Optional[float] = None
        self.last_update_time = 0.0

    def _write(self, text: str) -> None:
        self.stream.write(text)
        self.stream.flush()

    def start(self) -> None:
        """Inicia o cronômetro"""
        self.start_time = time.time()
        self.last_update_time = self.start_time
        self._write(f"\n🚀 {self.description}\n" + "=" * 60 + "\n")

    def update(self, increment: int = 1, force_update: bool = False) -> None:
        """
        Atualiza o progresso

        Args:
            increment: Itens concluídos desde a última chamada
            force_update: Redesenha mesmo sem ter passado 0.1 s
        """
        self.current += increment
        now = time.time()
        if force_update or now - self.last_update_time >= 0.1 or self.current >= self.total:
            self._print_progress()
            self.last_update_time = now

    def finish(self) -> None:
        """Finaliza a barra de progresso"""
        self.current = self.total
        self._print_progress()
        self._print_final()

    def _elapsed(self) -> float:
        return time.time() - self.start_time if self.start_time is not None else 0.0

    def _print_progress(self) -> None:
        if self.total <= 0:
            return
        fraction = min(self.current / self.total, 1.0)
        filled = int(fraction * self.width)
        bar = "█" * filled + "░" * (self.width - filled)
        elapsed = self._elapsed()
        eta_str = ""
        if self.show_eta:
            eta = self._calculate_eta(elapsed)
            if eta is not None:
                eta_str = f" | ETA: {self._format_time(eta)}"
        self._write(f"\r[{bar}] {fraction * 100:5.1f}% ({self.current}/{self.total}) "
                    f"| Tempo: {self._format_time(elapsed)}{eta_str}")

    def _print_final(self) -> None:
        elapsed = self._elapsed()
        speed = self.total / elapsed if elapsed > 0 else 0.0
        self._write(f"\n✅ Concluído: {self.total} itens em {self._format_time(elapsed)} "
                    f"({speed:.1f}/s)\n" + "=" * 60 + "\n")

    def _calculate_eta(self, elapsed: float) -> Optional[float]:
        """
        Tempo estimado restante

        Args:
            elapsed: Tempo decorrido em segundos

        Returns:
            Segundos restantes ou None se não houver taxa
        """
        if self.current <= 0 or elapsed <= 0:
            return None
        rate = self.current / elapsed
        return max(self.total - self.current, 0) / rate

    @staticmethod
    def _format_time(seconds: float) -> str:
        """Formata segundos como "2.5s", "2m 30s" ou "1h 15m 30s" """
        if seconds < 60:
            return f"{seconds:.1f}s"
        minutes, secs = divmod(int(seconds), 60)
        if minutes < 60:
            return f"{minutes}m {secs}s"
        hours, minutes = divmod(minutes, 60)
        return f"{hours}h {minutes}m {secs}s"


class ScanProgressBar(ProgressBar):
    """Progresso de uma varredura, contando pontos certificados"""

    def __init__(self, total: int, label: str, threads: int = 1,
                 stream: Optional[TextIO] = None):
        super().__init__(
            total=total,
            description=f"Varredura {label}: {total} pontos, {threads} thread(s)",
            width=40,
            stream=stream,
        )
        self.certified = 0

    def update_with_result(self, certified: bool, increment: int = 1) -> None:
        """Atualiza o progresso registrando se o ponto foi certificado"""
        if certified:
            self.certified += increment
        self.update(increment)

    def _print_final(self) -> None:
        elapsed = self._elapsed()
        self._write(f"\n✅ Varredura concluída em {self._format_time(elapsed)}\n"
                    f"   📊 Pontos: {self.total}\n"
                    f"   🔒 Certificados: {self.certified}\n" + "=" * 60 + "\n")


def create_scan_progress_bar(total: int, label: str, threads: int = 1,
                             stream: Optional[TextIO] = None) -> ScanProgressBar:
    """
    Cria a barra de progresso de uma varredura

    Args:
        total: Número de pontos da grade
        label: Rótulo do experimento (ex.: "N=3 m=2 ghz")
        threads: Número de workers
        stream: Destino da saída

    Returns:
        ScanProgressBar configurada
    """
    return ScanProgressBar(total, label, threads, stream)
