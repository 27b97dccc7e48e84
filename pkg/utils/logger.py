"""
WIRES - Logger Utility
Handles all logging operations with file rotation and console output.
"""

import logging
import os
from logging.handlers import RotatingFileHandler
from typing import Optional


class WiresLogger:
    """Custom logger for the WIRES solver and simulator."""

    _instance: Optional['WiresLogger'] = None
    _logger: Optional[logging.Logger] = None

    def __new__(cls, *args, **kwargs):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(
        self,
        name: str = "WIRES",
        level: str = "INFO",
        file_path: Optional[str] = None,
        max_size_mb: int = 10,
        backup_count: int = 5,
        console_output: bool = True
    ):
        if self._logger is not None:
            return

        self._logger = logging.getLogger(name)
        self._logger.propagate = False
        self.configure(level, file_path, max_size_mb, backup_count, console_output)

    def configure(
        self,
        level: str = "INFO",
        file_path: Optional[str] = None,
        max_size_mb: int = 10,
        backup_count: int = 5,
        console_output: bool = True
    ):
        """(Re)build handlers from the `logging` config section."""
        log_level = getattr(logging, level.upper())
        self._logger.setLevel(log_level)

        for handler in list(self._logger.handlers):
            handler.close()
        self._logger.handlers = []

        if file_path:
            # Create logs directory if not exists
            log_dir = os.path.dirname(file_path)
            if log_dir and not os.path.exists(log_dir):
                os.makedirs(log_dir)

            file_handler = RotatingFileHandler(
                file_path,
                maxBytes=max_size_mb * 1024 * 1024,
                backupCount=backup_count,
                encoding='utf-8'
            )
            file_handler.setLevel(log_level)
            file_handler.setFormatter(logging.Formatter(
                '%(asctime)s | %(levelname)-8s | %(module)-20s | %(message)s',
                datefmt='%Y-%m-%d %H:%M:%S'
            ))
            self._logger.addHandler(file_handler)

        if console_output:
            console_handler = logging.StreamHandler()
            console_handler.setLevel(log_level)
            console_handler.setFormatter(logging.Formatter(
                '%(asctime)s | %(levelname)-8s | %(message)s',
                datefmt='%H:%M:%S'
            ))
            self._logger.addHandler(console_handler)

    @property
    def logger(self) -> logging.Logger:
        return self._logger

    def debug(self, message: str):
        self._logger.debug(message)

    def info(self, message: str):
        self._logger.info(message)

    def warning(self, message: str):
        self._logger.warning(message)

    def error(self, message: str):
        self._logger.error(message)

    def critical(self, message: str):
        self._logger.critical(message)

    def solve_progress(self, lam: float, iteration: int, sup_diff: float):
        """Log one value-iteration step."""
        self._logger.debug(f"VI | λ={lam:.6g} | iter {iteration:>4} | sup|Δg| = {sup_diff:.3e}")

    def lambda_step(self, lam: float, j_value: float, converged: bool):
        """Log one J(λ) evaluation of the λ search."""
        flag = "" if converged else " | NOT CONVERGED"
        self._logger.info(f"λ-SEARCH | λ = {lam:.8g} | J(λ) = {j_value:+.6e}{flag}")

    def sim_summary(self, policy: str, n_epochs: int, objective: float, mse: float, ci: float):
        """Log the renewal-reward summary of a simulation."""
        self._logger.info(
            f"SIM | {policy} | epochs: {n_epochs} | objective: {objective:.6f} ± {ci:.6f} | mse: {mse:.6f}"
        )

    def convergence_alert(self, message: str):
        """Log a convergence or safety-valve warning."""
        self._logger.warning(f"⚠️ CONVERGENCE | {message}")


def get_logger() -> WiresLogger:
    """Get the singleton logger instance."""
    return WiresLogger()


# Module level logger for convenience
logger = WiresLogger()
