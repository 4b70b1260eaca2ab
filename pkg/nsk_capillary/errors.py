from __future__ import annotations

from typing import List, Optional, Sequence, Tuple


class NSKError(Exception):
    """Base class for every error raised by nsk_capillary."""


class GridMismatchError(NSKError, ValueError):
    pass


class FieldError(NSKError, ValueError):
    pass


class KernelError(NSKError, ValueError):
    pass


class ThermoError(NSKError, ValueError):
    pass


class FreeEnergyError(ThermoError):
    pass


class ScenarioError(NSKError, ValueError):
    pass


class DiagnosticError(NSKError, ValueError):
    pass


class ConfigError(NSKError, ValueError):
    """Validation failed; `errors` lists every problem found, not just the first."""

    def __init__(self, errors: Sequence[str]) -> None:
        self.errors: List[str] = list(errors)
        super().__init__("; ".join(self.errors))


class BlowUpError(NSKError, RuntimeError):
    def __init__(self, quantity: str, cell: Tuple[int, ...], t: float, step: Optional[int] = None) -> None:
        self.quantity = quantity
        self.cell = cell
        self.t = t
        self.step = step
        super().__init__(f"non-finite {quantity} at cell {cell} (t={t:.6g}, step={step})")
