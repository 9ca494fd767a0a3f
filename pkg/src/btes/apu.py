"""Auxiliary power unit: inlet heated by the input, outlet mixed from the BHE returns."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class ApuParams:
    nu: int
    q_vol: float
    c_w: float
    u_min: float = -1000.0
    u_max: float = 1000.0

    def __post_init__(self):
        if int(self.nu) != self.nu or self.nu < 1:
            raise ConfigError("at least one BHE is required", "apu.nu")
        if not (self.q_vol > 0 and self.c_w > 0):
            raise ConfigError("flow and heat capacity must be > 0", "apu.q_vol")
        if not self.u_min < self.u_max:
            raise ConfigError("u_min must be below u_max", "apu.u_min")


@dataclass(frozen=True)
class ApuBlock:
    """Rows for ``[T_in, T_out]``.

    Keys: ``"T_in"``/``"T_out"`` for the APU states and ``("B", j, local)`` for
    exchanger states.
    """

    rows: tuple[dict, dict]
    b_coeff: float  # K per W per step
    return_slots: dict


def assemble_apu(params: ApuParams, sigma: int) -> ApuBlock:
    b = 1.0 / (params.nu * params.q_vol * params.c_w)
    # top segment of the ascending pipe: local index sigma
    returns = {("B", j, sigma): 1.0 / params.nu for j in range(params.nu)}
    return ApuBlock(({"T_out": 1.0}, dict(returns)), b, returns)
