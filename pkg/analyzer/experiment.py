"""The full analytic model: two squeezers, entangling beam splitter and detection chain."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from channel.curves import optional_shift
from channel.detection import DetectionChain
from channel.entangler import ChannelError, EntanglerConfig


@dataclass(frozen=True)
class Experiment:
    """Model configuration evaluated by the analyzer sweep.

    ``efficiency_a``/``efficiency_b`` default to the chain's total efficiency.
    """

    entangler: EntanglerConfig
    chain: DetectionChain
    efficiency_a: Optional[float] = None
    efficiency_b: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("efficiency_a", "efficiency_b"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ChannelError(f"{name} must lie in [0, 1], got {value}")

    @property
    def mode_efficiencies(self) -> tuple:
        total = self.chain.total_efficiency
        return (
            total if self.efficiency_a is None else self.efficiency_a,
            total if self.efficiency_b is None else self.efficiency_b,
        )

    def with_parameters(
        self,
        eta_total: Optional[float] = None,
        pump_ratio_x: Optional[float] = None,
        gamma_hwhm: Optional[float] = None,
        gain_ratio: Optional[float] = None,
        clearance_offset_db: Optional[float] = None,
    ) -> "Experiment":
        """Copy with symmetric source parameters or detection settings replaced."""
        experiment = self
        source_changes = {}
        if pump_ratio_x is not None:
            source_changes["pump_ratio_x"] = pump_ratio_x
        if gamma_hwhm is not None:
            source_changes["gamma_hwhm"] = gamma_hwhm
        if source_changes:
            entangler = replace(
                self.entangler,
                source_a=replace(self.entangler.source_a, **source_changes),
                source_b=replace(self.entangler.source_b, **source_changes),
            )
            experiment = replace(experiment, entangler=entangler)
        chain = experiment.chain
        if eta_total is not None:
            chain = replace(chain, propagation_efficiency=eta_total, visibility=1.0, quantum_efficiency=1.0)
            experiment = replace(experiment, efficiency_a=None, efficiency_b=None)
        if gain_ratio is not None:
            chain = chain.with_gain_ratio(gain_ratio)
        if clearance_offset_db:
            chain = replace(
                chain,
                clearance_a=optional_shift(chain.clearance_a, clearance_offset_db),
                clearance_b=optional_shift(chain.clearance_b, clearance_offset_db),
            )
        return replace(experiment, chain=chain)
