from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import constants

from cavity.figures import (
    CavityError,
    CavityGeometry,
    absorption_round_trip_loss,
    cavity_figures,
    circulating_power,
    escape_efficiency,
    finesse,
    free_spectral_range,
    linewidth_fwhm,
    power_buildup,
)

LENGTH = 2.6e-3
INDEX = 1.816


def _signal_cavity() -> CavityGeometry:
    loss = absorption_round_trip_loss(LENGTH, 84.0)
    return CavityGeometry(LENGTH, INDEX, r1=0.9998, r2=0.64, round_trip_loss=loss)


def _pump_cavity() -> CavityGeometry:
    return CavityGeometry(LENGTH, INDEX, r1=0.98, r2=0.9998)


def test_free_spectral_range_of_monolithic_crystal() -> None:
    assert free_spectral_range(_signal_cavity()) == pytest.approx(31.75e9, abs=0.05e9)


def test_signal_finesse_and_linewidth() -> None:
    """The 1550 nm resonance is broadband: finesse near 14, linewidth near 2.26 GHz."""
    geometry = _signal_cavity()
    assert finesse(geometry) == pytest.approx(14.04, abs=0.02)
    assert linewidth_fwhm(geometry) == pytest.approx(2.26e9, abs=0.005e9)
    figures = cavity_figures(geometry)
    assert figures.hwhm == pytest.approx(figures.fwhm / 2.0)


def test_pump_finesse_and_buildup() -> None:
    """The 775 nm pump is resonant with high finesse and a ×194 power enhancement."""
    geometry = _pump_cavity()
    assert finesse(geometry) == pytest.approx(307.9, abs=0.5)
    assert power_buildup(geometry) == pytest.approx(194.15, abs=0.3)
    assert circulating_power(geometry, 0.300) == pytest.approx(58.2, abs=0.2)
    assert circulating_power(geometry, 0.655) == pytest.approx(127.2, abs=0.2)


def test_escape_efficiency_close_to_one() -> None:
    """Output coupling dominates; only the back mirror and absorption leak."""
    geometry = _signal_cavity()
    assert escape_efficiency(geometry) == pytest.approx(0.99932, abs=2e-5)
    lossless = CavityGeometry(LENGTH, INDEX, r1=1.0, r2=0.64)
    assert escape_efficiency(lossless) == pytest.approx(1.0)


def test_absorption_loss_is_double_pass() -> None:
    assert absorption_round_trip_loss(LENGTH, 84.0) == pytest.approx(4.368e-5)


def test_figures_serialize_every_quantity() -> None:
    report = cavity_figures(_signal_cavity()).to_dict()
    assert set(report) == {"fsr", "finesse", "fwhm", "hwhm", "buildup", "escape_efficiency"}


def test_high_reflector_input_has_no_buildup() -> None:
    """A closed input face gives no coupling, so the buildup is undefined."""
    geometry = CavityGeometry(LENGTH, INDEX, r1=1.0, r2=0.64)
    with pytest.raises(CavityError):
        power_buildup(geometry)
    assert math.isnan(cavity_figures(geometry).buildup)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"length": 0.0, "refractive_index": INDEX, "r1": 0.9, "r2": 0.9},
        {"length": LENGTH, "refractive_index": 0.5, "r1": 0.9, "r2": 0.9},
        {"length": LENGTH, "refractive_index": INDEX, "r1": 1.2, "r2": 0.9},
        {"length": LENGTH, "refractive_index": INDEX, "r1": 1.0, "r2": 1.0},
        {"length": LENGTH, "refractive_index": INDEX, "r1": 0.9, "r2": 0.9, "round_trip_loss": 1.0},
    ],
)
def test_invalid_geometry_rejected(kwargs) -> None:
    with pytest.raises(CavityError):
        CavityGeometry(**kwargs)


def test_one_gigahertz_free_spectral_range() -> None:
    geom = CavityGeometry(constants.c / 2e9, 1.0, r1=0.9, r2=0.9)
    assert free_spectral_range(geom) == pytest.approx(1e9, rel=1e-12)


def test_transparent_mirrors_have_zero_finesse() -> None:
    geom = CavityGeometry(LENGTH, INDEX, r1=0.0, r2=0.0)
    assert finesse(geom) == 0.0
    with pytest.raises(CavityError, match="zero finesse"):
        linewidth_fwhm(geom)


def test_finesse_grows_with_reflectivity() -> None:
    rng = np.random.default_rng(3)
    for r1 in rng.uniform(0.0, 0.9999, 10):
        values = [finesse(CavityGeometry(LENGTH, INDEX, r1=float(r1), r2=float(r2))) for r2 in np.linspace(0.01, 0.999, 50)]
        assert np.all(np.diff(values) > 0.0)


def test_buildup_falls_with_round_trip_loss() -> None:
    losses = np.sort(np.random.default_rng(5).uniform(0.0, 0.2, 40))
    values = [power_buildup(CavityGeometry(LENGTH, INDEX, r1=0.98, r2=0.9998, round_trip_loss=float(loss))) for loss in losses]
    assert np.all(np.diff(values) < 0.0)
