"""Fringe fitting, visibilities and sweep curves from simulation records.

The swept variable is always a known phase, so the sinusoid fit is linear
least squares on the regressors (1, cos phi, sin phi) at unit frequency:
I(phi) = A + B cos(phi - phi0).  Visibility is B/A, which equals
(Imax - Imin)/(Imax + Imin) for an exact sinusoid and is invariant under
a global energy rescale of the dataset.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateFit, EmptyWindow
from .model import ScenarioConfig, SimulationRecord
from .solver import SolverSettings, run

__all__ = [
    "FringeDataset",
    "pulse_energy",
    "fit_fringe",
    "fringe_scan",
    "coupling_sweep",
    "mismatch_curve",
    "find_mu_for_visibility",
    "write_fringe_csv",
]


def pulse_energy(t: np.ndarray, trace: np.ndarray, window: tuple[float, float]) -> float:
    """Integral of |trace|^2 over the window, trapezoidal rule on the grid."""
    t = np.asarray(t, dtype=float)
    trace = np.asarray(trace)
    w0, w1 = window
    if w0 < t[0] or w1 > t[-1] or w0 >= w1:
        raise EmptyWindow(f"window {window} not inside the trace span ({t[0]}, {t[-1]})")
    mask = (t >= w0) & (t <= w1)
    if mask.sum() < 2:
        raise EmptyWindow(f"window {window} contains fewer than two samples")
    power = np.abs(trace[mask]) ** 2
    return float(np.trapezoid(power, t[mask]))


@dataclass
class FringeDataset:
    """Phase/energy samples of one output port with their sinusoid fit."""

    port: str
    phases: np.ndarray
    energies: np.ndarray
    offset: float      # A
    amplitude: float   # B
    phi0: float

    @property
    def visibility(self) -> float:
        return self.amplitude / self.offset

    def model(self, phases: np.ndarray) -> np.ndarray:
        return self.offset + self.amplitude * np.cos(np.asarray(phases) - self.phi0)

    def residual_rms(self) -> float:
        return float(np.sqrt(np.mean((self.model(self.phases) - self.energies) ** 2)))


def fit_fringe(phases: Sequence[float], energies: Sequence[float], port: str = "E1") -> FringeDataset:
    """Least-squares fit of A + B cos(phi - phi0) at unit phase frequency."""
    phases = np.asarray(phases, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if len(np.unique(np.mod(phases, 2.0 * math.pi))) < 3:
        raise DegenerateFit("need at least three distinct phases")
    design = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    if np.linalg.matrix_rank(design) < 3:
        raise DegenerateFit("rank-deficient design matrix")
    coef, *_ = np.linalg.lstsq(design, energies, rcond=None)
    offset, c, s = (float(v) for v in coef)
    amplitude = math.hypot(c, s)
    if offset <= 0.0:
        raise DegenerateFit(f"non-positive fringe offset A={offset:.3g}")
    if amplitude > offset * (1.0 + 1e-9):
        raise DegenerateFit(f"fringe amplitude B={amplitude:.3g} exceeds offset A={offset:.3g}")
    amplitude = min(amplitude, offset)
    phi0 = math.atan2(s, c) if amplitude > 0 else 0.0
    return FringeDataset(
        port=port, phases=phases, energies=energies,
        offset=offset, amplitude=amplitude, phi0=phi0,
    )


def _run_energies(config: ScenarioConfig, settings: SolverSettings | None) -> dict[str, float]:
    return run(config, settings).window_energies


def _energies_for_configs(
    configs: Sequence[ScenarioConfig],
    settings: SolverSettings | None,
    workers: int | None,
) -> list[dict[str, float]]:
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_energies, configs, [settings] * len(configs)))
    return [_run_energies(c, settings) for c in configs]


def fringe_scan(
    family,
    phases: Sequence[float],
    port: str = "E1",
    settings: SolverSettings | None = None,
    workers: int | None = None,
    _energy_cache: dict | None = None,
) -> FringeDataset:
    """Run one scenario per phase and fit the port's fringe.

    An optional energy cache maps phase -> window-energy dict so that the
    two ports of one sweep reuse the same runs.
    """
    phases = list(phases)
    if len(phases) < 5:
        raise DegenerateFit("need at least five phase samples")
    window = family.port_window(port)
    cache = _energy_cache if _energy_cache is not None else {}
    missing = [p for p in phases if p not in cache]
    if missing:
        configs = [family.config_for_phase(p) for p in missing]
        for p, energies in zip(missing, _energies_for_configs(configs, settings, workers)):
            cache[p] = energies
    energies = [cache[p][window] for p in phases]
    return fit_fringe(phases, energies, port=port)


def scan_both_ports(
    family,
    phases: Sequence[float],
    settings: SolverSettings | None = None,
    workers: int | None = None,
) -> dict[str, FringeDataset]:
    """Phase scan shared by both output ports (one run per phase)."""
    cache: dict = {}
    return {
        port: fringe_scan(family, phases, port, settings, workers, _energy_cache=cache)
        for port in ("E1", "E2")
    }


def _default_phases(n: int = 12) -> list[float]:
    return [2.0 * math.pi * i / n for i in range(n)]


def coupling_sweep(
    family,
    relative_powers: Sequence[float],
    phases: Sequence[float] | None = None,
    settings: SolverSettings | None = None,
    workers: int | None = None,
) -> dict[str, list[tuple[float, float]]]:
    """Visibility of both ports vs event coupling power.

    Powers are normalised to the family's balanced-suppression power
    (power 1.0 reproduces the family's own event coupling).
    """
    if any(p <= 0 for p in relative_powers):
        raise ValueError("relative powers must be positive")
    phases = list(phases) if phases is not None else _default_phases()
    curves: dict[str, list[tuple[float, float]]] = {"E1": [], "E2": []}
    for power in relative_powers:
        cache: dict = {}
        configs = [family.config_for_phase(p, power_factor=power) for p in phases]
        for p, energies in zip(phases, _energies_for_configs(configs, settings, workers)):
            cache[p] = energies
        for port in ("E1", "E2"):
            ds = fit_fringe(phases, [cache[p][port] for p in phases], port=port)
            curves[port].append((float(power), ds.visibility))
    return curves


def mismatch_curve(
    family,
    mus: Sequence[float],
    port: str = "E1",
    phases: Sequence[float] | None = None,
    settings: SolverSettings | None = None,
    workers: int | None = None,
) -> list[tuple[float, float]]:
    """Visibility of one port vs the mode-overlap factor mu."""
    if any(not 0.0 <= m <= 1.0 for m in mus):
        raise ValueError("mu values must lie in [0, 1]")
    phases = list(phases) if phases is not None else _default_phases()
    window = family.port_window(port)
    curve = []
    for mu in mus:
        if mu == 0.0:
            curve.append((0.0, 0.0))  # no overlap: the fringe amplitude vanishes
            continue
        configs = [family.config_for_phase(p, mu=mu) for p in phases]
        energies = [e[window] for e in _energies_for_configs(configs, settings, workers)]
        curve.append((float(mu), fit_fringe(phases, energies, port=port).visibility))
    return curve


def find_mu_for_visibility(
    family,
    target: float,
    bracket: tuple[float, float] = (0.15, 0.95),
    phases: Sequence[float] | None = None,
    settings: SolverSettings | None = None,
    workers: int | None = None,
    xtol: float = 1e-3,
) -> float:
    """Invert visibility(mu) = target for the port-E1 fringe by root finding."""
    from scipy.optimize import brentq

    phases = list(phases) if phases is not None else _default_phases()

    def objective(mu: float) -> float:
        configs = [family.config_for_phase(p, mu=mu) for p in phases]
        energies = [e["E1"] for e in _energies_for_configs(configs, settings, workers)]
        return fit_fringe(phases, energies).visibility - target

    return float(brentq(objective, bracket[0], bracket[1], xtol=xtol))


# ---------------------------------------------------------------------------
# exports
# ---------------------------------------------------------------------------

def write_fringe_csv(dataset: FringeDataset, csv_path, sidecar_path=None,
                     config_hash: str | None = None) -> None:
    """Samples as CSV plus a JSON sidecar with the fit parameters."""
    with open(csv_path, "w", encoding="utf-8") as fh:
        if config_hash:
            fh.write(f"# config_sha256={config_hash}\n")
        fh.write("phase,energy\n")
        for p, e in zip(dataset.phases, dataset.energies):
            fh.write(f"{float(p)!r},{float(e)!r}\n")
    if sidecar_path is not None:
        doc = {
            "config_sha256": config_hash,
            "port": dataset.port,
            "offset": dataset.offset,
            "amplitude": dataset.amplitude,
            "phi0": dataset.phi0,
            "visibility": dataset.visibility,
            "n_samples": int(len(dataset.phases)),
            "residual_rms": dataset.residual_rms(),
        }
        with open(sidecar_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
