"""Run configuration: JSON schema, validation, and model builders.

A single structured config file drives every command; flag overrides win.
Validation happens before any allocation and reports offending field paths.
The fully resolved config (defaults applied) is echoed into every report so
artifacts are self-describing.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from . import one_particle as op_mod
from .fock import FockBasis
from .particle import PotentialSpec, SpatialGrid, coulomb_values
from .pauli_fierz import CompositeSpace

__all__ = ["RunConfig", "ConfigError", "DEFAULT_CONFIG", "ALL_SUITES"]

ALL_SUITES = (
    "ccr",
    "field_energy",
    "bounds",
    "composite_commutators",
    "leibniz",
    "theorem2",
    "step1",
    "relative_bounds",
    "noncommuting",
    "corollary",
)

# suites that exercise commutators and therefore need quanta headroom
_COMMUTATOR_SUITES = {"ccr", "field_energy", "composite_commutators",
                      "leibniz", "theorem2", "step1", "noncommuting"}

DEFAULT_CONFIG: dict = {
    "seed": 2024,
    "out_dir": "pfcheck_out",
    "threads": 0,               # 0 = use all available cores
    "dense_oracle": True,
    "figures": True,
    "dense_threshold": 4096,
    "dimension_budget": 5_000_000,
    "spatial": {
        "points": 16,
        "length": 2.0 * np.pi,
        "coords_per_particle": 1,
    },
    "particles": {
        "count": 1,
        "masses": [1.0],
        "charges": [1.0],
        "spin": False,
    },
    "photon": {
        "mass": 0.0,
        "max_index": 1,
        "radial_cutoff": None,
        "form_factor": "flat",      # "flat" | "asymmetric"
    },
    "fock": {"quanta_cutoff": 3},
    "potential": {
        "enabled": False,
        "softening": None,          # None -> one grid spacing
        "pair_coefficient": 0.0,
        "nuclei": [],               # [{"position": [...], "charges": [...]}]
    },
    "suites": ["ccr", "field_energy", "bounds", "composite_commutators",
               "leibniz", "theorem2", "step1", "relative_bounds"],
    "sweep": {"couplings": [0.0, 0.5, 1.0, 2.0], "shift_grid": [0.0, 1.0]},
    "spectrum": {"eigenvalues": 1},
    "tolerances": {},
    "checks": {"pairs": 50, "vectors": 10},
}

_POLARIZATION_FRAME = {
    "auxiliary_axis": [1.0, 0.0, 0.0],
    "fallback_axis": [0.0, 1.0, 0.0],
    "rule": "gram-schmidt of the auxiliary axis against k-hat; eps2 = k-hat x eps1",
}


class ConfigError(ValueError):
    """Validation failure; .errors lists `field.path: message` strings."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


def _merge(base: dict, override: dict, path="", errors=None) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            if errors is not None:
                errors.append(f"{here}: unknown field")
            continue
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, here, errors)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass
class RunConfig:
    """Validated run configuration with model builders."""

    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict | None = None, overrides: dict | None = None) -> "RunConfig":
        errors: list[str] = []
        resolved = _merge(DEFAULT_CONFIG, data or {}, errors=errors)
        if overrides:
            resolved = _merge(resolved, overrides, errors=errors)
        cfg = cls(resolved)
        errors.extend(cfg._validate())
        if errors:
            raise ConfigError(errors)
        return cfg

    @classmethod
    def from_file(cls, path, overrides: dict | None = None) -> "RunConfig":
        with open(path) as fh:
            data = json.load(fh)
        return cls.from_dict(data, overrides)

    # -- accessors ---------------------------------------------------------
    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def suites(self) -> list[str]:
        return list(self.raw["suites"])

    @property
    def n_particles(self) -> int:
        return int(self.raw["particles"]["count"])

    @property
    def coords_per_particle(self) -> int:
        return int(self.raw["spatial"]["coords_per_particle"])

    @property
    def n_coords(self) -> int:
        return self.n_particles * self.coords_per_particle

    @property
    def points(self) -> int:
        return int(self.raw["spatial"]["points"])

    @property
    def length(self) -> float:
        return float(self.raw["spatial"]["length"])

    @property
    def spin(self) -> bool:
        return bool(self.raw["particles"]["spin"])

    @property
    def masses(self) -> np.ndarray:
        return np.asarray(self.raw["particles"]["masses"], dtype=float)

    @property
    def charges(self) -> np.ndarray:
        return np.asarray(self.raw["particles"]["charges"], dtype=float)

    @property
    def quanta_cutoff(self) -> int:
        return int(self.raw["fock"]["quanta_cutoff"])

    @property
    def dense_threshold(self) -> int:
        return int(self.raw["dense_threshold"])

    @property
    def softening(self) -> float:
        value = self.raw["potential"]["softening"]
        return float(value) if value is not None else self.length / self.points

    def tolerance(self, name: str, default: float) -> float:
        return float(self.raw["tolerances"].get(name, default))

    # -- validation --------------------------------------------------------
    def _validate(self) -> list[str]:
        r = self.raw
        errors = []
        if not isinstance(r["seed"], int) or r["seed"] < 0:
            errors.append("seed: must be a non-negative integer")
        points = r["spatial"]["points"]
        if not isinstance(points, int) or points < 2:
            errors.append("spatial.points: need at least 2 points per axis")
            return errors
        if r["spatial"]["length"] <= 0:
            errors.append("spatial.length: must be positive")
        cpp = r["spatial"]["coords_per_particle"]
        if cpp not in (1, 3):
            errors.append("spatial.coords_per_particle: must be 1 (line) or 3 "
                          "(radiation couplings)")
            return errors
        n = r["particles"]["count"]
        if not isinstance(n, int) or n < 1:
            errors.append("particles.count: must be a positive integer")
            return errors
        if len(r["particles"]["masses"]) != n:
            errors.append("particles.masses: need one mass per particle")
        elif any(m <= 0 for m in r["particles"]["masses"]):
            errors.append("particles.masses: masses must be positive")
        if len(r["particles"]["charges"]) != n:
            errors.append("particles.charges: need one charge per particle")
        if r["particles"]["spin"] and cpp != 3:
            errors.append("particles.spin: the spin-field term needs "
                          "coords_per_particle = 3")
        if r["photon"]["mass"] < 0:
            errors.append("photon.mass: must be >= 0")
        max_index = r["photon"]["max_index"]
        if not isinstance(max_index, int) or max_index < 1:
            errors.append("photon.max_index: must be a positive integer")
        else:
            nyquist = (points - 1) // 2 if points % 2 else points // 2 - 1
            if max_index > nyquist:
                errors.append(
                    f"photon.max_index: {max_index} violates the Nyquist rule "
                    f"for {points} points (largest usable index {nyquist})")
        if r["photon"]["form_factor"] not in ("flat", "asymmetric"):
            errors.append("photon.form_factor: must be 'flat' or 'asymmetric'")
        cutoff = r["fock"]["quanta_cutoff"]
        if not isinstance(cutoff, int) or cutoff < 0:
            errors.append("fock.quanta_cutoff: must be a non-negative integer")
        requested = set(r["suites"])
        unknown = requested.difference(ALL_SUITES)
        for name in sorted(unknown):
            errors.append(f"suites: unknown suite '{name}'")
        if requested & _COMMUTATOR_SUITES and isinstance(cutoff, int) and cutoff < 2:
            errors.append(
                "fock.quanta_cutoff: must be >= 2 for commutator suites "
                f"(requested: {sorted(requested & _COMMUTATOR_SUITES)})")
        if "noncommuting" in requested and n < 2:
            errors.append("particles.count: the noncommuting suite needs at "
                          "least 2 particles (single-particle component "
                          "commutators vanish identically)")
        pot = r["potential"]
        if pot["enabled"]:
            if pot["softening"] is not None and pot["softening"] <= 0:
                errors.append("potential.softening: must be > 0")
            for i, nuc in enumerate(pot["nuclei"]):
                pos = nuc.get("position")
                charges = nuc.get("charges")
                if pos is None or len(pos) != cpp:
                    errors.append(f"potential.nuclei[{i}].position: need "
                                  f"{cpp} coordinates")
                elif any(not 0 <= x < r["spatial"]["length"] for x in pos):
                    errors.append(f"potential.nuclei[{i}].position: must lie "
                                  "inside the box [0, L)")
                if charges is None or len(charges) != n:
                    errors.append(f"potential.nuclei[{i}].charges: need one "
                                  "value per particle")
        k = r["spectrum"]["eigenvalues"]
        if not isinstance(k, int) or k < 1:
            errors.append("spectrum.eigenvalues: must be a positive integer")
        if errors:
            return errors
        # dimension budget (only when the geometry fields are individually sane)
        dim = self._dimension()
        if dim > r["dimension_budget"]:
            errors.append(f"dimension_budget: composite dimension {dim} "
                          f"exceeds the budget {r['dimension_budget']}")
        if isinstance(k, int) and k >= dim:
            errors.append(f"spectrum.eigenvalues: {k} >= composite dimension {dim}")
        return errors

    def _dimension(self) -> int:
        from math import comb

        slots = self._mode_count() * (2 if self.coords_per_particle == 3 else 1)
        fock_dim = comb(slots + self.quanta_cutoff, self.quanta_cutoff)
        spin_dim = 2**self.n_particles if self.spin else 1
        return self.points**self.n_coords * spin_dim * fock_dim

    def _mode_count(self) -> int:
        grid = self.mode_grid()
        return grid.n_modes

    # -- builders ----------------------------------------------------------
    def form_factor(self):
        kind = self.raw["photon"]["form_factor"]
        if kind == "flat":
            return None
        def rho(k):
            lead = k[0] if k.ndim else float(k)
            return 1.5 if lead > 1e-12 else 1.0
        return rho

    def mode_grid(self) -> op_mod.ModeGrid:
        cpp = self.coords_per_particle
        return op_mod.reciprocal_mode_grid(
            self.length,
            cpp,
            int(self.raw["photon"]["max_index"]),
            photon_mass=float(self.raw["photon"]["mass"]),
            polarization_count=2 if cpp == 3 else 1,
            radial_cutoff=self.raw["photon"]["radial_cutoff"],
        )

    def couplings(self):
        """(vector families, magnetic families or None) for this geometry."""
        grid = self.mode_grid()
        if self.coords_per_particle == 1:
            return op_mod.line_couplings(grid, self.n_particles, self.form_factor()), None
        if self.coords_per_particle == 3:
            return op_mod.qed_couplings(grid, self.n_particles, self.form_factor())
        raise ConfigError(["spatial.coords_per_particle: couplings are defined "
                           "for 1 or 3 coordinates per particle"])

    def spatial_grid(self) -> SpatialGrid:
        return SpatialGrid(self.n_coords, self.points, self.length)

    def fock_basis(self) -> FockBasis:
        return FockBasis(self.mode_grid(), self.quanta_cutoff)

    def composite_space(self) -> CompositeSpace:
        return CompositeSpace(
            self.spatial_grid(),
            self.fock_basis(),
            n_particles=self.n_particles,
            spin=self.spin,
            dimension_budget=int(self.raw["dimension_budget"]),
        )

    def potential_spec(self) -> PotentialSpec | None:
        pot = self.raw["potential"]
        if not pot["enabled"]:
            return None
        n = self.n_particles
        pair = None
        if pot["pair_coefficient"]:
            pair = np.full((n, n), float(pot["pair_coefficient"]))
            np.fill_diagonal(pair, 0.0)
        positions = charges = None
        if pot["nuclei"]:
            positions = np.asarray([nuc["position"] for nuc in pot["nuclei"]], float)
            charges = np.asarray([[nuc["charges"][j] for nuc in pot["nuclei"]]
                                  for j in range(n)], float)
        return PotentialSpec(n, self.softening, pair, positions, charges)

    def potential_values(self, grid: SpatialGrid | None = None):
        spec = self.potential_spec()
        if spec is None:
            return None
        grid = grid or self.spatial_grid()
        return coulomb_values(grid, spec, self.coords_per_particle)

    def echo(self) -> dict:
        """Fully resolved config for embedding into reports."""
        out = copy.deepcopy(self.raw)
        out["resolved"] = {
            "composite_dimension": self._dimension(),
            "mode_count": self._mode_count(),
            "softening": self.softening if self.raw["potential"]["enabled"] else None,
            "polarization_frame": copy.deepcopy(_POLARIZATION_FRAME),
        }
        return out
