"""Run configuration: validated dataclass plus a strict TOML loader.

Every key in the file maps to a config field; unknown keys are an error, so a
typo cannot silently fall back to a default.
"""

import hashlib
from dataclasses import dataclass, field, replace

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .collisions import CollisionRates
from .constants import ELEMENTARY_CHARGE
from .core import Grid1D, PhysicalConstants, SpeciesDef
from .errors import ConfigError

__all__ = ["CollisionSetup", "RunConfig", "load_config", "config_from_dict"]

LAYOUTS = ("cell_sorted", "vector_of_structs", "array_of_structs")
BOUNDARIES = ("periodic", "dirichlet")


@dataclass(frozen=True)
class CollisionSetup:
    """Collision coefficients plus the species roles they apply to."""

    enabled: bool
    electron: str
    neutral: str
    ion: str
    rates: CollisionRates


@dataclass
class RunConfig:
    grid: Grid1D
    consts: PhysicalConstants
    species: list
    temperatures_ev: list
    densities_m3: list
    ppc0: int
    n_steps: int
    seed: int
    worker_count: int = 1
    grainsize: int = 500
    layout: str = "cell_sorted"
    boundary: str = "periodic"
    phi_left: float = 0.0
    phi_right: float = 0.0
    field_solve: bool = True
    smoothing_passes: int = 1
    slack: float = 1.5
    max_store_mb: int = 4096
    collisions: CollisionSetup = None
    out_dir: str = None

    def species_index(self, name: str) -> int:
        for i, sp in enumerate(self.species):
            if sp.name == name:
                return i
        raise ConfigError(f"unknown species {name!r}")

    def validate(self):
        problems = []
        if self.ppc0 < 1:
            problems.append("ppc0 must be >= 1")
        # n_steps = 0 is allowed: it means "initialize and emit diagnostics
        # only", which the harness supports.
        if self.n_steps < 0:
            problems.append("n_steps must be >= 0")
        if self.worker_count < 1:
            problems.append("worker_count must be >= 1")
        if self.worker_count > self.grid.nc:
            problems.append("worker_count must not exceed the cell count")
        if self.grainsize < 1:
            problems.append("grainsize must be >= 1")
        if self.slack < 1.0:
            problems.append("slack must be >= 1")
        if self.layout not in LAYOUTS:
            problems.append(f"layout must be one of {LAYOUTS}")
        if self.boundary not in BOUNDARIES:
            problems.append(f"boundary must be one of {BOUNDARIES}")
        if self.smoothing_passes < 0:
            problems.append("smoothing_passes must be >= 0")
        if len(self.species) == 0:
            problems.append("at least one species is required")
        if len(self.temperatures_ev) != len(self.species):
            problems.append("temperatures_ev must match the species list")
        if len(self.densities_m3) != len(self.species):
            problems.append("densities_m3 must match the species list")
        names = [sp.name for sp in self.species]
        if len(set(names)) != len(names):
            problems.append("species names must be unique")
        for t in self.temperatures_ev:
            if t < 0.0:
                problems.append("temperatures must be >= 0 eV")
                break
        for d in self.densities_m3:
            if d < 0.0:
                problems.append("densities must be >= 0")
                break
        if self.collisions is not None and self.collisions.enabled:
            c = self.collisions
            for role, want_charged in (("electron", True), ("neutral", False), ("ion", True)):
                name = getattr(c, role)
                if name not in names:
                    problems.append(f"collisions.{role} names unknown species {name!r}")
                else:
                    sp = self.species[names.index(name)]
                    if sp.charged != want_charged:
                        kind = "charged" if want_charged else "neutral"
                        problems.append(f"collisions.{role} ({name!r}) must be {kind}")
        if problems:
            raise ConfigError("; ".join(problems))

    def config_hash(self) -> str:
        """Stable digest of the physics-relevant configuration."""
        lines = []
        for k in sorted(self.__dict__):
            if k == "out_dir":
                continue
            lines.append(f"{k}={self.__dict__[k]!r}")
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:16]

    def scaled_for_workers(self, workers: int) -> "RunConfig":
        """Weak-scaling variant: nc and length scale with workers, dx fixed."""
        grid = Grid1D.from_cells(self.grid.nc * workers, self.grid.length_m * workers)
        return replace(self, grid=grid, worker_count=workers)


def _take(table: dict, section: str, known: dict) -> dict:
    """Pop known keys (with defaults); any leftover key is an error."""
    out = {}
    for key, default in known.items():
        out[key] = table.pop(key) if key in table else default
    if table:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(table))}")
    return out


_REQUIRED = object()


def _require(values: dict, section: str):
    missing = [k for k, v in values.items() if v is _REQUIRED]
    if missing:
        raise ConfigError(f"missing key(s) in [{section}]: {', '.join(missing)}")


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw)

    grid_t = dict(raw.pop("grid", {}))
    g = _take(grid_t, "grid", {"nc": _REQUIRED, "length_m": _REQUIRED})
    _require(g, "grid")
    grid = Grid1D.from_cells(int(g["nc"]), float(g["length_m"]))

    time_t = dict(raw.pop("time", {}))
    t = _take(time_t, "time", {"dt_s": _REQUIRED, "n_steps": _REQUIRED})
    _require(t, "time")
    consts = PhysicalConstants(dt_s=float(t["dt_s"]))

    run_t = dict(raw.pop("run", {}))
    r = _take(
        run_t,
        "run",
        {
            "seed": _REQUIRED,
            "ppc0": _REQUIRED,
            "workers": 1,
            "grainsize": 500,
            "layout": "cell_sorted",
            "boundary": "periodic",
            "phi_left": 0.0,
            "phi_right": 0.0,
            "field_solve": True,
            "smoothing_passes": 1,
            "slack": 1.5,
            "max_store_mb": 4096,
        },
    )
    _require(r, "run")

    species = []
    temps = []
    dens = []
    for i, sp_t in enumerate(raw.pop("species", [])):
        sec = f"species[{i}]"
        s = _take(
            dict(sp_t),
            sec,
            {
                "name": _REQUIRED,
                "charge_e": _REQUIRED,
                "mass_kg": _REQUIRED,
                "temperature_ev": _REQUIRED,
                "density_m3": _REQUIRED,
                "nstep": 1,
                "active_mover": True,
                "track_transverse": False,
            },
        )
        _require(s, sec)
        species.append(
            SpeciesDef(
                name=str(s["name"]),
                charge_c=float(s["charge_e"]) * ELEMENTARY_CHARGE,
                mass_kg=float(s["mass_kg"]),
                nstep=int(s["nstep"]),
                active_mover=bool(s["active_mover"]),
                track_transverse=bool(s["track_transverse"]),
            )
        )
        temps.append(float(s["temperature_ev"]))
        dens.append(float(s["density_m3"]))

    collisions = None
    if "collisions" in raw:
        c = _take(
            dict(raw.pop("collisions")),
            "collisions",
            {
                "enabled": True,
                "electron": _REQUIRED,
                "neutral": _REQUIRED,
                "ion": _REQUIRED,
                "rate_elastic_m3s": 0.0,
                "rate_excitation_m3s": 0.0,
                "rate_ionization_m3s": 0.0,
                "excitation_threshold_ev": 0.0,
            },
        )
        _require(c, "collisions")
        collisions = CollisionSetup(
            enabled=bool(c["enabled"]),
            electron=str(c["electron"]),
            neutral=str(c["neutral"]),
            ion=str(c["ion"]),
            rates=CollisionRates(
                rate_elastic_m3s=float(c["rate_elastic_m3s"]),
                rate_excitation_m3s=float(c["rate_excitation_m3s"]),
                rate_ionization_m3s=float(c["rate_ionization_m3s"]),
                excitation_threshold_ev=float(c["excitation_threshold_ev"]),
            ),
        )

    out_t = _take(dict(raw.pop("output", {})), "output", {"out_dir": None})

    if raw:
        raise ConfigError(f"unknown top-level section(s): {', '.join(sorted(raw))}")

    cfg = RunConfig(
        grid=grid,
        consts=consts,
        species=species,
        temperatures_ev=temps,
        densities_m3=dens,
        ppc0=int(r["ppc0"]),
        n_steps=int(t["n_steps"]),
        seed=int(r["seed"]),
        worker_count=int(r["workers"]),
        grainsize=int(r["grainsize"]),
        layout=str(r["layout"]),
        boundary=str(r["boundary"]),
        phi_left=float(r["phi_left"]),
        phi_right=float(r["phi_right"]),
        field_solve=bool(r["field_solve"]),
        smoothing_passes=int(r["smoothing_passes"]),
        slack=float(r["slack"]),
        max_store_mb=int(r["max_store_mb"]),
        collisions=collisions,
        out_dir=out_t["out_dir"],
    )
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    with open(path, "rb") as fh:
        return config_from_dict(tomllib.load(fh))
