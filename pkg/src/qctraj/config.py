"""Run configuration: YAML loading, overrides, and initial-state construction.

Config files are YAML mappings (see docs/formats.md and fixtures/ for the
schema). Complex numbers are written as [re, im] pairs; plain numbers are
taken as real. Overrides arrive as dotted KEY=VALUE strings from the CLI and
are applied to the raw mapping before validation, so an override goes through
exactly the same checks as the file itself.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import yaml

from .errors import ConfigError
from .kernels import Mollifier, QuadratureGrid
from .model import (
    ClosureState,
    HybridHamiltonian,
    Weights,
    sample_phase_points,
)

MODELS = ("ehrenfest", "meanfield", "regularized")


def parse_complex_scalar(v, where: str) -> complex:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(float(v), 0.0)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
    ):
        return complex(float(v[0]), float(v[1]))
    raise ConfigError(f"{where}: expected a number or [re, im] pair, got {v!r}")


def parse_complex_matrix(rows, where: str) -> np.ndarray:
    if not isinstance(rows, (list, tuple)) or not rows:
        raise ConfigError(f"{where}: expected a list of rows")
    for i, row in enumerate(rows):
        if not isinstance(row, (list, tuple)):
            raise ConfigError(f"{where}[{i}]: expected a row list")
    mat = [[parse_complex_scalar(v, f"{where}[{i}][{j}]") for j, v in enumerate(row)]
           for i, row in enumerate(rows)]
    try:
        arr = np.array(mat, dtype=complex)
    except ValueError as e:
        raise ConfigError(f"{where}: ragged rows") from e
    if arr.ndim != 2:
        raise ConfigError(f"{where}: ragged rows")
    return arr


def parse_complex_vector(vals, where: str) -> np.ndarray:
    if not isinstance(vals, (list, tuple)) or not vals:
        raise ConfigError(f"{where}: expected a list of entries")
    return np.array([parse_complex_scalar(v, f"{where}[{i}]") for i, v in enumerate(vals)],
                    dtype=complex)


def _complex_out(x: complex):
    return float(x.real) if x.imag == 0.0 else [float(x.real), float(x.imag)]


@dataclass(frozen=True)
class InitialConfig:
    """Initial ensemble description: Gaussian cloud plus quantum state."""

    mean: np.ndarray
    cov: np.ndarray
    psi: Optional[np.ndarray] = None
    psi_list: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    weights: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        out = {"mean": self.mean.tolist(), "cov": self.cov.tolist()}
        if self.psi is not None:
            out["psi"] = [_complex_out(x) for x in self.psi]
        if self.psi_list is not None:
            out["psi_list"] = [[_complex_out(x) for x in row] for row in self.psi_list]
        if self.rho is not None:
            out["rho"] = [[_complex_out(x) for x in row] for row in self.rho]
        if self.weights is not None:
            out["weights"] = self.weights.tolist()
        return out


@dataclass(frozen=True)
class RunConfig:
    model: str
    hamiltonian: HybridHamiltonian
    initial: InitialConfig
    n_traj: int
    hbar: float = 1.0
    dt: float = 1e-3
    t_final: float = 1.0
    output_every: int = 100
    snapshot_every: int = 0
    seed: int = 0
    deterministic: bool = False
    coupling_hbar_terms: bool = True
    pair_cutoff: bool = True
    table_norms: bool = False
    mollifier: Optional[Mollifier] = None
    grid: Optional[QuadratureGrid] = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}; choose one of {MODELS}")
        if self.n_traj < 1:
            raise ConfigError(f"n_traj must be at least 1, got {self.n_traj}")
        if not (np.isfinite(self.dt) and self.dt > 0.0):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if not (np.isfinite(self.t_final) and self.t_final > 0.0):
            raise ConfigError(f"t_final must be positive, got {self.t_final!r}")
        if self.t_final < self.dt:
            raise ConfigError("t_final must be at least one step long")
        if not (np.isfinite(self.hbar) and self.hbar > 0.0):
            raise ConfigError(f"hbar must be positive, got {self.hbar!r}")
        if self.output_every < 1:
            raise ConfigError("output_every must be a positive step count")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0 (0 writes only the final snapshot)")
        if self.model == "regularized":
            if self.mollifier is None or self.grid is None:
                raise ConfigError("the regularized model needs mollifier.alpha and a grid block")
        n = self.hamiltonian.dim
        init = self.initial
        if init.psi is not None and init.psi.shape != (n,):
            raise ConfigError(f"initial.psi must have length {n}")
        if init.psi_list is not None and init.psi_list.shape != (self.n_traj, n):
            raise ConfigError(f"initial.psi_list must have shape ({self.n_traj}, {n})")
        if init.rho is not None and init.rho.shape != (n, n):
            raise ConfigError(f"initial.rho must have shape ({n}, {n})")
        if init.weights is not None and init.weights.shape != (self.n_traj,):
            raise ConfigError(f"initial.weights must have length {self.n_traj}")
        if self.model == "meanfield":
            if init.rho is None and init.psi is None:
                raise ConfigError("meanfield runs need initial.rho or initial.psi")
            if init.psi_list is not None:
                raise ConfigError("initial.psi_list does not apply to the shared-density model")
        else:
            if init.psi is None and init.psi_list is None:
                raise ConfigError(f"{self.model} runs need initial.psi or initial.psi_list")
            if init.rho is not None:
                raise ConfigError("initial.rho applies only to the meanfield model")

    def to_dict(self) -> dict:
        """Canonical plain-data echo of every effective setting (manifest body)."""
        out = {
            "model": self.model,
            "n_traj": self.n_traj,
            "hbar": self.hbar,
            "dt": self.dt,
            "t_final": self.t_final,
            "output_every": self.output_every,
            "snapshot_every": self.snapshot_every,
            "seed": self.seed,
            "deterministic": self.deterministic,
            "coupling_hbar_terms": self.coupling_hbar_terms,
            "pair_cutoff": self.pair_cutoff,
            "table_norms": self.table_norms,
            "hamiltonian": {
                "terms": [
                    {
                        "coeff": t.coeff,
                        "q_power": t.q_power,
                        "p_power": t.p_power,
                        "matrix": [[_complex_out(x) for x in row] for row in t.matrix],
                    }
                    for t in self.hamiltonian.terms
                ]
            },
            "initial": self.initial.to_dict(),
        }
        if self.mollifier is not None:
            out["mollifier"] = {"alpha": self.mollifier.alpha}
        if self.grid is not None:
            g = self.grid
            out["grid"] = {
                "q_min": g.q_min, "q_max": g.q_max,
                "p_min": g.p_min, "p_max": g.p_max,
                "n_q": g.n_q, "n_p": g.n_p,
            }
        return out


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing required key {where}{key}")
    return d[key]


def _opt_bool(d: dict, key: str, default: bool) -> bool:
    v = d.get(key, default)
    if not isinstance(v, bool):
        raise ConfigError(f"{key} must be a boolean, got {v!r}")
    return v


def _as_int(v, key: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return v


def _as_float(v, key: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    return float(v)


def config_from_dict(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    known = {
        "model", "n_traj", "hbar", "dt", "t_final", "output_every", "snapshot_every",
        "seed", "deterministic", "coupling_hbar_terms", "pair_cutoff", "table_norms",
        "hamiltonian", "mollifier", "grid", "initial",
    }
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")

    ham_block = _need(raw, "hamiltonian", "")
    if not isinstance(ham_block, dict) or not isinstance(ham_block.get("terms"), list):
        raise ConfigError("hamiltonian must be a mapping with a terms list")
    specs = []
    for i, term in enumerate(ham_block["terms"]):
        where = f"hamiltonian.terms[{i}]"
        if not isinstance(term, dict):
            raise ConfigError(f"{where} must be a mapping")
        specs.append((
            _as_float(_need(term, "coeff", where + "."), where + ".coeff"),
            _as_int(term.get("q_power", 0), where + ".q_power"),
            _as_int(term.get("p_power", 0), where + ".p_power"),
            parse_complex_matrix(_need(term, "matrix", where + "."), where + ".matrix"),
        ))
    H = HybridHamiltonian.from_terms(specs)

    mollifier = None
    if "mollifier" in raw:
        mb = raw["mollifier"]
        if not isinstance(mb, dict):
            raise ConfigError("mollifier must be a mapping with key alpha")
        mollifier = Mollifier(alpha=_as_float(_need(mb, "alpha", "mollifier."), "mollifier.alpha"))

    grid = None
    if "grid" in raw:
        gb = raw["grid"]
        if not isinstance(gb, dict):
            raise ConfigError("grid must be a mapping")
        grid = QuadratureGrid(
            q_min=_as_float(_need(gb, "q_min", "grid."), "grid.q_min"),
            q_max=_as_float(_need(gb, "q_max", "grid."), "grid.q_max"),
            p_min=_as_float(_need(gb, "p_min", "grid."), "grid.p_min"),
            p_max=_as_float(_need(gb, "p_max", "grid."), "grid.p_max"),
            n_q=_as_int(_need(gb, "n_q", "grid."), "grid.n_q"),
            n_p=_as_int(_need(gb, "n_p", "grid."), "grid.n_p"),
        )

    ib = _need(raw, "initial", "")
    if not isinstance(ib, dict):
        raise ConfigError("initial must be a mapping")
    mean = np.asarray(_need(ib, "mean", "initial."), dtype=float)
    cov = np.asarray(_need(ib, "cov", "initial."), dtype=float)
    psi = psi_list = rho = weights = None
    if "psi" in ib:
        psi = parse_complex_vector(ib["psi"], "initial.psi")
        nrm = np.linalg.norm(psi)
        if nrm == 0.0:
            raise ConfigError("initial.psi must be nonzero")
        if abs(nrm - 1.0) > 1e-13:  # keep already-normalized input bit-exact
            psi = psi / nrm
    if "psi_list" in ib:
        rows = ib["psi_list"]
        if not isinstance(rows, list) or not rows:
            raise ConfigError("initial.psi_list must be a nonempty list")
        vecs = [parse_complex_vector(r, f"initial.psi_list[{i}]") for i, r in enumerate(rows)]
        psi_list = np.array(vecs, dtype=complex)
        norms = np.linalg.norm(psi_list, axis=1)
        if np.any(norms == 0.0):
            raise ConfigError("initial.psi_list entries must be nonzero")
        if np.max(np.abs(norms - 1.0)) > 1e-13:
            psi_list = psi_list / norms[:, None]
    if "rho" in ib:
        rho = parse_complex_matrix(ib["rho"], "initial.rho")
        tr = np.trace(rho).real
        if abs(tr) < 1e-300:
            raise ConfigError("initial.rho must have nonzero trace")
        if abs(tr - 1.0) > 1e-13:
            rho = rho / tr
    if "weights" in ib:
        weights = np.asarray(ib["weights"], dtype=float)
    for key in ib:
        if key not in {"mean", "cov", "psi", "psi_list", "rho", "weights"}:
            raise ConfigError(f"unknown initial key {key!r}")
    initial = InitialConfig(mean=mean, cov=cov, psi=psi, psi_list=psi_list,
                            rho=rho, weights=weights)

    return RunConfig(
        model=_need(raw, "model", ""),
        hamiltonian=H,
        initial=initial,
        n_traj=_as_int(_need(raw, "n_traj", ""), "n_traj"),
        hbar=_as_float(raw.get("hbar", 1.0), "hbar"),
        dt=_as_float(_need(raw, "dt", ""), "dt"),
        t_final=_as_float(_need(raw, "t_final", ""), "t_final"),
        output_every=_as_int(raw.get("output_every", 100), "output_every"),
        snapshot_every=_as_int(raw.get("snapshot_every", 0), "snapshot_every"),
        seed=_as_int(raw.get("seed", 0), "seed"),
        deterministic=_opt_bool(raw, "deterministic", False),
        coupling_hbar_terms=_opt_bool(raw, "coupling_hbar_terms", True),
        pair_cutoff=_opt_bool(raw, "pair_cutoff", True),
        table_norms=_opt_bool(raw, "table_norms", False),
        mollifier=mollifier,
        grid=grid,
    )


def load_raw(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must contain a YAML mapping")
    return raw


def load_config(path) -> RunConfig:
    return config_from_dict(load_raw(path))


def apply_overrides(raw: dict, pairs: Sequence[str]) -> dict:
    """Apply KEY=VALUE overrides with dotted keys to a raw config mapping.

    Values are parsed as YAML scalars, so `--set dt=5e-4`,
    `--set coupling_hbar_terms=off`, and `--set initial.mean=[1.2, 0]` all work.
    """
    out = {k: v for k, v in raw.items()}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not KEY=VALUE")
        key, _, text = pair.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"override {pair!r} has an empty key")
        try:
            value = yaml.safe_load(text) if text.strip() else None
        except yaml.YAMLError as e:
            raise ConfigError(f"override {pair!r}: bad value ({e})") from e
        # YAML 1.1 reads dot-less scientific notation like 5e-4 as a string
        if isinstance(value, str) and re.fullmatch(
            r"[-+]?(\d+\.?\d*|\.\d+)[eE][-+]?\d+", value.strip()
        ):
            value = float(value)
        parts = key.split(".")
        node = out
        for part in parts[:-1]:
            child = node.get(part)
            if child is None:
                child = {}
            elif isinstance(child, dict):
                child = dict(child)
            else:
                raise ConfigError(f"override {pair!r}: {part} is not a mapping")
            node[part] = child
            node = child
        node[parts[-1]] = value
    return out


def build_state(config: RunConfig) -> ClosureState:
    """Sample the initial ensemble for a run; deterministic given the seed."""
    q, p = sample_phase_points(config.initial.mean, config.initial.cov,
                               config.n_traj, config.seed)
    if config.initial.weights is not None:
        weights = Weights.normalized(config.initial.weights)
    else:
        weights = Weights.uniform(config.n_traj)
    if config.model == "meanfield":
        rho = config.initial.rho
        if rho is None:
            rho = np.outer(config.initial.psi, np.conjugate(config.initial.psi))
        return ClosureState(q=q, p=p, weights=weights, hbar=config.hbar, rho=rho)
    psi = config.initial.psi_list
    if psi is None:
        psi = np.tile(config.initial.psi, (config.n_traj, 1))
    return ClosureState(q=q, p=p, weights=weights, hbar=config.hbar, psi=psi)
