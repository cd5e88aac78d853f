"""
Configuration operations: counting, restriction, superposition, concentration
sets, labelings and the unlabeling map, plus JSON (de)serialization.
"""

import json
from enum import Enum
from pathlib import Path

import numpy as np

from core.errors import DimensionMismatch
from core.models import AtomModel, Configuration, ConfigurationFile, LabeledSequence, Window, as_points


class ConcentrationMode(str, Enum):
    EQ = "eq"
    GEQ = "geq"
    LEQ = "leq"


def _check_dim(left: int, right: int) -> None:
    if left != right:
        raise DimensionMismatch(left, right)


# ============================================================================
# COUNTING AND RESTRICTION
# ============================================================================


def count(gamma: Configuration, window: Window) -> int:
    """Total mass of gamma inside the window."""
    _check_dim(gamma.dim, window.dim)
    if gamma.n_atoms == 0:
        return 0
    return int(gamma.multiplicities[window.contains(gamma.points)].sum())


def restrict(gamma: Configuration, window: Window) -> Configuration:
    """Atoms of gamma inside the window, multiplicities unchanged."""
    _check_dim(gamma.dim, window.dim)
    if gamma.n_atoms == 0:
        return gamma
    mask = window.contains(gamma.points)
    return Configuration.from_atoms(gamma.points[mask], gamma.multiplicities[mask], gamma.dim)


def restrict_open(gamma: Configuration, window: Window) -> Configuration:
    """Atoms of gamma inside the interior of the window."""
    _check_dim(gamma.dim, window.dim)
    if gamma.n_atoms == 0:
        return gamma
    mask = window.contains_open(gamma.points)
    return Configuration.from_atoms(gamma.points[mask], gamma.multiplicities[mask], gamma.dim)


def superpose(gamma: Configuration, eta: Configuration) -> Configuration:
    """Multiset sum of two configurations."""
    _check_dim(gamma.dim, eta.dim)
    return Configuration.from_atoms(
        np.vstack([gamma.points, eta.points]),
        np.concatenate([gamma.multiplicities, eta.multiplicities]),
        gamma.dim,
    )


def in_concentration_set(gamma: Configuration, window: Window, n: int, mode: ConcentrationMode) -> bool:
    """Membership in the n-concentration set of the window, per mode."""
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    k = count(gamma, window)
    mode = ConcentrationMode(mode)
    if mode is ConcentrationMode.EQ:
        return k == n
    if mode is ConcentrationMode.GEQ:
        return k >= n
    return k <= n


# ============================================================================
# LABELINGS
# ============================================================================


def _canonical_order(gamma: Configuration, anchor_pt: np.ndarray) -> np.ndarray:
    """Atom indices by distance to the anchor, then lexicographically."""
    if gamma.n_atoms == 0:
        return np.zeros(0, dtype=int)
    dist = np.linalg.norm(gamma.points - anchor_pt, axis=1)
    # np.lexsort sorts by the last key first
    keys = [gamma.points[:, k] for k in reversed(range(gamma.dim))] + [dist]
    return np.lexsort(keys)


def unlabel(x: LabeledSequence) -> Configuration:
    """One unit of mass per listed point; duplicates merge into multiplicity."""
    return Configuration.from_points(x.points, x.dim)


def truncate(x: LabeledSequence, m: int) -> LabeledSequence:
    """First min(m, len(x)) points, in order."""
    if m < 1:
        raise ValueError(f"Truncation length must be positive, got {m}")
    return LabeledSequence(x.points[:m], x.dim)


def canonical_label(gamma: Configuration, anchor=None) -> LabeledSequence:
    """Expanded atoms sorted by distance to the anchor, ties broken lexicographically."""
    anchor_pt = np.zeros(gamma.dim) if anchor is None else as_points(anchor, gamma.dim)[0]
    order = _canonical_order(gamma, anchor_pt)
    return LabeledSequence(np.repeat(gamma.points[order], gamma.multiplicities[order], axis=0), gamma.dim)


# ============================================================================
# SERIALIZATION
# ============================================================================


def configuration_to_model(gamma: Configuration) -> ConfigurationFile:
    """File model with atoms in canonical-label order around the origin."""
    order = _canonical_order(gamma, np.zeros(gamma.dim))
    atoms = [
        AtomModel(x=[float(c) for c in gamma.points[i]], m=int(gamma.multiplicities[i])) for i in order
    ]
    return ConfigurationFile(dim=gamma.dim, atoms=atoms)


def configuration_from_model(model: ConfigurationFile) -> Configuration:
    if not model.atoms:
        return Configuration.empty(model.dim)
    return Configuration.from_atoms([a.x for a in model.atoms], [a.m for a in model.atoms], model.dim)


def configuration_to_json(gamma: Configuration) -> str:
    return json.dumps(configuration_to_model(gamma).model_dump(), separators=(",", ":"))


def configuration_from_json(text: str) -> Configuration:
    return configuration_from_model(ConfigurationFile.model_validate_json(text))


def load_configuration(file_path: str | Path) -> Configuration:
    """Load a configuration JSON file."""
    file_path = Path(file_path)
    if not file_path.exists():
        raise FileNotFoundError(f"Configuration file not found: {file_path}")
    return configuration_from_json(file_path.read_text(encoding="utf-8"))


def save_configuration(gamma: Configuration, file_path: str | Path) -> None:
    Path(file_path).write_text(configuration_to_json(gamma) + "\n", encoding="utf-8")
