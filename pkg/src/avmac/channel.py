"""Finite arbitrarily varying MAC: representation, mixtures, n-letter products.

A channel is a dense tensor ``w[s, x, y, z] = W(z | x, y | s)``. Alphabets are
index sets ``range(k)``; labels, when present, are carried for reporting only.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    InputError,
    InvalidDistribution,
    LengthMismatch,
    NegativeEntry,
    NonStochasticRow,
    UnknownName,
)

INPUT_TOL = 1e-9
INTERNAL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    w: np.ndarray
    labels: dict = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if self.w.ndim != 4:
            raise DimensionMismatch(f"channel tensor must be 4-d (s,x,y,z), got shape {self.w.shape}")
        self.w.setflags(write=False)

    @property
    def ns(self) -> int:
        return self.w.shape[0]

    @property
    def nx(self) -> int:
        return self.w.shape[1]

    @property
    def ny(self) -> int:
        return self.w.shape[2]

    @property
    def nz(self) -> int:
        return self.w.shape[3]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        return self.nx, self.ny, self.nz, self.ns

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"<ChannelSpec{tag} nx={self.nx} ny={self.ny} nz={self.nz} ns={self.ns}>"


def validate_channel(raw, nx: int, ny: int, nz: int, ns: int, labels=None, name="") -> ChannelSpec:
    """Check a raw tensor against the dimensions and return a ChannelSpec.

    ``raw`` may be nested lists indexed [s][x][y][z] or any array with
    ``nx*ny*nz*ns`` entries in that row-major order.
    """
    for label, d in (("nx", nx), ("ny", ny), ("nz", nz), ("ns", ns)):
        if int(d) != d or d < 1:
            raise DimensionMismatch(f"{label} must be a positive integer, got {d!r}")
    try:
        arr = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InputError(f"channel tensor is not numeric: {exc}") from None
    if arr.size != nx * ny * nz * ns:
        raise DimensionMismatch(f"tensor has {arr.size} entries, expected {nx * ny * nz * ns}")
    if arr.ndim > 1 and arr.shape != (ns, nx, ny, nz):
        raise DimensionMismatch(f"tensor shape {arr.shape} does not match (ns,nx,ny,nz)=({ns},{nx},{ny},{nz})")
    w = arr.reshape(ns, nx, ny, nz).copy()
    if not np.all(np.isfinite(w)):
        raise InputError("channel tensor contains non-finite entries")
    if np.any(w < 0):
        s, x, y, z = np.argwhere(w < 0)[0]
        raise NegativeEntry(f"w[{s},{x},{y},{z}] = {w[s, x, y, z]} < 0")
    sums = w.sum(axis=-1)
    bad = np.abs(sums - 1.0) > INPUT_TOL
    if np.any(bad):
        s, x, y = np.argwhere(bad)[0]
        raise NonStochasticRow(f"row (s={s}, x={x}, y={y}) sums to {sums[s, x, y]!r}")
    w /= sums[..., None]
    return ChannelSpec(w, dict(labels or {}), name)


def check_prior(q, ns: int) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (ns,):
        raise DimensionMismatch(f"state prior has shape {q.shape}, expected ({ns},)")
    if np.any(q < -INTERNAL_TOL) or abs(q.sum() - 1.0) > INPUT_TOL:
        raise InvalidDistribution(f"not a probability vector: {q}")
    q = np.clip(q, 0.0, None)
    return q / q.sum()


def mixture_tensor(w: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``sum_s q[..., s] * w[s]`` for a single prior or a batch of priors."""
    return np.tensordot(q, w, axes=([-1], [0]))


def mixture_channel(ch: ChannelSpec, q) -> ChannelSpec:
    q = check_prior(q, ch.ns)
    v = mixture_tensor(ch.w, q)
    v /= v.sum(axis=-1, keepdims=True)
    return ChannelSpec(v[None], ch.labels, ch.name)


def _as_word(word, n, size, what):
    word = np.asarray(word, dtype=np.int64).reshape(-1)
    if len(word) != n:
        raise LengthMismatch(f"{what} has length {len(word)}, expected {n}")
    if np.any(word < 0) or np.any(word >= size):
        raise InputError(f"{what} has letters outside [0, {size})")
    return word


def product_probability(ch: ChannelSpec, s, xw, yw, zw) -> float:
    """W^n(z | x, y | s) as the product of single-letter transition probabilities."""
    s = np.asarray(s, dtype=np.int64).reshape(-1)
    n = len(s)
    if n < 1:
        raise LengthMismatch("state sequence must have length >= 1")
    s = _as_word(s, n, ch.ns, "state sequence")
    xw = _as_word(xw, n, ch.nx, "x-word")
    yw = _as_word(yw, n, ch.ny, "y-word")
    zw = _as_word(zw, n, ch.nz, "z-word")
    return float(np.prod(ch.w[s, xw, yw, zw]))


def _deterministic(ns, nx, ny, nz, fn, name):
    w = np.zeros((ns, nx, ny, nz))
    for s in range(ns):
        for x in range(nx):
            for y in range(ny):
                w[s, x, y, fn(x, y, s)] = 1.0
    return ChannelSpec(w, {}, name)


BUILTIN_NAMES = ("gubner", "xor", "adder-noiseless")


def builtin_channel(name: str) -> ChannelSpec:
    if name == "gubner":
        return _deterministic(2, 2, 2, 4, lambda x, y, s: x + y + s, "gubner")
    if name == "xor":
        return _deterministic(2, 2, 2, 2, lambda x, y, s: x ^ y ^ s, "xor")
    if name == "adder-noiseless":
        return _deterministic(1, 2, 2, 3, lambda x, y, s: x + y, "adder-noiseless")
    raise UnknownName(f"unknown builtin channel {name!r}; choose from {', '.join(BUILTIN_NAMES)}")


_FILE_KEYS = {"nx", "ny", "nz", "ns", "w", "labels", "name"}


def channel_from_dict(obj: dict) -> ChannelSpec:
    if not isinstance(obj, dict):
        raise InputError("channel file must contain a JSON object")
    extra = set(obj) - _FILE_KEYS
    if extra:
        raise InputError(f"unknown keys in channel file: {sorted(extra)}")
    missing = {"nx", "ny", "nz", "ns", "w"} - set(obj)
    if missing:
        raise InputError(f"channel file lacks keys: {sorted(missing)}")
    labels = obj.get("labels", {})
    if not isinstance(labels, dict):
        raise InputError("'labels' must be an object")
    return validate_channel(obj["w"], obj["nx"], obj["ny"], obj["nz"], obj["ns"], labels, obj.get("name", ""))


def channel_to_dict(ch: ChannelSpec) -> dict:
    out = {"nx": ch.nx, "ny": ch.ny, "nz": ch.nz, "ns": ch.ns, "w": ch.w.tolist()}
    if ch.labels:
        out["labels"] = ch.labels
    if ch.name:
        out["name"] = ch.name
    return out


def load_channel(path) -> ChannelSpec:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read channel file {path}: {exc.strerror}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    return channel_from_dict(obj)


def save_channel(ch: ChannelSpec, path) -> None:
    Path(path).write_text(json.dumps(channel_to_dict(ch), indent=1) + "\n", encoding="utf-8")


def resolve_channel(source: str) -> ChannelSpec:
    """A builtin name or a path to a channel JSON file."""
    if source in BUILTIN_NAMES:
        return builtin_channel(source)
    if source.endswith(".json") or Path(source).exists():
        return load_channel(source)
    raise UnknownName(f"{source!r} is neither a builtin channel nor a file")


def random_channel(nx, ny, nz, ns, rng, concentration=1.0) -> ChannelSpec:
    """Dirichlet-distributed rows; handy for property tests and demos."""
    w = rng.dirichlet(np.full(nz, concentration), size=(ns, nx, ny))
    return ChannelSpec(w)


def add_state(ch: ChannelSpec, extra: np.ndarray) -> ChannelSpec:
    """Channel with one more state whose matrix is ``extra[x, y, z]``."""
    extra = np.asarray(extra, dtype=np.float64).reshape(1, ch.nx, ch.ny, ch.nz)
    return validate_channel(np.concatenate([ch.w, extra]), ch.nx, ch.ny, ch.nz, ch.ns + 1)
