"""File formats used by the command-line tool.

* Config: one JSON object with keys ``kernel``, ``gamma``, ``light_height``,
  ``ball_radius``, ``beta``, ``c``, ``projection`` and ``heads`` (all
  optional, defaults as in :class:`~cone_attention.kernels.KernelConfig`).
* Embeddings: first line ``d n``, then ``n`` rows of ``d`` whitespace
  separated floats. Written with 17 significant digits so values round-trip.
* Matrices: plain CSV without a header, ``%.17g`` entries.
"""

from __future__ import annotations

import json

import numpy as np

from .kernels import KernelConfig

__all__ = [
    "FormatError",
    "load_config",
    "config_to_dict",
    "read_embeddings",
    "write_embeddings",
    "write_matrix_csv",
    "read_matrix_csv",
]

CONFIG_KEYS = ("kernel", "gamma", "light_height", "ball_radius", "beta", "c", "projection", "heads")


class FormatError(ValueError):
    """Malformed input file."""


def load_config(path) -> KernelConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(raw, dict):
        raise FormatError(f"{path}: config must be a JSON object")
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise FormatError(f"{path}: unknown config keys {unknown}")
    kwargs = dict(raw)
    if "kernel" in kwargs:
        kwargs["kind"] = kwargs.pop("kernel")
    try:
        return KernelConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from None


def config_to_dict(config: KernelConfig) -> dict:
    return {
        "kernel": config.kind,
        "gamma": config.gamma,
        "light_height": config.light_height,
        "ball_radius": config.ball_radius,
        "beta": config.beta,
        "c": config.c,
        "projection": config.projection,
        "heads": config.heads,
    }


def _floats(path, lineno, fields):
    try:
        return [float(f) for f in fields]
    except ValueError:
        raise FormatError(f"{path}:{lineno}: expected numbers, got {' '.join(fields)!r}") from None


def read_embeddings(path) -> np.ndarray:
    rows = []
    header = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if header is None:
                if len(fields) != 2:
                    raise FormatError(f"{path}:{lineno}: header must be 'd n'")
                try:
                    d, n = int(fields[0]), int(fields[1])
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: header must hold two integers") from None
                if d < 1 or n < 1:
                    raise FormatError(f"{path}:{lineno}: d and n must be positive")
                header = (d, n, lineno)
                continue
            if len(fields) != header[0]:
                raise FormatError(f"{path}:{lineno}: expected {header[0]} values, got {len(fields)}")
            values = _floats(path, lineno, fields)
            if not all(np.isfinite(values)):
                raise FormatError(f"{path}:{lineno}: values must be finite")
            rows.append(values)
    if header is None:
        raise FormatError(f"{path}: empty file")
    if len(rows) != header[1]:
        raise FormatError(f"{path}:{header[2]}: header announces {header[1]} rows, found {len(rows)}")
    return np.array(rows, dtype=np.float64)


def write_embeddings(x, path) -> None:
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    with open(path, "w") as fh:
        fh.write(f"{x.shape[1]} {x.shape[0]}\n")
        np.savetxt(fh, x, fmt="%.17g")


def write_matrix_csv(x, path) -> None:
    np.savetxt(path, np.atleast_2d(x), fmt="%.17g", delimiter=",")


def read_matrix_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))
