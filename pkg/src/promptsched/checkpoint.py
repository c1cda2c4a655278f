"""Checkpoints: a text manifest plus one raw float64 file per parameter.

``manifest.txt`` holds ``key=value`` lines::

    format=1
    config_hash=<hex>
    step=<int>
    param.<name>=<comma separated shape>

and ``<name>.bin`` holds the parameter's values as little-endian float64 in
C order. Loading reproduces every array bit for bit.
"""

from __future__ import annotations

import os

import numpy as np

FORMAT_VERSION = "1"
DTYPE = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


def save_checkpoint(directory, params: dict, config_hash: str, step: int) -> None:
    """Write ``params`` ({name: Tensor or array}) into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    lines = [f"format={FORMAT_VERSION}", f"config_hash={config_hash}", f"step={int(step)}"]
    for name in sorted(params):
        if "/" in name or "=" in name or name.startswith("."):
            raise CheckpointError(f"parameter name {name!r} cannot be used as a file name")
        arr = getattr(params[name], "values", params[name])
        arr = np.ascontiguousarray(arr, dtype=DTYPE)
        lines.append(f"param.{name}={','.join(str(n) for n in arr.shape)}")
        with open(os.path.join(directory, name + ".bin"), "wb") as fh:
            fh.write(arr.tobytes(order="C"))
    with open(os.path.join(directory, "manifest.txt"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(directory) -> dict:
    path = os.path.join(directory, "manifest.txt")
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read {path}: {exc.strerror}") from None
    meta, shapes = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if "=" not in line:
            raise CheckpointError(f"{path}:{lineno}: malformed line {line!r}")
        key, value = line.split("=", 1)
        if key.startswith("param."):
            try:
                shapes[key[len("param."):]] = tuple(int(x) for x in value.split(",") if x)
            except ValueError:
                raise CheckpointError(f"{path}:{lineno}: bad shape {value!r}") from None
        else:
            meta[key] = value
    if meta.get("format") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format {meta.get('format')!r}")
    for key in ("config_hash", "step"):
        if key not in meta:
            raise CheckpointError(f"{path}: missing {key}")
    meta["step"] = int(meta["step"])
    meta["shapes"] = shapes
    return meta


def load_checkpoint(directory) -> tuple[dict, dict]:
    """Return ({name: array}, manifest metadata)."""
    meta = read_manifest(directory)
    out = {}
    for name, shape in meta["shapes"].items():
        path = os.path.join(directory, name + ".bin")
        try:
            raw = np.fromfile(path, dtype=DTYPE)
        except OSError as exc:
            raise CheckpointError(f"cannot read {path}: {exc.strerror}") from None
        if raw.size != int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"{path}: {raw.size} values, manifest shape {shape}")
        out[name] = raw.reshape(shape).astype(np.float64)
    return out, meta


def restore_into(params: dict, arrays: dict) -> None:
    """Rebind each Tensor in ``params`` to the loaded array of the same name."""
    missing = sorted(set(params) - set(arrays))
    if missing:
        raise CheckpointError(f"checkpoint lacks parameters: {', '.join(missing)}")
    for name, t in params.items():
        if arrays[name].shape != t.values.shape:
            raise CheckpointError(f"{name}: checkpoint shape {arrays[name].shape} vs model {t.values.shape}")
        t.values = arrays[name].copy()
