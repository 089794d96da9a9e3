"""Checkpoints: a JSON manifest plus a blob of little-endian float64 values
concatenated in manifest order.

``<path>.json`` holds format version, model class, hyperparameters and the
(name, shape) list; ``<path>.bin`` holds the values.
"""
import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
_REGISTRY = {}


class CheckpointError(ValueError):
    pass


def register_model(cls):
    _REGISTRY[cls.__name__] = cls
    return cls


def _paths(path):
    p = Path(path)
    base = p.with_suffix("") if p.suffix in (".json", ".bin") else p
    return base.with_name(base.name + ".json"), base.with_name(base.name + ".bin")


def save_checkpoint(model, path, extra=None):
    """Write ``model`` (needs ``config`` dict and ``named_parameters``)."""
    mpath, bpath = _paths(path)
    mpath.parent.mkdir(parents=True, exist_ok=True)
    tensors = [(k, p.data) for k, p in model.named_parameters()]
    manifest = {
        "format_version": FORMAT_VERSION,
        "model": type(model).__name__,
        "config": model.config,
        "tensors": [{"name": k, "shape": list(a.shape)} for k, a in tensors],
        "extra": extra or {},
    }
    with open(mpath, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    with open(bpath, "wb") as f:
        for _, a in tensors:
            f.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return mpath, bpath


def read_checkpoint(path):
    """Return (manifest, {name: array}) after validating the blob size."""
    mpath, bpath = _paths(path)
    with open(mpath, encoding="utf-8") as f:
        manifest = json.load(f)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {manifest.get('format_version')}")
    blob = bpath.read_bytes()
    sizes = [int(np.prod(t["shape"], dtype=np.int64)) for t in manifest["tensors"]]
    if len(blob) != 8 * sum(sizes):
        raise CheckpointError(f"blob has {len(blob)} bytes, manifest expects {8 * sum(sizes)}")
    flat = np.frombuffer(blob, dtype="<f8")
    state, off = {}, 0
    for t, n in zip(manifest["tensors"], sizes):
        state[t["name"]] = flat[off:off + n].reshape(t["shape"]).astype(np.float64)
        off += n
    return manifest, state


def load_checkpoint(path):
    """Rebuild the registered model class from its config and load weights."""
    manifest, state = read_checkpoint(path)
    cls = _REGISTRY.get(manifest["model"])
    if cls is None:
        raise CheckpointError(f"unknown model class {manifest['model']}")
    model = cls.from_config(manifest["config"])
    try:
        model.load_state_dict(state)
    except (KeyError, ValueError) as e:
        raise CheckpointError(str(e)) from None
    return model
