"""Versioned model files for reproducible scoring without refitting.

Two on-disk formats, selected by config:

* ``text``   - JSON, arrays inline as nested lists.
* ``binary`` - magic ``TPMODEL1``, little-endian uint32 header length,
               JSON header (scalars plus the array manifest [name, shape]
               in payload order), then the arrays concatenated as
               little-endian float64 in exactly that order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from trajpareto.metrics.spacing import SpacingModel
from trajpareto.metrics.tail import TailModel

MAGIC = b"TPMODEL1"
VERSION = 1


def _split_model(spacing: SpacingModel):
    """(scalar header dict, ordered array dict) for one spacing model."""
    arrays = {
        "norm_mean": spacing.norm_mean,
        "norm_std": spacing.norm_std,
        "sigma_bin_edges": spacing.sigma_bin_edges,
        "sigma_bin_scale": spacing.sigma_bin_scale,
    }
    scalars = {"kind": spacing.kind, "mae": spacing.mae, "n_train": spacing.n_train,
               "param_scalars": {}, "param_arrays": []}
    for name in sorted(spacing.params):
        value = spacing.params[name]
        if isinstance(value, np.ndarray):
            arrays[f"param:{name}"] = value
            scalars["param_arrays"].append(name)
        else:
            scalars["param_scalars"][name] = float(value)
    return scalars, arrays


def _join_model(scalars: dict, arrays: dict) -> SpacingModel:
    params = dict(scalars["param_scalars"])
    for name in scalars["param_arrays"]:
        params[name] = arrays[f"param:{name}"]
    return SpacingModel(
        kind=scalars["kind"],
        norm_mean=arrays["norm_mean"],
        norm_std=arrays["norm_std"],
        params=params,
        sigma_bin_edges=arrays["sigma_bin_edges"],
        sigma_bin_scale=arrays["sigma_bin_scale"],
        mae=scalars["mae"],
        n_train=scalars["n_train"],
    )


def _tail_dict(tail: TailModel | None):
    if tail is None:
        return None
    return {"u": tail.u, "xi": tail.xi, "beta": tail.beta,
            "n_exceedances": tail.n_exceedances, "percentile": tail.percentile}


def _tail_from(d) -> TailModel | None:
    return None if d is None else TailModel(**d)


def save_models(path, spacing: SpacingModel, tail: TailModel | None, fmt: str = "text") -> None:
    path = Path(path)
    scalars, arrays = _split_model(spacing)
    if fmt == "text":
        doc = {
            "version": VERSION, "format": "text",
            "spacing": dict(scalars, arrays={k: v.tolist() for k, v in arrays.items()}),
            "tail": _tail_dict(tail),
        }
        path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        return
    if fmt == "binary":
        manifest = [[name, list(arr.shape)] for name, arr in sorted(arrays.items())]
        header = json.dumps({
            "version": VERSION, "format": "binary",
            "spacing": scalars, "tail": _tail_dict(tail), "arrays": manifest,
        }, sort_keys=True).encode("utf-8")
        with path.open("wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(header)))
            fh.write(header)
            for name, _ in manifest:
                fh.write(np.ascontiguousarray(arrays[name], dtype="<f8").tobytes())
        return
    raise ValueError(f"unknown model file format: {fmt!r}")


def load_models(path) -> tuple[SpacingModel, TailModel | None]:
    path = Path(path)
    blob = path.read_bytes()
    if blob[: len(MAGIC)] == MAGIC:
        (hlen,) = struct.unpack_from("<I", blob, len(MAGIC))
        at = len(MAGIC) + 4
        header = json.loads(blob[at:at + hlen].decode("utf-8"))
        at += hlen
        arrays = {}
        for name, shape in header["arrays"]:
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(blob, dtype="<f8", count=count, offset=at).reshape(shape)
            arrays[name] = arr.astype(np.float64)
            at += count * 8
        return _join_model(header["spacing"], arrays), _tail_from(header["tail"])
    doc = json.loads(blob.decode("utf-8"))
    sp = doc["spacing"]
    arrays = {k: np.asarray(v, dtype=float) for k, v in sp["arrays"].items()}
    return _join_model(sp, arrays), _tail_from(doc["tail"])
