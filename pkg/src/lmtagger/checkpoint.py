"""Bit-exact model persistence.

Wire layout:

    bytes 0..7    magic b"LMLCRF01" (version rides in the magic)
    bytes 8..15   header byte length, little-endian uint64
    header        UTF-8 text, one "key = value" line per entry, values JSON:
                  config, word_vocab, char_vocab, label_vocab, optimizer,
                  manifest (list of {name, shape, offset}, offsets in
                  float64 elements into the payload)
    payload       raw little-endian float64, tensors in manifest order
    footer        payload byte length, little-endian uint64

Parameters and optimizer velocities (manifest names "velocity:<param>")
round-trip bitwise; the file is self-describing enough to rebuild the
model without any outside context.
"""

from __future__ import annotations

import json
import struct
from typing import TYPE_CHECKING

import numpy as np

from .corpus import Vocabulary
from .errors import CheckpointFormatError, CheckpointIntegrityError

if TYPE_CHECKING:
    from .model import LmLstmCrf
    from .trainer import OptimizerState

MAGIC = b"LMLCRF01"


def _header_text(entries: dict) -> str:
    return "".join(f"{key} = {json.dumps(value, sort_keys=True)}\n"
                   for key, value in entries.items())


def _parse_header(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise CheckpointFormatError(f"header line {lineno} is not 'key = value'")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError as exc:
            raise CheckpointFormatError(f"header line {lineno}: bad JSON ({exc})") from None
    return out


def checkpoint_save(path: str, model: "LmLstmCrf", opt: "OptimizerState") -> None:
    params = model.parameters()
    manifest = []
    chunks = []
    offset = 0
    for p in params:
        manifest.append({"name": p.name, "shape": list(p.shape), "offset": offset})
        chunks.append(np.ascontiguousarray(p.data, dtype="<f8"))
        offset += p.size
    for p in params:
        vel = opt.velocities.get(p.name)
        if vel is None:
            vel = np.zeros_like(p.data)
        manifest.append({"name": f"velocity:{p.name}", "shape": list(p.shape), "offset": offset})
        chunks.append(np.ascontiguousarray(vel, dtype="<f8"))
        offset += p.size
    header = _header_text({
        "config": model.config.as_dict(),
        "word_vocab": model.word_vocab.as_dict(),
        "char_vocab": model.char_vocab.as_dict(),
        "label_vocab": model.label_vocab.as_dict(),
        "optimizer": {"eta0": opt.eta0, "decay": opt.decay,
                      "momentum": opt.momentum, "epoch": opt.epoch},
        "manifest": manifest,
    }).encode("utf-8")
    payload = b"".join(c.tobytes() for c in chunks)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(payload)
        fh.write(struct.pack("<Q", len(payload)))


def checkpoint_load(path: str) -> tuple["LmLstmCrf", "OptimizerState"]:
    """Rebuild the model and optimizer state exactly as saved."""
    from .model import LmLstmCrf, ModelConfig
    from .trainer import OptimizerState

    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) + 8 + 8:
        raise CheckpointIntegrityError(f"file too short ({len(blob)} bytes)")
    if blob[:8] != MAGIC:
        raise CheckpointFormatError(
            f"bad magic {blob[:8]!r}; expected {MAGIC!r} (wrong file or version)")
    (header_len,) = struct.unpack("<Q", blob[8:16])
    header_end = 16 + header_len
    if header_end + 8 > len(blob):
        raise CheckpointIntegrityError("header length exceeds file size")
    entries = _parse_header(blob[16:header_end].decode("utf-8"))
    for key in ("config", "word_vocab", "char_vocab", "label_vocab", "optimizer", "manifest"):
        if key not in entries:
            raise CheckpointFormatError(f"header is missing {key!r}")
    payload = blob[header_end:-8]
    (footer,) = struct.unpack("<Q", blob[-8:])
    if footer != len(payload):
        raise CheckpointIntegrityError(
            f"footer says {footer} payload bytes, file holds {len(payload)}")
    expected = 8 * sum(int(np.prod(m["shape"])) for m in entries["manifest"])
    if expected != len(payload):
        raise CheckpointIntegrityError(
            f"manifest declares {expected} payload bytes, file holds {len(payload)}")

    config = ModelConfig.from_dict(entries["config"])
    model = LmLstmCrf(
        config,
        Vocabulary.from_dict(entries["word_vocab"]),
        Vocabulary.from_dict(entries["char_vocab"]),
        Vocabulary.from_dict(entries["label_vocab"]),
        np.random.default_rng(0),
    )
    values = {}
    flat = np.frombuffer(payload, dtype="<f8")
    for m in entries["manifest"]:
        size = int(np.prod(m["shape"]))
        start = int(m["offset"])
        values[m["name"]] = flat[start:start + size].reshape(m["shape"]).copy()

    opt_meta = entries["optimizer"]
    opt = OptimizerState(
        eta0=opt_meta["eta0"], decay=opt_meta["decay"],
        momentum=opt_meta["momentum"], epoch=opt_meta["epoch"])
    for p in model.parameters():
        if p.name not in values:
            raise CheckpointIntegrityError(f"manifest has no tensor for parameter {p.name!r}")
        if tuple(values[p.name].shape) != p.shape:
            raise CheckpointIntegrityError(
                f"{p.name}: stored shape {values[p.name].shape}, model wants {p.shape}")
        p.data[...] = values[p.name]
        vel = values.get(f"velocity:{p.name}")
        if vel is not None:
            opt.velocities[p.name] = vel.astype(np.float64)
    return model, opt
