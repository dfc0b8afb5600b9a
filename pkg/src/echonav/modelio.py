"""Model weight container (SRNM).

Layout, little-endian:
  magic "SRNM" | version u16 = 1 | layer count u32
  per entry: name length u16, UTF-8 name, role u8, rank u8, dims u32...
  float32 payloads in manifest order
  trailing CRC32 (u32) over everything before it

Roles: 0 = weight tensor, 1 = bias vector, 2 = metadata vector.  The
metadata entry ("meta") carries [rev, rows, cols, width, seed, lr,
batch, epochs] so a loaded model rebuilds its architecture.
"""

import struct
import zlib

import numpy as np

from .core import ContainerError
from .nn import DenoiserNet, NetConfig

_MAGIC = b"SRNM"
_HEAD = struct.Struct("<4sHI")

ROLE_WEIGHT = 0
ROLE_BIAS = 1
ROLE_META = 2

_ROLE_OF_ATTR = {"w": ROLE_WEIGHT, "b": ROLE_BIAS}


def _meta_vector(net: DenoiserNet, train_meta=None) -> np.ndarray:
    cfg = net.config
    tm = train_meta or {}
    return np.array(
        [1.0, cfg.rows, cfg.cols, cfg.width, cfg.seed,
         tm.get("learning_rate", 0.0), tm.get("batch_size", 0.0),
         tm.get("epochs", 0.0)],
        dtype=np.float32,
    )


def save_model(net: DenoiserNet, train_meta=None) -> bytes:
    entries = [("meta", ROLE_META, _meta_vector(net, train_meta))]
    for name, mod, attr in net.parameters():
        entries.append((name, _ROLE_OF_ATTR[attr], getattr(mod, attr)))

    manifest = bytearray()
    payload = bytearray()
    for name, role, arr in entries:
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        nm = name.encode("utf-8")
        manifest += struct.pack("<H", len(nm)) + nm
        manifest += struct.pack("<BB", role, arr.ndim)
        manifest += struct.pack(f"<{arr.ndim}I", *arr.shape)
        payload += arr.tobytes(order="C")
    body = _HEAD.pack(_MAGIC, 1, len(entries)) + bytes(manifest) + bytes(payload)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def _parse(blob: bytes):
    if len(blob) < _HEAD.size + 4:
        raise ContainerError(
            f"model file too short: {len(blob)} bytes, need at least {_HEAD.size + 4}"
        )
    magic, version, count = _HEAD.unpack_from(blob, 0)
    if magic != _MAGIC:
        raise ContainerError(f"bad magic {magic!r} at offset 0")
    if version != 1:
        raise ContainerError(f"unsupported model version {version}")
    off = _HEAD.size
    manifest = []
    for _ in range(count):
        if off + 2 > len(blob):
            raise ContainerError(f"manifest truncated at offset {off}")
        (nlen,) = struct.unpack_from("<H", blob, off)
        off += 2
        name = blob[off : off + nlen].decode("utf-8")
        off += nlen
        if off + 2 > len(blob):
            raise ContainerError(f"manifest truncated at offset {off}")
        role, rank = struct.unpack_from("<BB", blob, off)
        off += 2
        dims = struct.unpack_from(f"<{rank}I", blob, off)
        off += 4 * rank
        manifest.append((name, role, dims))

    total = sum(int(np.prod(d)) if d else 1 for _, _, d in manifest)
    expected = off + total * 4 + 4
    if len(blob) != expected:
        raise ContainerError(
            f"checksum frame mismatch: file is {len(blob)} bytes, expected {expected}"
        )
    (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    actual_crc = zlib.crc32(blob[:-4]) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise ContainerError(
            f"checksum failure: stored {stored_crc:#010x}, computed {actual_crc:#010x}"
        )

    arrays = {}
    for name, role, dims in manifest:
        n = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=off).reshape(dims)
        off += n * 4
        arrays[name] = (role, arr.copy())
    return arrays


def load_model(blob: bytes) -> tuple[DenoiserNet, dict]:
    """Rebuild a DenoiserNet from SRNM bytes; shape mismatches name the layer."""
    arrays = _parse(blob)
    if "meta" not in arrays or arrays["meta"][0] != ROLE_META:
        raise ContainerError("model file has no metadata entry")
    meta_vec = arrays.pop("meta")[1]
    if meta_vec.size < 8:
        raise ContainerError("metadata entry too short")
    rows, cols, width, seed = (int(meta_vec[i]) for i in range(1, 5))
    net = DenoiserNet(NetConfig(width=width, rows=rows, cols=cols, seed=seed))
    for name, mod, attr in net.parameters():
        if name not in arrays:
            raise ContainerError(f"model file is missing layer {name!r}")
        role, arr = arrays.pop(name)
        if role != _ROLE_OF_ATTR[attr]:
            raise ContainerError(f"layer {name!r} has wrong role code {role}")
        current = getattr(mod, attr)
        if arr.shape != current.shape:
            raise ContainerError(
                f"layer {name!r} shape {arr.shape} does not match "
                f"architecture {current.shape}"
            )
        setattr(mod, attr, arr.astype(current.dtype))
    if arrays:
        raise ContainerError(f"unexpected extra layers: {sorted(arrays)}")
    meta = {
        "rows": rows, "cols": cols, "width": width, "seed": seed,
        "learning_rate": float(meta_vec[5]),
        "batch_size": int(meta_vec[6]),
        "epochs": int(meta_vec[7]),
    }
    return net, meta


def write_model(path, net: DenoiserNet, train_meta=None) -> None:
    with open(path, "wb") as fh:
        fh.write(save_model(net, train_meta))


def read_model(path) -> tuple[DenoiserNet, dict]:
    with open(path, "rb") as fh:
        return load_model(fh.read())
