"""``MVMDL1`` model files: a JSON header describing a tree of model objects plus raw array payloads.

Layout (integers little-endian)::

    b"MVMDL1"
    uint32 format version
    uint32 header length in bytes
    header: UTF-8 JSON, keys sorted
    array payloads, concatenated in header order, C order

Floats in the header go through ``repr`` and therefore round-trip exactly;
arrays are stored with their dtype, so loaded models reproduce transforms
bit for bit.
"""
import dataclasses
import hashlib
import json
import struct

import numpy as np

from .cca import CcaModel
from .exceptions import DatasetFormatError, MalformedHeaderError, TruncatedFileError
from .kcca import GramCentering, KccaModel, KernelSpec
from .nn import BiLstmParams, Dense, DeepLstm, LstmParams, MlpParams, SplitAeModel

MAGIC = b"MVMDL1"
VERSION = 1
_PRELUDE = struct.Struct("<II")


@dataclasses.dataclass
class ModelBundle:
    """Everything ``evaluate`` needs: the method tag, fitted parts and representation settings."""

    method: str
    parts: dict
    settings: dict
    config: dict = dataclasses.field(default_factory=dict)
    fingerprint: str = ""


_TYPES = {cls.__name__: cls for cls in (
    CcaModel, KccaModel, KernelSpec, GramCentering, Dense, MlpParams, LstmParams, BiLstmParams, DeepLstm,
    SplitAeModel, ModelBundle,
)}


def _encode(obj, arrays):
    if isinstance(obj, np.ndarray):
        arrays.append(obj)
        return {"__array__": len(arrays) - 1}
    if dataclasses.is_dataclass(obj):
        name = type(obj).__name__
        if _TYPES.get(name) is not type(obj):
            raise TypeError(f"cannot serialize {name}")
        return {"__type__": name,
                "fields": {f.name: _encode(getattr(obj, f.name), arrays) for f in dataclasses.fields(obj)}}
    if isinstance(obj, dict):
        return {"__dict__": {str(k): _encode(v, arrays) for k, v in obj.items()}}
    if isinstance(obj, (list, tuple)):
        return {"__list__": [_encode(v, arrays) for v in obj]}
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _decode(node, arrays):
    if isinstance(node, dict):
        if "__array__" in node:
            return arrays[node["__array__"]]
        if "__type__" in node:
            cls = _TYPES.get(node["__type__"])
            if cls is None:
                raise MalformedHeaderError(f"unknown object type {node['__type__']!r}")
            return cls(**{k: _decode(v, arrays) for k, v in node["fields"].items()})
        if "__dict__" in node:
            return {k: _decode(v, arrays) for k, v in node["__dict__"].items()}
        if "__list__" in node:
            return [_decode(v, arrays) for v in node["__list__"]]
        raise MalformedHeaderError("unrecognized header node")
    return node


def dumps(bundle):
    arrays = []
    tree = _encode(bundle, arrays)
    specs = [{"dtype": a.dtype.newbyteorder("<").str, "shape": list(a.shape)} for a in arrays]
    header = json.dumps({"arrays": specs, "root": tree}, sort_keys=True, allow_nan=True).encode()
    payload = b"".join(np.ascontiguousarray(a, dtype=s["dtype"]).tobytes() for a, s in zip(arrays, specs))
    return MAGIC + _PRELUDE.pack(VERSION, len(header)) + header + payload


def loads(buf):
    if buf[:len(MAGIC)] != MAGIC:
        raise MalformedHeaderError("not an MVMDL1 file")
    pos = len(MAGIC)
    if len(buf) < pos + _PRELUDE.size:
        raise TruncatedFileError("file ends inside the prelude")
    version, hlen = _PRELUDE.unpack_from(buf, pos)
    if version != VERSION:
        raise MalformedHeaderError(f"unsupported format version {version}")
    pos += _PRELUDE.size
    if len(buf) < pos + hlen:
        raise TruncatedFileError("file ends inside the header")
    try:
        header = json.loads(buf[pos:pos + hlen].decode())
        specs, root = header["arrays"], header["root"]
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as exc:
        raise MalformedHeaderError(f"unreadable header: {exc}") from exc
    pos += hlen
    arrays = []
    for s in specs:
        dtype = np.dtype(s["dtype"])
        n = int(np.prod(s["shape"], dtype=np.int64)) * dtype.itemsize
        if len(buf) < pos + n:
            raise TruncatedFileError("file ends inside an array payload")
        arrays.append(np.frombuffer(buf, dtype=dtype, count=n // dtype.itemsize, offset=pos)
                      .reshape(s["shape"]).astype(dtype.newbyteorder("="), copy=True))
        pos += n
    if pos != len(buf):
        raise MalformedHeaderError("trailing bytes after the last array")
    try:
        return _decode(root, arrays)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DatasetFormatError):
            raise
        raise MalformedHeaderError(f"inconsistent model description: {exc}") from exc


def save_model(bundle, path):
    with open(path, "wb") as fh:
        fh.write(dumps(bundle))


def load_model(path):
    with open(path, "rb") as fh:
        return loads(fh.read())


def dataset_fingerprint(dataset):
    """SHA-256 over every frame, label and speaker id, in file order."""
    h = hashlib.sha256()
    for u in dataset.utterances:
        h.update(np.int64(u.speaker).tobytes())
        h.update(np.ascontiguousarray(u.view1, dtype="<f4").tobytes())
        h.update(np.ascontiguousarray(u.view2, dtype="<f4").tobytes())
        if u.labels is not None:
            h.update(np.ascontiguousarray(u.labels, dtype="<i4").tobytes())
    return h.hexdigest()
