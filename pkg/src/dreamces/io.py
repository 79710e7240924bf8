"""Binary tensor container, network container and YAML configuration files.

Tensor container (``.tnsr``), all integers little-endian::

    b"CEST" | version u16 | dtype tag u16 (1 = float64 LE) | rank u32 | shape u64 * rank | payload

The payload is the row-major float64 data.  The network container
(``.net``) is::

    b"CNET" | version u16 | manifest length u32 | manifest (UTF-8 JSON) | tensor blobs

with one tensor blob per entry of ``manifest["arrays"]``, in order.
"""

import io as _io
import json
import struct

import numpy as np
import yaml

from .autoencoder import Autoencoder
from .emulation import Emulator, NetworkRegressor
from .exceptions import ConfigError, FormatError
from .nn import Network, TrainResult

TENSOR_MAGIC = b"CEST"
NET_MAGIC = b"CNET"
VERSION = 1
DTYPE_F64 = 1


def _write_tensor(fh, arr):
    arr = np.asarray(arr, dtype="<f8")
    fh.write(TENSOR_MAGIC)
    fh.write(struct.pack("<HHI", VERSION, DTYPE_F64, arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    fh.write(arr.tobytes(order="C"))


def _read_exact(fh, n):
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError("truncated tensor container")
    return buf


def _read_tensor(fh):
    if _read_exact(fh, 4) != TENSOR_MAGIC:
        raise FormatError("not a tensor container (bad magic)")
    version, dtype, rank = struct.unpack("<HHI", _read_exact(fh, 8))
    if version > VERSION:
        raise FormatError(f"tensor container version {version} is newer than supported {VERSION}")
    if dtype != DTYPE_F64:
        raise FormatError(f"unsupported dtype tag {dtype}")
    shape = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank)) if rank else ()
    count = int(np.prod(shape)) if rank else 1
    data = np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8")
    return data.reshape(shape).astype(np.float64)


def write_tensor(path, arr):
    with open(path, "wb") as fh:
        _write_tensor(fh, np.asarray(arr))


def read_tensor(path):
    with open(path, "rb") as fh:
        arr = _read_tensor(fh)
        if fh.read(1):
            raise FormatError("trailing bytes after tensor payload")
    return arr


def tensor_bytes(arr):
    buf = _io.BytesIO()
    _write_tensor(buf, np.asarray(arr))
    return buf.getvalue()


def tensor_from_bytes(data):
    return _read_tensor(_io.BytesIO(data))


def write_container(path, manifest, arrays):
    """Write a JSON manifest and named arrays; ``manifest["arrays"]`` lists the names."""
    manifest = dict(manifest)
    manifest["arrays"] = list(arrays)
    text = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(NET_MAGIC)
        fh.write(struct.pack("<HI", VERSION, len(text)))
        fh.write(text)
        for name in manifest["arrays"]:
            _write_tensor(fh, np.asarray(arrays[name]))


def read_container(path):
    with open(path, "rb") as fh:
        if fh.read(4) != NET_MAGIC:
            raise FormatError(f"{path} is not a network container (bad magic)")
        version, length = struct.unpack("<HI", _read_exact(fh, 6))
        if version > VERSION:
            raise FormatError(f"network container version {version} is newer than supported {VERSION}")
        try:
            manifest = json.loads(_read_exact(fh, length).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"corrupt manifest: {exc}") from exc
        arrays = {name: _read_tensor(fh) for name in manifest.get("arrays", [])}
    return manifest, arrays


def _network_arrays(prefix, net):
    out = {}
    for k, layer in enumerate(net.layers):
        for name, value in layer.params.items():
            out[f"{prefix}/{k}/{name}"] = value
    return out


def _network_weights(prefix, net_manifest, arrays):
    weights = []
    for k, _ in enumerate(net_manifest["layers"]):
        key = f"{prefix}/{k}/"
        weights.append({name[len(key):]: arr for name, arr in arrays.items() if name.startswith(key)})
    return weights


def _jsonable(value):
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def save_emulator(path, emulator):
    reg = emulator.regressor
    arrays = _network_arrays("net", reg.network_)
    arrays["y_mean"] = reg.y_mean_
    arrays["y_scale"] = reg.y_scale_
    manifest = {"kind": "emulator", "params": {k: _jsonable(v) for k, v in reg.get_params().items()},
                "network": reg.network_.manifest(), "grid": _jsonable(emulator.grid),
                "train_loss": reg.train_result_.train_loss, "test_loss": reg.train_result_.test_loss}
    write_container(path, manifest, arrays)


def load_emulator(path, obs):
    manifest, arrays = read_container(path)
    if manifest.get("kind") != "emulator":
        raise FormatError(f"{path} does not hold an emulator")
    params = manifest["params"]
    for key in ("filters", "grid"):
        if params.get(key) is not None:
            params[key] = tuple(params[key])
    reg = NetworkRegressor(**params)
    reg.network_ = Network.from_manifest(manifest["network"], _network_weights("net", manifest["network"], arrays))
    reg.y_mean_ = arrays["y_mean"]
    reg.y_scale_ = arrays["y_scale"]
    reg.n_features_in_ = reg.network_.input_shape[0]
    reg.n_outputs_ = int(np.prod(reg.network_.output_shape))
    reg.train_result_ = TrainResult(manifest["train_loss"], manifest["test_loss"])
    grid = tuple(manifest["grid"]) if manifest.get("grid") else None
    return Emulator(reg, obs, grid)


def save_autoencoder(path, ae):
    arrays = {**_network_arrays("encoder", ae.encoder_), **_network_arrays("decoder", ae.decoder_)}
    result = getattr(ae, "train_result_", None)
    manifest = {"kind": "autoencoder", "params": {k: _jsonable(v) for k, v in ae.get_params().items()},
                "encoder": ae.encoder_.manifest(), "decoder": ae.decoder_.manifest(),
                "train_loss": result.train_loss if result else [],
                "test_loss": result.test_loss if result else []}
    write_container(path, manifest, arrays)


def load_autoencoder(path):
    manifest, arrays = read_container(path)
    if manifest.get("kind") != "autoencoder":
        raise FormatError(f"{path} does not hold an autoencoder")
    enc = Network.from_manifest(manifest["encoder"], _network_weights("encoder", manifest["encoder"], arrays))
    dec = Network.from_manifest(manifest["decoder"], _network_weights("decoder", manifest["decoder"], arrays))
    ae = Autoencoder(**manifest["params"])
    ae._set_halves(enc, dec)
    ae.train_result_ = TrainResult(manifest["train_loss"], manifest["test_loss"])
    return ae


def load_config(path):
    """Read a YAML configuration file into a dict."""
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path} must contain a mapping at top level")
    return cfg


def dump_config(cfg, path):
    with open(path, "w") as fh:
        yaml.safe_dump(cfg, fh, sort_keys=False)


def write_sidecar(path, data):
    """Structured-text (YAML) sidecar next to a binary artifact."""
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=True)


def read_sidecar(path):
    with open(path) as fh:
        return yaml.safe_load(fh)
