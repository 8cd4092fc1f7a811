"""File formats: the binary cube container, NPY import, and the JSON run file.

Cube container layout (all little-endian):

    magic   4 bytes  b"HSIC"
    version u16      1
    dtype   u16      0 = float32
    H, W, B u32 each
    payload H*W*B float32, row-major with the band axis fastest

Cubes are float32 on disk and widened to float64 in memory. The run file
is a strict JSON document: unknown keys are rejected at every level, and
writing materializes every default.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .noisegen import NoiseSpec, case_preset
from .pipeline import RunConfig, StopConfig
from .s3dnet import NetworkConfig

MAGIC = b"HSIC"
VERSION = 1
DTYPE_F32 = 0
_HEADER = struct.Struct("<4sHHIII")


class FormatError(ValueError):
    """Malformed or unsupported file content."""


def write_cube(cube: np.ndarray, path) -> None:
    if cube.ndim != 3:
        raise FormatError(f"cube must be 3-D, got rank {cube.ndim}")
    h, w, b = cube.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, VERSION, DTYPE_F32, h, w, b))
        f.write(np.ascontiguousarray(cube, dtype="<f4").tobytes())


def read_cube(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.read(_HEADER.size)
        if len(header) < _HEADER.size:
            raise FormatError(f"truncated header: expected {_HEADER.size} bytes, got {len(header)}")
        magic, version, dtype, h, w, b = _HEADER.unpack(header)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        if dtype != DTYPE_F32:
            raise FormatError(f"unsupported dtype tag {dtype}")
        if min(h, w, b) < 1:
            raise FormatError(f"zero extent in header: {h}x{w}x{b}")
        expected = 4 * h * w * b
        payload = f.read()
    if len(payload) != expected:
        kind = "truncated" if len(payload) < expected else "oversized"
        raise FormatError(f"{kind} payload: expected {expected} bytes, got {len(payload)}")
    data = np.frombuffer(payload, dtype="<f4").astype(np.float64)
    return data.reshape(h, w, b)


def import_npy(path) -> np.ndarray:
    """Read a v1.0, C-order, 3-D float NPY array as a cube."""
    with open(path, "rb") as f:
        try:
            version = np.lib.format.read_magic(f)
        except ValueError as e:
            raise FormatError(f"not an NPY file: {e}") from e
        if version != (1, 0):
            raise FormatError(f"unsupported NPY version {version[0]}.{version[1]}")
        shape, fortran_order, dtype = np.lib.format.read_array_header_1_0(f)
        if fortran_order:
            raise FormatError("Fortran-order NPY arrays are unsupported")
        if len(shape) != 3:
            raise FormatError(f"need a 3-D array, got rank {len(shape)}")
        if dtype not in (np.dtype("<f4"), np.dtype("<f8")):
            raise FormatError(f"unsupported dtype {dtype}")
        count = int(np.prod(shape))
        data = np.fromfile(f, dtype=dtype, count=count)
    if data.size != count:
        raise FormatError(f"truncated payload: expected {count} elements, got {data.size}")
    return data.astype(np.float64).reshape(shape)


# ---------------------------------------------------------------------------
# run file


@dataclass
class RunFile:
    run: RunConfig
    case: int | None = None
    noise: NoiseSpec | None = None
    input: str | None = None
    output: str | None = None
    trace_ref: str | None = None

    def noise_spec(self) -> NoiseSpec | None:
        if self.case is not None:
            return case_preset(self.case)
        return self.noise


_TOP_KEYS = {"input", "output", "trace_ref", "seed", "case", "noise",
             "network", "loss", "optimizer", "stop"}
_NETWORK_KEYS = {"depth", "channels", "in_channels", "out_channels", "leaky_slope"}
_LOSS_KEYS = {"lambda_over_n", "alpha1", "alpha2"}
_OPTIMIZER_KEYS = {"lr"}
_STOP_KEYS = {"rel_err_tol", "max_iters", "check_interval"}
_NOISE_KEYS = {"gaussian_sigma", "impulse_rate", "stripe_band_fraction",
               "stripe_count_range", "deadline_band_fraction", "deadline_count_range"}


def _reject_unknown(d: dict, known: set, where: str) -> None:
    unknown = set(d) - known
    if unknown:
        raise FormatError(f"unknown key(s) in {where}: {sorted(unknown)}")


def run_file_to_dict(rf: RunFile) -> dict:
    cfg = rf.run
    noise = None
    if rf.noise is not None:
        noise = {
            "gaussian_sigma": rf.noise.gaussian_sigma,
            "impulse_rate": rf.noise.impulse_rate,
            "stripe_band_fraction": rf.noise.stripe_band_fraction,
            "stripe_count_range": list(rf.noise.stripe_count_range),
            "deadline_band_fraction": rf.noise.deadline_band_fraction,
            "deadline_count_range": list(rf.noise.deadline_count_range),
        }
    return {
        "input": rf.input,
        "output": rf.output,
        "trace_ref": rf.trace_ref,
        "seed": cfg.seed,
        "case": rf.case,
        "noise": noise,
        "network": {
            "depth": cfg.network.depth,
            "channels": list(cfg.network.channels),
            "in_channels": cfg.network.in_channels,
            "out_channels": cfg.network.out_channels,
            "leaky_slope": cfg.network.leaky_slope,
        },
        "loss": {
            "lambda_over_n": cfg.lambda_over_n,
            "alpha1": cfg.alpha1,
            "alpha2": cfg.alpha2,
        },
        "optimizer": {"lr": cfg.lr},
        "stop": {
            "rel_err_tol": cfg.stop.rel_err_tol,
            "max_iters": cfg.stop.max_iters,
            "check_interval": cfg.stop.check_interval,
        },
    }


def run_file_from_dict(d: dict) -> RunFile:
    _reject_unknown(d, _TOP_KEYS, "run file")
    net_d = d.get("network") or {}
    loss_d = d.get("loss") or {}
    opt_d = d.get("optimizer") or {}
    stop_d = d.get("stop") or {}
    _reject_unknown(net_d, _NETWORK_KEYS, "network")
    _reject_unknown(loss_d, _LOSS_KEYS, "loss")
    _reject_unknown(opt_d, _OPTIMIZER_KEYS, "optimizer")
    _reject_unknown(stop_d, _STOP_KEYS, "stop")

    base_net = NetworkConfig()
    network = NetworkConfig(
        depth=int(net_d.get("depth", base_net.depth)),
        channels=tuple(net_d.get("channels", base_net.channels)),
        in_channels=int(net_d.get("in_channels", base_net.in_channels)),
        out_channels=int(net_d.get("out_channels", base_net.out_channels)),
        leaky_slope=float(net_d.get("leaky_slope", base_net.leaky_slope)),
    )
    base_stop = StopConfig()
    stop = StopConfig(
        rel_err_tol=float(stop_d.get("rel_err_tol", base_stop.rel_err_tol)),
        max_iters=int(stop_d.get("max_iters", base_stop.max_iters)),
        check_interval=int(stop_d.get("check_interval", base_stop.check_interval)),
    )
    base_run = RunConfig()
    run = RunConfig(
        network=network,
        lambda_over_n=float(loss_d.get("lambda_over_n", base_run.lambda_over_n)),
        alpha1=float(loss_d.get("alpha1", base_run.alpha1)),
        alpha2=float(loss_d.get("alpha2", base_run.alpha2)),
        stop=stop,
        lr=float(opt_d.get("lr", base_run.lr)),
        seed=int(d.get("seed", base_run.seed)),
    )

    case = d.get("case")
    noise_d = d.get("noise")
    if case is not None and noise_d is not None:
        raise FormatError("'case' and 'noise' are mutually exclusive")
    noise = None
    if noise_d is not None:
        _reject_unknown(noise_d, _NOISE_KEYS, "noise")
        base = NoiseSpec()
        noise = NoiseSpec(
            gaussian_sigma=float(noise_d.get("gaussian_sigma", base.gaussian_sigma)),
            impulse_rate=float(noise_d.get("impulse_rate", base.impulse_rate)),
            stripe_band_fraction=float(noise_d.get("stripe_band_fraction",
                                                   base.stripe_band_fraction)),
            stripe_count_range=tuple(noise_d.get("stripe_count_range",
                                                 base.stripe_count_range)),
            deadline_band_fraction=float(noise_d.get("deadline_band_fraction",
                                                     base.deadline_band_fraction)),
            deadline_count_range=tuple(noise_d.get("deadline_count_range",
                                                   base.deadline_count_range)),
        )
    return RunFile(
        run=run,
        case=None if case is None else int(case),
        noise=noise,
        input=d.get("input"),
        output=d.get("output"),
        trace_ref=d.get("trace_ref"),
    )


def write_run_file(rf: RunFile, path) -> None:
    with open(path, "w") as f:
        json.dump(run_file_to_dict(rf), f, indent=2, sort_keys=True)
        f.write("\n")


def read_run_file(path) -> RunFile:
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"invalid JSON in {path}: {e}") from e
    if not isinstance(d, dict):
        raise FormatError("run file must be a JSON object")
    return run_file_from_dict(d)
