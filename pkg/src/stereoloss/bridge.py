"""One-shot binary loss/gradient service for foreign training environments.

Wire format (all little-endian, C-struct layout, version-tagged):

Request::

    offset  size  field
    0       4     magic  b"SLBR"
    4       4     u32 abi version (must equal ABI_VERSION)
    8       4     u32 op: 1 = loss, 2 = gradient, 3 = both
    12      4     u32 reserved (0)
    16      8     u64 n_samples (per channel)
    24      8     u64 config_len (bytes of UTF-8 JSON, LossSetup schema)
    32      ...   config JSON
    ...           n_samples * 2 float64: reference, interleaved [L, R] rows
    ...           n_samples * 2 float64: estimate, same layout

Response::

    offset  size  field
    0       4     magic b"SLBR"
    4       4     u32 abi version
    8       4     u32 status (see STATUS_*)
    12      4     u32 flags (bit 0: gradient near a singular configuration)
    16      8     u64 n_grad (float64 count following the breakdown; 0 or 2N)
    24      8     u64 msg_len (UTF-8 diagnostic after the gradient)
    32      56    7 float64: lsd, tl, iid, ipd, ic, opd, total
    88      ...   gradient float64s, then the diagnostic message

Shapes and the version tag are validated before any computation; every
failure is reported as a status code, never an exception.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .config import LossSetup
from .losses import LossBreakdown, loss_gradient, total_loss
from .signal import StereoSignal

MAGIC = b"SLBR"
ABI_VERSION = 1

OP_LOSS = 1
OP_GRAD = 2
OP_BOTH = 3

STATUS_OK = 0
STATUS_BAD_MAGIC = 1
STATUS_VERSION_MISMATCH = 2
STATUS_BAD_SHAPE = 3
STATUS_BAD_CONFIG = 4
STATUS_COMPUTE_ERROR = 5

_REQ_HEADER = struct.Struct("<4sIIIQQ")
_RESP_HEADER = struct.Struct("<4sIIIQQ")


def encode_request(
    s: np.ndarray, sh: np.ndarray, setup: LossSetup, op: int = OP_BOTH,
    version: int = ABI_VERSION,
) -> bytes:
    """Pack a request; mainly for tests and the Python-side demo."""
    s = np.ascontiguousarray(s, dtype="<f8")
    sh = np.ascontiguousarray(sh, dtype="<f8")
    config = json.dumps(setup.to_dict()).encode()
    header = _REQ_HEADER.pack(MAGIC, version, op, 0, s.shape[0], len(config))
    return header + config + s.tobytes() + sh.tobytes()


def _respond(
    status: int,
    breakdown: LossBreakdown | None = None,
    grad: np.ndarray | None = None,
    singular: bool = False,
    message: str = "",
) -> bytes:
    b = breakdown or LossBreakdown()
    values = np.array(
        [b.lsd, b.tl, b.l_iid, b.l_ipd, b.l_ic, b.l_opd, b.total], dtype="<f8"
    )
    grad_bytes = b"" if grad is None else np.ascontiguousarray(grad, dtype="<f8").tobytes()
    msg = message.encode()
    header = _RESP_HEADER.pack(
        MAGIC, ABI_VERSION, status, 1 if singular else 0,
        len(grad_bytes) // 8, len(msg),
    )
    return header + values.tobytes() + grad_bytes + msg


def serve_request(payload: bytes) -> bytes:
    """Handle one request buffer and return the response buffer."""
    if len(payload) < _REQ_HEADER.size:
        return _respond(STATUS_BAD_SHAPE, message="request shorter than header")
    magic, version, op, _, n_samples, config_len = _REQ_HEADER.unpack_from(payload)
    if magic != MAGIC:
        return _respond(STATUS_BAD_MAGIC, message=f"bad magic {magic!r}")
    if version != ABI_VERSION:
        return _respond(
            STATUS_VERSION_MISMATCH,
            message=f"abi version {version} != {ABI_VERSION}",
        )
    if op not in (OP_LOSS, OP_GRAD, OP_BOTH):
        return _respond(STATUS_BAD_SHAPE, message=f"unknown op {op}")

    array_bytes = n_samples * 2 * 8
    expected = _REQ_HEADER.size + config_len + 2 * array_bytes
    if len(payload) != expected or n_samples < 1:
        return _respond(
            STATUS_BAD_SHAPE,
            message=f"expected {expected} bytes for n_samples={n_samples}, got {len(payload)}",
        )

    config_start = _REQ_HEADER.size
    try:
        setup = LossSetup.from_dict(json.loads(payload[config_start : config_start + config_len]))
    except Exception as exc:
        return _respond(STATUS_BAD_CONFIG, message=str(exc))

    try:
        s_start = config_start + config_len
        s = np.frombuffer(payload, dtype="<f8", count=n_samples * 2, offset=s_start)
        sh = np.frombuffer(
            payload, dtype="<f8", count=n_samples * 2, offset=s_start + array_bytes
        )
        ref = StereoSignal(s.reshape(n_samples, 2))
        est = StereoSignal(sh.reshape(n_samples, 2))
        if op == OP_LOSS:
            breakdown = total_loss(
                ref, est, setup.stft, setup.partition, setup.genlog, setup.weights
            )
            return _respond(STATUS_OK, breakdown)
        result = loss_gradient(
            ref, est, setup.stft, setup.partition, setup.genlog, setup.weights
        )
        grad = result.grad if op in (OP_GRAD, OP_BOTH) else None
        return _respond(STATUS_OK, result.breakdown, grad, result.singular)
    except Exception as exc:
        return _respond(STATUS_COMPUTE_ERROR, message=str(exc))


def decode_response(payload: bytes) -> dict:
    """Unpack a response buffer (tests and the Python demo)."""
    magic, version, status, flags, n_grad, msg_len = _RESP_HEADER.unpack_from(payload)
    values = np.frombuffer(payload, dtype="<f8", count=7, offset=_RESP_HEADER.size)
    grad_start = _RESP_HEADER.size + 7 * 8
    grad = np.frombuffer(payload, dtype="<f8", count=n_grad, offset=grad_start)
    msg_start = grad_start + n_grad * 8
    return {
        "magic": magic,
        "version": version,
        "status": status,
        "singular": bool(flags & 1),
        "breakdown": {
            "lsd": values[0],
            "tl": values[1],
            "iid": values[2],
            "ipd": values[3],
            "ic": values[4],
            "opd": values[5],
            "total": values[6],
        },
        "grad": grad.reshape(-1, 2) if n_grad else np.zeros((0, 2)),
        "message": payload[msg_start : msg_start + msg_len].decode(),
    }
