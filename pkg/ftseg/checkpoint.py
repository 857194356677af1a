"""Model checkpoints: text header followed by little-endian float64 payload.

Layout::

    ftseg-checkpoint 1
    variant=attn_unet_multi_input
    depth=4
    ...
    param enc0.conv1.weight 16,1,3,3
    ...
    END
    <raw bytes of every parameter, header order>
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from pydantic import ValidationError as PydanticValidationError

from .exceptions import IncompatibilityError
from .models import ModelConfig
from .network import Model, layer_shapes
from .tensor import Tensor

logger = logging.getLogger(__name__)

MAGIC = "ftseg-checkpoint 1"
_END = b"\nEND\n"


def _config_lines(cfg: ModelConfig) -> list[str]:
    lines = []
    for key, value in cfg.model_dump(mode="json").items():
        text = str(value).lower() if isinstance(value, bool) else str(value)
        lines.append(f"{key}={text}")
    return lines


def save_checkpoint(model: Model, path: str | Path) -> Path:
    path = Path(path)
    header = [MAGIC, *_config_lines(model.config)]
    for name, tensor in model.params.items():
        header.append(f"param {name} {','.join(str(d) for d in tensor.shape)}")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write("\n".join(header).encode("ascii") + _END)
        for tensor in model.params.values():
            f.write(np.ascontiguousarray(tensor.data, dtype="<f8").tobytes())
    logger.debug("wrote checkpoint %s (%d parameters)", path, model.parameter_count())
    return path


def _parse_param_line(line: str, where: str) -> tuple[str, tuple[int, ...]]:
    try:
        _, name, dims = line.split(" ")
        shape = tuple(int(d) for d in dims.split(","))
    except ValueError as exc:
        raise IncompatibilityError(f"{where}: malformed parameter line {line!r}") from exc
    return name, shape


def load_checkpoint(path: str | Path) -> Model:
    path = Path(path)
    blob = path.read_bytes()
    head, sep, payload = blob.partition(_END)
    if not sep:
        raise IncompatibilityError(f"{path}: missing checkpoint header terminator")
    lines = head.decode("ascii", errors="replace").split("\n")
    if lines[0] != MAGIC:
        raise IncompatibilityError(f"{path}: not an ftseg checkpoint")

    settings: dict[str, str] = {}
    declared: dict[str, tuple[int, ...]] = {}
    for number, line in enumerate(lines[1:], start=2):
        if line.startswith("param "):
            name, shape = _parse_param_line(line, f"{path}:{number}")
            declared[name] = shape
        else:
            key, sep, value = line.partition("=")
            if not sep or not key:
                raise IncompatibilityError(f"{path}:{number}: malformed header line {line!r}")
            settings[key] = value
    try:
        cfg = ModelConfig(**settings)
    except PydanticValidationError as exc:
        raise IncompatibilityError(f"{path}: invalid model configuration: {exc}") from exc

    expected = layer_shapes(cfg)
    if declared != expected:
        raise IncompatibilityError(f"{path}: parameter table does not match its configuration")
    total = sum(int(np.prod(shape)) for shape in expected.values())
    if len(payload) != 8 * total:
        raise IncompatibilityError(
            f"{path}: payload holds {len(payload)} bytes, expected {8 * total}"
        )

    values = np.frombuffer(payload, dtype="<f8")
    params: dict[str, Tensor] = {}
    offset = 0
    for name, shape in expected.items():
        size = int(np.prod(shape))
        params[name] = Tensor.parameter(values[offset : offset + size].reshape(shape))
        offset += size
    return Model(cfg, params)
