"""Checkpoint container: a text manifest followed by a raw parameter
payload, bit-identical across save/load cycles.

Format::

    BETADET CHECKPOINT 1\n
    step = <int>\n
    [config]\n
    <canonical RunConfig echo, one 'key = value' line per field>
    [params]\n
    <name> <dim0>x<dim1>... <byte offset into payload>\n   (one per parameter)
    PAYLOAD <total payload bytes>\n
    <raw little-endian IEEE-754 float64 values, C order, in listing order>
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import autograd as ag
from .config import RunConfig, config_text, parse_config
from .model import Detector

_MAGIC = "BETADET CHECKPOINT 1"


def save_checkpoint(path, detector: Detector, run_cfg: RunConfig, step: int) -> None:
    names = detector.parameter_names()
    params = detector.parameters()
    lines = [_MAGIC, f"step = {step}", "[config]"]
    lines.append(config_text(run_cfg).rstrip("\n"))
    lines.append("[params]")
    offset = 0
    chunks = []
    for name, p in zip(names, params):
        shape = "x".join(str(d) for d in p.data.shape)
        lines.append(f"{name} {shape} {offset}")
        raw = np.ascontiguousarray(p.data, dtype="<f8").tobytes()
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    lines.append(f"PAYLOAD {len(payload)}")
    header = ("\n".join(lines) + "\n").encode("ascii")
    Path(path).write_bytes(header + payload)


def load_checkpoint(path) -> tuple[Detector, RunConfig, int]:
    blob = Path(path).read_bytes()
    marker = b"\nPAYLOAD "
    pos = blob.find(marker)
    if not blob.startswith(_MAGIC.encode("ascii")) or pos < 0:
        raise ValueError(f"{path}: not a checkpoint file")
    newline = blob.index(b"\n", pos + 1)
    declared = int(blob[pos + len(marker):newline].decode("ascii"))
    payload = blob[newline + 1:]
    if len(payload) != declared:
        raise ValueError(
            f"{path}: payload is {len(payload)} bytes, manifest says {declared}")

    text = blob[:pos].decode("ascii").splitlines()
    if text[1].partition("=")[0].strip() != "step":
        raise ValueError(f"{path}: missing step line")
    step = int(text[1].partition("=")[2])
    config_start = text.index("[config]") + 1
    params_start = text.index("[params]")
    run_cfg = parse_config("\n".join(text[config_start:params_start]))

    manifest: list[tuple[str, tuple[int, ...], int]] = []
    for line in text[params_start + 1:]:
        name, shape_s, offset_s = line.split()
        shape = tuple(int(d) for d in shape_s.split("x"))
        manifest.append((name, shape, int(offset_s)))

    detector = Detector.init(run_cfg.model_config(), run_cfg.seed)
    expected = {n: p.data.shape for n, p in zip(detector.parameter_names(),
                                                detector.parameters())}
    found = {name: shape for name, shape, _ in manifest}
    if expected != found:
        diff = []
        for name in sorted(set(expected) | set(found)):
            if expected.get(name) != found.get(name):
                diff.append(
                    f"  {name}: expected {expected.get(name)}, found {found.get(name)}")
        raise ValueError(f"{path}: manifest incompatible with config\n" + "\n".join(diff))

    for name, shape, offset in manifest:
        n = int(np.prod(shape))
        raw = payload[offset:offset + 8 * n]
        if len(raw) != 8 * n:
            raise ValueError(f"{path}: payload truncated at parameter {name}")
        detector.params[name] = ag.Tensor(
            np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64),
            requires_grad=True)
    return detector, run_cfg, step
