"""Raw I/Q file format: interleaved float32 little-endian pairs + JSON sidecar.

The same reader ingests externally captured recordings converted to this
layout, so file-based data can replace the synthetic generator anywhere.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from .signals import IQRecording


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".meta.json")


def write_iq(path, recording: IQRecording) -> Path:
    """Write samples as I,Q float32 LE pairs plus a `<name>.meta.json` sidecar."""
    path = Path(path)
    interleaved = np.empty(2 * len(recording.samples), dtype="<f4")
    interleaved[0::2] = recording.samples.real.astype(np.float32)
    interleaved[1::2] = recording.samples.imag.astype(np.float32)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(interleaved.tobytes())
    os.replace(tmp, path)
    meta = {
        "sample_rate_hz": recording.sample_rate,
        "center_freq_hz": recording.center_frequency,
        "label": recording.label,
        "source": recording.source,
    }
    _sidecar(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def read_iq(path) -> IQRecording:
    """Read a raw I/Q file; metadata comes from the JSON sidecar."""
    path = Path(path)
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    if raw.size % 2 != 0:
        raise ValueError(f"{path}: odd float count, not interleaved I/Q")
    if raw.size == 0:
        raise ValueError(f"{path}: empty I/Q file")
    meta = json.loads(_sidecar(path).read_text())
    samples = raw[0::2].astype(np.float64) + 1j * raw[1::2].astype(np.float64)
    return IQRecording(
        samples,
        sample_rate=meta["sample_rate_hz"],
        center_frequency=meta.get("center_freq_hz", 0.0),
        label=meta.get("label"),
        source="file",
    )
