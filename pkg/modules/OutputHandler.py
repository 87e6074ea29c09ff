import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import matplotlib
import numpy as np
import scipy
from matplotlib.colors import hsv_to_rgb
from PIL import Image
import PIL

from modules.ConfigurationHandler import PhysicsConfig
from modules.LoggerHandler import get_logger
from modules.SpinlessHandler import ComplexField
from modules.utils import FrameRenderError, _get_env_int, read_project_config, sha256_file, write_json

logger = get_logger()

# arg 0 -> red, pi/2 -> green, pi -> blue, 3pi/2 -> purple
HUE_ARG_KNOTS = np.array([0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi, 2.0 * math.pi])
HUE_VALUES = np.array([0.0, 1.0 / 3.0, 2.0 / 3.0, 5.0 / 6.0, 1.0])

OMITTED_PHASE_NOTE = (
    "coherent-state frames omit the global phase exp(i ell^2 b^2 sin(2t)/4); "
    "it does not change |Psi| or relative phases within a mode"
)


@dataclass
class FrameSpec:
    """Where and how a set of frames is rendered; ``vmax`` is shared by every frame of the set."""

    out_dir: Path
    prefix: str
    times: Sequence[float]
    vmax: float
    grid_shape: Sequence[int] = ()
    files: List[Path] = field(default_factory=list)

    def frame_path(self, index: int) -> Path:
        return self.out_dir / f"{self.prefix}_{index:03d}.ppm"


def global_max(fields: Iterable[ComplexField]) -> float:
    return max(float(np.max(f.magnitude())) for f in fields)


def phase_colors(samples: np.ndarray, vmax: float) -> np.ndarray:
    """RGB uint8 array: hue from arg, full saturation, value from |samples| / vmax."""
    angle = np.mod(np.angle(samples), 2.0 * math.pi)
    hue = np.interp(angle, HUE_ARG_KNOTS, HUE_VALUES) % 1.0
    value = np.clip(np.abs(samples) / vmax, 0.0, 1.0) if vmax > 0 else np.zeros(samples.shape)
    hsv = np.stack([hue, np.ones_like(hue), value], axis=-1)
    return np.round(hsv_to_rgb(hsv) * 255.0).astype(np.uint8)


def _check_finite(field: ComplexField):
    bad = ~np.isfinite(field.samples)
    if np.any(bad):
        component, iz, iphi = (int(i) for i in np.argwhere(bad)[0])
        raise FrameRenderError(
            f"non-finite sample at component {component}, z index {iz}, phi index {iphi} (t={field.t:g})"
        )


def frame_pixels(field: ComplexField, vmax: float) -> np.ndarray:
    """
    Image array with phi across and z down, z_max in the top row.

    A two-component field becomes two panels side by side (upper component left).
    """
    _check_finite(field)
    panels = [phase_colors(component, vmax)[::-1] for component in field.samples]
    return np.concatenate(panels, axis=1)


def render_frame(field: ComplexField, spec: FrameSpec) -> bytes:
    """Binary Netpbm (P6) bytes of ``field``; ``spec.grid_shape`` (n_phi, n_z), when set, must match the field."""
    if spec.grid_shape:
        n_phi, n_z = spec.grid_shape
        if field.shape != (n_z, n_phi):
            raise FrameRenderError(f"field grid {field.shape[1]}x{field.shape[0]} does not match {n_phi}x{n_z}")
    image = Image.fromarray(frame_pixels(field, spec.vmax))
    buffer = io.BytesIO()
    image.save(buffer, format="PPM")
    return buffer.getvalue()


def write_frames(fields: Sequence[ComplexField], spec: FrameSpec, workers: Optional[int] = None) -> List[Path]:
    """Render every frame on a thread pool (CYLQ_WORKERS) and write one file per frame."""
    if len(spec.times) != len(fields):
        raise FrameRenderError(f"{len(fields)} fields for {len(spec.times)} time stamps")
    if not fields:
        return []
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    workers = workers or max(1, _get_env_int("CYLQ_WORKERS", 4))

    def job(index: int) -> Path:
        path = spec.frame_path(index)
        data = render_frame(fields[index], spec)
        with open(path, "wb") as f:
            f.write(data)
        return path

    with ThreadPoolExecutor(max_workers=workers) as executor:
        paths = list(executor.map(job, range(len(fields))))
    spec.files.extend(paths)
    logger.info(
        f"Wrote {len(paths)} frames for t in [{min(spec.times):g}, {max(spec.times):g}] to {spec.out_dir} ({workers} workers)",
        extra={"run": spec.prefix},
    )
    return paths


def package_versions() -> Dict[str, str]:
    return {
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
        "Pillow": PIL.__version__,
    }


def write_manifest(
    out_dir: Path,
    command: str,
    config: PhysicsConfig,
    files: Iterable[Path],
    notes: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    manifest.json next to the outputs: config echo, versions and SHA-256 of
    every file written. No timestamps, so identical runs give identical bytes.
    """
    out_dir = Path(out_dir)
    project = read_project_config()
    checksums = {Path(path).name: sha256_file(Path(path)) for path in sorted(files, key=lambda p: Path(p).name)}
    payload = {
        "project": {"name": project.get("name"), "version": project.get("version")},
        "command": command,
        "config": config.as_dict(),
        "versions": package_versions(),
        "files": checksums,
        "notes": notes or {},
    }
    path = out_dir / "manifest.json"
    write_json(path, payload)
    logger.debug(f"Manifest written with {len(checksums)} checksums", extra={"run": command})
    return path


def output_root(default: str = "output") -> Path:
    return Path(os.getenv("CYLQ_OUT_DIR") or default)
