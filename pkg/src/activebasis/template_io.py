"""Versioned JSON persistence for learned templates.

The file embeds the wavelet parameters, the selected elements with their
weights, the full reference tables, and run provenance, so detection needs
nothing beyond the template file.  Serialization is canonical (sorted keys,
repr floats) and writes are atomic, which makes reruns byte-identical.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .errors import DataError
from .gabor import GaborParams
from .pursuit import ActiveBasisTemplate, TemplateElement
from .stats import ElementWeight, ReferenceModel

__all__ = ["save_template", "load_template", "write_atomic_text", "FORMAT_VERSION"]

FORMAT_VERSION = 1


def write_atomic_text(path: str | Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def template_to_dict(template: ActiveBasisTemplate, provenance: dict | None = None) -> dict:
    p = template.params
    return {
        "format_version": FORMAT_VERSION,
        "gabor": {
            "length_px": p.length_px,
            "orientations": p.orientations,
            "aspect": p.aspect,
            "sigma1_frac": p.sigma1_frac,
            "cycles": p.cycles,
        },
        "lattice": list(template.shape),
        "elements": [
            {"row": e.row, "col": e.col, "orientation": e.orientation}
            for e in template.elements
        ],
        "weights": [{"lambda": w.lam, "log_z": w.log_z} for w in template.weights],
        "reference": template.ref.to_dict(),
        "provenance": provenance or {},
    }


def save_template(
    template: ActiveBasisTemplate, path: str | Path, provenance: dict | None = None
) -> None:
    payload = template_to_dict(template, provenance)
    write_atomic_text(path, json.dumps(payload, sort_keys=True, indent=1) + "\n")


def load_template(path: str | Path) -> tuple[ActiveBasisTemplate, dict]:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read template {path}: {exc}") from exc
    version = data.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported template format version {version!r}")
    try:
        params = GaborParams(**data["gabor"])
        template = ActiveBasisTemplate(
            shape=tuple(data["lattice"]),
            params=params,
            elements=[
                TemplateElement(e["row"], e["col"], e["orientation"])
                for e in data["elements"]
            ],
            weights=[ElementWeight(w["lambda"], w["log_z"]) for w in data["weights"]],
            ref=ReferenceModel.from_dict(data["reference"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed template file {path}: {exc}") from exc
    return template, data.get("provenance", {})
