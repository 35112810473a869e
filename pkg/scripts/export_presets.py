"""
Preset Export Script

Writes every experiment preset as a configuration file that `analyze` and `simulate`
accept, so the presets can be inspected, edited and rerun by hand.

Usage:
    python scripts/export_presets.py [OUT_DIR] [SEED]

Dependencies:
    - Presets and config loader modules
"""
import sys
import os
from pathlib import Path

# Add project root to sys.path to allow module imports
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from app.config_loader import build_loaded, canonical_json
from app.presets import ExperimentPreset, build_preset


def export_presets(out_dir: str | Path, seed: int | None = None) -> list[Path]:
    """Write <preset>.json for every preset; each file is validated before it is written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for preset in ExperimentPreset:
        config = build_preset(preset, seed)
        build_loaded(config, f"preset:{preset.value}")
        path = out_dir / f"{preset.value}.json"
        path.write_text(canonical_json(config), encoding="utf-8")
        written.append(path)
    return written


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "presets"
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else None
    for path in export_presets(target, seed):
        print(f"Wrote {path}")
