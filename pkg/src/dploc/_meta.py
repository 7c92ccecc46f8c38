import hashlib
import json

__version__ = "0.1.0"


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_metadata(config: dict, seed) -> dict:
    """Provenance block embedded in every document the package writes."""
    return {"seed": seed, "version": __version__, "config_hash": config_hash(config)}
