"""
Utility functions for run ID generation and validation
"""

import hashlib
import json
from typing import Any, Dict


def generate_run_id(config: Dict[str, Any]) -> str:
    """
    Generate a deterministic run ID from a resolved configuration using MD5 hash.

    Args:
        config: JSON-serialisable configuration (sections of RunConfig)

    Returns:
        Run ID in format: run_<12_char_hash>
    """
    # Canonical form: sorted keys, no whitespace
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    hash_hex = hashlib.md5(canonical.encode()).hexdigest()
    return f"run_{hash_hex[:12]}"


def validate_run_id_format(run_id: str) -> bool:
    """
    Validate that a run ID follows the correct format.

    Args:
        run_id: Run ID to validate

    Returns:
        True if valid format, False otherwise
    """
    if not run_id or not run_id.startswith("run_"):
        return False

    # Should be run_ + 12 hex characters
    if len(run_id) != 16:
        return False

    try:
        int(run_id[4:], 16)
        return True
    except ValueError:
        return False
