"""Per-prompt classifier-free guidance scale selection."""

from pathlib import Path

from ._gsadvisor import (
    DEFAULT_ALPHA,
    DEFAULT_ANCHOR,
    PARAM_BUDGET,
    Advisor as _Advisor,
    GsadvisorError,
    SelectionResult,
    cfg_combine,
    complexity_features,
    run_command as _run_command,
    select_from_predictions,
    tilt_distribution,
    tokenize,
    utility,
)


def _find_lexicon():
    here = Path(__file__).resolve().parent
    # Wheel and build-tree layouts ship the file; editable installs use the repo copy.
    for candidate in (here / "data" / "modifiers.txt", here.parents[1] / "data" / "modifiers.txt"):
        if candidate.exists():
            return candidate
    return here / "data" / "modifiers.txt"


LEXICON = _find_lexicon()
IMAGE_GRID = [float(s) for s in range(1, 13)]


def Advisor(model, lexicon=LEXICON):
    """Loads a trained model file for scale selection."""
    return _Advisor(Path(model), Path(lexicon))


def run_command(command, config):
    """Runs a gsadvisor command; returns (exit_code, stdout, stderr)."""
    return _run_command(command, Path(config), LEXICON)


__all__ = [
    "Advisor",
    "DEFAULT_ALPHA",
    "DEFAULT_ANCHOR",
    "GsadvisorError",
    "IMAGE_GRID",
    "LEXICON",
    "PARAM_BUDGET",
    "SelectionResult",
    "cfg_combine",
    "complexity_features",
    "run_command",
    "select_from_predictions",
    "tilt_distribution",
    "tokenize",
    "utility",
]
