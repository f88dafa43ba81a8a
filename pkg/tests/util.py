from pathlib import Path

from minibmc.frontend import parse_modules

ROOT = Path(__file__).resolve().parent.parent
PROGRAMS = ROOT / "programs"
DATA = Path(__file__).resolve().parent / "data"


def load(*names: str):
    """Parse programs from the programs/ directory into one model."""
    return parse_modules([((PROGRAMS / n).read_text(), n) for n in names])
