import sys
from pathlib import Path

# make the shared test helpers (synth, backends, fixture_factory) importable
sys.path.insert(0, str(Path(__file__).parent))
