"""Regenerate tests/golden_traces.txt, the pinned SHA-256 of each golden trace.

Run this only when the trace format or a protocol changes on purpose; on any
other machine the acceptance suite compares against the committed file.
"""

import hashlib
from pathlib import Path

from asymtrust.fixtures import golden_scenarios
from asymtrust.sim.runner import run

OUT = Path(__file__).resolve().parent.parent / "tests" / "golden_traces.txt"


def main() -> None:
    lines = []
    for name, sc in golden_scenarios().items():
        digest = hashlib.sha256(run(sc).to_text().encode()).hexdigest()
        lines.append(f"{name} {digest}")
        print(lines[-1])
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
