#!/usr/bin/env python3
"""Run the full experiment pipeline at desk scale into ./out.

Equivalent to the four CLI commands back to back with the default config.
Expect a few minutes of runtime and ~100 MB of surface dumps per scenario
with the largest order size.
"""

import sys
import time

from ixmm.cli import main


def run():
    t0 = time.time()
    for cmd in ("solve", "figures", "tables", "sweep"):
        print(f"== ixmm {cmd}")
        code = main([cmd, *sys.argv[1:]])
        if code != 0:
            print(f"{cmd} exited with {code}", file=sys.stderr)
            return code
    print(f"done in {time.time() - t0:.0f}s")
    return 0


if __name__ == "__main__":
    sys.exit(run())
