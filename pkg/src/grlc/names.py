"""Fresh variable names.

Variables are plain strings; fresh names append ``~<n>`` with a process-wide
counter, so renamed binders keep their original base readable in traces.
The counter is the single mutable global in the package and is lock-guarded.
"""

from __future__ import annotations

import itertools
import threading

_counter = itertools.count(1)
_lock = threading.Lock()


def fresh(base: str) -> str:
    root = base.split("~", 1)[0]
    with _lock:
        n = next(_counter)
    return f"{root}~{n}"


def base_name(name: str) -> str:
    return name.split("~", 1)[0]
