from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import verdicts  # noqa: E402

from momentum_decoding.decoders import GenerationRecord  # noqa: E402

_init = GenerationRecord.__init__


def _tracked_init(self, *args, **kwargs):
    _init(self, *args, **kwargs)
    verdicts.RECORDS.append(self)


# every record any test builds is kept so the replay criterion can audit them all
GenerationRecord.__init__ = _tracked_init


def pytest_collection_modifyitems(items):
    # the replay audit must see records from every other test, so it runs last
    last = [it for it in items if "replay_every_record" in it.name]
    items[:] = [it for it in items if it not in last] + last


def pytest_terminal_summary(terminalreporter):
    if verdicts.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in verdicts.RESULTS:
            terminalreporter.write_line(line)
