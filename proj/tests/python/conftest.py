import json
import os
import shutil
import subprocess
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[2]
FIXTURES = Path(os.environ.get("IMPACTRANK_FIXTURES", ROOT / "tests" / "fixtures"))
MINI = FIXTURES / "mini_repo"

# Labeled cases over the 30-file fixture repository, oldest first.
CASES = [
    ("worker pool hangs on shutdown", ["f01", "f25", "f26"]),
    ("queue drops jobs under load", ["f02", "f27"]),
    ("route handler returns 500 for bad auth token", ["f05", "f06", "f28"]),
    ("config loader ignores environment overrides", ["f11", "f29"]),
    ("db session leaks connections in migrations", ["f09", "f10"]),
    ("model serializer misses new fields", ["f07", "f08", "f30"]),
    ("cron schedule off by one hour", ["f03"]),
    ("metrics exporter crashes on empty collector", ["f22", "f23"]),
    ("plugin registry loads plugins twice", ["f18", "f19"]),
    ("cli commands print wrong exit code", ["f16", "f17"]),
    ("worker pool restarts dead workers slowly", ["f01", "f25"]),
    ("web views render stale templates", ["f20", "f21"]),
]


def _cli():
    path = os.environ.get("IMPACTRANK_CLI") or shutil.which("impactrank")
    if not path:
        candidate = ROOT / "build" / "tools" / "impactrank"
        path = str(candidate) if candidate.exists() else None
    return path


@pytest.fixture(scope="session")
def cli():
    path = _cli()
    if not path:
        pytest.skip("impactrank executable not built")

    def run(*args, check=True):
        proc = subprocess.run([path, *map(str, args)], capture_output=True, text=True, timeout=300)
        if check and proc.returncode != 0:
            raise AssertionError(f"exit {proc.returncode}\n{proc.stdout}\n{proc.stderr}")
        return proc

    return run


@pytest.fixture()
def exports():
    return {
        "files": str(MINI / "files.ndjson"),
        "symbols": str(MINI / "symbols.ndjson"),
        "calls": str(MINI / "calls.ndjson"),
        "history": str(MINI / "history.ndjson"),
    }


@pytest.fixture()
def request_file():
    return MINI / "request.json"


@pytest.fixture()
def truth():
    return set(json.loads((MINI / "truth.json").read_text())["truth"])


@pytest.fixture()
def corpus(tmp_path):
    path = tmp_path / "corpus.jsonl"
    with path.open("w") as out:
        for i, (text, positives) in enumerate(CASES):
            request = {"id": f"case-{i}", "text": text, "change_type": "bugfix", "timestamp": 1640000000 + i * 86400}
            out.write(json.dumps({"request": request, "positives": positives}) + "\n")
    return path
