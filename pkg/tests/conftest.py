import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def run_python(code: str, disable_numba: bool, timeout: int = 600) -> str:
    """Run ``code`` in a fresh interpreter with the chosen kernel backend."""
    env = dict(os.environ)
    env["MMLP_DISABLE_NUMBA"] = "1" if disable_numba else "0"
    out = subprocess.run([sys.executable, "-c", textwrap.dedent(code)], env=env,
                         capture_output=True, text=True, timeout=timeout)
    if out.returncode != 0:
        raise AssertionError(out.stderr)
    return out.stdout


ACCEPTANCE_LINES: list = []


def record_criterion(number: int, name: str, ok: bool, detail: str):
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
