import numpy as np
import pytest

from imuface.facesim import default_rig


@pytest.fixture(scope="session")
def rig():
    return default_rig()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def _run_loopback(raw, faults=None, expected=None, **kw):
    """Replay ``raw`` over UDP loopback to an ephemeral port and ingest it."""
    import threading

    from imuface.stream import bind_socket, ingest, replay

    sock = bind_socket("127.0.0.1", 0)
    port = sock.getsockname()[1]
    box = {}

    def rx():
        try:
            box["result"] = ingest(sock, expected or raw.sensor_ids, duration=60.0, idle_timeout=1.0, **kw)
        except Exception as exc:  # surfaced in the main thread
            box["error"] = exc

    t = threading.Thread(target=rx)
    t.start()
    try:
        box["sent"] = replay(raw, ("127.0.0.1", port), faults, realtime=False)
    finally:
        t.join()
        sock.close()
    if "error" in box:
        raise box["error"]
    return box["result"], box["sent"]


@pytest.fixture(scope="session")
def loopback():
    return _run_loopback


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict(capsys):
    """Print and record one PASS/FAIL line for an acceptance criterion, then
    assert every named check."""

    def emit(number: int, title: str, checks: dict, detail: str = ""):
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = f"ACCEPTANCE {number}: {'PASS' if ok else 'FAIL'} {title}"
        if detail:
            line += f" [{detail}]"
        if failed:
            line += f" failed: {', '.join(failed)}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
