import pytest

from fermi_accel import kernels


def _backends():
    names = ["python"]
    try:
        kernels.load("compiled")
        names.insert(0, "compiled")
    except ImportError:
        pass
    return names


BACKENDS = _backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.load(request.param)


@pytest.fixture
def compiled():
    try:
        return kernels.load("compiled")
    except ImportError:
        pytest.skip("compiled kernels not built")


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects ``(criterion, check, passed, detail)`` rows for the summary."""
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(ACCEPTANCE, [])
    if not rows:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    by_crit: dict = {}
    for crit, name, ok, detail in rows:
        by_crit.setdefault(crit, []).append((name, ok, detail))
    for crit in sorted(by_crit):
        checks = by_crit[crit]
        verdict = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        tr.write_line(f"criterion {crit:>2}: {verdict}")
        for name, ok, detail in checks:
            tr.write_line(f"    {'ok  ' if ok else 'FAIL'} {name}: {detail}")
