from hypothesis import settings

# jitted functions compile on first call, which would trip per-example deadlines
settings.register_profile("idla", deadline=None, max_examples=60)
settings.load_profile("idla")


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for name in sorted(RESULTS, key=lambda k: int(k.split("-")[1])):
            terminalreporter.write_line(RESULTS[name])
