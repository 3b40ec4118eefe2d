def pytest_configure(config):
    config.addinivalue_line("markers", "slow: end-to-end runs of a minute or more (deselect with -m 'not slow')")
