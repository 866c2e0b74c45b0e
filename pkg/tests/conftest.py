import hypothesis
import pytest

from mpjoin import _kernel

hypothesis.settings.register_profile("mpjoin", deadline=None, max_examples=100)
hypothesis.settings.load_profile("mpjoin")


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timed sections never include JIT."""
    _kernel.warmup()
