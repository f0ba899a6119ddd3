import pytest

from evidence_align import synthetic


@pytest.fixture
def demo_dir(tmp_path):
    synthetic.write_demo(tmp_path)
    return tmp_path
