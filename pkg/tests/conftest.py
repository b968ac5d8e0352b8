import pytest

from ir2day import data


@pytest.fixture(scope="session")
def toy_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("toy")
    data.synth_toy_dataset(d, 4, 64, 7)
    return d


@pytest.fixture(scope="session")
def toy_manifest(toy_dir):
    return data.load_manifest(toy_dir / "manifest.jsonl")
