import pytest

from roadseg_toy import TrainConfig, generate_toy_dataset, train_toy


@pytest.fixture(scope="session")
def toy_train_dir(tmp_path_factory):
    """Ten road samples rendered through the normal-forge CLI."""
    outdir = tmp_path_factory.mktemp("toy_train")
    generate_toy_dataset(outdir, count=10, size=64, seed=1)
    return outdir


@pytest.fixture(scope="session")
def toy_test_dir(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("toy_test")
    generate_toy_dataset(outdir, count=4, size=64, seed=500)
    return outdir


@pytest.fixture(scope="session")
def trained_dcsc(toy_train_dir):
    config = TrainConfig(target_train_fscore=0.95)
    model, history = train_toy(toy_train_dir, variant="dcsc", epochs=200, seed=3, config=config)
    return model, history
