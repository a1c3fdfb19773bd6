import pytest
from synthetic_digits import make_digit_dataset

from factorbench.assets import load_mnist, load_textures, write_idx_images, write_idx_labels
from factorbench.cli import default_texture_dir
from factorbench.factors import default_table


@pytest.fixture(scope="session")
def idx_paths(tmp_path_factory):
    """Synthetic digit bank in IDX format (60 instances per class)."""
    root = tmp_path_factory.mktemp("idx")
    images, labels = make_digit_dataset(per_class=60)
    images_path = root / "digits-images-idx3-ubyte"
    labels_path = root / "digits-labels-idx1-ubyte"
    write_idx_images(images, images_path)
    write_idx_labels(labels, labels_path)
    return images_path, labels_path


@pytest.fixture(scope="session")
def shape_bank(idx_paths):
    return load_mnist(*idx_paths)


@pytest.fixture(scope="session")
def texture_bank():
    return load_textures(default_texture_dir())


@pytest.fixture(scope="session")
def table(shape_bank):
    return default_table(shape_counts=shape_bank.class_counts)
