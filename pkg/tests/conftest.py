import numpy as np
import pytest

# Well-separated blob centers (pairwise distance >= 1) inside the unit box
# after the 0.3 scaling used below.
BLOB_CENTERS = np.array([[0.0, 0.0], [1.5, 0.0], [0.75, 1.3]])


def make_blobs(n=300, spread=0.05, seed=0, centers=BLOB_CENTERS):
    """Gaussian blobs with known labels; centers stay >= 1 apart."""
    rng = np.random.default_rng(seed)
    per = n // len(centers)
    sizes = [per] * (len(centers) - 1) + [n - per * (len(centers) - 1)]
    X = np.vstack(
        [c + spread * rng.standard_normal((m, 2)) for c, m in zip(centers, sizes)]
    )
    labels = np.repeat(np.arange(len(centers)), sizes)
    return X, labels


def make_unit_blobs(n=300, spread=0.02, seed=0):
    """Blob data scaled into [0, 1]^2 for SOM training."""
    X, labels = make_blobs(n=n, spread=spread / 0.3, seed=seed)
    X = 0.3 * X + np.array([0.2, 0.2])
    return np.clip(X, 0.0, 1.0), labels


@pytest.fixture
def blob_data():
    return make_blobs(n=300, spread=0.05, seed=7)


def write_points_csv(path, X, ids=None, columns=None):
    """Write a feature matrix as an id,<features> CSV file."""
    X = np.asarray(X)
    ids = ids or [f"p{i}" for i in range(X.shape[0])]
    columns = columns or [f"f{j}" for j in range(X.shape[1])]
    lines = [",".join(["id", *columns])]
    for pid, row in zip(ids, X):
        lines.append(",".join([pid, *(repr(float(v)) for v in row)]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
