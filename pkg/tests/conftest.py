import numpy as np
import pytest

from gapbench import Feature, VitalsFrame, generate_synthetic


def make_frame(values, features=None, outcome=None, stay_prefix="s"):
    """Frame from a (stays, timesteps, features) array; NaN = absent."""
    values = np.asarray(values, dtype=np.float64)
    n_stays, n_steps, n_feat = values.shape
    features = features or tuple(Feature(f"f{i}") for i in range(n_feat))
    grids = tuple(np.arange(n_steps) for _ in range(n_stays))
    frame = VitalsFrame(tuple(f"{stay_prefix}{i}" for i in range(n_stays)), grids, values,
                        features, outcome)
    return frame, frame.observation_mask()


def random_frame(rng, n_stays=3, n_steps=5, n_feat=4, missing=0.2):
    """Random frame with native missingness; guarantees one visible cell per feature."""
    values = rng.normal(size=(n_stays, n_steps, n_feat))
    absent = rng.random(values.shape) < missing
    absent[0, 0, :] = False
    values[absent] = np.nan
    return make_frame(values)


@pytest.fixture(scope="session")
def synthetic_frame():
    return generate_synthetic(60, 48, seed=123)


@pytest.fixture(scope="session")
def synthetic_frame_gappy():
    return generate_synthetic(60, 48, seed=321, native_missing_rates=[0.1] * 6)
