import numpy as np
import pytest

from rewardflow.model import Dims, init_params
from rewardflow.synthdata import build_calibration, enrich_dataset, generate_dataset
from rewardflow.train import TrainConfig, train

QUICK_DIMS = Dims(d_sin=16, d=16, h=32, layers=3)


@pytest.fixture(scope="session")
def scored_small():
    """4k enriched records, enough to populate every bin."""
    records = generate_dataset(4000, seed=0)
    cal = build_calibration(records, bins=8, subset=4000)
    return cal, enrich_dataset(records, cal)


@pytest.fixture(scope="session")
def quick_config():
    return TrainConfig(
        steps=800, batch_size=128, seed=0, dims=QUICK_DIMS,
        eval_every=400, eval_samples=64, eval_ode_steps=25,
    )


@pytest.fixture(scope="session")
def quick_run(scored_small, quick_config):
    """A short multi-reward training run shared by sampler/eval/service tests."""
    _, records = scored_small
    return train(quick_config, records)


@pytest.fixture(scope="session")
def quick_ckpt(quick_run):
    return quick_run[0]


@pytest.fixture(scope="session")
def wild_params():
    """Untrained params with a randomized output layer, for tests that need a
    non-zero field without paying for training."""
    p = init_params(seed=0)
    rng = np.random.default_rng(99)
    t = dict(p.tensors)
    last = p.dims.layers - 1
    t[f"l{last}_w"] = rng.normal(0, 0.3, t[f"l{last}_w"].shape)
    t[f"l{last}_b"] = rng.normal(0, 0.3, t[f"l{last}_b"].shape)
    return p.with_tensors(t)
