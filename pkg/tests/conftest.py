import time
from pathlib import Path

import pytest

from seroprompt import pipeline

CONFIG_DIR = Path(pipeline.__file__).parent / "configs"

# Small enough for a full run in a few seconds; used where only plumbing matters.
TINY = {
    "seed": 3,
    "top_k": 3,
    "cohort": {"spec": {"n_patients": 80, "features": ["Age", "HBP", "LYMPH%", "hs-CRP", "D-Dimer", "ALB"]}},
    "selection": {"n_estimators": 20},
    "baselines": {
        "gbdt": {"n_estimators": 20},
        "adaboost": {"n_estimators": 10},
        "random_forest": {"n_estimators": 10},
    },
    "n_bins": 8,
    "seqmodel": {"embed_dim": 16, "n_layers": 1, "n_heads": 2, "ffn_dim": 32, "epochs": 2},
}


@pytest.fixture(scope="session")
def tiny_run(tmp_path_factory):
    config = pipeline.build_config(TINY, output_dir=str(tmp_path_factory.mktemp("tiny")))
    pipeline.run_all(config)
    return config


@pytest.fixture(scope="session")
def planted_run(tmp_path_factory):
    """Full pipeline on the shipped planted-signal config, timed."""
    config = pipeline.load_config(CONFIG_DIR / "planted.yaml", output_dir=str(tmp_path_factory.mktemp("planted")))
    start = time.perf_counter()
    pipeline.run_all(config)
    return config, time.perf_counter() - start
