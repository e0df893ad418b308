"""Shared fixtures: a small rendered dataset and a model trained on it.

The desk-scale dataset (4 structures x 27 augmentations) and the model
trained on it to perfect train/val accuracy are session-scoped because
several test modules exercise the same artifacts and training is the
expensive part of the suite.
"""

from pathlib import Path

import pytest

from kinebench.catalog import builtin_catalog
from kinebench.dataset import build_dataset
from kinebench.nn import build_table1_model, init_adam
from kinebench.trainer import TrainConfig, train

DESK_STRUCTURES = ("hinged-triangle", "braced-quad",
                   "hinged-quadrilateral", "hinged-pentagon")
# split seed for the desk dataset; with training seed 0 this run reaches
# perfect train and val accuracy inside the 200-epoch budget
DESK_SPLIT_SEED = 7
# eight training structures for the held-out-shape generalization run:
# four stable, four unstable, chosen so every holdout family has a trained
# analogue (wheel/star, warren, fan via wheel, welded ring, hinged ring,
# chained boxes, welded body with pendant bars, two polygons pinned at a
# point) and so rings with and without welded joints both appear
GEN_STRUCTURES = ("warren-2panel", "wheel-pentagon", "welded-square",
                  "alternating-ring-hexagon", "hinged-hexagon", "domino",
                  "welded-square-pendulum", "triangle-pinned-square")
DESK_INDICES = dict(scale_indices=(0, 4, 8), rot_indices=(0, 3, 6),
                    trans_indices=(0, 4, 8))


def build_desk_dataset(out_dir, names, seed=0, **kw):
    cat = builtin_catalog()
    structures = [cat.by_name(n) for n in names]
    return build_dataset(structures, cat.intended_labels, out_dir, seed=seed,
                         **{**DESK_INDICES, **kw})


def train_until_perfect(manifest, out_dir, seed=0, batch_size=8,
                        max_epochs=200):
    """Train one epoch at a time and stop at the first epoch with perfect
    train and val accuracy.  The trajectory is identical to a single
    uninterrupted run because every seed is keyed by the absolute epoch
    number, not by call boundaries."""
    out_dir = Path(out_dir)
    model = build_table1_model(seed=seed)
    state = init_adam(model.params())
    records = []
    for epoch in range(max_epochs):
        cfg = TrainConfig(epochs=epoch + 1,
                          checkpoint_dir=out_dir / "checkpoints",
                          metrics_path=out_dir / "metrics.csv",
                          batch_size=batch_size, seed=seed)
        model, recs = train(model, manifest, cfg, start_epoch=epoch,
                            adam_state=state)
        records.extend(recs)
        if records[-1].train_acc == 1.0 and records[-1].val_acc == 1.0:
            break
    return model, records


@pytest.fixture(scope="session")
def desk_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk_data")
    return build_desk_dataset(root, DESK_STRUCTURES, seed=DESK_SPLIT_SEED)


@pytest.fixture(scope="session")
def desk_run(desk_dataset, tmp_path_factory):
    """(model, records, run_dir, manifest) trained to 100/100 on the
    desk dataset."""
    out = tmp_path_factory.mktemp("desk_run")
    model, records = train_until_perfect(desk_dataset, out)
    return model, records, out, desk_dataset
