"""Cross-validated AUROC and a full-data rule list on the Mammographic Mass data."""

import argparse
import time

from frl.annealing import AnnealingConfig, simulated_annealing
from frl.datasets import load_mammographic
from frl.evaluation import cross_validate
from frl.io import ModelDocument, render_list
from frl.mining import mine_rules
from frl.model import Hyperparameters


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--folds", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()

    data, binarizer = load_mammographic()
    H = Hyperparameters()
    cfg = AnnealingConfig(steps=a.steps, seed=a.seed)
    t = time.time()
    universe = mine_rules(data, H.min_support, H.max_cardinality)
    res = simulated_annealing(data, universe, H, cfg)
    print(f"{data.n} rows, {data.p} features, {len(universe)} rules, trained in {time.time() - t:.1f}s\n")
    doc = ModelDocument.build(res.model, universe, data, H, a.seed, a.steps, res.objective, binarizer, "severity")
    print(render_list(doc, outcome="malignancy risk"))

    cv = cross_validate(data, H, a.folds, cfg, seed=a.seed)
    print("fold AUROC: " + " ".join(f"{x:.3f}" for x in cv.fold_aurocs))
    print(f"mean {cv.mean:.3f} (sd {cv.std:.3f})")


if __name__ == "__main__":
    main()
