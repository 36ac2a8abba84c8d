#!/usr/bin/env python3
"""Smoke test for the lwr Python bindings.

Builds nothing itself: run `cargo build --release -p lwr-python` first,
then `python3 python/smoke_test.py`. The script copies the built cdylib
next to a temp directory so `import lwr` resolves.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def locate_library() -> Path:
    candidates = [
        REPO / "target" / "release" / "liblwr.so",
        REPO / "target" / "debug" / "liblwr.so",
    ]
    for path in candidates:
        if path.exists():
            return path
    sys.exit(
        "liblwr.so not found; build it with `cargo build --release -p lwr-python`"
    )


def check(name: str, condition: bool) -> None:
    print(f"{'PASS' if condition else 'FAIL'}  {name}")
    if not condition:
        sys.exit(1)


def main() -> None:
    lib = locate_library()
    tmp = tempfile.mkdtemp(prefix="lwr-smoke-")
    shutil.copy(lib, Path(tmp) / "lwr.so")
    sys.path.insert(0, tmp)
    import lwr

    # Meta-loss hand values.
    value, dl, dr, branch = lwr.meta_loss(1.0, -1.0, 2.0)
    check("meta_loss reject branch", value == 4.0 and branch == "reject" and dr == -2.0)
    value, dl, dr, branch = lwr.meta_loss(0.5, 1.5, 2.0)
    check("meta_loss accept branch", value == 2.0 and (dl, dr) == (1.0, 1.0))
    check(
        "meta_loss optimum value",
        abs(lwr.meta_loss(0.0, 2.0 / 3.0, 2.0)[0] - 2.0 / 3.0) < 1e-12,
    )

    # Prediction losses.
    loss, grad = lwr.prediction_loss("hinge", 0.5, 1.0)
    check("hinge loss", (loss, grad) == (0.5, -1.0))
    loss, grad = lwr.prediction_loss("epsilon_insensitive", 2.0, 1.0, epsilon=0.1)
    check("epsilon-insensitive loss", abs(loss - 0.9) < 1e-12 and grad == 1.0)

    # Metrics.
    check("auc perfect", lwr.auc_roc([0.9, 0.8, 0.3], [1, 1, -1]) == 1.0)
    check("accept mask", lwr.accept_mask([1.0, 0.0, -0.5]) == [True, False, False])
    check(
        "reject fraction mask",
        lwr.reject_fraction_mask([0.9, -0.3, 0.1, 0.5], 0.5)
        == [True, False, False, True],
    )
    mse, rmse = lwr.regression_errors([1.0, 3.0], [0.0, 1.0])
    check("regression errors", abs(mse - 2.5) < 1e-12 and abs(rmse - math.sqrt(2.5)) < 1e-12)
    check(
        "classification error",
        abs(lwr.classification_error([0.5, -0.2, 0.1], [1, 1, -1]) - 2 / 3) < 1e-12,
    )

    # Train on synthetic data; rejection should help AUC.
    x_train, y_train = lwr.gen_synthetic_gaussian(200, seed=1)
    x_test, y_test = lwr.gen_synthetic_gaussian(200, seed=2)
    model = lwr.RejectiveModel.train(
        x_train,
        y_train,
        loss="hinge",
        c=0.9,
        epochs=1500,
        batch_size=400,
        learning_rate=5e-3,
        r_hidden=[2],
        seed=3,
    )
    h_scores, r_scores = model.predict_batch(x_test)
    auc_all = lwr.auc_roc(h_scores, y_test)
    kept = lwr.accept_mask(r_scores)
    h_kept = [h for h, k in zip(h_scores, kept) if k]
    y_kept = [y for y, k in zip(y_test, kept) if k]
    auc_kept = lwr.auc_roc(h_kept, y_kept)
    rejected = 1.0 - sum(kept) / len(kept)
    print(f"      auc {auc_all:.4f} -> {auc_kept:.4f} (rejecting {rejected:.0%})")
    check("training produces sane AUC", 0.75 <= auc_all <= 0.95)
    check("sign-rule rejection improves AUC", auc_kept > auc_all)

    # Deterministic retraining and save/load round trip.
    again = lwr.RejectiveModel.train(
        x_train,
        y_train,
        loss="hinge",
        c=0.9,
        epochs=1500,
        batch_size=400,
        learning_rate=5e-3,
        r_hidden=[2],
        seed=3,
    )
    check("training is deterministic", again.predict(x_test[0]) == model.predict(x_test[0]))

    path = Path(tmp) / "model.json"
    model.save(path)
    loaded = lwr.RejectiveModel.load(path)
    check("save/load round trip", loaded.predict(x_test[0]) == model.predict(x_test[0]))
    check("rejection cost getter", loaded.rejection_cost == 0.9)

    print("all smoke checks passed")


if __name__ == "__main__":
    main()
