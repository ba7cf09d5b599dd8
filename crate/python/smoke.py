#!/usr/bin/env python3
"""Smoke test for the fcmlearn_py extension module.

Builds the cdylib if needed, loads it straight out of the cargo target
directory, and walks the happy path: draw a map, simulate responses, add
noise, learn the map back, score it, tune hyperparameters, and compare with
the swarm baseline.

Run from anywhere: python python/smoke.py
"""

import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def load_module():
    lib = REPO / "target" / "debug" / "libfcmlearn_py.so"
    if not lib.exists():
        subprocess.run(
            ["cargo", "build", "-p", "fcmlearn-py"], cwd=REPO, check=True
        )
    staging = Path(tempfile.mkdtemp(prefix="fcmlearn_py_"))
    shutil.copy2(lib, staging / "fcmlearn_py.so")
    sys.path.insert(0, str(staging))
    import fcmlearn_py

    return fcmlearn_py


def main():
    fcm = load_module()

    truth = fcm.generate_map(n=8, density=0.3, family="sigmoid", lambda_=2.0, seed=1)
    assert truth.n == 8
    rows = truth.to_rows()
    assert len(rows) == 8 and all(abs(w) <= 1.0 for row in rows for w in row)
    print(f"generated {truth!r}")

    initials = fcm.generate_initials(m=4, n=8, family="sigmoid", seed=2)
    clean = fcm.simulate(truth, "sigmoid", 2.0, initials, steps=30)
    assert (clean.m, clean.k, clean.n) == (4, 30, 8)
    noisy = fcm.add_noise(clean, sigma=0.01, seed=3)
    print(f"simulated {clean!r}, then perturbed it")

    learned = fcm.learn(noisy, "sigmoid", 2.0, alpha=0.01, beta=0.02)
    fit = fcm.data_error(noisy, learned, "sigmoid", 2.0)
    gap = fcm.model_error(truth, learned)
    structure = fcm.ss_mean(truth, learned)
    oos = fcm.out_of_sample_error(
        truth, learned, "sigmoid", 2.0,
        fcm.generate_initials(m=3, n=8, family="sigmoid", seed=9), steps=30,
    )
    print(f"learned: data error {fit:.5f}, model error {gap:.4f}, "
          f"ss mean {structure:.3f}, out-of-sample {oos:.4f}")
    assert fit < 0.01 and gap < 0.2

    tuned = fcm.random_search(noisy, "sigmoid", budget=20, seed=4)
    print(f"tuned: {tuned!r}")
    assert tuned.data_error <= fit + 1e-12
    assert tuned.weights.n == 8

    swarm = fcm.pso_learn(noisy, "sigmoid", 2.0, seed=5, population=10, iters=100)
    swarm_fit = fcm.data_error(noisy, swarm, "sigmoid", 2.0)
    print(f"swarm baseline: data error {swarm_fit:.5f}")
    assert tuned.data_error < swarm_fit

    with tempfile.TemporaryDirectory() as tmp:
        wpath = Path(tmp) / "weights.json"
        learned.save(wpath)
        reloaded = fcm.WeightMatrix.load(wpath)
        assert reloaded.to_rows() == learned.to_rows()

        dpath = Path(tmp) / "data.csv"
        noisy.save_csv(dpath)
        round_tripped = fcm.ResponseSet.load_csv(dpath)
        assert round_tripped.sequences() == noisy.sequences()
    print("save/load round trips are exact")

    try:
        fcm.learn(noisy, "sigmoid", -1.0)
    except ValueError as e:
        print(f"rejects bad steepness: {e}")
    else:
        raise AssertionError("negative steepness should raise ValueError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
