#!/usr/bin/env python3
"""End-to-end smoke test for the dynsurr_py extension module.

Builds the cdylib with cargo if needed, puts it on the import path under the
module name, then exercises dataset generation, normalization, the exact
solver, and the model build / train / save / load / prune cycle.
"""

import math
import os
import shutil
import subprocess
import sys
import tempfile

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build_and_import():
    lib = os.path.join(REPO, "target", "debug", "libdynsurr_py.so")
    if not os.path.exists(lib):
        subprocess.run(
            ["cargo", "build", "-p", "dynsurr-py"], cwd=REPO, check=True
        )
    stage = tempfile.mkdtemp(prefix="dynsurr_py_")
    shutil.copy(lib, os.path.join(stage, "dynsurr_py.so"))
    sys.path.insert(0, stage)
    import dynsurr_py

    return dynsurr_py


def check(name, ok, detail=""):
    status = "ok" if ok else "FAIL"
    print(f"  [{status}] {name}" + (f" ({detail})" if detail else ""))
    if not ok:
        sys.exit(1)


def main():
    m = build_and_import()
    print("smoke test: dynsurr_py")

    # Dataset generation is deterministic in the seed.
    x, y = m.generate_dataset(1, "displacement", "train", 42, 64)
    x2, _ = m.generate_dataset(1, "displacement", "train", 42, 64)
    check("dataset shape", len(x) == 64 and len(x[0]) == 101 and len(y[0]) == 101)
    check("dataset deterministic", x == x2)

    # Normalization round trip.
    mean, var = m.column_stats(x)
    xn = m.normalize(x, mean, var)
    xb = m.normalize(xn, mean, var, inverse=True)
    worst = max(
        abs(a - b) for row_a, row_b in zip(x, xb) for a, b in zip(row_a, row_b)
    )
    check("normalization round trip", worst < 1e-9, f"max abs err {worst:.2e}")

    # The exact solver at a resonant-ish single-term load returns a bounded,
    # nonzero steady response.
    disp, acc = m.solve_load(1, "displacement", [150.0], [20.0], [0.5])
    check(
        "solver output",
        len(disp) == 101 and max(abs(v) for v in disp) > 0.0 and all(math.isfinite(v) for v in disp + acc),
    )

    # Model build, short training run, and the save/load round trip.
    ymean, yvar = m.column_stats(y)
    yn = m.normalize(y, ymean, yvar)
    model = m.Surrogate.conv_dense(101, 0, 1, 1, seed=3)
    trainable, total = model.param_count()
    check("dense param count", trainable == 10302, f"{trainable}")

    tr, va = model.fit(
        xn[:48], yn[:48], xn[48:], yn[48:], epochs=5, batch_size=16, seed=3
    )
    check(
        "training history",
        len(tr) == 5 and len(va) == 5 and all(math.isfinite(v) for v in tr + va),
        f"final train loss {tr[-1]:.4f}",
    )

    pred = model.forward(xn[:4])
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.nck")
        model.save(path)
        clone = m.Surrogate.load(path)
        pred2 = clone.forward(xn[:4])
    check("save/load round trip", pred == pred2)

    threshold, nnz, lower_frac, band = model.analyze_sparsity(0.05)
    check(
        "sparsity analysis",
        threshold > 0.0 and 0 < nnz <= 101 * 101 and 0.0 <= lower_frac <= 1.0,
        f"nnz {nnz}, lower fraction {lower_frac:.3f}",
    )

    # Masked template plus a growth step keeps the loss finite and the
    # parameter count at the closed-form value.
    sp = m.Surrogate.sparse(101, 1, 8, "lower", seed=5)
    tr2, _ = sp.grow(
        xn[:48], yn[:48], xn[48:], yn[48:],
        n_c=8, phase1_epochs=2, phase2_epochs=2, batch_size=16, seed=5,
    )
    check(
        "growth step",
        len(tr2) == 4 and all(math.isfinite(v) for v in tr2),
        f"final loss {tr2[-1]:.4f}",
    )

    print("smoke test passed")


if __name__ == "__main__":
    main()
