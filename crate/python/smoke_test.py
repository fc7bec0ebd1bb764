"""Smoke test for the Python bindings.

Build the extension first, then run this script:

    cargo build -p inflacast-py --release
    python3 python/smoke_test.py
"""

import math
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def import_extension():
    built = ROOT / "target" / "release" / "libinflacast.so"
    if not built.exists():
        sys.exit("extension not built; run: cargo build -p inflacast-py --release")
    stage = pathlib.Path(tempfile.mkdtemp(prefix="inflacast-py-"))
    shutil.copy(built, stage / "inflacast.so")
    sys.path.insert(0, str(stage))
    import inflacast

    return inflacast


def main():
    inflacast = import_extension()

    assert inflacast.normalize("  Цены\tВЫРОСЛИ  ") == "цены выросли"

    # planted V-shape: minimum at index 2
    values = [1.0, 0.8, 0.3, 0.6, 0.9, 1.2, 0.7, 0.2, 0.5, 0.8]
    bps = inflacast.find_breakpoints("2020-01", values)
    assert bps[0] == (2, "2020-03", "min"), bps
    months = inflacast.label_months("2020-01", values)
    assert months[0] == ("2020-01", 0) and months[3] == ("2020-04", 1), months

    kept = inflacast.filter_group_ids(
        [("a", 2000, 400), ("b", 1999, 500), ("c", 2000, 399)]
    )
    assert kept == ["a"], kept

    labels = [i % 2 for i in range(200)]
    train, val, test = inflacast.split(labels, seed=7)
    assert sorted(train + val + test) == list(range(200))
    assert len(test) == 40 and len(val) == 40

    m = inflacast.metrics([1, 1, 0, 0], [1, 0, 0, 0])
    assert math.isclose(m["class1"]["recall"], 0.5)
    assert math.isclose(m["macro_f1"], (2 / 3 + 4 / 5) / 2)

    rise = ["цены выросли на хлеб", "рост цен на бензин", "цены снова выросли"]
    fall = ["цены упали на молоко", "спад цен на хлеб", "цены снова упали"]
    texts = rise * 10 + fall * 10
    y = [1] * 30 + [0] * 30

    model = inflacast.BaselineModel.fit("logreg", texts, y, seed=7)
    assert model.predict_proba("цены выросли") > 0.5
    assert model.predict_proba("цены упали") < 0.5
    tokens, phi, base, fx = model.explain("цены выросли")
    assert math.isclose(sum(phi), fx - base, abs_tol=1e-9)
    assert phi[tokens.index("выросли")] > 0

    enc = inflacast.Encoder.fit(
        texts, y, vocab_size=120, d_model=16, n_heads=2, n_layers=1,
        d_ff=32, epochs=20, learning_rate=3e-3, seed=7,
    )
    assert enc.predict_proba("цены выросли на хлеб") > 0.5
    assert enc.predict_proba("цены упали на молоко") < 0.5
    tokens, phi, base, fx = enc.explain("цены выросли")
    assert math.isclose(sum(phi), fx - base, abs_tol=1e-9)

    print("python bindings smoke test: OK")


if __name__ == "__main__":
    main()
