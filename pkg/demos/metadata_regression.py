from pathlib import Path

import numpy as np

from graphmeta.msglasso import (
    MetadataTable,
    read_named_csv,
    regularization_path,
    salient_report,
    standardize,
    support_f1,
)

rng = np.random.default_rng(0)

# 40 datasets, 15 properties, 5 models.  Only rows 2, 7 and 11 of the
# true coefficient matrix are non-zero.
X = rng.standard_normal((40, 15))
B = np.zeros((15, 5))
B[[2, 7, 11]] = rng.uniform(0.5, 1.5, size=(3, 5)) * rng.choice([-1, 1], size=(3, 5))
Y = X @ B + 0.05 * rng.standard_normal((40, 5))

# Both sides are centred and scaled before fitting
table, scaling = standardize(MetadataTable(X, Y))

# Walk the path from the all-zero solution downwards; warm starts make
# each step cheap.  The group penalty weight equals the l1 weight here.
path = regularization_path(table, ratio=1.0, k=15)
for cm in path:
    print(f"lambda1 {cm.lambda1:.4f}  support {list(cm.support)}  "
          f"F1 {support_f1(cm.support, [2, 7, 11]):.2f}  iterations {cm.iterations}")

# Rows that are non-zero for every response are "widely" influential,
# rows non-zero for more than half of them are "narrowly" influential
chosen = next(cm for cm in path if support_f1(cm.support, [2, 7, 11]) == 1.0)
for f in salient_report(chosen):
    if f.category != "none":
        print(f.name, f.category, f.signs)

# The same report on a published coefficient table shipped with the tests
fixture = Path(__file__).resolve().parents[1] / "tests" / "data" / "published_coefficients.csv"
if fixture.exists():
    rows, cols, coef = read_named_csv(fixture)
    for f in salient_report(coef, rows, cols):
        if f.category != "none":
            print(f"{f.name:>24}: {f.category:<8} {f.sign}")
