"""Rebuild the bundled benchmark CSVs under crates/core/data/.

Sources are the UCI tables shipped inside PyPI packages, so no network access
to the UCI archive is needed:

  iris, wine, wdbc      scikit-learn (load_iris / load_wine / load_breast_cancer)
  ionosphere            Orange3 wheel, Orange/tests/datasets/ionosphere.tab
  breastw               keel-ds wheel, data/balanced/raw/wisconsin.dat
  hepatitis             imbalanced-databases wheel, data/hepatitis/hepatitis.data.txt

Construction follows the usual outlier-benchmark recipe: one class is kept
whole as inliers and the outlier class is randomly downsampled.

The published comparison table was computed on one particular random
subsample per dataset, which is not distributed with it. The downsampling
seed is therefore chosen by `--calibrate`: among seeds 0..199 it keeps the
subsample whose AUROCs for five standard baselines (kNN, GMM, isolation
forest, one-class SVM, LOF, with the published hyperparameters) are closest
in squared error to the published baseline AUROCs. The detector implemented
in this repository plays no part in the choice. Without `--calibrate` the
seeds recorded in SEEDS are used.

  iris    setosa+versicolor inliers (100), virginica downsampled to 11
  wine    classes 2,3 inliers (119), class 1 downsampled to 10
  wdbc    benign inliers (357), malignant downsampled to 39
  iono    good inliers (225), bad downsampled to 24
  breastw benign (444) + malignant (239), rows with missing values removed
  hepat   complete rows only (80), DIE is the outlier class (13)

Usage: python tools/prepare_datasets.py [--calibrate] <dir-with-wheels> [out-dir]
"""
import glob
import io
import os
import sys
import zipfile

import numpy as np
from sklearn import datasets as skd


# name -> (published AUROC of kNN, GMM, IF, OCSVM, LOF; kNN k, IF trees,
#          OCSVM kernel, LOF neighbours)
PUBLISHED = {
    "iris": ((0.9900, 0.9455, 0.9795, 1.0000, 0.9982), (5, 50, "rbf", 50)),
    "wine": ((0.9261, 0.6496, 0.8024, 0.6941, 0.9202), (20, 100, "rbf", 50)),
    "wdbc": ((0.9813, 0.9603, 0.9886, 0.9935, 0.9517), (20, 100, "rbf", 50)),
    "iono": ((1.0000, 1.0000, 1.0000, 0.9991, 0.9911), (3, 100, "rbf", 5)),
}

# Seeds selected by --calibrate.
SEEDS = {"iris": 25, "wine": 18, "wdbc": 182, "iono": 121}

CALIBRATION_SEEDS = range(200)


def baseline_aurocs(x, y, params):
    from sklearn.ensemble import IsolationForest
    from sklearn.metrics import roc_auc_score
    from sklearn.mixture import GaussianMixture
    from sklearn.neighbors import LocalOutlierFactor, NearestNeighbors
    from sklearn.preprocessing import MinMaxScaler
    from sklearn.svm import OneClassSVM

    k, trees, kernel, lof_k = params
    x = MinMaxScaler().fit_transform(x)
    d, _ = NearestNeighbors(n_neighbors=k + 1).fit(x).kneighbors(x)
    knn = d[:, -1]
    gmm = -GaussianMixture(n_components=1, random_state=0).fit(x).score_samples(x)
    iso = -IsolationForest(n_estimators=trees, random_state=0).fit(x).score_samples(x)
    svm = -OneClassSVM(kernel=kernel, nu=0.5, gamma="auto").fit(x).decision_function(x)
    lof = LocalOutlierFactor(n_neighbors=min(lof_k, len(x) - 1)).fit(x)
    lof = -lof.negative_outlier_factor_
    return [roc_auc_score(y, s) for s in (knn, gmm, iso, svm, lof)]


def calibrated_seed(name, x, outlier_mask, keep):
    target, params = PUBLISHED[name]
    best = None
    for seed in CALIBRATION_SEEDS:
        xs, ys = downsample(x, None, outlier_mask, keep, seed)
        got = baseline_aurocs(xs, ys, params)
        err = sum((g - t) ** 2 for g, t in zip(got, target))
        if best is None or err < best[0]:
            best = (err, seed, got)
    err, seed, got = best
    print(f"{name}: seed {seed}, squared error {err:.5f}, baselines "
          + " ".join(f"{g:.4f}" for g in got), file=sys.stderr)
    return seed


def pick(name, x, outlier_mask, keep, calibrate):
    seed = calibrated_seed(name, x, outlier_mask, keep) if calibrate else SEEDS[name]
    return downsample(x, None, outlier_mask, keep, seed)


def downsample(x, y, outlier_mask, keep, seed=0):
    rng = np.random.default_rng(seed)
    out_idx = np.flatnonzero(outlier_mask)
    chosen = np.sort(rng.choice(out_idx, size=keep, replace=False))
    idx = np.concatenate([np.flatnonzero(~outlier_mask), chosen])
    return x[idx], outlier_mask[idx].astype(int)


def write(out_dir, name, header, rows, labels, kinds):
    with open(os.path.join(out_dir, name + ".csv"), "w") as f:
        f.write(",".join(header + ["label"]) + "\n")
        for r, l in zip(rows, labels):
            f.write(",".join(fmt(v) for v in r) + f",{l}\n")
    with open(os.path.join(out_dir, name + ".schema"), "w") as f:
        for h, k in zip(header, kinds):
            f.write(f"{h}: {k}\n")
        f.write("label: label\n")


def fmt(v):
    if isinstance(v, str):
        return v
    return repr(float(v)) if not float(v).is_integer() else str(int(v))


def wheel_member(wheel_dir, pattern, suffix):
    (path,) = glob.glob(os.path.join(wheel_dir, pattern))
    z = zipfile.ZipFile(path)
    (member,) = [n for n in z.namelist() if n.endswith(suffix)]
    return z.read(member).decode()


def main():
    args = sys.argv[1:]
    calibrate = "--calibrate" in args
    args = [a for a in args if a != "--calibrate"]
    wheel_dir = args[0]
    out_dir = args[1] if len(args) > 1 else "crates/core/data"

    b = skd.load_iris()
    x, y = pick("iris", b.data, b.target == 2, 11, calibrate)
    hdr = ["sepal_length", "sepal_width", "petal_length", "petal_width"]
    write(out_dir, "iris", hdr, x, y, ["numerical"] * 4)

    b = skd.load_wine()
    x, y = pick("wine", b.data, b.target == 0, 10, calibrate)
    hdr = [f"f{i + 1}" for i in range(13)]
    write(out_dir, "wine", hdr, x, y, ["numerical"] * 13)

    b = skd.load_breast_cancer()
    x, y = pick("wdbc", b.data, b.target == 0, 39, calibrate)
    hdr = [f"f{i + 1}" for i in range(30)]
    write(out_dir, "wdbc", hdr, x, y, ["numerical"] * 30)

    text = wheel_member(wheel_dir, "orange3-*.whl", "ionosphere.tab")
    lines = text.splitlines()[3:]
    cells = [l.split("\t") for l in lines if l.strip()]
    x = np.array([[float(c) for c in r[:34]] for r in cells])
    bad = np.array([r[34].strip() == "b" for r in cells])
    x, y = pick("iono", x, bad, 24, calibrate)
    hdr = [f"a{i + 1}" for i in range(34)]
    write(out_dir, "iono", hdr, x, y, ["numerical"] * 34)

    text = wheel_member(wheel_dir, "keel_ds-*.whl", "data/balanced/raw/wisconsin.dat")
    rows = [l.split(",") for l in text.splitlines() if l and not l.startswith("@")]
    x = np.array([[float(c) for c in r[:9]] for r in rows])
    y = np.array([1 if r[9].strip() in ("positive", "4") else 0 for r in rows])
    hdr = ["clump", "cell_size", "cell_shape", "adhesion", "epithelial",
           "bare_nuclei", "chromatin", "nucleoli", "mitoses"]
    write(out_dir, "breastw", hdr, x, y, ["numerical"] * 9)

    text = wheel_member(wheel_dir, "imbalanced_databases-*.whl", "hepatitis.data.txt")
    rows = [l.split(",") for l in text.splitlines() if l and "?" not in l]
    hdr = ["age", "sex", "steroid", "antivirals", "fatigue", "malaise",
           "anorexia", "liver_big", "liver_firm", "spleen_palpable", "spiders",
           "ascites", "varices", "bilirubin", "alk_phosphate", "sgot",
           "albumin", "protime", "histology"]
    numeric = {"age", "bilirubin", "alk_phosphate", "sgot", "albumin", "protime"}
    kinds = ["numerical" if h in numeric else "nominal" for h in hdr]
    x = [[float(c) if h in numeric else c.strip() for h, c in zip(hdr, r[1:])] for r in rows]
    y = [1 if r[0].strip() == "1" else 0 for r in rows]
    write(out_dir, "hepat", hdr, x, y, kinds)


if __name__ == "__main__":
    main()
