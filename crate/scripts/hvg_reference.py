"""Reference binned-dispersion HVG selection, used to freeze test fixtures.

Writes a synthetic counts matrix (dense CSV, cells x genes) and the expected
ranking (gene, bin, z-score) for the top genes.
"""

import argparse

import numpy as np


def make_matrix(seed, n_cells, n_genes):
    rng = np.random.default_rng(seed)
    means = rng.lognormal(mean=1.0, sigma=1.0, size=n_genes)
    overdispersion = rng.uniform(0.05, 2.0, size=n_genes)
    p = 1.0 / (1.0 + means * overdispersion)
    counts = rng.negative_binomial(1.0 / overdispersion, p, size=(n_cells, n_genes)).astype(float)
    counts[:, :3] = 4.0  # constant genes
    counts[:, 3] = 0.0   # silent gene
    genes = [f"GENE{j:03d}" for j in range(n_genes)]
    cells = [f"cell{i:02d}" for i in range(n_cells)]
    return cells, genes, counts


def select(genes, counts, n_top, n_bins=20):
    mean = counts.mean(axis=0)
    var = counts.var(axis=0, ddof=1)
    keep = np.flatnonzero(var > 0)
    order = sorted(keep, key=lambda j: (mean[j], genes[j]))
    m = len(order)
    bins = min(n_bins, m)
    rows = []
    for b in range(bins):
        members = [j for r, j in enumerate(order) if r * bins // m == b]
        disp = np.array([var[j] / mean[j] for j in members])
        sd = disp.std(ddof=1) if len(disp) > 1 else 0.0
        mu = disp.mean()
        for j, d in zip(members, disp):
            rows.append((genes[j], b, (d - mu) / sd if sd > 0 else 0.0))
    rows.sort(key=lambda r: (-r[2], r[0]))
    return rows[:n_top]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--matrix", required=True)
    ap.add_argument("--expected", required=True)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--cells", type=int, default=40)
    ap.add_argument("--genes", type=int, default=100)
    ap.add_argument("--top", type=int, default=25)
    args = ap.parse_args()

    cells, genes, counts = make_matrix(args.seed, args.cells, args.genes)
    with open(args.matrix, "w") as f:
        f.write("cell_id," + ",".join(genes) + "\n")
        for c, row in zip(cells, counts):
            f.write(c + "," + ",".join(str(int(v)) for v in row) + "\n")
    with open(args.expected, "w") as f:
        for gene, b, z in select(genes, counts, args.top):
            f.write(f"{gene}\t{b}\t{float(z)!r}\n")


if __name__ == "__main__":
    main()
