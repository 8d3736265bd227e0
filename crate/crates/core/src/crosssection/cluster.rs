use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::facts::{FactColumn, StylizedFactsRow};
use crate::stats;

#[derive(Debug, Clone, PartialEq)]
pub struct FactsDistanceMatrix {
    pub labels: Vec<String>,
    pub matrix: DMatrix<f64>,
    /// dendrogram leaf order of a full complete-linkage tree
    pub linkage_order: Vec<usize>,
    pub columns: Vec<FactColumn>,
    /// constant columns that were left out
    pub dropped_columns: Vec<FactColumn>,
    /// (row label, column) cells that were absent and imputed at the column mean
    pub imputed: Vec<(String, FactColumn)>,
}

impl FactsDistanceMatrix {
    /// Wraps a precomputed distance matrix, checking symmetry, a zero
    /// diagonal and nonnegative entries.
    pub fn from_matrix(labels: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        let n = labels.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "{n} labels for a {}x{} matrix",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        for i in 0..n {
            if matrix[(i, i)] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
                if !(a >= 0.0) || (a - b).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "entry ({i}, {j}) is negative or asymmetric"
                    )));
                }
            }
        }
        let mut d = Self {
            labels,
            matrix,
            linkage_order: Vec::new(),
            columns: Vec::new(),
            dropped_columns: Vec::new(),
            imputed: Vec::new(),
        };
        if n > 0 {
            d.linkage_order = complete_linkage(&d).1;
        }
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Z-scores the selected columns across rows and takes Euclidean distances
/// between the row vectors.
pub fn stylized_distance_matrix(rows: &[StylizedFactsRow], columns: &[FactColumn]) -> Result<FactsDistanceMatrix> {
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "clustering needs at least 3 rows, got {}",
            rows.len()
        )));
    }
    if columns.is_empty() {
        return Err(Error::InvalidInput("no columns selected".into()));
    }
    let n = rows.len();
    let mut used = Vec::new();
    let mut dropped = Vec::new();
    let mut imputed = Vec::new();
    let mut z_cols: Vec<Vec<f64>> = Vec::new();
    for &col in columns {
        let cells: Vec<Option<f64>> = rows.iter().map(|r| col.get(r).value()).collect();
        let present: Vec<f64> = cells.iter().flatten().copied().collect();
        if present.len() < 2 {
            dropped.push(col);
            continue;
        }
        let mu = stats::mean(&present);
        let sd = stats::sample_std(&present);
        if !(sd > 0.0) {
            log::warn!("dropping constant column {}", col.name());
            dropped.push(col);
            continue;
        }
        let mut z = Vec::with_capacity(n);
        for (r, c) in rows.iter().zip(&cells) {
            match c {
                Some(v) => z.push((v - mu) / sd),
                None => {
                    imputed.push((r.asset_id.clone(), col));
                    z.push(0.0);
                }
            }
        }
        used.push(col);
        z_cols.push(z);
    }
    if used.is_empty() {
        return Err(Error::Degenerate("every selected column is constant".into()));
    }
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..i {
            let d = z_cols
                .iter()
                .map(|z| (z[i] - z[j]).powi(2))
                .sum::<f64>()
                .sqrt();
            m[(i, j)] = d;
            m[(j, i)] = d;
        }
    }
    let labels = rows.iter().map(|r| r.asset_id.clone()).collect();
    let mut out = FactsDistanceMatrix::from_matrix(labels, m)?;
    out.columns = used;
    out.dropped_columns = dropped;
    out.imputed = imputed;
    Ok(out)
}

/// One agglomeration step. Leaves are `0..n`; the cluster formed at step
/// `i` has id `n + i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub merges: Vec<Merge>,
    pub leaf_order: Vec<usize>,
    /// flat cluster per leaf, numbered by first appearance in input order
    pub labels: Vec<usize>,
    pub n_clusters: usize,
}

struct Node {
    id: usize,
    members: Vec<usize>,
    /// smallest member label, used for tie-breaks and child ordering
    key: String,
}

fn complete_linkage(dist: &FactsDistanceMatrix) -> (Vec<Merge>, Vec<usize>) {
    let n = dist.len();
    let d = &dist.matrix;
    let mut active: Vec<Node> = (0..n)
        .map(|i| Node {
            id: i,
            members: vec![i],
            key: dist.labels[i].clone(),
        })
        .collect();
    // inter-cluster distance between active slots, updated by the max rule
    let mut cd: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| d[(i, j)]).collect()).collect();
    let mut children: Vec<(usize, usize)> = Vec::new();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    while active.len() > 1 {
        let mut best: Option<(f64, &str, &str, usize, usize)> = None;
        for a in 0..active.len() {
            for b in a + 1..active.len() {
                let h = cd[a][b];
                let (ka, kb) = if active[a].key <= active[b].key {
                    (active[a].key.as_str(), active[b].key.as_str())
                } else {
                    (active[b].key.as_str(), active[a].key.as_str())
                };
                let better = match best {
                    None => true,
                    Some((bh, bka, bkb, _, _)) => h < bh || (h == bh && (ka, kb) < (bka, bkb)),
                };
                if better {
                    best = Some((h, ka, kb, a, b));
                }
            }
        }
        let (h, _, _, a, b) = best.expect("at least two active clusters");
        // smaller key goes left
        let (l, r) = if active[a].key <= active[b].key { (a, b) } else { (b, a) };
        let new_id = n + merges.len();
        merges.push(Merge {
            left: active[l].id,
            right: active[r].id,
            height: h,
            size: active[a].members.len() + active[b].members.len(),
        });
        children.push((active[l].id, active[r].id));
        let row: Vec<f64> = (0..active.len()).map(|k| cd[a][k].max(cd[b][k])).collect();
        // slot `a` becomes the merged cluster, slot `b` is removed
        let mut members = std::mem::take(&mut active[a].members);
        members.extend(active[b].members.iter().copied());
        let key = active[a].key.clone().min(active[b].key.clone());
        active[a] = Node {
            id: new_id,
            members,
            key,
        };
        for k in 0..active.len() {
            cd[a][k] = row[k];
            cd[k][a] = row[k];
        }
        cd[a][a] = 0.0;
        active.remove(b);
        cd.remove(b);
        for r in cd.iter_mut() {
            r.remove(b);
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![active[0].id];
    while let Some(id) = stack.pop() {
        if id < n {
            order.push(id);
        } else {
            let (l, r) = children[id - n];
            stack.push(r);
            stack.push(l);
        }
    }
    (merges, order)
}

/// Complete-linkage agglomerative clustering cut into `n_clusters` groups.
/// Equal merge heights are resolved by the lexicographically smallest pair of
/// cluster labels.
pub fn hierarchical_cluster(dist: &FactsDistanceMatrix, n_clusters: usize) -> Result<Clustering> {
    let n = dist.len();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::InvalidInput(format!(
            "n_clusters must be in [1, {n}], got {n_clusters}"
        )));
    }
    let (merges, leaf_order) = complete_linkage(dist);
    // union the first n - k merges
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    for (i, m) in merges.iter().take(n - n_clusters).enumerate() {
        let id = n + i;
        let (a, b) = (find(&mut parent, m.left), find(&mut parent, m.right));
        parent[a] = id;
        parent[b] = id;
    }
    let mut roots: Vec<usize> = Vec::new();
    let labels = (0..n)
        .map(|leaf| {
            let r = find(&mut parent, leaf);
            match roots.iter().position(|x| *x == r) {
                Some(p) => p,
                None => {
                    roots.push(r);
                    roots.len() - 1
                }
            }
        })
        .collect();
    Ok(Clustering {
        merges,
        leaf_order,
        labels,
        n_clusters,
    })
}
