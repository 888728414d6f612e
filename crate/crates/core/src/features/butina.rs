use serde::{Deserialize, Serialize};

use super::{tanimoto_similarity, Fingerprint};

/// Cluster label per input plus the member lists. Cluster 0 is the first
/// centroid picked, i.e. the one with the most neighbours.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    pub assignment: Vec<usize>,
    pub clusters: Vec<Vec<usize>>,
}

/// Leader clustering: molecules are taken in order of decreasing neighbour
/// count (Tanimoto ≥ `threshold`, ties by index); each unassigned one opens a
/// cluster holding itself and its still-unassigned neighbours.
///
/// Fingerprints of different lengths are treated as dissimilar.
pub fn butina_cluster(fps: &[Fingerprint], threshold: f64) -> Clustering {
    let n = fps.len();
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if tanimoto_similarity(&fps[i], &fps[j]).is_ok_and(|s| s >= threshold) {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| neighbors[b].len().cmp(&neighbors[a].len()).then(a.cmp(&b)));
    let mut assignment = vec![usize::MAX; n];
    let mut clusters = Vec::new();
    for &c in &order {
        if assignment[c] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        let mut members = vec![c];
        assignment[c] = id;
        for &v in &neighbors[c] {
            if assignment[v] == usize::MAX {
                assignment[v] = id;
                members.push(v);
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    Clustering { assignment, clusters }
}
