//! Label propagation over the undirected, weighted view of the graph.

use std::collections::BTreeMap;

use super::Relation;

pub const MAX_PROPAGATION_SWEEPS: usize = 100;

/// Undirected adjacency with summed weights over all relation types.
pub(crate) fn undirected_adjacency(
    entity_count: usize,
    relations: &[Relation],
) -> Vec<BTreeMap<u32, f64>> {
    let mut adj = vec![BTreeMap::new(); entity_count];
    for r in relations {
        *adj[r.src as usize].entry(r.dst).or_insert(0.0) += r.weight;
        *adj[r.dst as usize].entry(r.src).or_insert(0.0) += r.weight;
    }
    adj
}

/// Assigns every entity to a community.
///
/// Labels start as the entity id. Each sweep visits nodes in ascending id and
/// updates labels in place: a node adopts the neighbor label with the largest
/// total edge weight, ties going to the smallest label. Sweeps stop at a
/// fixpoint or after [`MAX_PROPAGATION_SWEEPS`]. Final community ids are
/// dense, numbered in order of each community's smallest member id.
pub fn detect_communities(entity_count: usize, relations: &[Relation]) -> BTreeMap<u32, u32> {
    let adj = undirected_adjacency(entity_count, relations);
    let mut labels: Vec<u32> = (0..entity_count as u32).collect();

    for _ in 0..MAX_PROPAGATION_SWEEPS {
        let mut changed = false;
        for node in 0..entity_count {
            let mut votes: BTreeMap<u32, f64> = BTreeMap::new();
            for (&nbr, &w) in &adj[node] {
                *votes.entry(labels[nbr as usize]).or_insert(0.0) += w;
            }
            // BTreeMap iterates labels ascending, so strict `>` keeps the smallest on ties.
            let mut best: Option<(u32, f64)> = None;
            for (label, w) in votes {
                if best.is_none_or(|(_, bw)| w > bw) {
                    best = Some((label, w));
                }
            }
            if let Some((label, _)) = best {
                if label != labels[node] {
                    labels[node] = label;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let mut dense: BTreeMap<u32, u32> = BTreeMap::new();
    let mut out = BTreeMap::new();
    for (node, &label) in labels.iter().enumerate() {
        let next = dense.len() as u32;
        let community = *dense.entry(label).or_insert(next);
        out.insert(node as u32, community);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kgraph::RelType;

    fn edge(src: u32, dst: u32, weight: f64) -> Relation {
        Relation {
            src,
            dst,
            rel_type: RelType::CoOccurs,
            weight,
            evidence: vec!["p#0".into()],
        }
    }

    fn count(c: &BTreeMap<u32, u32>) -> usize {
        let mut ids: Vec<u32> = c.values().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    #[test]
    fn two_disjoint_triangles() {
        let rels = vec![
            edge(0, 1, 1.0),
            edge(1, 2, 1.0),
            edge(0, 2, 1.0),
            edge(3, 4, 1.0),
            edge(4, 5, 1.0),
            edge(3, 5, 1.0),
        ];
        let c = detect_communities(6, &rels);
        assert_eq!(count(&c), 2);
        assert_eq!(c[&0], c[&2]);
        assert_ne!(c[&0], c[&3]);
        assert_eq!((c[&0], c[&3]), (0, 1));
    }

    #[test]
    fn isolated_node_is_its_own_community() {
        let c = detect_communities(1, &[]);
        assert_eq!(c[&0], 0);
    }

    #[test]
    fn weighted_path_by_hand() {
        // a=0, b=1, c=2; w(a,b)=5, w(b,c)=1
        // sweep 1: a adopts b's label 1; b sees {1: 5 (a), 2: 1 (c)} and keeps 1;
        //          c adopts 1. sweep 2 changes nothing.
        let c = detect_communities(3, &[edge(0, 1, 5.0), edge(1, 2, 1.0)]);
        assert_eq!(c[&1], c[&0]);
        assert_eq!(c.values().copied().collect::<Vec<_>>(), [0, 0, 0]);
    }

    #[test]
    fn heavier_neighbor_wins_a_contested_node() {
        // 0-1 heavy pair, 2-3 heavy pair, bridge 1-2 weak.
        let rels = vec![edge(0, 1, 10.0), edge(2, 3, 10.0), edge(1, 2, 0.5)];
        let c = detect_communities(4, &rels);
        assert_eq!(c[&0], c[&1]);
        assert_eq!(c[&2], c[&3]);
        assert_ne!(c[&1], c[&2]);
    }
}
