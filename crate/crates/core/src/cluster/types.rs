//! Mapping clusters to dislocation types from their shape statistics.

use serde::{Deserialize, Serialize};

use super::hdbscan::ClusterLabeling;
use crate::defect::DislocationType;
use crate::error::{Error, Result};

/// Two clusters' mean areas closer than this fraction of the larger are not ordered.
pub const AREA_TIE: f64 = 0.05;
/// A lone cluster is only called BPD above this mean lengthiness.
pub const LONE_BPD_LENGTHINESS: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub cluster: usize,
    pub population: usize,
    pub mean_lengthiness: f64,
    pub mean_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeAssignment {
    /// Indexed by cluster id.
    pub types: Vec<Option<DislocationType>>,
    pub stats: Vec<ClusterStats>,
    pub unassigned_types: Vec<DislocationType>,
    pub warnings: Vec<String>,
}

impl TypeAssignment {
    pub fn type_of(&self, cluster: i64) -> Option<DislocationType> {
        usize::try_from(cluster).ok().and_then(|c| self.types.get(c).copied().flatten())
    }

    pub fn cluster_of(&self, t: DislocationType) -> Option<usize> {
        self.types.iter().position(|&x| x == Some(t))
    }
}

/// Per-cluster means of the given per-point descriptors.
pub fn cluster_stats(labeling: &ClusterLabeling, lengthiness: &[f64], areas: &[f64]) -> Result<Vec<ClusterStats>> {
    let n = labeling.labels.len();
    if lengthiness.len() != n || areas.len() != n {
        return Err(Error::InvalidInput(format!(
            "{n} labels but {} lengthiness and {} area values",
            lengthiness.len(),
            areas.len()
        )));
    }
    Ok((0..labeling.n_clusters)
        .map(|c| {
            let m = labeling.members(c);
            let k = m.len().max(1) as f64;
            ClusterStats {
                cluster: c,
                population: m.len(),
                mean_lengthiness: m.iter().map(|&i| lengthiness[i]).sum::<f64>() / k,
                mean_area: m.iter().map(|&i| areas[i]).sum::<f64>() / k,
            }
        })
        .collect())
}

fn order_round(a: &ClusterStats, b: &ClusterStats, types: &mut [Option<DislocationType>], warnings: &mut Vec<String>) {
    let hi = a.mean_area.max(b.mean_area);
    if (a.mean_area - b.mean_area).abs() <= AREA_TIE * hi {
        warnings.push(format!(
            "clusters {} and {} have mean areas within {}% ({:.1} vs {:.1}); TED/TSD left unassigned",
            a.cluster,
            b.cluster,
            AREA_TIE * 100.0,
            a.mean_area,
            b.mean_area
        ));
        return;
    }
    let (small, large) = if a.mean_area < b.mean_area { (a, b) } else { (b, a) };
    types[small.cluster] = Some(DislocationType::Ted);
    types[large.cluster] = Some(DislocationType::Tsd);
}

/// Highest mean lengthiness among the three most populous clusters is BPD;
/// of the other two, the larger mean area is TSD and the smaller TED.
pub fn assign_types(labeling: &ClusterLabeling, lengthiness: &[f64], areas: &[f64]) -> Result<TypeAssignment> {
    let stats = cluster_stats(labeling, lengthiness, areas)?;
    let mut types = vec![None; stats.len()];
    let mut warnings = Vec::new();
    let mut ranked: Vec<&ClusterStats> = stats.iter().collect();
    ranked.sort_by(|a, b| b.population.cmp(&a.population).then(a.cluster.cmp(&b.cluster)));
    for extra in ranked.iter().skip(3) {
        warnings.push(format!(
            "cluster {} ({} members) is beyond the three largest and stays unassigned",
            extra.cluster, extra.population
        ));
    }
    let top: Vec<&ClusterStats> = ranked.into_iter().take(3).collect();
    let by_length = |s: &[&ClusterStats]| -> usize {
        (0..s.len())
            .max_by(|&i, &j| {
                s[i].mean_lengthiness
                    .total_cmp(&s[j].mean_lengthiness)
                    .then(s[j].cluster.cmp(&s[i].cluster))
            })
            .unwrap()
    };
    match top.len() {
        0 => warnings.push("no clusters to assign".into()),
        1 => {
            if top[0].mean_lengthiness > LONE_BPD_LENGTHINESS {
                types[top[0].cluster] = Some(DislocationType::Bpd);
            } else {
                warnings.push("single round cluster left unassigned".into());
            }
        }
        2 => {
            let b = by_length(&top);
            if top[b].mean_lengthiness > LONE_BPD_LENGTHINESS {
                types[top[b].cluster] = Some(DislocationType::Bpd);
                warnings.push(format!("only two clusters; cluster {} left unassigned", top[1 - b].cluster));
            } else {
                order_round(top[0], top[1], &mut types, &mut warnings);
            }
        }
        _ => {
            let b = by_length(&top);
            types[top[b].cluster] = Some(DislocationType::Bpd);
            let rest: Vec<&ClusterStats> = (0..3).filter(|&i| i != b).map(|i| top[i]).collect();
            order_round(rest[0], rest[1], &mut types, &mut warnings);
        }
    }
    let unassigned_types = DislocationType::ALL
        .iter()
        .copied()
        .filter(|t| !types.contains(&Some(*t)))
        .collect();
    Ok(TypeAssignment {
        types,
        stats,
        unassigned_types,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labeling(sizes: &[usize]) -> ClusterLabeling {
        let labels: Vec<i64> = sizes.iter().enumerate().flat_map(|(c, &s)| vec![c as i64; s]).collect();
        ClusterLabeling {
            strengths: vec![1.0; labels.len()],
            labels,
            n_clusters: sizes.len(),
            warnings: vec![],
        }
    }

    fn per_point(sizes: &[usize], vals: &[f64]) -> Vec<f64> {
        sizes.iter().zip(vals).flat_map(|(&s, &v)| vec![v; s]).collect()
    }

    #[test]
    fn stated_means_map_to_bpd_ted_tsd() {
        let sizes = [10, 10, 10];
        let l = labeling(&sizes);
        let a = assign_types(&l, &per_point(&sizes, &[2.5, 1.1, 1.05]), &per_point(&sizes, &[400.0, 150.0, 600.0])).unwrap();
        assert_eq!(a.types, vec![Some(DislocationType::Bpd), Some(DislocationType::Ted), Some(DislocationType::Tsd)]);
        assert!(a.unassigned_types.is_empty());
    }

    #[test]
    fn lone_cluster_rule() {
        let l = labeling(&[8]);
        let a = assign_types(&l, &[2.0; 8], &[100.0; 8]).unwrap();
        assert_eq!(a.types, vec![Some(DislocationType::Bpd)]);
        let a = assign_types(&l, &[1.2; 8], &[100.0; 8]).unwrap();
        assert_eq!(a.types, vec![None]);
        assert_eq!(a.unassigned_types.len(), 3);
    }

    #[test]
    fn area_tie_left_unassigned() {
        let sizes = [5, 5, 5];
        let l = labeling(&sizes);
        let a = assign_types(&l, &per_point(&sizes, &[2.5, 1.1, 1.05]), &per_point(&sizes, &[400.0, 300.0, 310.0])).unwrap();
        assert_eq!(a.types, vec![Some(DislocationType::Bpd), None, None]);
        assert_eq!(a.warnings.len(), 1);
        assert_eq!(a.unassigned_types, vec![DislocationType::Ted, DislocationType::Tsd]);
    }

    #[test]
    fn extra_clusters_flagged() {
        let sizes = [10, 9, 8, 2];
        let l = labeling(&sizes);
        let a = assign_types(&l, &per_point(&sizes, &[1.0, 2.2, 1.1, 3.0]), &per_point(&sizes, &[500.0, 300.0, 100.0, 50.0])).unwrap();
        assert_eq!(a.types[1], Some(DislocationType::Bpd));
        assert_eq!(a.types[0], Some(DislocationType::Tsd));
        assert_eq!(a.types[2], Some(DislocationType::Ted));
        assert_eq!(a.types[3], None);
        assert!(!a.warnings.is_empty());
    }
}
