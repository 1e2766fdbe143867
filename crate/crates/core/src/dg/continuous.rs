//! Facet averaging: replaces nodal values that coincide in space-time by their mean.

use std::collections::HashMap;

use super::DgSpace;

/// Groups of DG node indices (within one component block) sharing a physical location.
pub fn coincident_nodes(space: &DgSpace) -> Vec<Vec<usize>> {
    let mesh = &space.mesh;
    let (hx, ht) = mesh.cell_size();
    let scale = [mesh.p as f64 / hx, mesh.p as f64 / ht];
    let mut groups: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (j, x) in mesh.nodes.iter().enumerate() {
        let key = ((x[0] * scale[0]).round() as i64, (x[1] * scale[1]).round() as i64);
        groups.entry(key).or_default().push(j);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

pub fn to_continuous(space: &DgSpace, u: &[f64]) -> Vec<f64> {
    let groups = coincident_nodes(space);
    let block = space.n_local() * space.n_elements();
    let mut out = u.to_vec();
    for d in 0..space.n_comp {
        let off = d * block;
        for g in &groups {
            let mean = g.iter().map(|&j| u[off + j]).sum::<f64>() / g.len() as f64;
            for &j in g {
                out[off + j] = mean;
            }
        }
    }
    out
}
