//! Workload generators: the three-relation synthetic join family with a
//! controlled result cardinality, and random directed graphs for clique
//! queries.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::storage::{load_delimited, Column, Table};

/// Parameters of the synthetic R/S/T instance.
///
/// `R = {1..n}`, `S = {1..(n+r)/2}`, `T = {(n-r)/2+1..n}`, every value
/// duplicated `d` times, all single-column. S and T overlap in exactly `r`
/// values, so the natural join has `r` distinct values and `r * d^3` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticParams {
    /// Base domain size.
    pub n: u64,
    /// Overlap between S and T; controls the output scale.
    pub r: u64,
    /// Duplication factor; controls the duplicate blow-up.
    pub d: u64,
    /// Recorded for provenance; the construction itself is deterministic.
    pub seed: u64,
}

impl SyntheticParams {
    pub fn check(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Param("N must be positive".into()));
        }
        if self.r > self.n {
            return Err(Error::Param(format!(
                "overlap r = {} exceeds domain size N = {}",
                self.r, self.n
            )));
        }
        if (self.n + self.r) % 2 != 0 {
            return Err(Error::Param(format!(
                "N + r and N - r must be even; got N = {}, r = {}",
                self.n, self.r
            )));
        }
        if self.d == 0 {
            return Err(Error::Param("duplication factor d must be at least 1".into()));
        }
        Ok(())
    }

    /// Exact cardinality of the natural three-way join.
    pub fn expected_join_cardinality(&self) -> u64 {
        self.r * self.d * self.d * self.d
    }
}

fn range_table(name: &str, lo: u64, hi: u64, d: u64) -> Table {
    // Duplicates laid out contiguously, value-major.
    let mut values = Vec::with_capacity(((hi + 1 - lo) * d) as usize);
    for v in lo..=hi {
        for _ in 0..d {
            values.push(v as i64);
        }
    }
    Table::from_columns(
        name,
        vec![Column {
            name: "a".into(),
            values,
        }],
    )
    .expect("single column cannot mismatch")
}

/// Generates the (R, S, T) tables. T starts one past the midpoint so the
/// S/T overlap is exactly `r` values.
pub fn gen_synthetic(params: &SyntheticParams) -> Result<(Table, Table, Table)> {
    params.check()?;
    let SyntheticParams { n, r, d, .. } = *params;
    let r_table = range_table("R", 1, n, d);
    let s_table = range_table("S", 1, (n + r) / 2, d);
    let t_table = range_table("T", (n - r) / 2 + 1, n, d);
    Ok((r_table, s_table, t_table))
}

/// Uniformly samples `edges` distinct directed edges (no self-loops) over
/// `nodes` vertices. Deterministic per seed.
pub fn gen_random_graph(nodes: u64, edges: u64, seed: u64) -> Result<Table> {
    let max_edges = nodes.saturating_mul(nodes.saturating_sub(1));
    if edges > max_edges {
        return Err(Error::Param(format!(
            "{edges} edges infeasible for {nodes} nodes (max {max_edges})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut src = Vec::with_capacity(edges as usize);
    let mut dst = Vec::with_capacity(edges as usize);

    if max_edges <= 4_000_000 {
        // Partial Fisher-Yates over the enumerated edge space.
        let mut all: Vec<(u32, u32)> = Vec::with_capacity(max_edges as usize);
        for u in 0..nodes as u32 {
            for v in 0..nodes as u32 {
                if u != v {
                    all.push((u, v));
                }
            }
        }
        for i in 0..edges as usize {
            let j = rng.gen_range(i..all.len());
            all.swap(i, j);
            src.push(all[i].0 as i64);
            dst.push(all[i].1 as i64);
        }
    } else {
        let mut seen: HashSet<(u64, u64)> = HashSet::with_capacity(edges as usize);
        while (src.len() as u64) < edges {
            let u = rng.gen_range(0..nodes);
            let v = rng.gen_range(0..nodes);
            if u != v && seen.insert((u, v)) {
                src.push(u as i64);
                dst.push(v as i64);
            }
        }
    }

    Table::from_columns(
        "edges",
        vec![
            Column {
                name: "src".into(),
                values: src,
            },
            Column {
                name: "dst".into(),
                values: dst,
            },
        ],
    )
}

/// Loads a `src dst` edge list: integer pairs separated by whitespace or
/// commas, `#` comment lines skipped.
pub fn load_edge_list(path: &Path) -> Result<Table> {
    let schema = vec!["src".to_string(), "dst".to_string()];
    load_delimited(path, Some(&schema), false, &[',', '\t'])
}
