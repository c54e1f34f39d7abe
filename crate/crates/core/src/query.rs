//! Declarative n-way equi-join queries over chain and cycle topologies,
//! plus the sub-query matching that drives filter reuse.
//!
//! Queries are aliased: a relation entry is either a plain table name or
//! `alias:table`, so self-joins (e.g. clique queries over one edge table)
//! list the same table several times under different aliases. Only
//! single-attribute equi-join edges are supported.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::storage::Catalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Chain,
    Cycle,
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Topology::Chain => write!(f, "chain"),
            Topology::Cycle => write!(f, "cycle"),
        }
    }
}

/// A relation occurrence in a query: an alias bound to a physical table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationRef {
    pub alias: String,
    pub table: String,
}

impl RelationRef {
    pub fn plain(name: &str) -> RelationRef {
        RelationRef {
            alias: name.to_string(),
            table: name.to_string(),
        }
    }

    pub fn aliased(alias: &str, table: &str) -> RelationRef {
        RelationRef {
            alias: alias.to_string(),
            table: table.to_string(),
        }
    }
}

/// One equi-join condition between two aliased attributes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinEdge {
    pub left_alias: String,
    pub left_attr: String,
    pub right_alias: String,
    pub right_attr: String,
}

/// Unvalidated query description, as read from a query file.
#[derive(Debug, Clone)]
pub struct JoinQuery {
    pub relations: Vec<RelationRef>,
    pub edges: Vec<JoinEdge>,
    pub topology: Topology,
}

/// Attributes of chain edge `i`: `left` lives on relation `i`, `right` on
/// relation `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainEdge {
    pub left_attr: String,
    pub right_attr: String,
}

/// The closing condition of a cycle: `last` lives on the final relation,
/// `first` on the first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosingEdge {
    pub last_attr: String,
    pub first_attr: String,
}

/// A query checked against a catalog, with edges normalized into
/// position order. Immutable after validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidatedQuery {
    relations: Vec<RelationRef>,
    chain: Vec<ChainEdge>,
    closing: Option<ClosingEdge>,
    key: String,
}

impl ValidatedQuery {
    pub fn relations(&self) -> &[RelationRef] {
        &self.relations
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn chain_edges(&self) -> &[ChainEdge] {
        &self.chain
    }

    pub fn closing_edge(&self) -> Option<&ClosingEdge> {
        self.closing.as_ref()
    }

    pub fn topology(&self) -> Topology {
        if self.closing.is_some() {
            Topology::Cycle
        } else {
            Topology::Chain
        }
    }

    /// Canonical template key; equal for queries that differ only in
    /// alias names.
    pub fn key(&self) -> &str {
        &self.key
    }

    /// The query with the closing condition dropped (identity for chains).
    pub fn underlying_chain(&self) -> ValidatedQuery {
        let mut q = self.clone();
        q.closing = None;
        q.key = canonical_key(&q.relations, &q.chain, None);
        q
    }
}

fn canonical_key(
    relations: &[RelationRef],
    chain: &[ChainEdge],
    closing: Option<&ClosingEdge>,
) -> String {
    use std::fmt::Write;
    let mut key = String::new();
    let tables: Vec<&str> = relations.iter().map(|r| r.table.as_str()).collect();
    let _ = write!(key, "tables={}", tables.join(","));
    let _ = write!(key, ";chain=");
    for (i, e) in chain.iter().enumerate() {
        if i > 0 {
            key.push(',');
        }
        let _ = write!(key, "{}~{}", e.left_attr, e.right_attr);
    }
    match closing {
        Some(c) => {
            let _ = write!(key, ";closing={}~{}", c.last_attr, c.first_attr);
        }
        None => key.push_str(";closing=none"),
    }
    key
}

/// Checks that relations and attributes resolve and that the edge set
/// matches the declared topology, normalizing edges into position order.
pub fn validate(query: &JoinQuery, catalog: &Catalog) -> Result<ValidatedQuery> {
    let n = query.relations.len();
    if n == 0 {
        return Err(Error::Structure("query has no relations".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for r in &query.relations {
        if !seen.insert(r.alias.clone()) {
            return Err(Error::Structure(format!("duplicate alias `{}`", r.alias)));
        }
        catalog.table(&r.table)?;
    }
    let position = |alias: &str| -> Result<usize> {
        query
            .relations
            .iter()
            .position(|r| r.alias == alias)
            .ok_or_else(|| Error::Schema(format!("edge references unknown alias `{alias}`")))
    };

    let expected_edges = match query.topology {
        Topology::Chain => n - 1,
        Topology::Cycle => {
            if n < 2 {
                return Err(Error::Structure(
                    "a cyclic query needs at least two relations".into(),
                ));
            }
            n
        }
    };
    if query.edges.len() != expected_edges {
        return Err(Error::Structure(format!(
            "{} topology over {} relations needs {} edges, got {}",
            query.topology,
            n,
            expected_edges,
            query.edges.len()
        )));
    }

    // Slot every declared edge into its chain position (or the closing
    // slot), accepting either written orientation.
    let mut chain: Vec<Option<ChainEdge>> = vec![None; n.saturating_sub(1)];
    let mut closing: Option<ClosingEdge> = None;
    for e in &query.edges {
        let li = position(&e.left_alias)?;
        let ri = position(&e.right_alias)?;
        check_attr(catalog, query, li, &e.left_attr)?;
        check_attr(catalog, query, ri, &e.right_attr)?;
        if li == ri {
            return Err(Error::Structure(format!(
                "edge joins alias `{}` with itself",
                e.left_alias
            )));
        }
        let (lo, hi) = (li.min(ri), li.max(ri));
        let (lo_attr, hi_attr) = if li < ri {
            (e.left_attr.clone(), e.right_attr.clone())
        } else {
            (e.right_attr.clone(), e.left_attr.clone())
        };
        if hi == lo + 1 && chain[lo].is_none() {
            chain[lo] = Some(ChainEdge {
                left_attr: lo_attr,
                right_attr: hi_attr,
            });
        } else if query.topology == Topology::Cycle
            && lo == 0
            && hi == n - 1
            && closing.is_none()
        {
            closing = Some(ClosingEdge {
                last_attr: hi_attr,
                first_attr: lo_attr,
            });
        } else {
            return Err(Error::Structure(format!(
                "edge between positions {lo} and {hi} does not fit the {} topology",
                query.topology
            )));
        }
    }
    let chain: Vec<ChainEdge> = chain
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            e.ok_or_else(|| {
                Error::Structure(format!("missing chain edge between relations {i} and {}", i + 1))
            })
        })
        .collect::<Result<_>>()?;
    if query.topology == Topology::Cycle && closing.is_none() {
        return Err(Error::Structure(
            "cyclic query lacks the closing edge between last and first relation".into(),
        ));
    }

    let key = canonical_key(&query.relations, &chain, closing.as_ref());
    Ok(ValidatedQuery {
        relations: query.relations.clone(),
        chain,
        closing,
        key,
    })
}

fn check_attr(catalog: &Catalog, query: &JoinQuery, pos: usize, attr: &str) -> Result<()> {
    let table = catalog.table(&query.relations[pos].table)?;
    table.column_index(attr).map(|_| ()).map_err(|_| {
        Error::Schema(format!(
            "alias `{}` (table `{}`) has no attribute `{attr}`",
            query.relations[pos].alias, query.relations[pos].table
        ))
    })
}

/// True iff `inner`'s relations form a contiguous window of `outer`'s
/// relation order (same underlying tables) and every `inner` edge is
/// present in `outer` at the mapped positions. Purely syntactic.
pub fn is_subquery(inner: &ValidatedQuery, outer: &ValidatedQuery) -> bool {
    subquery_offset(inner, outer).is_some()
}

/// The window offset at which `inner` matches inside `outer`, if any.
/// Prefers the right-most window: suffix-aligned filters keep their exact
/// meaning under a backward build.
pub fn subquery_offset(inner: &ValidatedQuery, outer: &ValidatedQuery) -> Option<usize> {
    let ni = inner.len();
    let no = outer.len();
    if ni > no {
        return None;
    }
    for offset in (0..=no - ni).rev() {
        let tables_match = (0..ni)
            .all(|p| inner.relations[p].table == outer.relations[offset + p].table);
        if !tables_match {
            continue;
        }
        let chain_match = (0..ni.saturating_sub(1))
            .all(|i| inner.chain[i] == outer.chain[offset + i]);
        if !chain_match {
            continue;
        }
        match &inner.closing {
            None => return Some(offset),
            Some(c) => {
                // A closing edge only maps when the windows coincide.
                if offset == 0 && ni == no && outer.closing.as_ref() == Some(c) {
                    return Some(0);
                }
            }
        }
    }
    None
}

/// The n-cycle self-join over an edge table: aliases `E1..En` with
/// `Ei.dst = E(i+1).src` and the closing condition `En.dst = E1.src`.
pub fn clique_query(edge_table: &str, n: usize) -> Result<JoinQuery> {
    if n != 3 && n != 4 {
        return Err(Error::Param(format!(
            "clique queries are supported for n in {{3, 4}}, got {n}"
        )));
    }
    let relations: Vec<RelationRef> = (1..=n)
        .map(|i| RelationRef::aliased(&format!("E{i}"), edge_table))
        .collect();
    let mut edges: Vec<JoinEdge> = (1..n)
        .map(|i| JoinEdge {
            left_alias: format!("E{i}"),
            left_attr: "dst".into(),
            right_alias: format!("E{}", i + 1),
            right_attr: "src".into(),
        })
        .collect();
    edges.push(JoinEdge {
        left_alias: format!("E{n}"),
        left_attr: "dst".into(),
        right_alias: "E1".into(),
        right_attr: "src".into(),
    });
    Ok(JoinQuery {
        relations,
        edges,
        topology: Topology::Cycle,
    })
}

/// On-disk query description.
#[derive(Debug, Serialize, Deserialize)]
struct QueryFile {
    relations: Vec<String>,
    edges: Vec<String>,
    topology: Topology,
}

pub fn parse_query_str(text: &str) -> Result<JoinQuery> {
    let file: QueryFile =
        toml::from_str(text).map_err(|e| Error::Format(format!("bad query file: {e}")))?;
    let relations = file
        .relations
        .iter()
        .map(|entry| {
            let entry = entry.trim();
            match entry.split_once(':') {
                Some((alias, table)) => RelationRef::aliased(alias.trim(), table.trim()),
                None => RelationRef::plain(entry),
            }
        })
        .collect();
    let edges = file
        .edges
        .iter()
        .map(|s| parse_edge(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(JoinQuery {
        relations,
        edges,
        topology: file.topology,
    })
}

pub fn load_query(path: &Path) -> Result<JoinQuery> {
    parse_query_str(&std::fs::read_to_string(path)?)
}

pub fn query_to_string(query: &JoinQuery) -> String {
    let relations: Vec<String> = query
        .relations
        .iter()
        .map(|r| {
            if r.alias == r.table {
                r.table.clone()
            } else {
                format!("{}:{}", r.alias, r.table)
            }
        })
        .collect();
    let edges: Vec<String> = query
        .edges
        .iter()
        .map(|e| {
            format!(
                "{}.{} = {}.{}",
                e.left_alias, e.left_attr, e.right_alias, e.right_attr
            )
        })
        .collect();
    let file = QueryFile {
        relations,
        edges,
        topology: query.topology,
    };
    toml::to_string(&file).expect("query serialization cannot fail")
}

fn parse_edge(s: &str) -> Result<JoinEdge> {
    let bad = || Error::Format(format!("bad edge `{s}`, expected `T1.a = T2.b`"));
    let (left, right) = s.split_once('=').ok_or_else(bad)?;
    let (la, lattr) = left.trim().split_once('.').ok_or_else(bad)?;
    let (ra, rattr) = right.trim().split_once('.').ok_or_else(bad)?;
    Ok(JoinEdge {
        left_alias: la.trim().to_string(),
        left_attr: lattr.trim().to_string(),
        right_alias: ra.trim().to_string(),
        right_attr: rattr.trim().to_string(),
    })
}
