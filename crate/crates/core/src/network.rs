//! Conflict-graph network model.
//!
//! Links are indexed densely in declaration order; every per-link vector in
//! the crate (attempt probabilities, dual variables, ages) follows that order.
//! The config file carries its own integer ids, which are kept only for
//! display and round-tripping.
//!
//! Config files are TOML:
//!
//! ```toml
//! pairs = [[1, 2]]          # undirected interference, optional
//!
//! [[links]]
//! id = 1
//! gamma = 1.0
//! weight = 1.0              # optional, defaults to 1
//!
//! [[links]]
//! id = 2
//! gamma = 0.5
//!
//! [neighbors]               # directed N_e lists, optional
//! 1 = [2]
//! ```
//!
//! `pairs` and `neighbors` may coexist; the materialized neighbor sets are
//! their union.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    /// Identifier from the config file.
    pub id: i64,
    /// Probability that the channel is ON in a slot.
    pub gamma: f64,
    pub weight: f64,
}

/// A network instance: links plus the interference sets `N_e`.
///
/// `neighbors(e)` lists the links whose simultaneous attempt destroys link
/// `e`'s transmission. `reverse_neighbors(e)` lists the links that `e`
/// destroys, i.e. `{e' : e ∈ N_e'}`. The two coincide when interference is
/// symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    links: Vec<Link>,
    neighbors: Vec<Vec<usize>>,
    reverse: Vec<Vec<usize>>,
    symmetric: bool,
}

impl Network {
    /// Builds a network from links and per-link neighbor index lists.
    /// Neighbor lists are sorted and deduplicated.
    pub fn new(links: Vec<Link>, neighbors: Vec<Vec<usize>>) -> Result<Self> {
        if neighbors.len() != links.len() {
            return Err(Error::SizeMismatch {
                expected: links.len(),
                got: neighbors.len(),
            });
        }
        let mut seen = BTreeSet::new();
        for link in &links {
            if !seen.insert(link.id) {
                return Err(Error::DuplicateLink(link.id));
            }
        }
        let n = links.len();
        let mut sets = Vec::with_capacity(n);
        for (e, list) in neighbors.into_iter().enumerate() {
            let set: BTreeSet<usize> = list.into_iter().collect();
            if let Some(&bad) = set.iter().find(|&&k| k >= n) {
                return Err(Error::UnknownLink {
                    id: bad as i64,
                    context: format!("neighbor set of link {}", links[e].id),
                });
            }
            sets.push(set.into_iter().collect::<Vec<_>>());
        }
        let mut reverse = vec![Vec::new(); n];
        for (e, set) in sets.iter().enumerate() {
            for &k in set {
                reverse[k].push(e);
            }
        }
        let symmetric = sets == reverse;
        Ok(Self {
            links,
            neighbors: sets,
            reverse,
            symmetric,
        })
    }

    /// Convenience constructor with ids `0..n` and undirected interference
    /// pairs given as link indices.
    pub fn with_pairs(params: &[(f64, f64)], pairs: &[(usize, usize)]) -> Result<Self> {
        let links = params
            .iter()
            .enumerate()
            .map(|(i, &(gamma, weight))| Link {
                id: i as i64,
                gamma,
                weight,
            })
            .collect();
        let mut neighbors = vec![Vec::new(); params.len()];
        for &(a, b) in pairs {
            if a >= params.len() || b >= params.len() {
                return Err(Error::UnknownLink {
                    id: a.max(b) as i64,
                    context: "interference pair".into(),
                });
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        Self::new(links, neighbors)
    }

    /// Single collision domain: every link interferes with every other.
    pub fn complete(params: &[(f64, f64)]) -> Result<Self> {
        let n = params.len();
        let pairs: Vec<_> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        Self::with_pairs(params, &pairs)
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn id(&self, e: usize) -> i64 {
        self.links[e].id
    }

    pub fn gamma(&self, e: usize) -> f64 {
        self.links[e].gamma
    }

    pub fn weight(&self, e: usize) -> f64 {
        self.links[e].weight
    }

    /// `N_e`: links that interfere with `e`.
    pub fn neighbors(&self, e: usize) -> &[usize] {
        &self.neighbors[e]
    }

    /// `{e' : e ∈ N_e'}`: links that `e` interferes with.
    pub fn reverse_neighbors(&self, e: usize) -> &[usize] {
        &self.reverse[e]
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// True when every link is in every other link's neighbor set.
    pub fn is_single_collision_domain(&self) -> bool {
        self.first_non_interfering_pair().is_none()
    }

    pub(crate) fn first_non_interfering_pair(&self) -> Option<(usize, usize)> {
        let n = self.len();
        for a in 0..n {
            for b in 0..n {
                if a != b && self.neighbors[a].binary_search(&b).is_err() {
                    return Some((a, b));
                }
            }
        }
        None
    }

    /// A link no other link interferes with and which interferes with nobody.
    pub fn is_isolated(&self, e: usize) -> bool {
        self.neighbors[e].is_empty() && self.reverse[e].is_empty()
    }

    pub fn index_of(&self, id: i64) -> Option<usize> {
        self.links.iter().position(|l| l.id == id)
    }

    pub fn min_weight(&self) -> f64 {
        self.links.iter().map(|l| l.weight).fold(f64::INFINITY, f64::min)
    }

    /// Serializes to the canonical config form (explicit `neighbors` map).
    pub fn to_config_string(&self) -> String {
        let file = ConfigFile {
            pairs: Vec::new(),
            links: self
                .links
                .iter()
                .map(|l| LinkRecord {
                    id: l.id,
                    gamma: l.gamma,
                    weight: Some(l.weight),
                })
                .collect(),
            neighbors: self
                .neighbors
                .iter()
                .enumerate()
                .filter(|(_, set)| !set.is_empty())
                .map(|(e, set)| (self.id(e).to_string(), set.iter().map(|&k| self.id(k)).collect()))
                .collect(),
        };
        toml::to_string(&file).expect("network config is always serializable")
    }
}

impl FromStr for Network {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_network(s)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ConfigFile {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pairs: Vec<[i64; 2]>,
    links: Vec<LinkRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    neighbors: BTreeMap<String, Vec<i64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LinkRecord {
    id: i64,
    gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

/// Parses a TOML network config. Range checks on `gamma`/`weight` are left
/// to [`validate`].
pub fn parse_network(text: &str) -> Result<Network> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;

    let mut index = HashMap::new();
    for (i, rec) in file.links.iter().enumerate() {
        if index.insert(rec.id, i).is_some() {
            return Err(Error::DuplicateLink(rec.id));
        }
    }
    let lookup = |id: i64, context: &str| {
        index.get(&id).copied().ok_or_else(|| Error::UnknownLink {
            id,
            context: context.to_string(),
        })
    };

    let mut neighbors = vec![Vec::new(); file.links.len()];
    for [a, b] in &file.pairs {
        let ia = lookup(*a, "pairs")?;
        let ib = lookup(*b, "pairs")?;
        neighbors[ia].push(ib);
        neighbors[ib].push(ia);
    }
    for (key, list) in &file.neighbors {
        let id: i64 = key
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("neighbors key {key:?} is not an integer link id")))?;
        let e = lookup(id, "neighbors")?;
        for &other in list {
            neighbors[e].push(lookup(other, &format!("neighbors of link {id}"))?);
        }
    }

    let links = file
        .links
        .into_iter()
        .map(|rec| Link {
            id: rec.id,
            gamma: rec.gamma,
            weight: rec.weight.unwrap_or(1.0),
        })
        .collect();
    Network::new(links, neighbors)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Issue {
    pub severity: Severity,
    /// Config ids of the links involved.
    pub links: Vec<i64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "ok");
        }
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            let tag = match issue.severity {
                Severity::Warning => "warning",
                Severity::Error => "error",
            };
            let ids: Vec<String> = issue.links.iter().map(|id| id.to_string()).collect();
            write!(f, "{tag} [link {}]: {}", ids.join(","), issue.message)?;
        }
        Ok(())
    }
}

/// What the network is about to be used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Intent {
    /// Simulation, closed forms, centralized solvers.
    General,
    /// The distributed frame-synchronous optimizer, which needs symmetric
    /// interference.
    Distributed,
}

pub fn validate(net: &Network, intent: Intent) -> ValidationReport {
    let mut issues = Vec::new();
    if net.is_empty() {
        issues.push(Issue {
            severity: Severity::Error,
            links: Vec::new(),
            message: "network has no links".into(),
        });
    }
    for (e, link) in net.links().iter().enumerate() {
        if !(link.gamma.is_finite() && link.gamma > 0.0) {
            issues.push(Issue {
                severity: Severity::Error,
                links: vec![link.id],
                message: format!("channel probability must be positive, got {}", link.gamma),
            });
        } else if link.gamma > 1.0 {
            issues.push(Issue {
                severity: Severity::Error,
                links: vec![link.id],
                message: format!("channel probability must not exceed 1, got {}", link.gamma),
            });
        }
        if !(link.weight.is_finite() && link.weight > 0.0) {
            issues.push(Issue {
                severity: Severity::Error,
                links: vec![link.id],
                message: format!("weight must be positive, got {}", link.weight),
            });
        }
        if net.neighbors(e).contains(&e) {
            issues.push(Issue {
                severity: Severity::Error,
                links: vec![link.id],
                message: "link interferes with itself".into(),
            });
        }
    }
    let severity = match intent {
        Intent::General => Severity::Warning,
        Intent::Distributed => Severity::Error,
    };
    for e in 0..net.len() {
        for &k in net.neighbors(e) {
            if k != e && !net.neighbors(k).contains(&e) {
                issues.push(Issue {
                    severity,
                    links: vec![net.id(k), net.id(e)],
                    message: format!(
                        "asymmetric interference: link {} interferes with {} but not vice versa",
                        net.id(k),
                        net.id(e)
                    ),
                });
            }
        }
    }
    let ok = !issues.iter().any(|i| i.severity == Severity::Error);
    ValidationReport { ok, issues }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_LINK: &str = r#"
pairs = [[1, 2]]

[[links]]
id = 1
gamma = 1.0
weight = 1.0

[[links]]
id = 2
gamma = 1.0
"#;

    #[test]
    fn pair_shorthand_is_mutual() {
        let net = parse_network(TWO_LINK).unwrap();
        assert_eq!(net.len(), 2);
        assert_eq!(net.neighbors(0), &[1]);
        assert_eq!(net.neighbors(1), &[0]);
        assert!(net.is_symmetric());
        assert_eq!(net.weight(1), 1.0);
    }

    #[test]
    fn single_link_has_no_neighbors() {
        let net = parse_network("[[links]]\nid = 1\ngamma = 0.8\n").unwrap();
        assert!(net.neighbors(0).is_empty());
        assert!(net.is_isolated(0));
    }

    #[test]
    fn unknown_neighbor_is_rejected() {
        let text = "[[links]]\nid = 1\ngamma = 1.0\n[[links]]\nid = 2\ngamma = 1.0\n[neighbors]\n1 = [9]\n";
        match parse_network(text) {
            Err(Error::UnknownLink { id, .. }) => assert_eq!(id, 9),
            other => panic!("expected unknown link, got {other:?}"),
        }
        let text = "pairs = [[1, 9]]\n[[links]]\nid = 1\ngamma = 1.0\n";
        assert!(matches!(parse_network(text), Err(Error::UnknownLink { id: 9, .. })));
    }

    #[test]
    fn duplicate_id_is_rejected() {
        let text = "[[links]]\nid = 1\ngamma = 1.0\n[[links]]\nid = 1\ngamma = 0.5\n";
        assert!(matches!(parse_network(text), Err(Error::DuplicateLink(1))));
    }

    #[test]
    fn malformed_text_is_a_parse_error() {
        assert!(matches!(parse_network("links = 3"), Err(Error::Parse(_))));
        assert!(matches!(parse_network("[[links]\nid=1"), Err(Error::Parse(_))));
    }

    #[test]
    fn pairs_and_neighbors_union() {
        let text = "pairs = [[1, 2]]\n[[links]]\nid = 1\ngamma = 1.0\n[[links]]\nid = 2\ngamma = 1.0\n[[links]]\nid = 3\ngamma = 1.0\n[neighbors]\n1 = [2, 3]\n";
        let net = parse_network(text).unwrap();
        assert_eq!(net.neighbors(0), &[1, 2]);
        assert_eq!(net.neighbors(1), &[0]);
        assert!(net.neighbors(2).is_empty());
        assert!(!net.is_symmetric());
        assert_eq!(net.reverse_neighbors(2), &[0]);
    }

    #[test]
    fn symmetric_pair_validates() {
        let net = parse_network(TWO_LINK).unwrap();
        let report = validate(&net, Intent::Distributed);
        assert!(report.ok, "{report}");
        assert!(report.issues.is_empty());
    }

    #[test]
    fn asymmetry_is_error_only_for_distributed() {
        let text = "[[links]]\nid = 1\ngamma = 1.0\n[[links]]\nid = 2\ngamma = 1.0\n[neighbors]\n1 = [2]\n";
        let net = parse_network(text).unwrap();
        let strict = validate(&net, Intent::Distributed);
        assert!(!strict.ok);
        let issue = strict.errors().next().unwrap();
        let mut ids = issue.links.clone();
        ids.sort();
        assert_eq!(ids, vec![1, 2]);

        let lenient = validate(&net, Intent::General);
        assert!(lenient.ok);
        assert_eq!(lenient.issues.len(), 1);
        assert_eq!(lenient.issues[0].severity, Severity::Warning);
    }

    #[test]
    fn zero_gamma_is_flagged() {
        let net = parse_network("[[links]]\nid = 7\ngamma = 0.0\n").unwrap();
        let report = validate(&net, Intent::General);
        assert!(!report.ok);
        assert_eq!(report.issues[0].links, vec![7]);
        assert!(report.issues[0]
            .message
            .contains("channel probability must be positive"));
    }

    #[test]
    fn range_and_self_interference_errors() {
        let text = "[[links]]\nid = 1\ngamma = 1.5\nweight = -1.0\n[neighbors]\n1 = [1]\n";
        let net = parse_network(text).unwrap();
        let report = validate(&net, Intent::General);
        assert!(!report.ok);
        assert_eq!(report.errors().count(), 3);
    }

    #[test]
    fn perfect_channel_is_allowed() {
        let net = Network::with_pairs(&[(1.0, 2.0)], &[]).unwrap();
        assert!(validate(&net, Intent::Distributed).ok);
    }

    #[test]
    fn canonical_form_round_trips() {
        let net = parse_network(TWO_LINK).unwrap();
        let text = net.to_config_string();
        assert_eq!(parse_network(&text).unwrap(), net);
    }

    #[test]
    fn complete_graph_detection() {
        let k3 = Network::complete(&[(1.0, 1.0); 3]).unwrap();
        assert!(k3.is_single_collision_domain());
        let path = Network::with_pairs(&[(1.0, 1.0); 3], &[(0, 1), (1, 2)]).unwrap();
        assert!(!path.is_single_collision_domain());
    }
}
