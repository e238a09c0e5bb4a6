use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkInfo {
    pub id: String,
    pub a: String,
    pub b: String,
    pub distance_km: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkStatus {
    Up,
    Alarm,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutePolicy {
    /// First route of the configured priority list whose links are all up.
    StaticPriority,
    /// Route with the largest minimum per-hop key buffer.
    MaxMinBuffer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub nodes: Vec<String>,
    pub links: Vec<String>,
    pub total_distance_km: f64,
}

/// Undirected multigraph of QKD links.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    links: BTreeMap<String, LinkInfo>,
}

impl Graph {
    pub fn new(links: impl IntoIterator<Item = LinkInfo>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for l in links {
            if l.a == l.b {
                return Err(Error::invalid(format!("link {} is a self-loop", l.id)));
            }
            if map.insert(l.id.clone(), l.clone()).is_some() {
                return Err(Error::invalid(format!("duplicate link id {}", l.id)));
            }
        }
        Ok(Graph { links: map })
    }

    pub fn links(&self) -> impl Iterator<Item = &LinkInfo> {
        self.links.values()
    }

    pub fn link(&self, id: &str) -> Option<&LinkInfo> {
        self.links.get(id)
    }

    fn link_between(&self, u: &str, v: &str) -> Option<&LinkInfo> {
        self.links.values().find(|l| (l.a == u && l.b == v) || (l.a == v && l.b == u))
    }

    pub fn has_node(&self, n: &str) -> bool {
        self.links.values().any(|l| l.a == n || l.b == n)
    }

    /// Builds a route over `nodes`, checking every hop is a link and no node
    /// repeats.
    pub fn route(&self, nodes: &[String]) -> Result<Route> {
        if nodes.len() < 2 {
            return Err(Error::invalid("route needs at least two nodes"));
        }
        for (i, n) in nodes.iter().enumerate() {
            if nodes[..i].contains(n) {
                return Err(Error::invalid(format!("route repeats node {n}")));
            }
        }
        let mut links = Vec::new();
        let mut total = 0.0;
        for w in nodes.windows(2) {
            let l = self
                .link_between(&w[0], &w[1])
                .ok_or_else(|| Error::invalid(format!("no link between {} and {}", w[0], w[1])))?;
            links.push(l.id.clone());
            total += l.distance_km;
        }
        Ok(Route { nodes: nodes.to_vec(), links, total_distance_km: total })
    }

    /// Every simple path from `src` to `dst`, in lexicographic node order.
    pub fn simple_paths(&self, src: &str, dst: &str) -> Vec<Route> {
        let mut out = Vec::new();
        let mut path = vec![src.to_string()];
        self.dfs(dst, &mut path, &mut out);
        out
    }

    fn dfs(&self, dst: &str, path: &mut Vec<String>, out: &mut Vec<Route>) {
        let here = path.last().expect("path is never empty").clone();
        if here == dst {
            if let Ok(r) = self.route(path) {
                out.push(r);
            }
            return;
        }
        let mut next: Vec<&String> = self
            .links
            .values()
            .filter_map(|l| {
                if l.a == here {
                    Some(&l.b)
                } else if l.b == here {
                    Some(&l.a)
                } else {
                    None
                }
            })
            .collect();
        next.sort();
        next.dedup();
        for n in next {
            if !path.contains(n) {
                path.push(n.clone());
                self.dfs(dst, path, out);
                path.pop();
            }
        }
    }
}

/// Picks a route for `src -> dst` among links that are up.
///
/// `priority` lists candidate node paths for the static policy; when empty,
/// all simple paths ordered by distance are used. `buffers` maps link id
/// to available key bits for the max-min policy.
pub fn select_route(
    graph: &Graph,
    status: &BTreeMap<String, LinkStatus>,
    buffers: &BTreeMap<String, u64>,
    src: &str,
    dst: &str,
    priority: &[Vec<String>],
    policy: RoutePolicy,
) -> Result<Route> {
    let no_route = || Error::NoRoute { src: src.to_string(), dst: dst.to_string() };
    if !graph.has_node(src) || !graph.has_node(dst) {
        return Err(no_route());
    }
    let up = |r: &Route| r.links.iter().all(|l| status.get(l).copied().unwrap_or(LinkStatus::Up) == LinkStatus::Up);
    let mut candidates: Vec<Route> = if priority.is_empty() || policy == RoutePolicy::MaxMinBuffer {
        let mut all = graph.simple_paths(src, dst);
        all.sort_by(|a, b| a.total_distance_km.total_cmp(&b.total_distance_km).then_with(|| a.nodes.cmp(&b.nodes)));
        all
    } else {
        priority.iter().map(|p| graph.route(p)).collect::<Result<_>>()?
    };
    candidates.retain(up);
    match policy {
        RoutePolicy::StaticPriority => candidates.into_iter().next().ok_or_else(no_route),
        RoutePolicy::MaxMinBuffer => {
            let min_buf = |r: &Route| r.links.iter().map(|l| buffers.get(l).copied().unwrap_or(0)).min().unwrap_or(0);
            // Candidates are already in (distance, nodes) order, so the
            // first maximum wins ties.
            let mut best: Option<(u64, Route)> = None;
            for r in candidates {
                let m = min_buf(&r);
                if best.as_ref().is_none_or(|(b, _)| m > *b) {
                    best = Some((m, r));
                }
            }
            best.map(|(_, r)| r).ok_or_else(no_route)
        }
    }
}
