//! Fixture loading, random generators and brute-force oracles shared by the
//! integration tests.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use playbook_core::{
    parse_document, parse_flowchart, DocId, Edge, Flowchart, Node, NodeId, NodeKind, PlaybookDoc,
    RefGraph,
};
use proptest::prelude::*;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn chart_fixture(name: &str) -> Flowchart {
    let path = fixtures_dir().join("charts").join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    parse_flowchart(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn tabletop_as_drawn() -> Flowchart {
    chart_fixture("tabletop_as_drawn.flowchart")
}

pub fn tabletop_repaired() -> Flowchart {
    chart_fixture("tabletop_repaired.flowchart")
}

pub fn stolen_device_fsm() -> Flowchart {
    chart_fixture("stolen_device_fsm.flowchart")
}

/// Every `.playbook` file in a fixture directory, sorted by file name.
pub fn load_docs(dir: &str) -> Vec<PlaybookDoc> {
    let mut paths: Vec<_> = std::fs::read_dir(fixtures_dir().join(dir))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "playbook"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).unwrap();
            parse_document(&text, &p.display().to_string()).unwrap()
        })
        .collect()
}

pub fn doc_id(s: &str) -> DocId {
    DocId::new(s).unwrap()
}

pub fn node_id(s: &str) -> NodeId {
    NodeId::new(s).unwrap()
}

pub fn doc_ids(list: &[&str]) -> BTreeSet<DocId> {
    list.iter().map(|s| doc_id(s)).collect()
}

// ---------------------------------------------------------------------------
// Random reference graphs and oracles.

/// `(node count, raw edge pairs)`; endpoints are reduced modulo the count.
pub fn arb_digraph(max_nodes: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (1..=max_nodes).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..=n * 2)))
}

pub fn to_ref_graph(n: usize, edges: &[(usize, usize)]) -> RefGraph {
    let id = |i: usize| doc_id(&format!("d{i}"));
    RefGraph::from_edges((0..n).map(id), edges.iter().map(|&(a, b)| (id(a), id(b))))
}

/// Only forward edges survive, so the graph is acyclic.
pub fn forward_only(edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    edges.iter().filter(|(a, b)| a < b).copied().collect()
}

/// Kahn's algorithm: true iff every node can be removed in topological order.
pub fn topo_sort_succeeds(g: &RefGraph) -> bool {
    let mut indegree: BTreeMap<&DocId, usize> = g.nodes().iter().map(|n| (n, 0)).collect();
    for (_, to) in g.edges() {
        *indegree.get_mut(to).unwrap() += 1;
    }
    let mut ready: Vec<&DocId> = indegree
        .iter()
        .filter(|(_, d)| **d == 0)
        .map(|(n, _)| *n)
        .collect();
    let mut removed = 0;
    while let Some(node) = ready.pop() {
        removed += 1;
        for (from, to) in g.edges() {
            if from == node {
                let d = indegree.get_mut(to).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.push(to);
                }
            }
        }
    }
    removed == g.nodes().len()
}

/// Reflexive-free reachability by repeated relaxation (Floyd–Warshall).
pub fn reachability(g: &RefGraph) -> BTreeMap<(DocId, DocId), bool> {
    let nodes: Vec<&DocId> = g.nodes().iter().collect();
    let mut reach = BTreeMap::new();
    for a in &nodes {
        for b in &nodes {
            reach.insert(
                ((*a).clone(), (*b).clone()),
                g.edges().contains(&((*a).clone(), (*b).clone())),
            );
        }
    }
    for k in &nodes {
        for a in &nodes {
            for b in &nodes {
                let via =
                    reach[&((*a).clone(), (*k).clone())] && reach[&((*k).clone(), (*b).clone())];
                if via {
                    reach.insert(((*a).clone(), (*b).clone()), true);
                }
            }
        }
    }
    reach
}

/// Cyclic strongly connected components, each as a sorted member list.
pub fn cyclic_components(g: &RefGraph) -> Vec<Vec<DocId>> {
    let reach = reachability(g);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for a in g.nodes() {
        if seen.contains(a) || !reach[&(a.clone(), a.clone())] {
            continue;
        }
        let members: Vec<DocId> = g
            .nodes()
            .iter()
            .filter(|b| {
                *b == a || (reach[&(a.clone(), (*b).clone())] && reach[&((*b).clone(), a.clone())])
            })
            .cloned()
            .collect();
        seen.extend(members.iter().cloned());
        out.push(members);
    }
    out
}

/// Breadth-first enumeration of everything reachable from `root`.
pub fn bfs_reachable(g: &RefGraph, root: &DocId) -> BTreeSet<DocId> {
    let mut seen = BTreeSet::new();
    let mut queue = std::collections::VecDeque::from([root.clone()]);
    while let Some(node) = queue.pop_front() {
        for (from, to) in g.edges() {
            if *from == node && seen.insert(to.clone()) {
                queue.push_back(to.clone());
            }
        }
    }
    seen.remove(root);
    seen
}

// ---------------------------------------------------------------------------
// Random acyclic flowcharts.

#[derive(Debug, Clone)]
pub struct ChartSpec {
    pub n: usize,
    /// Per node: kind selector and successor seeds.
    pub nodes: Vec<(u8, Vec<u16>)>,
}

pub fn arb_chart_spec(max_nodes: usize) -> impl Strategy<Value = ChartSpec> {
    (2..=max_nodes).prop_flat_map(move |n| {
        prop::collection::vec((any::<u8>(), prop::collection::vec(any::<u16>(), 3)), n)
            .prop_map(move |nodes| ChartSpec { n, nodes })
    })
}

const BRANCH_LABELS: [&str; 3] = ["yes", "no", "later"];

/// Builds an acyclic chart in which every reachable non-end node has a way
/// forward, so the chart is analysis-clean. With `parallel`, actions may fan
/// out to two successors.
pub fn build_chart(spec: &ChartSpec, parallel: bool) -> Flowchart {
    let n = spec.n;
    let id = |i: usize| node_id(&format!("n{i}"));
    let mut kinds = vec![NodeKind::Action; n];
    kinds[0] = NodeKind::Start;
    kinds[n - 1] = NodeKind::End;
    for (i, kind) in kinds.iter_mut().enumerate().take(n - 1).skip(1) {
        *kind = match spec.nodes[i].0 % 6 {
            0 => NodeKind::End,
            1 | 2 => NodeKind::Decision,
            _ => NodeKind::Action,
        };
    }

    let mut succ: Vec<Vec<(usize, Option<&str>)>> = vec![Vec::new(); n];
    for i in 0..n - 1 {
        if kinds[i] == NodeKind::End {
            continue;
        }
        let mut avail: Vec<usize> = (i + 1..n).collect();
        let seeds = &spec.nodes[i].1;
        let want = match kinds[i] {
            NodeKind::Decision if avail.len() >= 2 => {
                2 + (seeds[2] as usize % 2).min(avail.len() - 2)
            }
            NodeKind::Decision => {
                kinds[i] = NodeKind::Action;
                1
            }
            _ if parallel && avail.len() >= 2 && seeds[2].is_multiple_of(3) => 2,
            _ => 1,
        };
        for k in 0..want {
            let target = avail.remove(seeds[k] as usize % avail.len());
            let label = (kinds[i] == NodeKind::Decision).then_some(BRANCH_LABELS[k]);
            succ[i].push((target, label));
        }
    }

    // Keep only what the start node can reach.
    let mut reachable = vec![false; n];
    reachable[0] = true;
    for i in 0..n {
        if reachable[i] {
            for &(t, _) in &succ[i] {
                reachable[t] = true;
            }
        }
    }

    let nodes = (0..n)
        .filter(|&i| reachable[i])
        .map(|i| Node::new(id(i), kinds[i], format!("Step {i}")))
        .collect();
    let edges = (0..n)
        .filter(|&i| reachable[i])
        .flat_map(|i| {
            succ[i].iter().map(move |&(t, label)| match label {
                Some(l) => Edge::labeled(id(i), id(t), l),
                None => Edge::new(id(i), id(t)),
            })
        })
        .collect();
    Flowchart::new("generated", nodes, edges).expect("generator produces valid charts")
}

/// Chart-level path oracle: every start→end walk as `(node, chosen label)`
/// pairs, found by plain recursion over the chart's edges.
pub fn chart_paths(chart: &Flowchart) -> Vec<Vec<(String, Option<String>)>> {
    fn go(
        chart: &Flowchart,
        node: &str,
        prefix: &mut Vec<(String, Option<String>)>,
        out: &mut Vec<Vec<(String, Option<String>)>>,
    ) {
        if chart.node(node).unwrap().kind == NodeKind::End {
            let mut path = prefix.clone();
            path.push((node.to_string(), None));
            out.push(path);
            return;
        }
        for edge in chart.outgoing(node) {
            prefix.push((node.to_string(), edge.label.clone()));
            go(chart, edge.to.as_str(), prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    go(chart, chart.start().id.as_str(), &mut Vec::new(), &mut out);
    out.sort_by(|a, b| {
        let ka: Vec<&String> = a.iter().map(|s| &s.0).collect();
        let kb: Vec<&String> = b.iter().map(|s| &s.0).collect();
        ka.cmp(&kb).then_with(|| a.cmp(b))
    });
    out
}

/// Counts start→end paths by memoised recursion.
pub fn count_paths(chart: &Flowchart) -> usize {
    fn go<'a>(chart: &'a Flowchart, node: &'a str, memo: &mut BTreeMap<&'a str, usize>) -> usize {
        if let Some(&c) = memo.get(node) {
            return c;
        }
        let c = if chart.node(node).unwrap().kind == NodeKind::End {
            1
        } else {
            chart
                .outgoing(node)
                .map(|e| go(chart, e.to.as_str(), memo))
                .sum()
        };
        memo.insert(node, c);
        c
    }
    go(chart, chart.start().id.as_str(), &mut BTreeMap::new())
}
