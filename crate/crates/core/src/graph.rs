//! Cross-document reference graph.
//!
//! Edges come only from [`PlaybookDoc::references`]. Targets that are not
//! documents in the input become *phantom* nodes so dangling references stay
//! visible to analysis.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::document::PlaybookDoc;
use crate::ids::DocId;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("document id `{0}` appears more than once")]
    DuplicateDocId(DocId),
    #[error("unknown document `{0}`")]
    UnknownDoc(DocId),
    #[error("the reference graph contains a cycle through `{0}`")]
    CyclicGraph(DocId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefGraph {
    nodes: BTreeSet<DocId>,
    phantoms: BTreeSet<DocId>,
    edges: BTreeSet<(DocId, DocId)>,
}

impl RefGraph {
    /// Builds a graph directly from edges. Every endpoint becomes a node;
    /// none are phantoms.
    pub fn from_edges(
        nodes: impl IntoIterator<Item = DocId>,
        edges: impl IntoIterator<Item = (DocId, DocId)>,
    ) -> RefGraph {
        let mut graph = RefGraph::default();
        graph.nodes.extend(nodes);
        for (from, to) in edges {
            graph.nodes.insert(from.clone());
            graph.nodes.insert(to.clone());
            graph.edges.insert((from, to));
        }
        graph
    }

    pub fn nodes(&self) -> &BTreeSet<DocId> {
        &self.nodes
    }

    /// Referenced ids with no backing document.
    pub fn phantoms(&self) -> &BTreeSet<DocId> {
        &self.phantoms
    }

    pub fn edges(&self) -> &BTreeSet<(DocId, DocId)> {
        &self.edges
    }

    pub fn contains(&self, id: &DocId) -> bool {
        self.nodes.contains(id)
    }

    /// Direct successors of `id` in ascending order.
    pub fn successors<'a>(&'a self, id: &'a DocId) -> impl Iterator<Item = &'a DocId> + 'a {
        self.edges
            .range((id.clone(), min_id())..)
            .take_while(move |(from, _)| from == id)
            .map(|(_, to)| to)
    }

    /// Documents that reference `id`, ascending.
    pub fn referrers<'a>(&'a self, id: &'a DocId) -> impl Iterator<Item = &'a DocId> + 'a {
        self.edges
            .iter()
            .filter(move |(_, to)| to == id)
            .map(|(from, _)| from)
    }

    fn adjacency(&self) -> BTreeMap<&DocId, Vec<&DocId>> {
        let mut adj: BTreeMap<&DocId, Vec<&DocId>> =
            self.nodes.iter().map(|n| (n, Vec::new())).collect();
        for (from, to) in &self.edges {
            adj.entry(from).or_default().push(to);
        }
        adj
    }
}

fn min_id() -> DocId {
    // "-" is the smallest byte allowed in a DocId
    DocId::new("-").expect("valid id")
}

/// One node per document plus a phantom node for each dangling reference
/// target, and one edge per reference.
pub fn build_ref_graph(docs: &[PlaybookDoc]) -> Result<RefGraph, GraphError> {
    let mut graph = RefGraph::default();
    for doc in docs {
        if !graph.nodes.insert(doc.id.clone()) {
            return Err(GraphError::DuplicateDocId(doc.id.clone()));
        }
    }
    for doc in docs {
        for target in &doc.references {
            if !graph.nodes.contains(target) {
                graph.phantoms.insert(target.clone());
            }
            graph.edges.insert((doc.id.clone(), target.clone()));
        }
    }
    graph.nodes.extend(graph.phantoms.iter().cloned());
    Ok(graph)
}

/// Strongly connected components (Tarjan), each sorted ascending.
fn strongly_connected<'a>(adj: &BTreeMap<&'a DocId, Vec<&'a DocId>>) -> Vec<Vec<&'a DocId>> {
    struct State<'a> {
        index: BTreeMap<&'a DocId, usize>,
        low: BTreeMap<&'a DocId, usize>,
        on_stack: BTreeSet<&'a DocId>,
        stack: Vec<&'a DocId>,
        next: usize,
        out: Vec<Vec<&'a DocId>>,
    }

    let mut st = State {
        index: BTreeMap::new(),
        low: BTreeMap::new(),
        on_stack: BTreeSet::new(),
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };

    // Iterative DFS: frames of (node, next successor position).
    for &root in adj.keys() {
        if st.index.contains_key(root) {
            continue;
        }
        let mut frames: Vec<(&DocId, usize)> = Vec::new();
        st.index.insert(root, st.next);
        st.low.insert(root, st.next);
        st.next += 1;
        st.stack.push(root);
        st.on_stack.insert(root);
        frames.push((root, 0));

        while let Some(top) = frames.last_mut() {
            let node = top.0;
            if let Some(&next) = adj[node].get(top.1) {
                top.1 += 1;
                if !st.index.contains_key(next) {
                    st.index.insert(next, st.next);
                    st.low.insert(next, st.next);
                    st.next += 1;
                    st.stack.push(next);
                    st.on_stack.insert(next);
                    frames.push((next, 0));
                } else if st.on_stack.contains(next) {
                    let low = st.low[node].min(st.index[next]);
                    st.low.insert(node, low);
                }
                continue;
            }
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                let low = st.low[parent].min(st.low[node]);
                st.low.insert(parent, low);
            }
            if st.low[node] == st.index[node] {
                let mut component = Vec::new();
                while let Some(member) = st.stack.pop() {
                    st.on_stack.remove(member);
                    component.push(member);
                    if member == node {
                        break;
                    }
                }
                component.sort();
                st.out.push(component);
            }
        }
    }
    st.out
}

/// Shortest cycle through `start` using only nodes in `members`.
fn shortest_cycle<'a>(
    adj: &BTreeMap<&'a DocId, Vec<&'a DocId>>,
    members: &BTreeSet<&'a DocId>,
    start: &'a DocId,
) -> Vec<DocId> {
    let mut parent: BTreeMap<&DocId, &DocId> = BTreeMap::new();
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        for &next in &adj[node] {
            if !members.contains(next) {
                continue;
            }
            if next == start {
                let mut cycle = alloc::vec![node.clone()];
                let mut cur = node;
                while cur != start {
                    cur = parent[cur];
                    cycle.push(cur.clone());
                }
                cycle.reverse();
                return cycle;
            }
            if !parent.contains_key(next) {
                parent.insert(next, node);
                queue.push_back(next);
            }
        }
    }
    Vec::new()
}

/// Reports one cycle per cyclic strongly connected component: the shortest
/// cycle through the component's smallest id, starting at that id. The
/// result is empty iff the graph is acyclic, and sorted by first id.
pub fn detect_cycles(graph: &RefGraph) -> Vec<Vec<DocId>> {
    let adj = graph.adjacency();
    let mut cycles = Vec::new();
    for component in strongly_connected(&adj) {
        let first = component[0];
        let cyclic = component.len() > 1 || adj[first].contains(&first);
        if !cyclic {
            continue;
        }
        let members: BTreeSet<&DocId> = component.iter().copied().collect();
        cycles.push(shortest_cycle(&adj, &members, first));
    }
    cycles.sort();
    cycles
}

/// All documents reachable from `root`, excluding `root` itself.
pub fn transitive_refs(graph: &RefGraph, root: &DocId) -> Result<BTreeSet<DocId>, GraphError> {
    if !graph.contains(root) {
        return Err(GraphError::UnknownDoc(root.clone()));
    }
    if let Some(cycle) = detect_cycles(graph).into_iter().next() {
        return Err(GraphError::CyclicGraph(cycle[0].clone()));
    }
    let adj = graph.adjacency();
    let mut seen = BTreeSet::new();
    let mut stack = alloc::vec![root];
    while let Some(node) = stack.pop() {
        for &next in &adj[node] {
            if seen.insert(next.clone()) {
                stack.push(next);
            }
        }
    }
    seen.remove(root);
    Ok(seen)
}
