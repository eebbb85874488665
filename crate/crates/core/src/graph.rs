//! Undirected feedback graphs and clique covers.
//!
//! Every arm is implicitly adjacent to itself, so playing arm `i` always
//! reveals at least `i`'s own loss. A [`CliqueCover`] partitions the arms into
//! cliques `V_1..V_K`; the learner and the regularizer both work at the level of
//! these cliques.

use rand::Rng;

use crate::error::{CoverViolation, Error, Result};

/// Largest graph accepted by [`exact_min_cover`].
pub const EXACT_COVER_LIMIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackGraph {
    num_arms: usize,
    // Row-major N x N, symmetric, diagonal always set.
    adjacency: Vec<bool>,
}

impl FeedbackGraph {
    /// Graph with self-loops only.
    pub fn edgeless(num_arms: usize) -> Result<Self> {
        if num_arms == 0 {
            return Err(Error::Domain("a feedback graph needs at least one arm".into()));
        }
        let mut adjacency = vec![false; num_arms * num_arms];
        for i in 0..num_arms {
            adjacency[i * num_arms + i] = true;
        }
        Ok(Self { num_arms, adjacency })
    }

    pub fn complete(num_arms: usize) -> Result<Self> {
        let mut g = Self::edgeless(num_arms)?;
        g.adjacency.iter_mut().for_each(|a| *a = true);
        Ok(g)
    }

    pub fn from_edges(num_arms: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::edgeless(num_arms)?;
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    /// Cycle `0 - 1 - ... - (n-1) - 0`.
    pub fn cycle(num_arms: usize) -> Result<Self> {
        let mut g = Self::edgeless(num_arms)?;
        for i in 0..num_arms {
            g.add_edge(i, (i + 1) % num_arms)?;
        }
        Ok(g)
    }

    /// Disjoint union of complete graphs with the given sizes, numbered consecutively.
    pub fn disjoint_cliques(sizes: &[usize]) -> Result<Self> {
        if sizes.contains(&0) {
            return Err(Error::Domain("clique sizes must be positive".into()));
        }
        let n = sizes.iter().sum();
        let mut g = Self::edgeless(n)?;
        let mut start = 0;
        for &s in sizes {
            for i in start..start + s {
                for j in i + 1..start + s {
                    g.add_edge(i, j)?;
                }
            }
            start += s;
        }
        Ok(g)
    }

    /// Erdős–Rényi graph: each unordered pair is an edge with probability `edge_prob`.
    pub fn erdos_renyi<R: Rng + ?Sized>(num_arms: usize, edge_prob: f64, rng: &mut R) -> Result<Self> {
        if !(0.0..=1.0).contains(&edge_prob) {
            return Err(Error::Domain(format!("edge probability {edge_prob} not in [0,1]")));
        }
        let mut g = Self::edgeless(num_arms)?;
        for i in 0..num_arms {
            for j in i + 1..num_arms {
                if rng.gen::<f64>() < edge_prob {
                    g.add_edge(i, j)?;
                }
            }
        }
        Ok(g)
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        let n = self.num_arms;
        for a in [i, j] {
            if a >= n {
                return Err(Error::Index { index: a, len: n });
            }
        }
        self.adjacency[i * n + j] = true;
        self.adjacency[j * n + i] = true;
        Ok(())
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    /// Adjacency query; `i` is always adjacent to itself. Out-of-range arms are never adjacent.
    pub fn is_adjacent(&self, i: usize, j: usize) -> bool {
        i < self.num_arms && j < self.num_arms && self.adjacency[i * self.num_arms + j]
    }

    /// Observation set `N(i)` in increasing order, including `i`.
    pub fn neighbors(&self, i: usize) -> Result<Vec<usize>> {
        if i >= self.num_arms {
            return Err(Error::Index { index: i, len: self.num_arms });
        }
        Ok((0..self.num_arms).filter(|&j| self.is_adjacent(i, j)).collect())
    }

    /// Undirected edges `(i, j)` with `i < j`; self-loops omitted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.num_arms;
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.adjacency[i * n + j] {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Partition of the arms into cliques.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliqueCover {
    cliques: Vec<Vec<usize>>,
    arm_to_clique: Vec<usize>,
}

impl CliqueCover {
    /// Builds a cover over `num_arms` arms, checking only that `cliques` is a
    /// partition. Use [`validate_cover`] to check it against a graph. Members of each
    /// clique are stored sorted.
    pub fn new(num_arms: usize, cliques: Vec<Vec<usize>>) -> Result<Self> {
        let mut arm_to_clique = vec![usize::MAX; num_arms];
        let mut cliques = cliques;
        for (k, clique) in cliques.iter_mut().enumerate() {
            if clique.is_empty() {
                return Err(CoverViolation::EmptyClique(k).into());
            }
            clique.sort_unstable();
            for &i in clique.iter() {
                if i >= num_arms {
                    return Err(CoverViolation::OutOfRange(i).into());
                }
                if arm_to_clique[i] != usize::MAX {
                    return Err(CoverViolation::Duplicate(i).into());
                }
                arm_to_clique[i] = k;
            }
        }
        if let Some(i) = arm_to_clique.iter().position(|&k| k == usize::MAX) {
            return Err(CoverViolation::Uncovered(i).into());
        }
        Ok(Self { cliques, arm_to_clique })
    }

    /// One singleton clique per arm.
    pub fn singletons(num_arms: usize) -> Self {
        Self {
            cliques: (0..num_arms).map(|i| vec![i]).collect(),
            arm_to_clique: (0..num_arms).collect(),
        }
    }

    /// Consecutive blocks with the given sizes.
    pub fn blocks(sizes: &[usize]) -> Result<Self> {
        let mut start = 0;
        let mut cliques = Vec::with_capacity(sizes.len());
        for &s in sizes {
            cliques.push((start..start + s).collect());
            start += s;
        }
        Self::new(start, cliques)
    }

    pub fn num_arms(&self) -> usize {
        self.arm_to_clique.len()
    }

    /// Number of cliques `K`.
    pub fn len(&self) -> usize {
        self.cliques.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cliques.is_empty()
    }

    pub fn cliques(&self) -> &[Vec<usize>] {
        &self.cliques
    }

    pub fn clique(&self, k: usize) -> &[usize] {
        &self.cliques[k]
    }

    /// Index of the clique containing `arm`.
    pub fn clique_of(&self, arm: usize) -> Result<usize> {
        self.arm_to_clique
            .get(arm)
            .copied()
            .ok_or(Error::Index { index: arm, len: self.num_arms() })
    }

    /// Same as [`clique_of`](Self::clique_of) for arms known to be in range.
    pub(crate) fn clique_of_unchecked(&self, arm: usize) -> usize {
        self.arm_to_clique[arm]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.cliques.iter().map(Vec::len).collect()
    }
}

/// Checks that `cover` partitions the arms of `graph` into cliques of `graph`.
///
/// Reports the first violation: pairs are scanned clique by clique in
/// increasing index order.
pub fn validate_cover(graph: &FeedbackGraph, cover: &CliqueCover) -> Result<()> {
    if graph.num_arms() != cover.num_arms() {
        return Err(Error::Dimension { expected: graph.num_arms(), got: cover.num_arms() });
    }
    let mut seen = vec![false; graph.num_arms()];
    for clique in cover.cliques() {
        for (a, &i) in clique.iter().enumerate() {
            if seen[i] {
                return Err(CoverViolation::Duplicate(i).into());
            }
            seen[i] = true;
            for &j in &clique[a + 1..] {
                if !graph.is_adjacent(i, j) {
                    return Err(CoverViolation::NotAdjacent(i, j).into());
                }
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(CoverViolation::Uncovered(i).into());
    }
    Ok(())
}

/// Greedy cover: grow a clique from the lowest-index uncovered arm by adding
/// the lowest-index uncovered neighbor compatible with every member so far.
pub fn greedy_clique_cover(graph: &FeedbackGraph) -> CliqueCover {
    let n = graph.num_arms();
    let mut covered = vec![false; n];
    let mut cliques = Vec::new();
    for seed in 0..n {
        if covered[seed] {
            continue;
        }
        covered[seed] = true;
        let mut clique = vec![seed];
        for cand in seed + 1..n {
            if !covered[cand] && clique.iter().all(|&m| graph.is_adjacent(m, cand)) {
                covered[cand] = true;
                clique.push(cand);
            }
        }
        cliques.push(clique);
    }
    CliqueCover::new(n, cliques).expect("greedy construction yields a partition")
}

/// Minimum clique cover by exhaustive search over set partitions.
///
/// Partitions are enumerated as restricted growth strings (arm `i` joins one of
/// the existing cliques, in order, or opens the next one), for `K = 1, 2, ...`,
/// so the first hit has minimum `K` and is lexicographically smallest among those.
pub fn exact_min_cover(graph: &FeedbackGraph) -> Result<CliqueCover> {
    let n = graph.num_arms();
    if n > EXACT_COVER_LIMIT {
        return Err(Error::SizeLimit { what: "number of arms", got: n, limit: EXACT_COVER_LIMIT });
    }
    for k in 1..=n {
        let mut cliques: Vec<Vec<usize>> = Vec::with_capacity(k);
        if assign(graph, 0, k, &mut cliques) {
            return CliqueCover::new(n, cliques);
        }
    }
    unreachable!("the singleton partition is always a valid cover")
}

fn assign(graph: &FeedbackGraph, arm: usize, max_cliques: usize, cliques: &mut Vec<Vec<usize>>) -> bool {
    let n = graph.num_arms();
    if arm == n {
        return true;
    }
    for c in 0..cliques.len() {
        if cliques[c].iter().all(|&m| graph.is_adjacent(m, arm)) {
            cliques[c].push(arm);
            if assign(graph, arm + 1, max_cliques, cliques) {
                return true;
            }
            cliques[c].pop();
        }
    }
    if cliques.len() < max_cliques {
        cliques.push(vec![arm]);
        if assign(graph, arm + 1, max_cliques, cliques) {
            return true;
        }
        cliques.pop();
    }
    false
}

/// Contents of a graph file: the graph and, when `clique` lines are present, a cover.
#[derive(Debug, Clone)]
pub struct GraphDocument {
    pub graph: FeedbackGraph,
    pub cover: Option<CliqueCover>,
}

/// Parses the line-oriented graph format:
///
/// ```text
/// # comment
/// n = 4
/// edge 0 1
/// edge 2 3
/// clique 0 1
/// clique 2 3
/// ```
///
/// `n` must come before any `edge` or `clique` line. Tokens are separated by
/// whitespace, `#` starts a comment that runs to the end of the line.
/// If any `clique` line is present the cliques must partition the arms.
pub fn parse_graph(text: &str) -> Result<GraphDocument> {
    let mut graph: Option<FeedbackGraph> = None;
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse { line: line_no, message };
        let spaced = line.replace('=', " = ");
        let tokens: Vec<&str> = spaced.split_whitespace().collect();
        let index = |tok: &str| -> Result<usize> {
            tok.parse::<usize>().map_err(|_| parse_err(format!("expected arm index, found `{tok}`")))
        };
        match tokens[0] {
            "n" => {
                if graph.is_some() {
                    return Err(parse_err("duplicate `n` line".into()));
                }
                if tokens.len() != 3 || tokens[1] != "=" {
                    return Err(parse_err("expected `n = <N>`".into()));
                }
                let n = index(tokens[2])?;
                graph = Some(FeedbackGraph::edgeless(n).map_err(|e| parse_err(e.to_string()))?);
            }
            "edge" => {
                let g = graph.as_mut().ok_or_else(|| parse_err("`edge` before `n`".into()))?;
                if tokens.len() != 3 {
                    return Err(parse_err("expected `edge <i> <j>`".into()));
                }
                let (i, j) = (index(tokens[1])?, index(tokens[2])?);
                g.add_edge(i, j).map_err(|e| parse_err(e.to_string()))?;
            }
            "clique" => {
                if graph.is_none() {
                    return Err(parse_err("`clique` before `n`".into()));
                }
                if tokens.len() < 2 {
                    return Err(parse_err("empty clique".into()));
                }
                cliques.push(tokens[1..].iter().map(|t| index(t)).collect::<Result<_>>()?);
            }
            other => return Err(parse_err(format!("unknown directive `{other}`"))),
        }
    }
    let graph = graph.ok_or(Error::Parse { line: 0, message: "missing `n = <N>` line".into() })?;
    let cover = if cliques.is_empty() {
        None
    } else {
        Some(CliqueCover::new(graph.num_arms(), cliques)?)
    };
    Ok(GraphDocument { graph, cover })
}

/// Writes a graph (and optionally a cover) in the format read by [`parse_graph`].
pub fn write_graph(graph: &FeedbackGraph, cover: Option<&CliqueCover>) -> String {
    let mut out = format!("n = {}\n", graph.num_arms());
    for (i, j) in graph.edges() {
        out.push_str(&format!("edge {i} {j}\n"));
    }
    if let Some(cover) = cover {
        for clique in cover.cliques() {
            let members: Vec<String> = clique.iter().map(ToString::to_string).collect();
            out.push_str(&format!("clique {}\n", members.join(" ")));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn validate_examples() {
        let complete = FeedbackGraph::complete(4).unwrap();
        let one = CliqueCover::new(4, vec![vec![0, 1, 2, 3]]).unwrap();
        assert!(validate_cover(&complete, &one).is_ok());

        let edgeless = FeedbackGraph::edgeless(3).unwrap();
        assert!(validate_cover(&edgeless, &CliqueCover::singletons(3)).is_ok());

        let bad = CliqueCover::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        match validate_cover(&edgeless, &bad) {
            Err(Error::InvalidCover(CoverViolation::NotAdjacent(0, 1))) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validate_dimension_mismatch() {
        let g = FeedbackGraph::edgeless(3).unwrap();
        let c = CliqueCover::singletons(4);
        assert!(matches!(validate_cover(&g, &c), Err(Error::Dimension { .. })));
    }

    #[test]
    fn cover_construction_reports_partition_errors() {
        assert!(matches!(
            CliqueCover::new(3, vec![vec![0, 1]]),
            Err(Error::InvalidCover(CoverViolation::Uncovered(2)))
        ));
        assert!(matches!(
            CliqueCover::new(3, vec![vec![0, 1], vec![1, 2]]),
            Err(Error::InvalidCover(CoverViolation::Duplicate(1)))
        ));
        assert!(matches!(
            CliqueCover::new(2, vec![vec![0, 5]]),
            Err(Error::InvalidCover(CoverViolation::OutOfRange(5)))
        ));
    }

    #[test]
    fn greedy_examples() {
        assert_eq!(greedy_clique_cover(&FeedbackGraph::complete(5).unwrap()).len(), 1);
        assert_eq!(greedy_clique_cover(&FeedbackGraph::edgeless(5).unwrap()).len(), 5);
        let triangles = FeedbackGraph::disjoint_cliques(&[3, 3]).unwrap();
        let greedy = greedy_clique_cover(&triangles);
        assert_eq!(greedy.len(), 2);
        assert_eq!(exact_min_cover(&triangles).unwrap().len(), greedy.len());
    }

    #[test]
    fn exact_examples() {
        assert_eq!(exact_min_cover(&FeedbackGraph::cycle(5).unwrap()).unwrap().len(), 3);
        // K_{2,2} on parts {0,1} and {2,3}.
        let k22 = FeedbackGraph::from_edges(4, &[(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        let cover = exact_min_cover(&k22).unwrap();
        assert_eq!(cover.len(), 2);
        assert_eq!(cover.cliques(), &[vec![0, 2], vec![1, 3]]);
        assert_eq!(exact_min_cover(&FeedbackGraph::edgeless(1).unwrap()).unwrap().len(), 1);
        assert!(matches!(
            exact_min_cover(&FeedbackGraph::edgeless(13).unwrap()),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn clique_of_examples() {
        let cover = CliqueCover::new(3, vec![vec![0, 1], vec![2]]).unwrap();
        assert_eq!(cover.clique_of(1).unwrap(), 0);
        assert_eq!(cover.clique_of(2).unwrap(), 1);
        assert_eq!(CliqueCover::singletons(1).clique_of(0).unwrap(), 0);
        assert!(matches!(cover.clique_of(3), Err(Error::Index { .. })));
    }

    #[test]
    fn neighbors_include_self() {
        let g = FeedbackGraph::from_edges(4, &[(0, 2)]).unwrap();
        assert_eq!(g.neighbors(0).unwrap(), vec![0, 2]);
        assert_eq!(g.neighbors(1).unwrap(), vec![1]);
        assert!(g.is_adjacent(2, 0));
    }

    #[test]
    fn parse_and_write_round_trip() {
        let text = "# two triangles\nn = 6\nedge 0 1\nedge 0 2 # inline\nedge 1 2\nedge 3 4\nedge 3 5\nedge 4 5\nclique 0 1 2\nclique 3 4 5\n";
        let doc = parse_graph(text).unwrap();
        assert_eq!(doc.graph, FeedbackGraph::disjoint_cliques(&[3, 3]).unwrap());
        let cover = doc.cover.unwrap();
        assert_eq!(cover.len(), 2);
        let again = parse_graph(&write_graph(&doc.graph, Some(&cover))).unwrap();
        assert_eq!(again.graph, doc.graph);
        assert_eq!(again.cover.unwrap(), cover);
        assert!(parse_graph("n=2\nedge 0 1\n").unwrap().graph.is_adjacent(0, 1));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        match parse_graph("n = 3\nedge 0 7\n") {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_graph("edge 0 1\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_graph("n = 2\nvertex 0\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_graph("# empty\n"), Err(Error::Parse { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn greedy_is_valid_and_exact_is_no_larger(n in 1usize..=10, p in 0.0f64..1.0, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = FeedbackGraph::erdos_renyi(n, p, &mut rng).unwrap();
            let greedy = greedy_clique_cover(&g);
            prop_assert!(validate_cover(&g, &greedy).is_ok());
            let exact = exact_min_cover(&g).unwrap();
            prop_assert!(validate_cover(&g, &exact).is_ok());
            prop_assert!(exact.len() <= greedy.len());
            for k in 0..greedy.len() {
                for &i in greedy.clique(k) {
                    prop_assert_eq!(greedy.clique_of(i).unwrap(), k);
                }
            }
        }
    }
}
