//! Finite substrates: cycles, regular-tree balls and random-tree balls.
//!
//! Tree balls are rooted at vertex 0 and built breadth first, so vertex ids
//! increase with depth. Leaves at the boundary depth have an artificially low
//! degree; measurements use only the `interior`, the vertices within
//! `radius - buffer` of the root.

use std::collections::VecDeque;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::degree::DegreeDistribution;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("cycle needs at least 5 vertices, got {0}")]
    CycleTooSmall(usize),
    #[error("degree {0} is below 2")]
    DegreeTooSmall(u32),
    #[error("radius {radius} must exceed buffer {buffer}")]
    RadiusTooSmall { radius: u32, buffer: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Cycle,
    RegularBall,
    RandomBall,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphInstance {
    pub kind: GraphKind,
    pub adjacency: Vec<Vec<u32>>,
    /// Root vertex, trees only.
    pub root: Option<u32>,
    /// Distance from the root, trees only.
    pub depth: Option<Vec<u32>>,
    /// Measurement vertices, ascending.
    pub interior: Vec<u32>,
}

impl GraphInstance {
    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, v: u32) -> usize {
        self.adjacency[v as usize].len()
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adjacency[v as usize]
    }

    /// Connected with `|E| = |V| - 1`.
    pub fn is_tree(&self) -> bool {
        let n = self.vertex_count();
        if n == 0 || self.edge_count() + 1 != n {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0u32];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in self.neighbors(v) {
                if !seen[u as usize] {
                    seen[u as usize] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == n
    }

    /// Symmetric adjacency, no self-loops, no repeated edges.
    pub fn is_simple(&self) -> bool {
        self.adjacency.iter().enumerate().all(|(v, nbrs)| {
            let mut sorted = nbrs.clone();
            sorted.sort_unstable();
            sorted.dedup();
            sorted.len() == nbrs.len()
                && nbrs.iter().all(|&u| {
                    u as usize != v && self.adjacency[u as usize].contains(&(v as u32))
                })
        })
    }

    /// Adjacency list dump for debugging.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }
}

pub fn build_cycle(n: usize) -> Result<GraphInstance, GraphError> {
    if n < 5 {
        return Err(GraphError::CycleTooSmall(n));
    }
    let adjacency = (0..n)
        .map(|i| vec![((i + n - 1) % n) as u32, ((i + 1) % n) as u32])
        .collect();
    Ok(GraphInstance {
        kind: GraphKind::Cycle,
        adjacency,
        root: None,
        depth: None,
        interior: (0..n as u32).collect(),
    })
}

/// Ball of radius `radius` in the regular tree `T_d`.
pub fn build_regular_ball(d: u32, radius: u32, buffer: u32) -> Result<GraphInstance, GraphError> {
    if d < 2 {
        return Err(GraphError::DegreeTooSmall(d));
    }
    check_radius(radius, buffer)?;
    let mut ball = grow_ball(radius, |_| d);
    ball.kind = GraphKind::RegularBall;
    ball.interior = interior_of(ball.depth.as_deref().unwrap_or(&[]), radius - buffer);
    Ok(ball)
}

/// Ball of a Galton–Watson type tree: the root has `D₀ ~ ℚ` neighbors and
/// every other vertex short of the boundary has `D − 1` children, `D ~ ℚ`
/// drawn independently. Deterministic in `seed`.
pub fn build_random_ball(
    dist: &DegreeDistribution,
    radius: u32,
    buffer: u32,
    seed: u64,
) -> Result<GraphInstance, GraphError> {
    check_radius(radius, buffer)?;
    let degrees: Vec<u32> = dist.atoms().iter().map(|(k, _)| *k).collect();
    let sampler = WeightedIndex::new(dist.float_weights()).expect("validated weights");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ball = grow_ball(radius, |_| degrees[sampler.sample(&mut rng)]);
    ball.kind = GraphKind::RandomBall;
    ball.interior = interior_of(ball.depth.as_deref().unwrap_or(&[]), radius - buffer);
    Ok(ball)
}

fn check_radius(radius: u32, buffer: u32) -> Result<(), GraphError> {
    if radius < buffer + 1 {
        return Err(GraphError::RadiusTooSmall { radius, buffer });
    }
    Ok(())
}

fn interior_of(depth: &[u32], max_depth: u32) -> Vec<u32> {
    (0..depth.len() as u32).filter(|&v| depth[v as usize] <= max_depth).collect()
}

/// Breadth-first growth; `degree_of(v)` is queried once per vertex with depth
/// below `radius`, in vertex order.
fn grow_ball(radius: u32, mut degree_of: impl FnMut(u32) -> u32) -> GraphInstance {
    let mut adjacency: Vec<Vec<u32>> = vec![Vec::new()];
    let mut depth = vec![0u32];
    let mut queue = VecDeque::from([0u32]);
    while let Some(v) = queue.pop_front() {
        let dv = depth[v as usize];
        if dv == radius {
            continue;
        }
        let deg = degree_of(v);
        let children = if v == 0 { deg } else { deg - 1 };
        for _ in 0..children {
            let u = adjacency.len() as u32;
            adjacency.push(vec![v]);
            adjacency[v as usize].push(u);
            depth.push(dv + 1);
            queue.push_back(u);
        }
    }
    GraphInstance {
        kind: GraphKind::RegularBall,
        adjacency,
        root: Some(0),
        depth: Some(depth),
        interior: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exppoly::rat;

    #[test]
    fn cycles() {
        let g = build_cycle(5).unwrap();
        assert_eq!(g.vertex_count(), 5);
        assert!((0..5).all(|v| g.degree(v) == 2));
        let g = build_cycle(1000).unwrap();
        assert_eq!(g.edge_count(), 1000);
        assert!(g.is_simple());
        assert_eq!(g.interior.len(), 1000);
        assert_eq!(build_cycle(3), Err(GraphError::CycleTooSmall(3)));
    }

    #[test]
    fn regular_ball_sizes() {
        let g = build_regular_ball(3, 2, 0).unwrap();
        assert_eq!(g.vertex_count(), 10);
        assert!(g.is_tree() && g.is_simple());
        let depth = g.depth.as_ref().unwrap();
        for v in 0..g.vertex_count() as u32 {
            let expected = if depth[v as usize] < 2 { 3 } else { 1 };
            assert_eq!(g.degree(v), expected);
        }

        let path = build_regular_ball(2, 4, 1).unwrap();
        assert_eq!(path.vertex_count(), 9);
        assert_eq!(path.interior.len(), 7);
        assert_eq!(build_regular_ball(1, 2, 0), Err(GraphError::DegreeTooSmall(1)));
        assert!(matches!(build_regular_ball(3, 2, 2), Err(GraphError::RadiusTooSmall { .. })));
    }

    #[test]
    fn degenerate_random_ball_is_regular() {
        let d2 = DegreeDistribution::regular(2).unwrap();
        let random = build_random_ball(&d2, 4, 1, 99).unwrap();
        let regular = build_regular_ball(2, 4, 1).unwrap();
        assert_eq!(random.adjacency, regular.adjacency);
        assert_eq!(random.interior, regular.interior);
    }

    #[test]
    fn random_ball_is_deterministic_tree() {
        let dist = DegreeDistribution::new(vec![(2, rat(1, 2)), (3, rat(1, 2))]).unwrap();
        let a = build_random_ball(&dist, 6, 2, 5).unwrap();
        let b = build_random_ball(&dist, 6, 2, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.is_tree() && a.is_simple());
        let depth = a.depth.as_ref().unwrap();
        assert!(a.interior.iter().all(|&v| depth[v as usize] <= 4));
        for v in 1..a.vertex_count() as u32 {
            let d = depth[v as usize];
            let deg = a.degree(v);
            if d < 6 {
                assert!(deg == 2 || deg == 3);
            } else {
                assert_eq!(deg, 1);
            }
        }
    }

    #[test]
    fn json_dump_has_adjacency() {
        let g = build_cycle(5).unwrap();
        let json = g.to_json();
        assert!(json.contains("\"adjacency\":[[4,1],[0,2]"));
        assert!(json.contains("\"kind\":\"cycle\""));
    }
}
