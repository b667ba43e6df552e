//! Frame-to-node conversion into directed cycle graphs.
//!
//! Node `i` has a single weighted-1 edge from node `i - 1`, and the last node
//! feeds node 0. Speech and pose graphs share this topology once aligned.

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Real};
use crate::signal::{FeatureSequence, PoseSequence};

#[derive(Clone, Debug, PartialEq)]
pub struct CycleGraph<T> {
    node_features: Matrix<T>,
}

impl<T: Real> CycleGraph<T> {
    pub fn new(node_features: Matrix<T>) -> Result<Self> {
        if node_features.rows() < 2 {
            return Err(Error::Input(format!(
                "a cycle graph needs at least 2 nodes, got {}",
                node_features.rows()
            )));
        }
        Ok(Self { node_features })
    }

    pub fn num_nodes(&self) -> usize {
        self.node_features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.node_features.cols()
    }

    pub fn node_features(&self) -> &Matrix<T> {
        &self.node_features
    }

    pub fn into_features(self) -> Matrix<T> {
        self.node_features
    }

    /// Sole in-neighbour of `node`.
    pub fn in_neighbor(&self, node: usize) -> usize {
        let m = self.num_nodes();
        (node + m - 1) % m
    }

    /// Sole out-neighbour of `node`.
    pub fn out_neighbor(&self, node: usize) -> usize {
        (node + 1) % self.num_nodes()
    }

    /// `(source, target)` pairs, one per node.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).map(|i| (i, self.out_neighbor(i)))
    }

    /// Row `v` holds the features of `v`'s in-neighbour.
    pub fn gather_in_neighbors(features: &Matrix<T>) -> Matrix<T> {
        features.roll_rows(1)
    }

    /// Adjoint of [`gather_in_neighbors`](Self::gather_in_neighbors).
    pub fn scatter_to_sources(grads: &Matrix<T>) -> Matrix<T> {
        grads.roll_rows(-1)
    }
}

/// Dense adjacency of the `m`-node cycle: `A[i, (i + 1) mod m] = 1`.
pub fn adjacency_matrix(m: usize) -> Result<Matrix<f64>> {
    if m < 2 {
        return Err(Error::Input(format!("adjacency needs at least 2 nodes, got {m}")));
    }
    Ok(Matrix::from_fn(m, m, |i, j| if j == (i + 1) % m { 1.0 } else { 0.0 }))
}

pub fn build_speech_graph<T: Real>(features: &FeatureSequence) -> Result<CycleGraph<T>> {
    CycleGraph::new(features.frames().cast())
}

pub fn build_pose_graph<T: Real>(pose: &PoseSequence) -> Result<CycleGraph<T>> {
    CycleGraph::new(pose.angles().cast())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_node_pattern() {
        let a = adjacency_matrix(4).unwrap();
        let ones: Vec<_> = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|&(i, j)| a.get(i, j) == 1.0)
            .collect();
        assert_eq!(ones, vec![(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert_eq!(a.as_slice().iter().sum::<f64>(), 4.0);
    }

    #[test]
    fn two_node_cycle() {
        assert_eq!(adjacency_matrix(2).unwrap().as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(matches!(adjacency_matrix(1), Err(Error::Input(_))));
        assert!(matches!(
            CycleGraph::<f32>::new(Matrix::zeros(1, 3)),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn neighbor_gather_follows_edges() {
        let g = CycleGraph::new(Matrix::from_fn(5, 1, |i, _| i as f64)).unwrap();
        let gathered = CycleGraph::gather_in_neighbors(g.node_features());
        for (src, dst) in g.edges() {
            assert_eq!(gathered.get(dst, 0), src as f64);
            assert_eq!(g.in_neighbor(dst), src);
        }
        let back = CycleGraph::scatter_to_sources(&gathered);
        assert_eq!(&back, g.node_features());
    }
}
