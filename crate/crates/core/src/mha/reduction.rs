use super::MhaError;
use crate::geometry::BoundaryLoop;
use crate::Vec2;

/// Boundary parametrization by every `stride`-th node of the boundary loop,
/// starting at the loop's first node. The remaining nodes follow by linear
/// interpolation in arc length between the neighbouring retained nodes,
/// wrapping around the closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReduction {
    stride: usize,
    loop_len: usize,
    retained: Vec<usize>,
    /// Per loop position: left retained slot, right retained slot, weight of
    /// the right one.
    weights: Vec<(usize, usize, f64)>,
}

impl BoundaryReduction {
    pub fn new(boundary: &BoundaryLoop, stride: usize) -> Result<Self, MhaError> {
        let n = boundary.len();
        if stride == 0 || n < 2 * stride {
            return Err(MhaError::StrideTooLarge { stride, nodes: n });
        }
        let retained: Vec<usize> = (0..n).step_by(stride).collect();
        let m = retained.len();
        let arc = &boundary.arc_length;
        let weights = (0..n)
            .map(|p| {
                let slot = p / stride;
                if p % stride == 0 {
                    return (slot, slot, 0.0);
                }
                let next = (slot + 1) % m;
                let a = arc[retained[slot]];
                let b = if next == 0 {
                    boundary.perimeter
                } else {
                    arc[retained[next]]
                };
                (slot, next, (arc[p] - a) / (b - a))
            })
            .collect();
        Ok(BoundaryReduction {
            stride,
            loop_len: n,
            retained,
            weights,
        })
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    /// Loop positions of the retained nodes.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn reduced_len(&self) -> usize {
        self.retained.len()
    }

    pub fn full_len(&self) -> usize {
        self.loop_len
    }

    /// Values at the retained nodes.
    pub fn reduce(&self, full: &[Vec2]) -> Vec<Vec2> {
        self.retained.iter().map(|&p| full[p]).collect()
    }

    /// Values at every loop node.
    pub fn expand(&self, reduced: &[Vec2]) -> Vec<Vec2> {
        self.weights
            .iter()
            .map(|&(a, b, w)| {
                if w == 0.0 {
                    reduced[a]
                } else {
                    let (ua, ub) = (reduced[a], reduced[b]);
                    [ua[0] + w * (ub[0] - ua[0]), ua[1] + w * (ub[1] - ua[1])]
                }
            })
            .collect()
    }
}
