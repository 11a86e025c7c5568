use crate::density::{Domain, Shape};
use crate::error::{Error, Result};

/// Tensor grid of `N` nodes per axis on an axis-aligned box, boundary ring
/// included. Node `(i₀, …, i_{n-1})` has linear index `Σ i_j N^j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    domain: Domain,
    nodes: usize,
    spacing: f64,
    lower: Vec<f64>,
}

impl Grid {
    pub fn new(domain: Domain, nodes: usize) -> Result<Self> {
        if domain.shape() != Shape::Box {
            return Err(Error::InvalidGrid("grids live on axis-aligned boxes".into()));
        }
        if nodes < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 nodes per axis, got {nodes}")));
        }
        let spacing = 2.0 * domain.extent() / (nodes - 1) as f64;
        let lower = domain.bounding_box().0;
        Ok(Self { domain, nodes, spacing, lower })
    }

    /// `[-half, half]ⁿ` with `nodes` per axis.
    pub fn cube(n: usize, half: f64, nodes: usize) -> Result<Self> {
        Self::new(Domain::cube(n, half), nodes)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.nodes.pow(self.dim() as u32)
    }

    pub fn cell_count(&self) -> usize {
        (self.nodes - 1).pow(self.dim() as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim() as i32)
    }

    /// Coordinate of the node on one axis.
    #[inline]
    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        if i == self.nodes - 1 {
            // land exactly on the upper face
            self.lower[axis] + 2.0 * self.domain.extent()
        } else {
            self.lower[axis] + i as f64 * self.spacing
        }
    }

    pub fn multi_index(&self, mut idx: usize) -> Vec<usize> {
        (0..self.dim())
            .map(|_| {
                let i = idx % self.nodes;
                idx /= self.nodes;
                i
            })
            .collect()
    }

    pub fn linear_index(&self, multi: &[usize]) -> usize {
        multi.iter().rev().fold(0, |acc, &i| acc * self.nodes + i)
    }

    pub fn coord(&self, idx: usize) -> Vec<f64> {
        self.multi_index(idx).iter().enumerate().map(|(a, &i)| self.axis_coord(a, i)).collect()
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.multi_index(idx).iter().any(|&i| i == 0 || i == self.nodes - 1)
    }

    /// Linear index of the lower corner node of a cell.
    pub(crate) fn cell_base(&self, mut cell: usize) -> usize {
        let m = self.nodes - 1;
        let mut base = 0;
        let mut stride = 1;
        for _ in 0..self.dim() {
            base += (cell % m) * stride;
            cell /= m;
            stride *= self.nodes;
        }
        base
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        let mut c = self.coord(self.cell_base(cell));
        for v in c.iter_mut() {
            *v += 0.5 * self.spacing;
        }
        c
    }

    /// Linear offsets of the `2ⁿ` corners of a cell, corner `b` having bit
    /// `j` set when it sits on the upper side along axis `j`.
    pub(crate) fn corner_offsets(&self) -> Vec<usize> {
        let n = self.dim();
        (0..1usize << n)
            .map(|b| {
                let mut off = 0;
                let mut stride = 1;
                for j in 0..n {
                    if b >> j & 1 == 1 {
                        off += stride;
                    }
                    stride *= self.nodes;
                }
                off
            })
            .collect()
    }
}

/// Nodal values on a grid; boundary nodes carry the Dirichlet data.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteField {
    grid: Grid,
    values: Vec<f64>,
    boundary: Vec<bool>,
}

impl DiscreteField {
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let count = grid.node_count();
        let values = (0..count).map(|i| f(&grid.coord(i))).collect();
        let boundary = (0..count).map(|i| grid.is_boundary(i)).collect();
        Self { grid, values, boundary }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidGrid(format!("expected {} values, got {}", grid.node_count(), values.len())));
        }
        let boundary = (0..values.len()).map(|i| grid.is_boundary(i)).collect();
        Ok(Self { grid, values, boundary })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    /// Same boundary data, new interior values.
    pub fn with_interior(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::InvalidGrid("value count mismatch".into()));
        }
        let values = values.into_iter().zip(&self.values).zip(&self.boundary).map(|((v, o), b)| if *b { *o } else { v }).collect();
        Ok(Self { grid: self.grid.clone(), values, boundary: self.boundary.clone() })
    }

    /// The sub-field on the nodes lying in `target`, which must be a box
    /// whose faces fall on grid lines.
    pub fn restrict(&self, target: &Domain) -> Result<DiscreteField> {
        let g = &self.grid;
        let n = g.dim();
        if target.shape() != Shape::Box || target.dim() != n {
            return Err(Error::InvalidGrid("restriction target must be a box of the same dimension".into()));
        }
        let (lo, hi) = target.bounding_box();
        let mut first = Vec::with_capacity(n);
        let mut count = None;
        for a in 0..n {
            let i0 = (lo[a] - g.lower[a]) / g.spacing;
            let i1 = (hi[a] - g.lower[a]) / g.spacing;
            let (r0, r1) = (i0.round(), i1.round());
            if (i0 - r0).abs() > 1e-6 || (i1 - r1).abs() > 1e-6 || r0 < 0.0 || r1 > (g.nodes - 1) as f64 {
                return Err(Error::InvalidGrid(format!("target face on axis {} is not a grid line inside the grid", a + 1)));
            }
            let c = (r1 - r0) as usize + 1;
            if count.is_some_and(|k| k != c) {
                return Err(Error::InvalidGrid("target must be a cube in grid units".into()));
            }
            count = Some(c);
            first.push(r0 as usize);
        }
        let sub = Grid::new(target.clone(), count.unwrap_or(0))?;
        let values = (0..sub.node_count())
            .map(|i| {
                let m: Vec<usize> = sub.multi_index(i).iter().zip(&first).map(|(a, b)| a + b).collect();
                self.values[g.linear_index(&m)]
            })
            .collect();
        DiscreteField::from_values(sub, values)
    }

    pub fn sup_distance(&self, other: &DiscreteField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Discrete L² distance (nodal sum times cell volume).
    pub fn l2_distance(&self, other: &DiscreteField) -> f64 {
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b) * (a - b)).sum();
        (s * self.grid.cell_volume()).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_round_trips() {
        let g = Grid::cube(3, 1.0, 5).unwrap();
        for i in [0, 7, 62, 124] {
            assert_eq!(g.linear_index(&g.multi_index(i)), i);
        }
        assert_eq!(g.coord(124), vec![1.0, 1.0, 1.0]);
        assert!(g.is_boundary(0) && !g.is_boundary(g.linear_index(&[1, 2, 3])));
        assert_eq!(g.cell_count(), 64);
        assert_eq!(g.cell_center(0), vec![-0.75, -0.75, -0.75]);
    }

    #[test]
    fn rejects_small_or_round_grids() {
        assert!(Grid::cube(2, 1.0, 2).is_err());
        assert!(Grid::new(Domain::ball(2, 1.0), 5).is_err());
    }

    #[test]
    fn restriction_picks_inner_nodes() {
        let g = Grid::cube(2, 1.0, 9).unwrap();
        let u = DiscreteField::from_fn(g, |x| x[0] + 10.0 * x[1]);
        let r = u.restrict(&Domain::cube(2, 0.5)).unwrap();
        assert_eq!(r.grid().nodes_per_axis(), 5);
        assert_eq!(r.values()[0], -0.5 - 5.0);
        assert!(u.restrict(&Domain::cube(2, 0.3)).is_err());
    }
}
