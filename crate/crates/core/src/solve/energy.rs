//! Midpoint-rule discrete energy and its exact gradient.
//!
//! Each cell contributes `vol · f(x_c, Du_c)`, where `x_c` is the cell centre
//! and `Du_c` averages the `2^{n-1}` edge differences along each axis.

use rayon::prelude::*;

use super::grid::{DiscreteField, Grid};
use crate::density::Density;
use crate::linalg::pairwise_sum;

/// Cell centre and cell gradient of every cell, in cell order.
pub(crate) struct CellStencil {
    pub centers: Vec<f64>,
    corners: Vec<usize>,
    n: usize,
    bases: Vec<usize>,
    inv: f64,
}

impl CellStencil {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.dim();
        let cells = grid.cell_count();
        let mut centers = Vec::with_capacity(cells * n);
        let mut bases = Vec::with_capacity(cells);
        for c in 0..cells {
            centers.extend(grid.cell_center(c));
            bases.push(grid.cell_base(c));
        }
        let inv = 1.0 / ((1usize << (n - 1)) as f64 * grid.spacing());
        Self { centers, corners: grid.corner_offsets(), n, bases, inv }
    }

    pub fn cells(&self) -> usize {
        self.bases.len()
    }

    #[inline]
    pub fn center(&self, cell: usize) -> &[f64] {
        &self.centers[cell * self.n..(cell + 1) * self.n]
    }

    #[inline]
    pub fn gradient(&self, values: &[f64], cell: usize, out: &mut [f64]) {
        let base = self.bases[cell];
        out.iter_mut().for_each(|o| *o = 0.0);
        for (b, off) in self.corners.iter().enumerate() {
            let v = values[base + off];
            for (j, o) in out.iter_mut().enumerate() {
                if b >> j & 1 == 1 {
                    *o += v;
                } else {
                    *o -= v;
                }
            }
        }
        for o in out.iter_mut() {
            *o *= self.inv;
        }
    }
}

pub(crate) fn energy_with<D: Density + ?Sized>(density: &D, grid: &Grid, st: &CellStencil, values: &[f64]) -> f64 {
    let n = grid.dim();
    let terms: Vec<f64> = (0..st.cells())
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |du, c| {
                st.gradient(values, c, du);
                density.value(st.center(c), du)
            },
        )
        .collect();
    grid.cell_volume() * pairwise_sum(&terms)
}

/// Energy and its gradient with respect to every nodal value; boundary
/// entries of the gradient are zero.
pub(crate) fn energy_and_gradient_with<D: Density + ?Sized>(
    density: &D,
    grid: &Grid,
    st: &CellStencil,
    values: &[f64],
    boundary: &[bool],
) -> (f64, Vec<f64>) {
    let n = grid.dim();
    // per cell: energy term followed by f_ξ
    let mut per_cell = vec![0.0; st.cells() * (n + 1)];
    per_cell.par_chunks_mut(n + 1).enumerate().for_each_init(
        || vec![0.0; n],
        |du, (c, out)| {
            st.gradient(values, c, du);
            out[0] = density.value(st.center(c), du);
            density.gradient(st.center(c), du, &mut out[1..]);
        },
    );
    let vol = grid.cell_volume();
    let scale = vol * st.inv;
    let mut grad = vec![0.0; values.len()];
    let mut terms = Vec::with_capacity(st.cells());
    for (c, row) in per_cell.chunks(n + 1).enumerate() {
        terms.push(row[0]);
        let g = &row[1..];
        let base = st.bases[c];
        for (b, off) in st.corners.iter().enumerate() {
            let mut s = 0.0;
            for (j, gj) in g.iter().enumerate() {
                if b >> j & 1 == 1 {
                    s += gj;
                } else {
                    s -= gj;
                }
            }
            grad[base + off] += scale * s;
        }
    }
    for (g, b) in grad.iter_mut().zip(boundary) {
        if *b {
            *g = 0.0;
        }
    }
    (vol * pairwise_sum(&terms), grad)
}

/// `Σ_cells vol·f(x_c, Du_c)`.
pub fn discrete_energy<D: Density + ?Sized>(density: &D, field: &DiscreteField) -> f64 {
    let st = CellStencil::new(field.grid());
    energy_with(density, field.grid(), &st, field.values())
}

/// Partial derivatives of [`discrete_energy`] in the nodal values; zero at
/// boundary nodes.
pub fn discrete_energy_gradient<D: Density + ?Sized>(density: &D, field: &DiscreteField) -> Vec<f64> {
    let st = CellStencil::new(field.grid());
    energy_and_gradient_with(density, field.grid(), &st, field.values(), field.boundary_mask()).1
}

/// Cell gradients `Du_c`, row-major `cells × n`.
pub fn cell_gradients(field: &DiscreteField) -> Vec<f64> {
    let st = CellStencil::new(field.grid());
    let n = field.grid().dim();
    let mut out = vec![0.0; st.cells() * n];
    for (c, chunk) in out.chunks_mut(n).enumerate() {
        st.gradient(field.values(), c, chunk);
    }
    out
}
