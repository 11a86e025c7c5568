use super::grid::Grid;

/// Exact inverse of the Hessian of `Σ_c vol·|Du_c|²` on interior nodes.
///
/// With cell-averaged gradients the operator is `2·vol·Σ_j A_j ⊗ Π_{l≠j} B_l`
/// where, per axis, `A = tridiag(−1,2,−1)/h²` and `B = tridiag(¼,½,¼)`. Both
/// are diagonalized by the discrete sine basis, so the inverse is two sine
/// transforms and a diagonal scaling.
#[derive(Clone, Debug)]
pub(crate) struct DirichletPreconditioner {
    n: usize,
    nodes: usize,
    /// Interior nodes per axis.
    m: usize,
    /// Orthonormal, symmetric sine matrix, `m × m`.
    sine: Vec<f64>,
    /// Reciprocal eigenvalues, one per interior mode.
    inv_eig: Vec<f64>,
}

impl DirichletPreconditioner {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.dim();
        let nodes = grid.nodes_per_axis();
        let m = nodes - 2;
        let h = grid.spacing();
        let den = (m + 1) as f64;
        let norm = (2.0 / den).sqrt();
        let mut sine = vec![0.0; m * m];
        for i in 0..m {
            for k in 0..m {
                sine[i * m + k] = norm * (std::f64::consts::PI * ((i + 1) * (k + 1)) as f64 / den).sin();
            }
        }
        let theta = |k: usize| std::f64::consts::PI * (k + 1) as f64 / den;
        let a: Vec<f64> = (0..m).map(|k| 4.0 * (0.5 * theta(k)).sin().powi(2) / (h * h)).collect();
        let b: Vec<f64> = (0..m).map(|k| (0.5 * theta(k)).cos().powi(2)).collect();
        let total = m.pow(n as u32);
        let scale = 2.0 * grid.cell_volume();
        let inv_eig = (0..total)
            .map(|mut idx| {
                let ks: Vec<usize> = (0..n)
                    .map(|_| {
                        let k = idx % m;
                        idx /= m;
                        k
                    })
                    .collect();
                let lam: f64 =
                    (0..n).map(|j| a[ks[j]] * (0..n).filter(|&l| l != j).map(|l| b[ks[l]]).product::<f64>()).sum();
                1.0 / (scale * lam)
            })
            .collect();
        Self { n, nodes, m, sine, inv_eig }
    }

    /// Applies the symmetric sine matrix along every axis, in place.
    fn transform(&self, v: &mut [f64]) {
        let m = self.m;
        let mut line = vec![0.0; m];
        let mut stride = 1;
        for _ in 0..self.n {
            let block = stride * m;
            for start in (0..v.len()).step_by(block) {
                for off in 0..stride {
                    let base = start + off;
                    for (k, l) in line.iter_mut().enumerate() {
                        let row = &self.sine[k * m..(k + 1) * m];
                        *l = (0..m).map(|i| row[i] * v[base + i * stride]).sum();
                    }
                    for (i, l) in line.iter().enumerate() {
                        v[base + i * stride] = *l;
                    }
                }
            }
            stride *= m;
        }
    }

    /// `z = P⁻¹ r` on interior nodes; boundary entries of `z` are zero.
    pub fn apply(&self, r: &[f64]) -> Vec<f64> {
        let (n, nodes, m) = (self.n, self.nodes, self.m);
        let mut v = vec![0.0; m.pow(n as u32)];
        let full = |mut i: usize| {
            let mut idx = 0;
            let mut s = 1;
            for _ in 0..n {
                idx += (i % m + 1) * s;
                i /= m;
                s *= nodes;
            }
            idx
        };
        for (i, x) in v.iter_mut().enumerate() {
            *x = r[full(i)];
        }
        self.transform(&mut v);
        for (x, w) in v.iter_mut().zip(&self.inv_eig) {
            *x *= w;
        }
        self.transform(&mut v);
        let mut z = vec![0.0; r.len()];
        for (i, x) in v.iter().enumerate() {
            z[full(i)] = *x;
        }
        z
    }
}
