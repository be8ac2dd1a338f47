//! Tensor Chebyshev grids on cluster bounding boxes.

use nalgebra::DMatrix;

use crate::cluster_tree::BoundingBox;

#[derive(Debug, Clone)]
pub(crate) struct Grid {
    axes: Vec<Vec<f64>>,
    points: Vec<f64>,
}

impl Grid {
    /// `degree + 1` Chebyshev nodes per axis; a degenerate axis gets one.
    pub fn new(bbox: &BoundingBox, degree: usize) -> Self {
        let axes: Vec<Vec<f64>> = (0..bbox.dim())
            .map(|a| {
                let (lo, hi) = (bbox.min[a], bbox.max[a]);
                if hi - lo <= 0.0 || degree == 0 {
                    return vec![0.5 * (lo + hi)];
                }
                let m = degree + 1;
                (0..m)
                    .map(|k| {
                        let t = ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * m) as f64).cos();
                        0.5 * (lo + hi) + 0.5 * (hi - lo) * t
                    })
                    .collect()
            })
            .collect();

        let mut points = vec![Vec::new()];
        for axis in &axes {
            let mut next = Vec::with_capacity(points.len() * axis.len());
            for &t in axis {
                for p in &points {
                    let mut q: Vec<f64> = p.clone();
                    q.push(t);
                    next.push(q);
                }
            }
            points = next;
        }
        Self {
            axes,
            points: points.into_iter().flatten().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn point(&self, s: usize) -> &[f64] {
        let d = self.dim();
        &self.points[s * d..(s + 1) * d]
    }

    /// Values of all tensor Lagrange polynomials at `x` (axis 0 fastest).
    pub fn lagrange_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        let mut line = Vec::new();
        for (axis, &xa) in self.axes.iter().zip(x) {
            line.clear();
            for (k, &tk) in axis.iter().enumerate() {
                let mut v = 1.0;
                for (j, &tj) in axis.iter().enumerate() {
                    if j != k {
                        v *= (xa - tj) / (tk - tj);
                    }
                }
                line.push(v);
            }
            let m = out.len();
            for &l in &line[1..] {
                for r in 0..m {
                    let v = out[r] * l;
                    out.push(v);
                }
            }
            for v in out.iter_mut().take(m) {
                *v *= line[0];
            }
        }
    }

    /// One row of Lagrange values per point.
    pub fn lagrange_matrix<'a>(&self, points: impl ExactSizeIterator<Item = &'a [f64]>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(points.len(), self.len());
        let mut row = Vec::new();
        for (i, p) in points.enumerate() {
            self.lagrange_into(p, &mut row);
            for (s, v) in row.iter().enumerate() {
                m[(i, s)] = *v;
            }
        }
        m
    }

    /// `E[u, s] = L_s(xi_u)` for the nodes `xi` of a finer grid.
    pub fn transfer_from(&self, finer: &Grid) -> DMatrix<f64> {
        self.lagrange_matrix((0..finer.len()).map(|u| finer.point(u)))
    }
}
