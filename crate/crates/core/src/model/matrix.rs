use serde::{Deserialize, Serialize};

/// Square row-major matrix, small `d` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return None;
        }
        Some(Matrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Matrix { n, data }
    }

    pub fn rotation_2d(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Matrix {
            n: 2,
            data: vec![c, -s, s, c],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n).map(|r| r.to_vec()).collect()
    }

    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let row = &self.data[i * self.n..(i + 1) * self.n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = (0..n).map(|l| self.get(i, l) * other.get(l, j)).sum();
            }
        }
        Matrix { n, data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Spectral norm `sup |Av| / |v|`.
    pub fn operator_norm(&self) -> f64 {
        match self.n {
            1 => self.data[0].abs(),
            2 => {
                let (a, b, c, d) = (self.data[0], self.data[1], self.data[2], self.data[3]);
                let p = a * a + c * c;
                let q = a * b + c * d;
                let r = b * b + d * d;
                let half = 0.5 * (p - r);
                (0.5 * (p + r) + (half * half + q * q).sqrt()).max(0.0).sqrt()
            }
            _ => self.power_iteration_norm(),
        }
    }

    fn power_iteration_norm(&self) -> f64 {
        let n = self.n;
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut av = vec![0.0; n];
        let mut atav = vec![0.0; n];
        let mut est = 0.0;
        for _ in 0..500 {
            self.mul_vec(&v, &mut av);
            for (j, slot) in atav.iter_mut().enumerate() {
                *slot = (0..n).map(|i| self.get(i, j) * av[i]).sum();
            }
            let len = atav.iter().map(|x| x * x).sum::<f64>().sqrt();
            if len == 0.0 {
                return 0.0;
            }
            let next = len.sqrt();
            v.iter_mut().zip(&atav).for_each(|(vi, ai)| *vi = ai / len);
            if (next - est).abs() <= 1e-15 * next {
                return next;
            }
            est = next;
        }
        est
    }

    pub fn determinant(&self) -> f64 {
        let n = self.n;
        let mut m = self.data.clone();
        let mut det = 1.0;
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| m[a * n + col].abs().total_cmp(&m[b * n + col].abs()))
                .unwrap();
            if m[pivot * n + col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                for j in 0..n {
                    m.swap(pivot * n + j, col * n + j);
                }
                det = -det;
            }
            let p = m[col * n + col];
            det *= p;
            for row in col + 1..n {
                let f = m[row * n + col] / p;
                for j in col..n {
                    m[row * n + j] -= f * m[col * n + j];
                }
            }
        }
        det
    }

    /// Solves `A x = b`; `None` when singular.
    pub fn solve(&self, b: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let mut m = self.data.clone();
        let mut rhs = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&a, &b| m[a * n + col].abs().total_cmp(&m[b * n + col].abs()))
                .unwrap();
            if m[pivot * n + col].abs() < 1e-300 {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    m.swap(pivot * n + j, col * n + j);
                }
                rhs.swap(pivot, col);
            }
            for row in 0..n {
                if row != col {
                    let f = m[row * n + col] / m[col * n + col];
                    for j in col..n {
                        m[row * n + j] -= f * m[col * n + j];
                    }
                    rhs[row] -= f * rhs[col];
                }
            }
        }
        Some((0..n).map(|i| rhs[i] / m[i * n + i]).collect())
    }

    pub fn is_orthogonal(&self, tol: f64) -> bool {
        let n = self.n;
        (0..n).all(|i| {
            (0..n).all(|j| {
                let dot: f64 = (0..n).map(|l| self.get(l, i) * self.get(l, j)).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                (dot - want).abs() <= tol
            })
        })
    }
}
