#![allow(dead_code)]

/// Gaussian elimination with partial pivoting; independent of the crate's
/// LU path.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in (col + 1)..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = ((i + 1)..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// `γ(h)` written out from the model definitions.
pub fn gamma(kind: &str, nugget: f64, sill: f64, range: f64, h: f64) -> f64 {
    if h <= 0.0 {
        return 0.0;
    }
    let r = h / range;
    let shape = match kind {
        "gaussian" => 1.0 - (-r * r).exp(),
        "exponential" => 1.0 - (-r).exp(),
        "spherical" => {
            if r >= 1.0 {
                1.0
            } else {
                1.5 * r - 0.5 * r * r * r
            }
        }
        _ => unreachable!(),
    };
    nugget + sill * shape
}

/// Ordinary kriging `(λ, μ)` by a dense solve of the augmented system,
/// with `−jitter` on the diagonal of the point block.
pub fn kriging_oracle(
    x: &[Vec<f64>],
    kind: &str,
    nugget: f64,
    sill: f64,
    range: f64,
    query: &[f64],
) -> (Vec<f64>, f64) {
    let n = x.len();
    let jitter = 1e-10 * sill;
    let mut a = vec![vec![0.0; n + 1]; n + 1];
    let mut b = vec![1.0; n + 1];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = if i == j { -jitter } else { gamma(kind, nugget, sill, range, dist(&x[i], &x[j])) };
        }
        a[i][n] = 1.0;
        a[n][i] = 1.0;
        b[i] = gamma(kind, nugget, sill, range, dist(&x[i], query));
    }
    let sol = dense_solve(a, b);
    (sol[..n].to_vec(), sol[n])
}

/// Small deterministic generator for test fixtures (SplitMix64).
pub struct Mix(pub u64);

impl Mix {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}
