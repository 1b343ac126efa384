//! Cholesky factorization of symmetric positive definite band matrices.
//!
//! Lower band storage: the entry (i, j) with j <= i and i - j <= bw lives at
//! `data[i * (bw + 1) + (i - j)]`. The Newton systems produced by the strip
//! solver have half-bandwidth ny + 2 under column-major node ordering, which
//! keeps the factorization cheap even on fine grids.

#[derive(Clone, Debug)]
pub struct BandMatrix {
    pub n: usize,
    pub bw: usize,
    data: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NotPositiveDefinite {
    pub row: usize,
}

impl BandMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        BandMatrix {
            n,
            bw,
            data: vec![0.0; n * (bw + 1)],
        }
    }

    pub fn reset(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Accumulate into entry (i, j); requires j <= i and i - j <= bw.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(j <= i && i - j <= self.bw);
        self.data[i * (self.bw + 1) + (i - j)] += v;
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.bw + 1) + (i - j)]
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.n {
            self.data[i * (self.bw + 1)] += v;
        }
    }

    pub fn max_diagonal(&self) -> f64 {
        (0..self.n)
            .map(|i| self.data[i * (self.bw + 1)])
            .fold(0.0, f64::max)
    }

    /// In-place Cholesky A = L L^T. On success the storage holds L.
    pub fn cholesky(mut self) -> Result<BandCholesky, NotPositiveDefinite> {
        let bw = self.bw;
        for j in 0..self.n {
            let kmin = j.saturating_sub(bw);
            let mut d = self.at(j, j);
            for k in kmin..j {
                let l = self.at(j, k);
                d -= l * l;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(NotPositiveDefinite { row: j });
            }
            let dj = d.sqrt();
            self.data[j * (bw + 1)] = dj;
            let imax = (j + bw).min(self.n - 1);
            for i in (j + 1)..=imax {
                let mut s = self.at(i, j);
                let kmin = j.saturating_sub(bw).max(i.saturating_sub(bw));
                for k in kmin..j {
                    s -= self.at(i, k) * self.at(j, k);
                }
                self.data[i * (bw + 1) + (i - j)] = s / dj;
            }
        }
        Ok(BandCholesky {
            n: self.n,
            bw,
            data: self.data,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BandCholesky {
    n: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandCholesky {
    #[inline]
    fn l(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.bw + 1) + (i - j)]
    }

    /// Solve A x = b in place.
    pub fn solve(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        // forward: L y = b
        for i in 0..self.n {
            let kmin = i.saturating_sub(self.bw);
            let mut s = b[i];
            for k in kmin..i {
                s -= self.l(i, k) * b[k];
            }
            b[i] = s / self.l(i, i);
        }
        // backward: L^T x = y
        for i in (0..self.n).rev() {
            let imax = (i + self.bw).min(self.n - 1);
            let mut s = b[i];
            for k in (i + 1)..=imax {
                s -= self.l(k, i) * b[k];
            }
            b[i] = s / self.l(i, i);
        }
    }
}
