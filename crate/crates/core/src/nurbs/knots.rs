//! Knot vectors and univariate B-spline basis evaluation (Cox-de Boor).
//!
//! Two flavours are supported. Clamped (open) vectors carry `n + p + 1`
//! knots with the end knots repeated `p + 1` times. Periodic vectors are
//! uniform and unclamped: they are stored as the extended vector
//! `t_k = a + (k - p) h` for `k = 0..=n + 2p`, which exposes `n + p`
//! "extended" basis functions on the active domain `[t_p, t_{n+p}]`.
//! Extended index `j` and `j + n` denote the same periodic function.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
    n_basis: usize,
    periodic: bool,
}

/// Nonzero basis values on one knot span.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanBasis {
    /// Span index `i` with `knots[i] <= xi < knots[i + 1]`.
    pub span: usize,
    /// `N_{span-p} .. N_{span}` evaluated at the parameter.
    pub values: Vec<f64>,
    /// First derivatives, present when requested.
    pub derivs: Option<Vec<f64>>,
}

impl SpanBasis {
    /// Extended index of the first nonzero function.
    pub fn first(&self) -> usize {
        self.span + 1 - self.values.len()
    }
}

impl KnotVector {
    /// Clamped knot vector from an explicit knot list.
    pub fn clamped(knots: Vec<f64>, degree: usize) -> Result<Self> {
        let p = degree;
        if p == 0 {
            return Err(Error::InvalidKnots("degree must be at least 1".into()));
        }
        if knots.len() < 2 * (p + 1) {
            return Err(Error::InvalidKnots(format!(
                "need at least {} knots for degree {p}, got {}",
                2 * (p + 1),
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidKnots("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidKnots("knots must be nondecreasing".into()));
        }
        let n = knots.len() - p - 1;
        let (a, b) = (knots[0], knots[knots.len() - 1]);
        if b <= a {
            return Err(Error::InvalidKnots("zero-length parameter domain".into()));
        }
        let lead = knots.iter().take_while(|&&k| k == a).count();
        let trail = knots.iter().rev().take_while(|&&k| k == b).count();
        if lead != p + 1 || trail != p + 1 {
            return Err(Error::InvalidKnots(format!(
                "clamped vector needs end multiplicity {} (found {lead} and {trail})",
                p + 1
            )));
        }
        let mut i = p + 1;
        while i < n {
            let m = knots[i..n].iter().take_while(|&&k| k == knots[i]).count();
            if m > p {
                return Err(Error::InvalidKnots(format!(
                    "interior knot {} has multiplicity {m} > degree {p}",
                    knots[i]
                )));
            }
            i += m;
        }
        Ok(Self {
            knots,
            degree: p,
            n_basis: n,
            periodic: false,
        })
    }

    /// Clamped vector on `[0, 1]` with `elements` uniform spans.
    pub fn clamped_uniform(degree: usize, elements: usize) -> Result<Self> {
        if elements == 0 {
            return Err(Error::InvalidKnots("need at least one element".into()));
        }
        let mut knots = vec![0.0; degree + 1];
        knots.extend((1..elements).map(|k| k as f64 / elements as f64));
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Self::clamped(knots, degree)
    }

    /// Uniform periodic vector on `[0, 1)` with `n_basis` periodic functions.
    pub fn periodic_uniform(degree: usize, n_basis: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidKnots("degree must be at least 1".into()));
        }
        if n_basis < degree + 1 {
            return Err(Error::InvalidKnots(format!(
                "periodic degree-{degree} basis needs at least {} functions",
                degree + 1
            )));
        }
        let h = 1.0 / n_basis as f64;
        let knots = (0..=n_basis + 2 * degree)
            .map(|k| (k as f64 - degree as f64) * h)
            .collect();
        Ok(Self {
            knots,
            degree,
            n_basis,
            periodic: true,
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of independent basis functions (solution unknowns per direction).
    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Number of extended basis functions, i.e. geometry control points.
    pub fn n_extended(&self) -> usize {
        if self.periodic {
            self.n_basis + self.degree
        } else {
            self.n_basis
        }
    }

    /// Active parameter domain.
    pub fn domain(&self) -> (f64, f64) {
        let p = self.degree;
        let last = if self.periodic {
            self.n_basis + p
        } else {
            self.n_basis
        };
        (self.knots[p], self.knots[last])
    }

    /// Maps an extended basis index to its solution index.
    pub fn wrap(&self, index: usize) -> usize {
        if self.periodic {
            index % self.n_basis
        } else {
            index
        }
    }

    /// Locates the span containing `xi`; periodic vectors reduce `xi`
    /// modulo the period first. Returns the span and the reduced parameter.
    pub fn locate(&self, xi: f64) -> Result<(usize, f64)> {
        let p = self.degree;
        let (lo, hi) = self.domain();
        let t = if self.periodic {
            let period = hi - lo;
            let r = lo + (xi - lo).rem_euclid(period);
            // rem_euclid may round up to exactly `period`
            if r >= hi {
                lo
            } else {
                r
            }
        } else {
            if !(xi >= lo && xi <= hi) {
                return Err(Error::Domain { value: xi, lo, hi });
            }
            xi
        };
        let last = if self.periodic { self.n_basis + p } else { self.n_basis };
        // right-end convention: the final knot belongs to the last nonempty span
        if t >= self.knots[last] {
            let mut s = last - 1;
            while self.knots[s] == self.knots[s + 1] {
                s -= 1;
            }
            return Ok((s, t));
        }
        let (mut low, mut high) = (p, last);
        while high - low > 1 {
            let mid = (low + high) / 2;
            if t < self.knots[mid] {
                high = mid;
            } else {
                low = mid;
            }
        }
        Ok((low, t))
    }

    pub fn find_span(&self, xi: f64) -> Result<usize> {
        self.locate(xi).map(|(s, _)| s)
    }

    /// The `p + 1` nonzero basis values at `xi`.
    pub fn eval_basis(&self, xi: f64) -> Result<SpanBasis> {
        let (span, t) = self.locate(xi)?;
        Ok(SpanBasis {
            span,
            values: self.basis_on_span(span, t, self.degree),
            derivs: None,
        })
    }

    /// Values and first derivatives of the `p + 1` nonzero functions.
    pub fn eval_basis_derivs(&self, xi: f64) -> Result<SpanBasis> {
        let (span, t) = self.locate(xi)?;
        let p = self.degree;
        let values = self.basis_on_span(span, t, p);
        // dN_{i,p} = p/(t_{i+p}-t_i) N_{i,p-1} - p/(t_{i+p+1}-t_{i+1}) N_{i+1,p-1}
        let lower = self.basis_on_span(span, t, p - 1);
        let first = span - p;
        let mut derivs = vec![0.0; p + 1];
        for (r, d) in derivs.iter_mut().enumerate() {
            let i = first + r;
            // N_{i,p-1} is lower[r-1] (functions span-p+1..=span at degree p-1)
            let left = if r >= 1 {
                let den = self.knots[i + p] - self.knots[i];
                if den > 0.0 {
                    p as f64 * lower[r - 1] / den
                } else {
                    0.0
                }
            } else {
                0.0
            };
            let right = if r < p {
                let den = self.knots[i + p + 1] - self.knots[i + 1];
                if den > 0.0 {
                    p as f64 * lower[r] / den
                } else {
                    0.0
                }
            } else {
                0.0
            };
            *d = left - right;
        }
        Ok(SpanBasis {
            span,
            values,
            derivs: Some(derivs),
        })
    }

    /// Triangular Cox-de Boor evaluation of the `deg + 1` degree-`deg`
    /// functions `N_{span-deg} .. N_{span}`.
    fn basis_on_span(&self, span: usize, t: f64, deg: usize) -> Vec<f64> {
        let k = &self.knots;
        let mut n = vec![0.0; deg + 1];
        let mut left = vec![0.0; deg + 1];
        let mut right = vec![0.0; deg + 1];
        n[0] = 1.0;
        for j in 1..=deg {
            left[j] = t - k[span + 1 - j];
            right[j] = k[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                let den = right[r + 1] + left[j - r];
                let temp = if den != 0.0 { n[r] / den } else { 0.0 };
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }

    /// Greville abscissae, one per solution basis function, sorted ascending.
    ///
    /// For periodic vectors the averages are reduced into `[0, 1)`.
    pub fn greville_points(&self) -> Vec<f64> {
        let p = self.degree;
        let avg = |i: usize| self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64;
        if self.periodic {
            let (lo, hi) = self.domain();
            let mut pts: Vec<f64> = (0..self.n_basis)
                .map(|i| {
                    let g = lo + (avg(i) - lo).rem_euclid(hi - lo);
                    if g >= hi - 1e-14 {
                        lo
                    } else {
                        g
                    }
                })
                .collect();
            pts.sort_by(f64::total_cmp);
            pts
        } else {
            (0..self.n_basis).map(avg).collect()
        }
    }

    /// Greville abscissae of all extended functions, unreduced. Control
    /// points placed at `L * g` reproduce the linear map `x = L xi`.
    pub fn extended_greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.n_extended())
            .map(|i| self.knots[i + 1..=i + p].iter().sum::<f64>() / p as f64)
            .collect()
    }

    /// Inserts `u` once (Boehm), returning the refined vector and the
    /// updated control points (homogeneous coordinates for rational curves).
    pub(crate) fn insert_knot<const D: usize>(
        &self,
        u: f64,
        points: &[[f64; D]],
    ) -> Result<(KnotVector, Vec<[f64; D]>)> {
        if self.periodic {
            return Err(Error::InvalidKnots(
                "knot insertion is only supported on clamped vectors".into(),
            ));
        }
        let p = self.degree;
        let k = self.find_span(u)?;
        let mut new_points = Vec::with_capacity(points.len() + 1);
        new_points.extend_from_slice(&points[..=k - p]);
        for i in k - p + 1..=k {
            let a = (u - self.knots[i]) / (self.knots[i + p] - self.knots[i]);
            let mut q = [0.0; D];
            for d in 0..D {
                q[d] = a * points[i][d] + (1.0 - a) * points[i - 1][d];
            }
            new_points.push(q);
        }
        new_points.extend_from_slice(&points[k..]);
        let mut knots = self.knots.clone();
        knots.insert(k + 1, u);
        Ok((KnotVector::clamped(knots, p)?, new_points))
    }
}
