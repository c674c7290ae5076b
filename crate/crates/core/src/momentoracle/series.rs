use std::fmt;

/// `Σ_k c_k t^{p_k} e^{-λ_k t}` with canonical, merged `(λ, p)` keys.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpPolySeries {
    terms: Vec<Term>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub coeff: f64,
    pub power: u32,
    pub rate: f64,
}

/// Rates closer than this (relative) are treated as equal.
const RATE_TOL: f64 = 1e-11;

#[inline]
pub(crate) fn same_rate(a: f64, b: f64) -> bool {
    (a - b).abs() <= RATE_TOL * a.abs().max(b.abs()).max(1.0)
}

impl ExpPolySeries {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        let mut s = Self::zero();
        s.push(c, 0, 0.0);
        s
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Adds `coeff · t^power · e^{-rate t}`, merging with an existing key.
    pub fn push(&mut self, coeff: f64, power: u32, rate: f64) {
        if coeff == 0.0 {
            return;
        }
        let pos = self.terms.iter().position(|t| t.power == power && same_rate(t.rate, rate));
        match pos {
            Some(k) => self.terms[k].coeff += coeff,
            None => {
                let at = self
                    .terms
                    .iter()
                    .position(|t| (t.rate, t.power) > (rate, power))
                    .unwrap_or(self.terms.len());
                self.terms.insert(at, Term { coeff, power, rate });
            }
        }
    }

    pub fn add_scaled(&mut self, other: &ExpPolySeries, s: f64) {
        for t in &other.terms {
            self.push(s * t.coeff, t.power, t.rate);
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.terms.iter().map(|k| k.coeff * t.powi(k.power as i32) * (-k.rate * t).exp()).sum()
    }

    /// Value as `t → ∞`; `None` if a zero-rate term grows polynomially.
    pub fn limit(&self) -> Option<f64> {
        let mut v = 0.0;
        for k in &self.terms {
            if same_rate(k.rate, 0.0) {
                if k.power > 0 && k.coeff.abs() > 1e-14 {
                    return None;
                }
                if k.power == 0 {
                    v += k.coeff;
                }
            }
        }
        Some(v)
    }

    /// Smallest positive rate, if any.
    pub fn min_positive_rate(&self) -> Option<f64> {
        self.terms.iter().map(|t| t.rate).filter(|&r| !same_rate(r, 0.0)).reduce(f64::min)
    }

    /// Solution of `y' = -K y + F(t)`, `y(0) = y0`, where `F` is `self`:
    /// `y0 e^{-Kt} + e^{-Kt} ∫_0^t e^{Ks} F(s) ds`, integrated term by term.
    pub fn solve_linear(&self, k: f64, y0: f64) -> ExpPolySeries {
        let mut out = ExpPolySeries::zero();
        out.push(y0, 0, k);
        for term in &self.terms {
            let (c, p, lambda) = (term.coeff, term.power, term.rate);
            let mu = k - lambda;
            if same_rate(k, lambda) {
                out.push(c / (p as f64 + 1.0), p + 1, k);
                continue;
            }
            // ∫_0^t s^p e^{μs} ds = Σ_q (-1)^q p!/(p-q)! t^{p-q} e^{μt}/μ^{q+1} - (-1)^p p!/μ^{p+1}
            let mut falling = 1.0;
            let mut mu_pow = mu;
            for q in 0..=p {
                let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                out.push(c * sign * falling / mu_pow, p - q, lambda);
                if q < p {
                    falling *= (p - q) as f64;
                    mu_pow *= mu;
                }
            }
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            out.push(-c * sign * falling / mu_pow, 0, k);
        }
        out
    }
}

impl fmt::Display for ExpPolySeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (n, t) in self.terms.iter().enumerate() {
            if n > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", t.coeff)?;
            if t.power > 0 {
                write!(f, " t^{}", t.power)?;
            }
            if t.rate != 0.0 {
                write!(f, " e^(-{} t)", t.rate)?;
            }
        }
        Ok(())
    }
}
