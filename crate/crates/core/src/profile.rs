//! Scalar functions of `(t, x)` used for lapse and metric coefficients.
//!
//! `x` is the interval coordinate for `n = 1` and the radius for `n = 2`;
//! every model geometry is independent of the angle.

use std::sync::Arc;

/// Default finite-difference step for time derivatives of tabulated data.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Closed-form or tabulated scalar profile.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Const(f64),
    /// `c0 + c1 x`
    Affine { c0: f64, c1: f64 },
    /// `exp(rate t)`
    ExpTime { rate: f64 },
    /// `1 + amp sin(freq t)`
    SinTime { amp: f64, freq: f64 },
    /// `(1 + t)^exponent`
    PowerTime { exponent: f64 },
    /// `1 + coef t x`
    Bilinear { coef: f64 },
    /// `coef t (x - x0) (x1 - x)`
    QuadraticWarp { coef: f64, x0: f64, x1: f64 },
    /// `c0 + amp sin(pi x / length)`
    SinSpace { c0: f64, amp: f64, length: f64 },
    /// `c0 + amp cos(pi x / length)`
    CosSpace { c0: f64, amp: f64, length: f64 },
    /// `c0 + amp sin^2(pi (x - x0) / (x1 - x0))`; value and slope are `c0`, `0` at both ends.
    SinSqSpace { c0: f64, amp: f64, x0: f64, x1: f64 },
    Sum(Box<Profile>, Box<Profile>),
    Product(Box<Profile>, Box<Profile>),
    Quotient(Box<Profile>, Box<Profile>),
    Pow(Box<Profile>, f64),
    Table(Arc<Tabulated>),
}

/// Samples on a `(t, node)` grid, linearly interpolated in both variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    pub times: Vec<f64>,
    pub coords: Vec<f64>,
    /// `values[time_index][node_index]`
    pub values: Vec<Vec<f64>>,
    pub fd_step: f64,
}

impl Tabulated {
    fn eval(&self, t: f64, x: f64) -> f64 {
        let (it, st) = bracket(&self.times, t);
        let (ix, sx) = bracket(&self.coords, x);
        let row = |i: usize| {
            let r = &self.values[i];
            if self.coords.len() == 1 {
                r[0]
            } else {
                r[ix] * (1.0 - sx) + r[ix + 1] * sx
            }
        };
        if self.times.len() == 1 {
            row(0)
        } else {
            row(it) * (1.0 - st) + row(it + 1) * st
        }
    }
}

/// Left index and fractional offset for linear interpolation, clamped to the table.
fn bracket(grid: &[f64], v: f64) -> (usize, f64) {
    if grid.len() < 2 {
        return (0, 0.0);
    }
    let last = grid.len() - 2;
    let i = match grid.iter().position(|&g| g > v) {
        Some(0) => 0,
        Some(p) => (p - 1).min(last),
        None => last,
    };
    let s = ((v - grid[i]) / (grid[i + 1] - grid[i])).clamp(0.0, 1.0);
    (i, s)
}

impl Profile {
    pub fn one() -> Self {
        Profile::Const(1.0)
    }

    pub fn sum(a: Profile, b: Profile) -> Self {
        Profile::Sum(Box::new(a), Box::new(b))
    }

    pub fn product(a: Profile, b: Profile) -> Self {
        Profile::Product(Box::new(a), Box::new(b))
    }

    pub fn quotient(a: Profile, b: Profile) -> Self {
        Profile::Quotient(Box::new(a), Box::new(b))
    }

    pub fn pow(a: Profile, e: f64) -> Self {
        Profile::Pow(Box::new(a), e)
    }

    /// True when the profile is the literal constant one.
    pub fn is_unit(&self) -> bool {
        matches!(self, Profile::Const(c) if *c == 1.0)
    }

    pub fn value(&self, t: f64, x: f64) -> f64 {
        use std::f64::consts::PI;
        match self {
            Profile::Const(c) => *c,
            Profile::Affine { c0, c1 } => c0 + c1 * x,
            Profile::ExpTime { rate } => (rate * t).exp(),
            Profile::SinTime { amp, freq } => 1.0 + amp * (freq * t).sin(),
            Profile::PowerTime { exponent } => (1.0 + t).powf(*exponent),
            Profile::Bilinear { coef } => 1.0 + coef * t * x,
            Profile::QuadraticWarp { coef, x0, x1 } => coef * t * (x - x0) * (x1 - x),
            Profile::SinSpace { c0, amp, length } => c0 + amp * (PI * x / length).sin(),
            Profile::CosSpace { c0, amp, length } => c0 + amp * (PI * x / length).cos(),
            Profile::SinSqSpace { c0, amp, x0, x1 } => {
                let s = (PI * (x - x0) / (x1 - x0)).sin();
                c0 + amp * s * s
            }
            Profile::Sum(a, b) => a.value(t, x) + b.value(t, x),
            Profile::Product(a, b) => a.value(t, x) * b.value(t, x),
            Profile::Quotient(a, b) => a.value(t, x) / b.value(t, x),
            Profile::Pow(a, e) => a.value(t, x).powf(*e),
            Profile::Table(tab) => tab.eval(t, x),
        }
    }

    /// Time derivative; closed form wherever one exists.
    pub fn dt(&self, t: f64, x: f64) -> f64 {
        match self {
            Profile::Const(_)
            | Profile::Affine { .. }
            | Profile::SinSpace { .. }
            | Profile::CosSpace { .. }
            | Profile::SinSqSpace { .. } => 0.0,
            Profile::ExpTime { rate } => rate * (rate * t).exp(),
            Profile::SinTime { amp, freq } => amp * freq * (freq * t).cos(),
            Profile::PowerTime { exponent } => exponent * (1.0 + t).powf(exponent - 1.0),
            Profile::Bilinear { coef } => coef * x,
            Profile::QuadraticWarp { coef, x0, x1 } => coef * (x - x0) * (x1 - x),
            Profile::Sum(a, b) => a.dt(t, x) + b.dt(t, x),
            Profile::Product(a, b) => a.dt(t, x) * b.value(t, x) + a.value(t, x) * b.dt(t, x),
            Profile::Quotient(a, b) => {
                let bv = b.value(t, x);
                (a.dt(t, x) * bv - a.value(t, x) * b.dt(t, x)) / (bv * bv)
            }
            Profile::Pow(a, e) => e * a.value(t, x).powf(e - 1.0) * a.dt(t, x),
            Profile::Table(tab) => {
                let h = tab.fd_step;
                (tab.eval(t + h, x) - tab.eval(t - h, x)) / (2.0 * h)
            }
        }
    }

    /// True when the profile has no explicit time dependence.
    pub fn is_static(&self) -> bool {
        match self {
            Profile::Const(_)
            | Profile::Affine { .. }
            | Profile::SinSpace { .. }
            | Profile::CosSpace { .. }
            | Profile::SinSqSpace { .. } => true,
            Profile::ExpTime { rate } => *rate == 0.0,
            Profile::SinTime { amp, freq } => *amp == 0.0 || *freq == 0.0,
            Profile::PowerTime { exponent } => *exponent == 0.0,
            Profile::Bilinear { coef } | Profile::QuadraticWarp { coef, .. } => *coef == 0.0,
            Profile::Sum(a, b) | Profile::Product(a, b) | Profile::Quotient(a, b) => {
                a.is_static() && b.is_static()
            }
            Profile::Pow(a, _) => a.is_static(),
            Profile::Table(tab) => tab.times.len() < 2,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(p: &Profile, t: f64, x: f64) -> f64 {
        let h = 1e-6;
        (p.value(t + h, x) - p.value(t - h, x)) / (2.0 * h)
    }

    #[test]
    fn closed_form_time_derivatives_match_differences() {
        let profiles = vec![
            Profile::ExpTime { rate: 0.7 },
            Profile::SinTime { amp: 0.2, freq: 3.0 },
            Profile::PowerTime { exponent: 2.0 },
            Profile::Bilinear { coef: 1.0 },
            Profile::sum(Profile::one(), Profile::QuadraticWarp { coef: 0.1, x0: 0.0, x1: 1.0 }),
            Profile::quotient(
                Profile::product(Profile::Affine { c0: 0.5, c1: 1.0 }, Profile::ExpTime { rate: 0.3 }),
                Profile::SinTime { amp: 0.1, freq: 2.0 },
            ),
            Profile::pow(Profile::PowerTime { exponent: 3.0 }, 0.5),
        ];
        for p in &profiles {
            for &(t, x) in &[(0.0, 0.3), (0.4, 0.9), (-0.2, 0.5)] {
                assert!((p.dt(t, x) - fd(p, t, x)).abs() < 1e-7, "{p:?} at ({t}, {x})");
            }
        }
    }

    #[test]
    fn table_interpolates_linearly_and_clamps() {
        let tab = Tabulated {
            times: vec![0.0, 1.0],
            coords: vec![0.0, 1.0, 2.0],
            values: vec![vec![1.0, 2.0, 3.0], vec![3.0, 4.0, 5.0]],
            fd_step: DEFAULT_FD_STEP,
        };
        let p = Profile::Table(Arc::new(tab));
        assert!((p.value(0.5, 0.5) - 2.5).abs() < 1e-14);
        assert!((p.value(2.0, 5.0) - 5.0).abs() < 1e-14);
        assert!((p.dt(0.5, 1.0) - 2.0).abs() < 1e-8);
        assert!(!p.is_static());
    }

    #[test]
    fn static_detection() {
        assert!(Profile::Affine { c0: 0.0, c1: 1.0 }.is_static());
        assert!(!Profile::ExpTime { rate: 0.1 }.is_static());
        assert!(Profile::product(Profile::one(), Profile::ExpTime { rate: 0.0 }).is_static());
    }
}
