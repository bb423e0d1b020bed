use std::sync::Arc;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numerics::{golden_max, log_grid};

/// Scan used by every supremum fit: log grid over `[SCAN_LO, SCAN_HI]`.
pub const SCAN_LO: f64 = 1e-6;
pub const SCAN_HI: f64 = 1e6;
pub const SCAN_POINTS: usize = 10_000;

/// Tabulated nonlinearity: piecewise-linear `f` on increasing abscissae,
/// extended by `f(s_last)·(s/s_last)^{q-1}` beyond the table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FTable {
    s: Vec<f64>,
    f: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl FTable {
    pub fn new(s: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        if s.len() != f.len() || s.len() < 2 {
            return Err(Error::Table("need at least two (s, f) rows".into()));
        }
        if s[0] < 0.0 || s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table("abscissae must be nonnegative and strictly increasing".into()));
        }
        if f.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Table("tabulated f must be finite and nonnegative".into()));
        }
        // segment from the origin to the first row is linear through (0, 0)
        let mut cumulative = Vec::with_capacity(s.len());
        cumulative.push(0.5 * s[0] * f[0]);
        for i in 1..s.len() {
            let seg = 0.5 * (s[i] - s[i - 1]) * (f[i] + f[i - 1]);
            cumulative.push(cumulative[i - 1] + seg);
        }
        Ok(FTable { s, f, cumulative })
    }

    /// Parses a two-column CSV `(s, f(s))`; a non-numeric first row is a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let (mut s, mut f) = (Vec::new(), Vec::new());
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Table(e.to_string()))?;
            if record.len() != 2 {
                return Err(Error::Table(format!("row {row}: expected 2 columns, got {}", record.len())));
            }
            let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
            match parsed {
                (Ok(a), Ok(b)) => {
                    s.push(a);
                    f.push(b);
                }
                _ if row == 0 => continue,
                _ => return Err(Error::Table(format!("row {row}: non-numeric entry"))),
            }
        }
        FTable::new(s, f)
    }

    fn eval(&self, x: f64, q: f64) -> f64 {
        let (s, f) = (&self.s, &self.f);
        if x <= s[0] {
            return if s[0] > 0.0 { f[0] * x / s[0] } else { f[0] };
        }
        let last = s.len() - 1;
        if x >= s[last] {
            return f[last] * (x / s[last]).powf(q - 1.0);
        }
        let i = s.partition_point(|&v| v <= x) - 1;
        let t = (x - s[i]) / (s[i + 1] - s[i]);
        f[i] + t * (f[i + 1] - f[i])
    }

    fn antiderivative(&self, x: f64, q: f64) -> f64 {
        let (s, f) = (&self.s, &self.f);
        if x <= s[0] {
            return if s[0] > 0.0 { 0.5 * f[0] * x * x / s[0] } else { 0.0 };
        }
        let last = s.len() - 1;
        if x >= s[last] {
            let ratio = x / s[last];
            return self.cumulative[last] + f[last] * s[last] / q * (ratio.powf(q) - 1.0);
        }
        let i = s.partition_point(|&v| v <= x) - 1;
        let fx = self.eval(x, q);
        self.cumulative[i] + 0.5 * (x - s[i]) * (f[i] + fx)
    }
}

/// Which closed form (or table) defines `f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum NonlinearityKind {
    /// `f(s) = a_q s^{q-1}` for `s > 0`.
    PurePower,
    /// `f(s) = a_2 s² / (1 + s)`, the `q = 2` branch.
    AsymptoticallyLinear,
    /// Piecewise-linear user table.
    Table(Arc<FTable>),
    /// `f ≡ 0`; degenerate, used as a control.
    Vanishing,
}

/// The nonlinearity together with its fitted growth constants.
///
/// Invariants after [`NonlinearityModel::new`]:
/// `f(s) ≤ s/4 + c0·s^{p−1}`, `F(s) ≤ s²/2 + c1·s³` and
/// `f(s)s ≤ s² + c_bar·s³` for every `s ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearityModel {
    pub kind: NonlinearityKind,
    pub q: f64,
    pub a_q: f64,
    pub p: f64,
    pub c0: f64,
    pub c1: f64,
    pub c_bar: f64,
}

impl NonlinearityModel {
    pub fn pure_power(q: f64, a_q: f64, p: f64) -> Result<Self> {
        Self::new(NonlinearityKind::PurePower, q, a_q, p)
    }

    pub fn asymptotically_linear(a2: f64, p: f64) -> Result<Self> {
        Self::new(NonlinearityKind::AsymptoticallyLinear, 2.0, a2, p)
    }

    pub fn vanishing(p: f64) -> Result<Self> {
        Self::new(NonlinearityKind::Vanishing, 2.0, 0.0, p)
    }

    pub fn table(table: FTable, q: f64, a_q: f64, p: f64) -> Result<Self> {
        Self::new(NonlinearityKind::Table(Arc::new(table)), q, a_q, p)
    }

    /// Validates the exponents and fits `c0`, `c1`, `c_bar`.
    pub fn new(kind: NonlinearityKind, q: f64, a_q: f64, p: f64) -> Result<Self> {
        if !(2.0..3.0).contains(&q) {
            return Err(invalid("q", format!("{q} not in [2, 3)")));
        }
        match kind {
            NonlinearityKind::Vanishing => {}
            NonlinearityKind::AsymptoticallyLinear if q != 2.0 => {
                return Err(invalid("q", "asymptotically linear model has q = 2"));
            }
            _ if q == 2.0 && a_q <= 1.0 => {
                return Err(invalid("a_q", format!("{a_q} must exceed 1 when q = 2")));
            }
            _ if a_q <= 0.0 => return Err(invalid("a_q", format!("{a_q} must be positive"))),
            _ => {}
        }
        let mut model = NonlinearityModel {
            kind,
            q,
            a_q,
            p,
            c0: f64::NAN,
            c1: f64::NAN,
            c_bar: f64::NAN,
        };
        model.c0 = fit_growth_bound(&model, p)?;
        model.c1 = fit_cubic_bound(&model)?;
        model.c_bar = fit_dual_cubic_bound(&model)?;
        Ok(model)
    }

    /// `f(s)`; identically zero for `s ≤ 0`.
    pub fn f(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            NonlinearityKind::PurePower => self.a_q * s.powf(self.q - 1.0),
            NonlinearityKind::AsymptoticallyLinear => self.a_q * s * s / (1.0 + s),
            NonlinearityKind::Table(t) => t.eval(s, self.q),
            NonlinearityKind::Vanishing => 0.0,
        }
    }

    /// `F(b) − F(a)`. Close, same-sign arguments use Simpson's rule on `f`,
    /// whose error `(b − a)⁵ f⁗/2880` is far below the cancellation error of
    /// the direct difference.
    pub fn big_f_change(&self, a: f64, b: f64) -> f64 {
        let lo = a.min(b);
        if lo > 0.0 && (b - a).abs() <= 1e-3 * lo {
            let m = 0.5 * (a + b);
            (b - a) / 6.0 * (self.f(a) + 4.0 * self.f(m) + self.f(b))
        } else {
            self.big_f(b) - self.big_f(a)
        }
    }

    /// `F(s) = ∫₀ˢ f`; identically zero for `s ≤ 0`.
    pub fn big_f(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            NonlinearityKind::PurePower => self.a_q * s.powf(self.q) / self.q,
            NonlinearityKind::AsymptoticallyLinear => {
                // s²/2 − s + ln(1+s) cancels to s³/3 − s⁴/4 + … near zero
                let core = if s < 1e-2 {
                    let mut acc = 0.0;
                    let mut pow = s * s * s;
                    for k in 3..=10 {
                        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                        acc += sign * pow / k as f64;
                        pow *= s;
                    }
                    acc
                } else {
                    0.5 * s * s - s + s.ln_1p()
                };
                self.a_q * core
            }
            NonlinearityKind::Table(t) => t.antiderivative(s, self.q),
            NonlinearityKind::Vanishing => 0.0,
        }
    }

    /// `(F(s), f(s))` in one call.
    #[inline]
    pub fn both(&self, s: f64) -> (f64, f64) {
        (self.big_f(s), self.f(s))
    }

    /// Limit of `f(s)/s^{e}` as `s → ∞`: `None` when it diverges.
    fn growth_limit(&self, e: f64) -> Option<f64> {
        if matches!(self.kind, NonlinearityKind::Vanishing) {
            return Some(0.0);
        }
        let lead = self.q - 1.0;
        if lead < e {
            Some(0.0)
        } else if lead == e {
            Some(self.a_q)
        } else {
            None
        }
    }

    /// Deviations `|f(s)/s^{q-1} − a_q| / a_q` at `s = 1e2, 1e3, 1e4`.
    pub fn asymptotic_deviation(&self) -> [f64; 3] {
        [1e2, 1e3, 1e4].map(|s: f64| {
            if self.a_q == 0.0 {
                return self.f(s).abs();
            }
            (self.f(s) / s.powf(self.q - 1.0) - self.a_q).abs() / self.a_q
        })
    }
}

/// Supremum of a nonnegative ratio over `(0, ∞)`: log-grid scan, golden
/// refinement around the best node, then the limit at infinity.
fn fit_sup(ratio: impl Fn(f64) -> f64, tail: Option<f64>, what: &str) -> Result<f64> {
    let tail = tail.ok_or_else(|| Error::DivergentSupremum(format!("{what}: ratio grows without bound")))?;
    let grid = log_grid(SCAN_LO, SCAN_HI, SCAN_POINTS);
    let values: Vec<f64> = grid.iter().map(|&s| ratio(s)).collect();
    let (imax, vmax) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if !vmax.is_finite() {
        return Err(Error::DivergentSupremum(format!("{what}: non-finite ratio")));
    }
    if vmax <= 0.0 {
        return Ok(tail.max(0.0));
    }
    if imax == 0 {
        return Err(Error::DivergentSupremum(format!(
            "{what}: maximum at the left end of the scan (s = {SCAN_LO})"
        )));
    }
    let refined = if imax + 1 < grid.len() {
        let (lo, hi) = (grid[imax - 1].ln(), grid[imax + 1].ln());
        golden_max(|t| ratio(t.exp()), lo, hi, 1e-15).1.max(vmax)
    } else {
        vmax
    };
    Ok(refined.max(tail))
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 2.0 && p < 3.0) {
        return Err(invalid("p", format!("{p} not in (2, 3)")));
    }
    Ok(())
}

/// Smallest `c0` with `f(s) ≤ s/4 + c0·s^{p−1}` for all `s ≥ 0`, re-verified
/// on the scan grid.
pub fn fit_growth_bound(model: &NonlinearityModel, p: f64) -> Result<f64> {
    check_p(p)?;
    if p < model.q {
        return Err(Error::DivergentSupremum(format!(
            "p = {p} below the growth exponent q = {}",
            model.q
        )));
    }
    if p == model.q && !matches!(model.kind, NonlinearityKind::Vanishing) {
        log::warn!("p = q = {p}: bound exponent is not strictly above the growth exponent");
    }
    let c0 = fit_sup(
        |s| (model.f(s) - 0.25 * s).max(0.0) / s.powf(p - 1.0),
        model.growth_limit(p - 1.0),
        "growth bound",
    )?;
    verify_on_grid(|s| model.f(s), |s| 0.25 * s + c0 * s.powf(p - 1.0))?;
    Ok(c0)
}

/// Smallest `c1` with `F(s) ≤ s²/2 + c1·s³` for all `s ≥ 0`.
pub fn fit_cubic_bound(model: &NonlinearityModel) -> Result<f64> {
    let tail = model.growth_limit(2.0).map(|_| 0.0);
    let c1 = fit_sup(
        |s| (model.big_f(s) - 0.5 * s * s).max(0.0) / (s * s * s),
        tail,
        "cubic bound",
    )?;
    verify_on_grid(|s| model.big_f(s), |s| 0.5 * s * s + c1 * s * s * s)?;
    Ok(c1)
}

/// Smallest `c_bar` with `f(s)s ≤ s² + c_bar·s³` for all `s ≥ 0`.
pub fn fit_dual_cubic_bound(model: &NonlinearityModel) -> Result<f64> {
    let tail = model.growth_limit(2.0).map(|_| 0.0);
    let cb = fit_sup(
        |s| (model.f(s) * s - s * s).max(0.0) / (s * s * s),
        tail,
        "dual cubic bound",
    )?;
    verify_on_grid(|s| model.f(s) * s, |s| s * s + cb * s * s * s)?;
    Ok(cb)
}

fn verify_on_grid(lhs: impl Fn(f64) -> f64, rhs: impl Fn(f64) -> f64) -> Result<()> {
    for s in log_grid(SCAN_LO, SCAN_HI, SCAN_POINTS) {
        let (l, r) = (lhs(s), rhs(s));
        if l > r * (1.0 + 1e-12) + f64::MIN_POSITIVE {
            return Err(Error::BoundViolated { s, lhs: l, rhs: r });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::adaptive_simpson;

    fn power() -> NonlinearityModel {
        NonlinearityModel::pure_power(2.5, 1.0, 2.7).unwrap()
    }

    #[test]
    fn pure_power_values() {
        let m = power();
        assert_eq!(m.f(4.0), 8.0);
        assert_eq!(m.f(-1.0), 0.0);
        assert!((m.big_f(1.0) - 0.4).abs() < 1e-15);
        assert_eq!(m.big_f(-3.0), 0.0);
    }

    #[test]
    fn asymptotically_linear_values() {
        let m = NonlinearityModel::asymptotically_linear(2.0, 2.5).unwrap();
        assert!((m.f(1.0) - 1.0).abs() < 1e-15);
        // quadrature oracle on f: 2(ln 2 − 1/2)
        let oracle = adaptive_simpson(&|s| m.f(s), 0.0, 1.0, 1e-14);
        assert!((oracle - 0.386_294_361_119_890_6).abs() < 1e-12);
        assert!((m.big_f(1.0) - oracle).abs() < 1e-12);
    }

    #[test]
    fn antiderivative_matches_quadrature() {
        for m in [power(), NonlinearityModel::asymptotically_linear(2.0, 2.5).unwrap()] {
            for &s in &[1e-3, 5e-3, 0.02, 0.7, 3.0, 17.0, 100.0] {
                let quad = adaptive_simpson(&|t| m.f(t), 0.0, s, 1e-13 * m.big_f(s));
                let rel = (m.big_f(s) - quad).abs() / quad.abs().max(1e-300);
                assert!(rel < 1e-10, "{:?} s = {s}: rel {rel}", m.kind);
            }
        }
    }

    #[test]
    fn growth_constants_for_pure_power() {
        let m = NonlinearityModel::pure_power(2.5, 1.0, 2.5).unwrap();
        assert_eq!(m.c0, 1.0);
        // stationary point of s^{-0.2} − ¼ s^{-0.7} at s = (0.175/0.2)²
        let s = (0.175f64 / 0.2).powi(2);
        let oracle = s.powf(-0.2) - 0.25 * s.powf(-0.7);
        assert!((power().c0 - oracle).abs() < 1e-12);
        assert!((power().c0 - 0.7535).abs() < 1e-4);
        assert!((m.c1 - 0.08).abs() < 1e-12);
        assert!((m.c_bar - 0.25).abs() < 1e-12);
    }

    #[test]
    fn vanishing_constants() {
        let m = NonlinearityModel::vanishing(2.5).unwrap();
        assert_eq!((m.c0, m.c1, m.c_bar), (0.0, 0.0, 0.0));
    }

    #[test]
    fn rejects_bad_exponents() {
        assert!(NonlinearityModel::pure_power(2.5, 1.0, 2.0).is_err());
        assert!(NonlinearityModel::pure_power(2.5, 1.0, 3.0).is_err());
        assert!(matches!(
            NonlinearityModel::pure_power(2.8, 1.0, 2.6),
            Err(Error::DivergentSupremum(_))
        ));
        assert!(NonlinearityModel::pure_power(2.0, 0.5, 2.5).is_err());
    }

    #[test]
    fn asymptotic_deviation_decreases() {
        let m = NonlinearityModel::asymptotically_linear(2.0, 2.5).unwrap();
        let d = m.asymptotic_deviation();
        assert!(d[0] > d[1] && d[1] > d[2]);
        assert_eq!(power().asymptotic_deviation(), [0.0; 3]);
    }

    #[test]
    fn table_reproduces_linear_data() {
        let s: Vec<f64> = (0..=100).map(|i| i as f64 * 0.1).collect();
        let f: Vec<f64> = s.iter().map(|x| x * x).collect();
        let csv: String = std::iter::once("s,f\n".to_string())
            .chain(s.iter().zip(&f).map(|(a, b)| format!("{a},{b}\n")))
            .collect();
        let t = FTable::from_csv(&csv).unwrap();
        let m = NonlinearityModel::table(t, 2.5, 1.0, 2.7).unwrap();
        assert!((m.f(0.25) - 0.0625).abs() < 3e-3);
        assert!((m.big_f(10.0) - 1000.0 / 3.0).abs() < 0.1);
        // piecewise-linear part exactly by the trapezoid sum, tail by quadrature
        let trapezoid: f64 = s.windows(2).map(|w| 0.5 * (w[1] - w[0]) * (w[0] * w[0] + w[1] * w[1])).sum();
        let tail = adaptive_simpson(&|t| m.f(t), 10.0, 20.0, 1e-10);
        assert!((m.big_f(20.0) - trapezoid - tail).abs() < 1e-9 * m.big_f(20.0));
    }

    #[test]
    fn table_rejects_unsorted() {
        assert!(FTable::from_csv("0,0\n2,1\n1,3\n").is_err());
    }
}
