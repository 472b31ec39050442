//! Analytic calibration of Clipped Coverage.
//!
//! When real and synthetic samples are i.i.d. from one distribution, the
//! number of synthetic points inside a real k-NN ball is
//! Beta-Binomial(M, k, N - k). The expected unnormalized Clipped Coverage
//! with `m` good synthetic samples (the rest lying in no ball) is
//!
//! ```text
//! f(m) = sum_{j=1}^{m} min(j/k, 1) C(m, j) B(k + j, m - j + N - k) / B(k, N - k)
//! ```
//!
//! which also equals `E[min(C, k)] / k`, a sum of only `k` Beta-Binomial
//! probabilities. The table `f(0..=M)` is inverted numerically to map an
//! observed score back to an equivalent proportion of good samples.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Log-terms below this underflow to zero when exponentiated.
const LOG_UNDERFLOW: f64 = -745.0;
/// Relative size below which trailing terms of the direct sum are dropped.
const TAIL_CUTOFF: f64 = 1e-16;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln Γ(x)` for `x >= 1`.
///
/// Small integers use the exact factorial; everything else is shifted up to
/// `x >= 20` and evaluated with the Stirling series (truncation error below
/// 1e-17 there).
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x >= 1.0, "ln_gamma is only needed for x >= 1, got {x}");
    if x.fract() == 0.0 && x <= 21.0 {
        let mut fact = 1.0f64;
        let mut i = 2.0;
        while i < x {
            fact *= i;
            i += 1.0;
        }
        return fact.ln();
    }
    let mut shift = 0.0;
    let mut prod = 1.0;
    let mut z = x;
    while z < 20.0 {
        prod *= z;
        z += 1.0;
    }
    if prod != 1.0 {
        shift = prod.ln();
    }
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    // Bernoulli terms B_{2n} / (2n (2n - 1) z^{2n-1}), Horner in 1/z^2.
    let series = inv
        * (1.0 / 12.0
            + inv2
                * (-1.0 / 360.0
                    + inv2
                        * (1.0 / 1260.0
                            + inv2 * (-1.0 / 1680.0 + inv2 * (1.0 / 1188.0 + inv2 * (-691.0 / 360_360.0))))));
    (z - 0.5) * z.ln() - z + HALF_LN_2PI + series - shift
}

/// `ln Γ(l)` for every integer `l` in `1..=max`.
#[derive(Clone, Debug)]
pub struct LogGammaTable {
    values: Vec<f64>,
}

impl LogGammaTable {
    pub fn new(max: usize) -> Self {
        let mut values = Vec::with_capacity(max + 1);
        values.push(f64::NAN);
        values.extend((1..=max).map(|l| ln_gamma(l as f64)));
        LogGammaTable { values }
    }

    /// Table covering every argument needed for sizes `(n, m)`.
    pub fn for_sizes(n: usize, m: usize) -> Self {
        Self::new(n + m + 1)
    }

    pub fn max_arg(&self) -> usize {
        self.values.len() - 1
    }

    #[inline]
    pub fn ln_gamma(&self, l: usize) -> f64 {
        debug_assert!(l >= 1);
        self.values[l]
    }

    #[inline]
    pub fn ln_beta(&self, a: usize, b: usize) -> f64 {
        self.values[a] + self.values[b] - self.values[a + b]
    }

    #[inline]
    pub fn ln_choose(&self, n: usize, k: usize) -> f64 {
        self.values[n + 1] - self.values[k + 1] - self.values[n - k + 1]
    }

    /// `P(C = t)` for `C ~ Beta-Binomial(m, k, n - k)`.
    #[inline]
    pub fn beta_binomial_pmf(&self, n: usize, k: usize, m: usize, t: usize) -> f64 {
        if t > m {
            return 0.0;
        }
        let log = self.ln_choose(m, t) + self.ln_beta(k + t, m - t + n - k) - self.ln_beta(k, n - k);
        if log < LOG_UNDERFLOW {
            0.0
        } else {
            log.exp()
        }
    }

    fn check(&self, n: usize, m: usize, k: usize) -> Result<()> {
        if k == 0 || k >= n {
            return Err(Error::k_range(k, n, "clipped coverage calibration"));
        }
        if n + m > self.max_arg() {
            return Err(Error::InvalidConfig(format!(
                "log-gamma table up to {} cannot serve N={n}, m={m}",
                self.max_arg()
            )));
        }
        Ok(())
    }

    /// Expected unnormalized Clipped Coverage by the direct `j`-sum.
    pub fn expected_direct(&self, n: usize, k: usize, m: usize) -> Result<f64> {
        self.check(n, m, k)?;
        let base = self.ln_beta(k, n - k);
        let mut sum = 0.0;
        let mut prev = f64::NEG_INFINITY;
        for j in 1..=m {
            let log = self.ln_choose(m, j) + self.ln_beta(k + j, m - j + n - k) - base;
            let descending = log < prev;
            prev = log;
            if log < LOG_UNDERFLOW {
                if descending {
                    break;
                }
                continue;
            }
            let term = (j.min(k) as f64 / k as f64) * log.exp();
            sum += term;
            if descending && term < TAIL_CUTOFF * sum {
                break;
            }
        }
        Ok(sum.clamp(0.0, 1.0))
    }

    /// Expected unnormalized Clipped Coverage via the survival function,
    /// `(1/k) sum_{k'=1}^{k} P(C >= k')`, using `k` pmf evaluations.
    pub fn expected_survival(&self, n: usize, k: usize, m: usize) -> Result<f64> {
        self.check(n, m, k)?;
        let kf = k as f64;
        let deficit: f64 = (0..k.min(m + 1))
            .map(|t| (1.0 - t as f64 / kf) * self.beta_binomial_pmf(n, k, m, t))
            .sum();
        Ok((1.0 - deficit).clamp(0.0, 1.0))
    }
}

/// Expected unnormalized Clipped Coverage with `m` of `m_total` synthetic
/// samples in distribution (direct sum).
pub fn expected_clipped_coverage(n: usize, m_total: usize, k: usize, m: usize) -> Result<f64> {
    check_m(m, m_total)?;
    LogGammaTable::for_sizes(n, m_total).expected_direct(n, k, m)
}

/// Same quantity as [`expected_clipped_coverage`], via the survival function.
pub fn expected_clipped_coverage_survival(n: usize, m_total: usize, k: usize, m: usize) -> Result<f64> {
    check_m(m, m_total)?;
    LogGammaTable::for_sizes(n, m_total).expected_survival(n, k, m)
}

fn check_m(m: usize, m_total: usize) -> Result<()> {
    if m > m_total {
        return Err(Error::InvalidConfig(format!("m = {m} exceeds M = {m_total}")));
    }
    Ok(())
}

/// How observed scores between knots are mapped.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GMode {
    /// Piecewise-linear between knots.
    #[default]
    Interp,
    /// Largest knot not above the score.
    Step,
}

impl GMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GMode::Interp => "interp",
            GMode::Step => "step",
        }
    }
}

impl FromStr for GMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interp" => Ok(GMode::Interp),
            "step" => Ok(GMode::Step),
            other => Err(Error::InvalidConfig(format!(
                "unknown g mode '{other}' (valid: interp, step)"
            ))),
        }
    }
}

/// Expected-score curve `f[m]`, `m = 0..=M`, for fixed `(N, M, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationTable {
    n: usize,
    m: usize,
    k: usize,
    f: Vec<f64>,
}

impl CalibrationTable {
    pub fn build(n: usize, m: usize, k: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidConfig("calibration needs M >= 1".into()));
        }
        let lgt = LogGammaTable::for_sizes(n, m);
        lgt.check(n, m, k)?;
        let f = (0..=m)
            .into_par_iter()
            .map(|mm| lgt.expected_survival(n, k, mm))
            .collect::<Result<Vec<_>>>()?;
        Ok(CalibrationTable { n, m, k, f })
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.n, self.m, self.k)
    }

    pub fn values(&self) -> &[f64] {
        &self.f
    }

    /// Maps an unnormalized score to the equivalent good-sample proportion.
    pub fn apply_g(&self, s: f64, mode: GMode) -> f64 {
        if !(-1e-9..=1.0 + 1e-9).contains(&s) {
            log::warn!("clipped coverage score {s} outside [0, 1]; clamping");
        }
        let s = s.clamp(0.0, 1.0);
        let total = self.m as f64;
        // first knot strictly above s
        let above = self.f.partition_point(|&v| v <= s);
        if above == 0 {
            return 0.0;
        }
        if above > self.m {
            return 1.0;
        }
        let lower = above - 1;
        match mode {
            GMode::Step => lower as f64 / total,
            GMode::Interp => {
                let (f0, f1) = (self.f[lower], self.f[above]);
                let frac = (s - f0) / (f1 - f0);
                ((lower as f64 + frac) / total).clamp(0.0, 1.0)
            }
        }
    }

    /// `m,f_expected` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,f_expected\n");
        for (m, v) in self.f.iter().enumerate() {
            out.push_str(&format!("{m},{v}\n"));
        }
        out
    }

    /// Parses a table written by [`CalibrationTable::to_csv`] and checks it
    /// against the expected sizes and the table invariants.
    pub fn from_csv(text: &str, n: usize, m: usize, k: usize) -> Result<Self> {
        let bad = |line: usize, message: String| Error::Parse { line, message };
        let mut lines = text.lines();
        if lines.next() != Some("m,f_expected") {
            return Err(bad(1, "missing 'm,f_expected' header".into()));
        }
        let mut f = Vec::with_capacity(m + 1);
        for (i, line) in lines.enumerate() {
            let at = i + 2;
            let (idx, val) = line.split_once(',').ok_or_else(|| bad(at, "expected 'm,f'".into()))?;
            if idx.parse::<usize>().ok() != Some(i) {
                return Err(bad(at, format!("expected index {i}, found '{idx}'")));
            }
            let v: f64 = val.parse().map_err(|_| bad(at, format!("'{val}' is not a number")))?;
            f.push(v);
        }
        let end = f.len() + 1;
        if f.len() != m + 1 {
            return Err(bad(end, format!("expected {} rows, found {}", m + 1, f.len())));
        }
        if f[0] != 0.0 || f.windows(2).any(|w| !(w[1] > w[0])) || f.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(bad(end, "table is not a strictly increasing curve starting at 0".into()));
        }
        Ok(CalibrationTable { n, m, k, f })
    }
}

/// On-disk cache of calibration tables keyed by `(N, M, k)`.
#[derive(Clone, Debug)]
pub struct CalibrationCache {
    dir: PathBuf,
}

impl CalibrationCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CalibrationCache { dir: dir.into() }
    }

    pub fn path_for(&self, n: usize, m: usize, k: usize) -> PathBuf {
        self.dir.join(format!("calibration_N{n}_M{m}_k{k}.csv"))
    }

    /// Loads a cached table, rebuilding (and rewriting) it when the file is
    /// missing or does not pass validation.
    pub fn load_or_build(&self, n: usize, m: usize, k: usize) -> Result<CalibrationTable> {
        let path = self.path_for(n, m, k);
        if let Ok(text) = fs::read_to_string(&path) {
            match CalibrationTable::from_csv(&text, n, m, k) {
                Ok(table) => return Ok(table),
                Err(e) => log::warn!("ignoring calibration cache {}: {e}", path.display()),
            }
        }
        let table = CalibrationTable::build(n, m, k)?;
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        write_atomic(&path, table.to_csv().as_bytes())?;
        Ok(table)
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_small_values() {
        let t = LogGammaTable::new(30);
        assert_eq!(t.ln_gamma(1), 0.0);
        assert_eq!(t.ln_gamma(2), 0.0);
        assert!((t.ln_gamma(5) - 24f64.ln()).abs() < 1e-15);
        // 25! = 15511210043330985984000000
        assert!((t.ln_gamma(26) - 58.003_605_222_980_52).abs() < 1e-12);
        assert!((ln_gamma(0.5 + 1.0) - (0.886_226_925_452_758f64).ln()).abs() < 1e-13);
    }

    #[test]
    fn ln_gamma_recurrence() {
        let t = LogGammaTable::new(5000);
        for l in 1..200 {
            let diff = t.ln_gamma(l + 1) - t.ln_gamma(l);
            assert!((diff - (l as f64).ln()).abs() < 1e-12, "l = {l}");
        }
        for l in 200..5000 {
            let diff = t.ln_gamma(l + 1) - t.ln_gamma(l);
            let scale = t.ln_gamma(l + 1);
            assert!((diff - (l as f64).ln()).abs() <= 1e-12 * scale, "l = {l}");
        }
    }

    #[test]
    fn two_by_two_knots() {
        let lgt = LogGammaTable::for_sizes(2, 2);
        for eval in [LogGammaTable::expected_direct, LogGammaTable::expected_survival] {
            assert_eq!(eval(&lgt, 2, 1, 0).unwrap(), 0.0);
            assert!((eval(&lgt, 2, 1, 1).unwrap() - 0.5).abs() < 1e-15);
            assert!((eval(&lgt, 2, 1, 2).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn k_must_be_below_n() {
        assert!(matches!(expected_clipped_coverage(5, 5, 5, 3), Err(Error::KOutOfRange { .. })));
        assert!(expected_clipped_coverage_survival(5, 5, 0, 3).is_err());
        assert!(expected_clipped_coverage(5, 5, 2, 6).is_err());
    }

    #[test]
    fn g_on_the_two_by_two_table() {
        let table = CalibrationTable::build(2, 2, 1).unwrap();
        assert_eq!(table.values()[0], 0.0);
        assert_eq!(table.apply_g(0.0, GMode::Interp), 0.0);
        assert_eq!(table.apply_g(0.5, GMode::Interp), 0.5);
        assert!((table.apply_g(7.0 / 12.0, GMode::Interp) - 0.75).abs() < 1e-15);
        assert_eq!(table.apply_g(table.values()[2], GMode::Interp), 1.0);
        assert_eq!(table.apply_g(0.9, GMode::Interp), 1.0);
        assert_eq!(table.apply_g(7.0 / 12.0, GMode::Step), 0.5);
        assert_eq!(table.apply_g(-0.5, GMode::Interp), 0.0);
    }

    #[test]
    fn csv_round_trip_and_rejection() {
        let table = CalibrationTable::build(10, 7, 3).unwrap();
        let csv = table.to_csv();
        assert_eq!(CalibrationTable::from_csv(&csv, 10, 7, 3).unwrap(), table);
        assert!(CalibrationTable::from_csv(&csv, 10, 8, 3).is_err());
        let corrupted = csv.replacen("m,f", "x,f", 1);
        assert!(CalibrationTable::from_csv(&corrupted, 10, 7, 3).is_err());
        let non_monotone = csv.replace("\n2,", "\n2,0.0000000001,");
        assert!(CalibrationTable::from_csv(&non_monotone, 10, 7, 3).is_err());
    }

    #[test]
    fn huge_sizes_stay_finite() {
        let table = CalibrationTable::build(100_000, 100_000, 5).unwrap();
        let f = table.values();
        assert!(f.iter().all(|v| v.is_finite()));
        assert!(f.windows(2).all(|w| w[1] > w[0]));
        // E[min(C, 5)] / 5 with C ~ Beta-Binomial(M, 5, N - 5) is about 0.754 at N = M.
        assert!((f[100_000] - 0.754).abs() < 0.002, "{}", f[100_000]);
    }
}
