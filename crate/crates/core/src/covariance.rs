//! Estimation of the `m × m` base-forecast error covariance.
//!
//! The pipeline is: sample covariance, shrinkage toward the diagonal with a
//! Schäfer–Strimmer intensity, structural zeroing, eigenvalue-floor repair.
//! Zeroing runs after shrinkage so the requested sparsity is exact in the
//! output; the repair step only touches the spectrum when zeroing (or a short
//! window) left the matrix indefinite or near-singular.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default eigenvalue floor, relative to the largest eigenvalue.
pub const DEFAULT_FLOOR_RATIO: f64 = 1e-8;

/// Which covariance entries are structurally forced to zero.
///
/// Indices refer to `(variable, expert)` pairs in expert-major order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroPattern {
    None,
    /// Zero iff both the variable and the expert differ.
    #[default]
    CrossBoth,
    /// Zero iff the variable differs: one `p × p` block per variable.
    CrossVariable,
}

impl ZeroPattern {
    fn zeroes(self, var_a: usize, exp_a: usize, var_b: usize, exp_b: usize) -> bool {
        match self {
            ZeroPattern::None => false,
            ZeroPattern::CrossBoth => var_a != var_b && exp_a != exp_b,
            ZeroPattern::CrossVariable => var_a != var_b,
        }
    }
}

impl fmt::Display for ZeroPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZeroPattern::None => "none",
            ZeroPattern::CrossBoth => "cross-both",
            ZeroPattern::CrossVariable => "cross-variable",
        })
    }
}

impl FromStr for ZeroPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "none" => Ok(ZeroPattern::None),
            "cross-both" => Ok(ZeroPattern::CrossBoth),
            "cross-variable" => Ok(ZeroPattern::CrossVariable),
            other => Err(Error::InvalidArgument(format!(
                "unknown zero pattern {other:?} (expected none, cross-both, cross-variable)"
            ))),
        }
    }
}

/// Shrinkage intensity: estimated from the samples, or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Shrinkage {
    #[default]
    Auto,
    Fixed(f64),
}

impl fmt::Display for Shrinkage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shrinkage::Auto => f.write_str("auto"),
            Shrinkage::Fixed(l) => write!(f, "{l}"),
        }
    }
}

impl FromStr for Shrinkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Shrinkage::Auto);
        }
        let l: f64 = s.parse().map_err(|_| {
            Error::InvalidArgument(format!("lambda must be 'auto' or a number, got {s:?}"))
        })?;
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::InvalidArgument(format!("lambda {l} outside [0, 1]")));
        }
        Ok(Shrinkage::Fixed(l))
    }
}

impl Serialize for Shrinkage {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Shrinkage::Auto => s.serialize_str("auto"),
            Shrinkage::Fixed(l) => s.serialize_f64(*l),
        }
    }
}

impl<'de> Deserialize<'de> for Shrinkage {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(l) => Shrinkage::from_str(&l.to_string()),
            Raw::Text(s) => Shrinkage::from_str(&s),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Default smallest eigenvalue of the correlation form for [`PdRepair::Shrink`].
pub const DEFAULT_PD_MARGIN: f64 = 0.01;

/// How an indefinite or ill-conditioned estimate is made positive definite.
///
/// Zeroing cross-expert cross-variable entries of a matrix with a nearly
/// singular expert block (an expert whose total is the sum of its bottoms)
/// leaves it indefinite; flooring eigenvalues then keeps near-null
/// directions that the GLS weights exploit. Extra shrinkage avoids that.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PdRepair {
    /// Raise eigenvalues below `floor_ratio · λmax` to that floor.
    EigenFloor,
    /// Shrink further toward the diagonal until the smallest eigenvalue of
    /// the correlation form reaches `margin`; the eigenvalue floor then
    /// applies as a backstop.
    Shrink { margin: f64 },
}

impl Default for PdRepair {
    fn default() -> Self {
        PdRepair::Shrink {
            margin: DEFAULT_PD_MARGIN,
        }
    }
}

/// Settings for [`estimate_covariance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovConfig {
    pub center: bool,
    pub shrinkage: Shrinkage,
    pub pattern: ZeroPattern,
    pub floor_ratio: f64,
    #[serde(default)]
    pub repair: PdRepair,
}

impl Default for CovConfig {
    fn default() -> Self {
        Self {
            center: false,
            shrinkage: Shrinkage::Auto,
            pattern: ZeroPattern::CrossBoth,
            floor_ratio: DEFAULT_FLOOR_RATIO,
            repair: PdRepair::default(),
        }
    }
}

/// A symmetric positive-definite error covariance with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CovEstimate {
    pub matrix: DMatrix<f64>,
    pub n: usize,
    pub p: usize,
    pub lambda: f64,
    pub pattern: ZeroPattern,
    /// Whether the eigenvalue floor changed the matrix.
    pub repaired: bool,
}

/// Maximum-likelihood style covariance `(1/T) XᵀX`, optionally demeaning
/// columns first.
pub fn sample_cov(samples: &DMatrix<f64>, center: bool) -> Result<DMatrix<f64>> {
    let t = samples.nrows();
    if t < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: t });
    }
    let x = if center {
        demeaned(samples)
    } else {
        samples.clone()
    };
    let mut s = x.tr_mul(&x) / t as f64;
    symmetrize_upper(&mut s);
    Ok(s)
}

fn demeaned(samples: &DMatrix<f64>) -> DMatrix<f64> {
    let mut x = samples.clone();
    for mut col in x.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    x
}

fn symmetrize_upper(s: &mut DMatrix<f64>) {
    for c in 0..s.ncols() {
        for r in (c + 1)..s.nrows() {
            s[(r, c)] = s[(c, r)];
        }
    }
}

/// `(1 - lambda) S + lambda diag(S)`.
pub fn shrink_to_diagonal(s: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "lambda {lambda} outside [0, 1]"
        )));
    }
    check_square(s)?;
    let mut out = s * (1.0 - lambda);
    for i in 0..s.nrows() {
        out[(i, i)] = s[(i, i)];
    }
    Ok(out)
}

/// Schäfer–Strimmer intensity for the diagonal target:
/// `sum_{i≠j} Var(s_ij) / sum_{i≠j} s_ij²`, clipped to `[0, 1]`.
///
/// With `w_kij = x_ki x_kj` (on demeaned data when `center`), the covariance
/// is `s_ij = c · mean_k(w_kij)` with `c = T/(T-1)` when centered and `1`
/// otherwise, and its sampling variance is estimated by
/// `c² / (T (T-1)) · sum_k (w_kij - mean(w_ij))²`.
pub fn estimate_lambda(samples: &DMatrix<f64>, center: bool) -> Result<f64> {
    let (t, m) = samples.shape();
    if t < 3 {
        return Err(Error::InsufficientSamples { needed: 3, got: t });
    }
    let x = if center {
        demeaned(samples)
    } else {
        samples.clone()
    };
    let tf = t as f64;
    let c = if center { tf / (tf - 1.0) } else { 1.0 };
    let var_scale = c * c / (tf * (tf - 1.0));
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..m {
        let xi = x.column(i);
        for j in (i + 1)..m {
            let xj = x.column(j);
            let mean_w = xi.dot(&xj) / tf;
            let ss: f64 = xi
                .iter()
                .zip(xj.iter())
                .map(|(a, b)| {
                    let dev = a * b - mean_w;
                    dev * dev
                })
                .sum();
            let s_ij = c * mean_w;
            num += var_scale * ss;
            den += s_ij * s_ij;
        }
    }
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok((num / den).clamp(0.0, 1.0))
}

/// Sets the entries selected by `pattern` to exactly zero.
pub fn apply_zero_pattern(
    w: &DMatrix<f64>,
    pattern: ZeroPattern,
    n: usize,
    p: usize,
) -> Result<DMatrix<f64>> {
    check_square(w)?;
    if n == 0 || p == 0 || w.nrows() != n * p {
        return Err(Error::InvalidArgument(format!(
            "matrix is {0}x{0}, expected n·p = {1}",
            w.nrows(),
            n * p
        )));
    }
    let mut out = w.clone();
    for r in 0..n * p {
        for c in 0..n * p {
            if pattern.zeroes(r % n, r / n, c % n, c / n) {
                out[(r, c)] = 0.0;
            }
        }
    }
    Ok(out)
}

/// Floors eigenvalues at `floor_ratio · λ_max` and reconstructs. Inputs that
/// already satisfy the floor are returned unchanged.
pub fn ensure_pd(w: &DMatrix<f64>, floor_ratio: f64) -> Result<DMatrix<f64>> {
    ensure_pd_flagged(w, floor_ratio).map(|(m, _)| m)
}

fn ensure_pd_flagged(w: &DMatrix<f64>, floor_ratio: f64) -> Result<(DMatrix<f64>, bool)> {
    if !(floor_ratio > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "floor ratio {floor_ratio} must be > 0"
        )));
    }
    check_symmetric(w)?;
    let eig = SymmetricEigen::new(w.clone());
    let max = eig.eigenvalues.max();
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::InvalidCovariance(format!(
            "largest eigenvalue {max} is not positive"
        )));
    }
    let floor = floor_ratio * max;
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return Ok((w.clone(), false));
    }
    let mut vals = eig.eigenvalues.clone();
    vals.iter_mut().for_each(|l| *l = l.max(floor));
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&vals) * v.transpose();
    symmetrize_upper(&mut out);
    Ok((out, true))
}

/// Extra diagonal-target intensity `t` such that the correlation form of
/// `(1 - t) W + t diag(W)` has smallest eigenvalue `margin`; `None` when `W`
/// already meets it or has a non-positive variance.
pub fn pd_shrinkage(w: &DMatrix<f64>, margin: f64) -> Result<Option<f64>> {
    if !(0.0..1.0).contains(&margin) {
        return Err(Error::InvalidArgument(format!(
            "margin {margin} must lie in [0, 1)"
        )));
    }
    check_symmetric(w)?;
    let d = w.diagonal();
    if d.iter().any(|&v| !(v > 0.0)) {
        return Ok(None);
    }
    let inv_sd = d.map(|v| 1.0 / v.sqrt());
    let c = DMatrix::from_fn(w.nrows(), w.ncols(), |r, k| {
        w[(r, k)] * inv_sd[r] * inv_sd[k]
    });
    let mu = SymmetricEigen::new(c).eigenvalues.min();
    if mu >= margin {
        return Ok(None);
    }
    Ok(Some(((margin - mu) / (1.0 - mu)).clamp(0.0, 1.0)))
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidArgument(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Symmetric to within `1e-12` relative to the largest absolute entry.
pub(crate) fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    check_square(m)?;
    let scale = m.amax();
    let tol = 1e-12 * scale;
    for c in 0..m.ncols() {
        for r in (c + 1)..m.nrows() {
            if (m[(r, c)] - m[(c, r)]).abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "matrix not symmetric at ({r}, {c}): {} vs {}",
                    m[(r, c)],
                    m[(c, r)]
                )));
            }
        }
    }
    Ok(())
}

/// Full pipeline over a `T × (n p)` expert-major error sample matrix.
pub fn estimate_covariance(
    samples: &DMatrix<f64>,
    n: usize,
    p: usize,
    config: &CovConfig,
) -> Result<CovEstimate> {
    if samples.ncols() != n * p {
        return Err(Error::InvalidArgument(format!(
            "samples have {} columns, expected n·p = {}",
            samples.ncols(),
            n * p
        )));
    }
    let s = sample_cov(samples, config.center)?;
    if s.amax() == 0.0 {
        log::warn!("all validation errors are zero; using the identity covariance");
        return Ok(CovEstimate {
            matrix: DMatrix::identity(n * p, n * p),
            n,
            p,
            lambda: 1.0,
            pattern: config.pattern,
            repaired: true,
        });
    }
    let lambda = match config.shrinkage {
        Shrinkage::Auto => estimate_lambda(samples, config.center)?,
        Shrinkage::Fixed(l) => l,
    };
    let shrunk = shrink_to_diagonal(&s, lambda)?;
    let mut zeroed = apply_zero_pattern(&shrunk, config.pattern, n, p)?;
    let mut lambda = lambda;
    let mut shrunk_more = false;
    if let PdRepair::Shrink { margin } = config.repair {
        if let Some(extra) = pd_shrinkage(&zeroed, margin)? {
            // shrinking and zeroing commute: the pattern never touches the diagonal
            zeroed = shrink_to_diagonal(&zeroed, extra)?;
            lambda = 1.0 - (1.0 - lambda) * (1.0 - extra);
            shrunk_more = true;
        }
    }
    let (matrix, floored) = ensure_pd_flagged(&zeroed, config.floor_ratio)?;
    let repaired = floored || shrunk_more;
    Ok(CovEstimate {
        matrix,
        n,
        p,
        lambda,
        pattern: config.pattern,
        repaired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sample_cov_antipodal() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        let s = sample_cov(&x, false).unwrap();
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn sample_cov_centered_constant_is_zero() {
        let x = DMatrix::from_row_slice(3, 2, &[5.0, -2.0, 5.0, -2.0, 5.0, -2.0]);
        assert_eq!(sample_cov(&x, true).unwrap(), DMatrix::zeros(2, 2));
        assert!(matches!(
            sample_cov(&DMatrix::zeros(1, 2), false),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    #[test]
    fn shrink_examples() {
        let s = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_eq!(shrink_to_diagonal(&s, 0.0).unwrap(), s);
        assert_eq!(
            shrink_to_diagonal(&s, 1.0).unwrap(),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 2.0])
        );
        assert_eq!(
            shrink_to_diagonal(&s, 0.5).unwrap(),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 2.0])
        );
        assert!(shrink_to_diagonal(&s, 1.5).is_err());
        assert!(shrink_to_diagonal(&s, -0.1).is_err());
    }

    #[test]
    fn lambda_is_one_without_off_diagonal_covariance() {
        // columns orthogonal under the uncentered product
        let x = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        assert_eq!(estimate_lambda(&x, false).unwrap(), 1.0);
        assert!(estimate_lambda(&DMatrix::zeros(2, 2), false).is_err());
    }

    #[test]
    fn lambda_duplicated_columns_is_small() {
        // s_12 = mean(x²); Var(s_12) = var(x²)/T, frozen from direct evaluation
        let col: Vec<f64> = (0..200)
            .map(|k| ((k * 37 % 101) as f64 - 50.0) / 10.0)
            .collect();
        let mut x = DMatrix::zeros(200, 2);
        x.column_mut(0).copy_from_slice(&col);
        x.column_mut(1).copy_from_slice(&col);
        let t = 200.0;
        let sq: Vec<f64> = col.iter().map(|v| v * v).collect();
        let mean = sq.iter().sum::<f64>() / t;
        let ss: f64 = sq.iter().map(|v| (v - mean).powi(2)).sum();
        let want = ss / (t * (t - 1.0)) / (mean * mean);
        let got = estimate_lambda(&x, false).unwrap();
        assert!((got - want).abs() < 1e-12 * want.max(1.0));
        assert!(got < 0.02);
    }

    #[test]
    fn zero_pattern_examples() {
        let ones = DMatrix::from_element(4, 4, 1.0);
        assert_eq!(
            apply_zero_pattern(&ones, ZeroPattern::None, 2, 2).unwrap(),
            ones
        );
        let cb = apply_zero_pattern(&ones, ZeroPattern::CrossBoth, 2, 2).unwrap();
        let zeros_cb = [(0, 3), (3, 0), (1, 2), (2, 1)];
        for r in 0..4 {
            for c in 0..4 {
                let want = if zeros_cb.contains(&(r, c)) { 0.0 } else { 1.0 };
                assert_eq!(cb[(r, c)], want, "cross-both at ({r},{c})");
            }
        }
        let cv = apply_zero_pattern(&ones, ZeroPattern::CrossVariable, 2, 2).unwrap();
        let zeros_cv = [
            (0, 1),
            (1, 0),
            (0, 3),
            (3, 0),
            (1, 2),
            (2, 1),
            (2, 3),
            (3, 2),
        ];
        for r in 0..4 {
            for c in 0..4 {
                let want = if zeros_cv.contains(&(r, c)) { 0.0 } else { 1.0 };
                assert_eq!(cv[(r, c)], want, "cross-variable at ({r},{c})");
            }
        }
        assert!(apply_zero_pattern(&ones, ZeroPattern::CrossBoth, 3, 2).is_err());
    }

    #[test]
    fn ensure_pd_examples() {
        let eye = DMatrix::<f64>::identity(3, 3);
        assert_eq!(ensure_pd(&eye, 1e-8).unwrap(), eye);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 0.0]));
        let r = ensure_pd(&d, 1e-8).unwrap();
        assert!((r[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((r[(1, 1)] - 1e-8).abs() < 1e-20);
        assert!(r[(0, 1)].abs() < 1e-20);
        // rank one: eigenvalues 2, 0 -> 2, 2e-8; correction 1e-8 * [[1,-1],[-1,1]]
        let ones = DMatrix::from_element(2, 2, 1.0);
        let r = ensure_pd(&ones, 1e-8).unwrap();
        assert!((&r - &ones).amax() <= 2e-8);
        assert!(SymmetricEigen::new(r).eigenvalues.min() > 0.0);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            ensure_pd(&asym, 1e-8),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn pattern_round_trip_text() {
        for p in [
            ZeroPattern::None,
            ZeroPattern::CrossBoth,
            ZeroPattern::CrossVariable,
        ] {
            assert_eq!(p.to_string().parse::<ZeroPattern>().unwrap(), p);
        }
        assert_eq!("0.25".parse::<Shrinkage>().unwrap(), Shrinkage::Fixed(0.25));
        assert!("2".parse::<Shrinkage>().is_err());
    }

    fn random_samples(t: usize, m: usize, seed: u64) -> DMatrix<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mix = DMatrix::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0));
        let z = DMatrix::from_fn(t, m, |_, _| rng.random_range(-1.0..1.0));
        z * mix
    }

    proptest! {
        #[test]
        fn pipeline_is_symmetric_pd(seed in any::<u64>(), n in 1usize..5, p in 1usize..4,
                                    pat in 0usize..3, center in any::<bool>()) {
            let m = n * p;
            let t = (m / 2).max(3);
            let x = random_samples(t, m, seed);
            let pattern = [ZeroPattern::None, ZeroPattern::CrossBoth, ZeroPattern::CrossVariable][pat];
            let cfg = CovConfig { center, pattern, ..CovConfig::default() };
            let est = estimate_covariance(&x, n, p, &cfg).unwrap();
            prop_assert!(check_symmetric(&est.matrix).is_ok());
            prop_assert!(SymmetricEigen::new(est.matrix.clone()).eigenvalues.min() > 0.0);
        }

        #[test]
        fn shrink_keeps_diagonal(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
            let s = sample_cov(&random_samples(10, 5, seed), false).unwrap();
            let out = shrink_to_diagonal(&s, lambda).unwrap();
            for i in 0..5 {
                prop_assert_eq!(out[(i, i)], s[(i, i)]);
            }
        }

        #[test]
        fn zero_pattern_idempotent_and_block_diagonal(seed in any::<u64>(), n in 1usize..5, p in 1usize..4) {
            let m = n * p;
            let s = sample_cov(&random_samples(m + 2, m, seed), false).unwrap();
            for pattern in [ZeroPattern::None, ZeroPattern::CrossBoth, ZeroPattern::CrossVariable] {
                let once = apply_zero_pattern(&s, pattern, n, p).unwrap();
                let twice = apply_zero_pattern(&once, pattern, n, p).unwrap();
                prop_assert_eq!(&once, &twice);
            }
            // permute expert-major -> variable-major; off-block mass must vanish
            let cv = apply_zero_pattern(&s, ZeroPattern::CrossVariable, n, p).unwrap();
            let perm: Vec<usize> = (0..n).flat_map(|i| (0..p).map(move |j| j * n + i)).collect();
            let mut off_block = 0.0;
            for (a, &ra) in perm.iter().enumerate() {
                for (b, &rb) in perm.iter().enumerate() {
                    if a / p != b / p {
                        off_block += cv[(ra, rb)].abs();
                    }
                }
            }
            prop_assert_eq!(off_block, 0.0);
        }
    }

    #[test]
    fn brute_force_covariance_matches() {
        let x = random_samples(2688, 16, 7);
        let s = sample_cov(&x, false).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                let mut acc = 0.0;
                for t in 0..2688 {
                    acc += x[(t, a)] * x[(t, b)];
                }
                acc /= 2688.0;
                assert!((s[(a, b)] - acc).abs() <= 1e-12 * acc.abs().max(1.0));
            }
        }
    }

    #[test]
    fn pd_shrinkage_hits_margin() {
        let w = DMatrix::from_row_slice(2, 2, &[4.0, 8.0, 8.0, 4.0]);
        // correlation form [[1, 2], [2, 1]], smallest eigenvalue -1
        let t = pd_shrinkage(&w, 0.01).unwrap().unwrap();
        let fixed = shrink_to_diagonal(&w, t).unwrap();
        let c = fixed[(0, 1)] / (fixed[(0, 0)] * fixed[(1, 1)]).sqrt();
        assert!((1.0 - c.abs() - 0.01).abs() < 1e-12);
        assert_eq!(pd_shrinkage(&DMatrix::identity(3, 3), 0.01).unwrap(), None);
    }

    #[test]
    fn shrink_repair_raises_lambda() {
        // two perfectly correlated columns per expert block, cross terms zeroed
        let x = DMatrix::from_fn(50, 4, |r, c| {
            let base = ((r * 7 + 3) % 11) as f64 - 5.0;
            if c < 2 {
                base
            } else {
                base * 0.5 + ((r * 5) % 3) as f64
            }
        });
        let cfg = CovConfig {
            shrinkage: Shrinkage::Fixed(0.0),
            ..CovConfig::default()
        };
        let est = estimate_covariance(&x, 2, 2, &cfg).unwrap();
        assert!(est.repaired);
        assert!(est.lambda > 0.0);
        let floor = CovConfig {
            repair: PdRepair::EigenFloor,
            ..cfg
        };
        let est_floor = estimate_covariance(&x, 2, 2, &floor).unwrap();
        assert_eq!(est_floor.lambda, 0.0);
    }
}
