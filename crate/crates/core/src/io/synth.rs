//! Synthetic multi-zone load scenarios with configurable experts.
//!
//! Zone load is `level × daily profile × weekly factor × (1 + day shock)`
//! plus a small intraday AR(1) wiggle; the total is the exact sum of the
//! zones. Each expert forecasts every series as truth plus a bias and an
//! AR(1)-in-slot noise with a configurable share common across zones; the
//! expert's total forecast is the sum of its zone forecasts plus optional
//! extra noise, so experts need not be coherent.

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{ForecastSet, Hierarchy, Panel, SLOTS_PER_DAY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneSpec {
    pub name: String,
    pub level_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpertSpec {
    pub name: String,
    /// Bias as a fraction of the zone level.
    pub bias_frac: f64,
    /// Noise standard deviation as a fraction of the zone level.
    pub noise_frac: f64,
    /// Share of noise variance common to all zones, in `[0, 1]`.
    pub zone_corr: f64,
    /// AR(1) coefficient of the noise across consecutive slots, in `[0, 1)`.
    pub persistence: f64,
    /// Extra independent noise on the total, as a fraction of the total level.
    pub total_extra_frac: f64,
}

impl Default for ExpertSpec {
    fn default() -> Self {
        Self {
            name: "provider".into(),
            bias_frac: 0.0,
            noise_frac: 0.02,
            zone_corr: 0.5,
            persistence: 0.9,
            total_extra_frac: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub start: NaiveDate,
    pub days: usize,
    pub total_name: String,
    pub zones: Vec<ZoneSpec>,
    /// 96-point relative daily shape; a two-peak default when absent.
    pub daily_profile: Option<Vec<f64>>,
    /// Monday-first weekly factors.
    pub weekly: [f64; 7],
    /// Standard deviation of the day-level shock, as a fraction of level.
    pub day_shock_frac: f64,
    /// AR(1) coefficient of the day-level shock across days.
    pub day_shock_ar: f64,
    /// Share of day-shock variance common to all zones.
    pub common_shock_share: f64,
    /// Standard deviation of the intraday wiggle, as a fraction of level.
    pub slot_noise_frac: f64,
    pub experts: Vec<ExpertSpec>,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// Seven zones with level proportions loosely following a national grid.
    fn default() -> Self {
        let zones = [
            ("North", 14000.0),
            ("C-North", 3200.0),
            ("C-South", 4600.0),
            ("South", 2600.0),
            ("Calabria", 650.0),
            ("Sicily", 2100.0),
            ("Sardinia", 1000.0),
        ];
        Self {
            start: NaiveDate::from_ymd_opt(2023, 12, 4).expect("valid date"),
            days: 180,
            total_name: "Total".into(),
            zones: zones
                .iter()
                .map(|(n, l)| ZoneSpec {
                    name: n.to_string(),
                    level_mw: *l,
                })
                .collect(),
            daily_profile: None,
            weekly: [1.0, 1.03, 1.03, 1.02, 1.0, 0.87, 0.78],
            day_shock_frac: 0.04,
            day_shock_ar: 0.6,
            common_shock_share: 0.6,
            slot_noise_frac: 0.004,
            experts: vec![ExpertSpec::default()],
            seed: 42,
        }
    }
}

/// Two-peak relative daily shape with mean 1.
pub fn default_daily_profile() -> Vec<f64> {
    let raw: Vec<f64> = (0..SLOTS_PER_DAY)
        .map(|h| {
            let t = (h as f64 + 0.5) / 4.0;
            let morning = (-(t - 11.0_f64).powi(2) / 8.0).exp();
            let evening = (-(t - 19.0_f64).powi(2) / 6.0).exp();
            0.65 + 0.35 * morning + 0.3 * evening
        })
        .collect();
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    raw.iter().map(|v| v / mean).collect()
}

impl SynthSpec {
    pub fn hierarchy(&self) -> Result<Hierarchy> {
        Hierarchy::new(
            self.total_name.clone(),
            self.zones.iter().map(|z| z.name.clone()).collect(),
        )
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.days == 0 || self.zones.is_empty() {
            return bad("synthetic scenario needs at least one day and one zone".into());
        }
        if let Some(z) = self.zones.iter().find(|z| !(z.level_mw > 0.0)) {
            return bad(format!("zone {:?} level must be positive", z.name));
        }
        if let Some(p) = &self.daily_profile {
            if p.len() != SLOTS_PER_DAY || p.iter().any(|v| !v.is_finite()) {
                return bad(format!("daily profile needs {SLOTS_PER_DAY} finite values"));
            }
        }
        for (name, v) in [
            ("day_shock_frac", self.day_shock_frac),
            ("slot_noise_frac", self.slot_noise_frac),
        ] {
            if v < 0.0 || !v.is_finite() {
                return bad(format!(
                    "{name} must be a non-negative standard deviation, got {v}"
                ));
            }
        }
        if !(0.0..1.0).contains(&self.day_shock_ar)
            || !(0.0..=1.0).contains(&self.common_shock_share)
        {
            return bad("day_shock_ar must lie in [0, 1) and common_shock_share in [0, 1]".into());
        }
        for e in &self.experts {
            if e.noise_frac < 0.0 || e.total_extra_frac < 0.0 || !e.noise_frac.is_finite() {
                return bad(format!(
                    "expert {:?}: noise standard deviations must be non-negative",
                    e.name
                ));
            }
            if !(0.0..=1.0).contains(&e.zone_corr) || !(0.0..1.0).contains(&e.persistence) {
                return bad(format!(
                    "expert {:?}: zone_corr must lie in [0, 1] and persistence in [0, 1)",
                    e.name
                ));
            }
        }
        if self.experts.is_empty() {
            return bad("synthetic scenario needs at least one expert".into());
        }
        Ok(())
    }
}

/// Generated scenario, series in hierarchy order.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub hierarchy: Hierarchy,
    pub panel: Panel,
    pub forecasts: ForecastSet,
}

/// Unit-variance AR(1) path of length `len`.
fn ar1_path(rng: &mut ChaCha8Rng, phi: f64, len: usize) -> Vec<f64> {
    let innov = (1.0 - phi * phi).sqrt();
    let mut out = Vec::with_capacity(len);
    let mut x: f64 = rng.sample(StandardNormal);
    out.push(x);
    for _ in 1..len {
        let z: f64 = rng.sample(StandardNormal);
        x = phi * x + innov * z;
        out.push(x);
    }
    out
}

pub fn synth_generate(spec: &SynthSpec) -> Result<Synthetic> {
    spec.validate()?;
    let hierarchy = spec.hierarchy()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let nb = spec.zones.len();
    let (days, n) = (spec.days, nb + 1);
    let profile = spec
        .daily_profile
        .clone()
        .unwrap_or_else(default_daily_profile);
    let per_series = days * SLOTS_PER_DAY;

    // day shocks: AR(1) across days, mixing a common and a zonal component
    let common = ar1_path(&mut rng, spec.day_shock_ar, days);
    let zonal: Vec<Vec<f64>> = (0..nb)
        .map(|_| ar1_path(&mut rng, spec.day_shock_ar, days))
        .collect();
    let (wc, wz) = (
        spec.common_shock_share.sqrt(),
        (1.0 - spec.common_shock_share).sqrt(),
    );

    let mut truth = vec![0.0; n * per_series];
    for (i, zone) in spec.zones.iter().enumerate() {
        let wiggle = ar1_path(&mut rng, 0.95, per_series);
        for d in 0..days {
            let date = spec.start + Days::new(d as u64);
            let week = spec.weekly[date.weekday().num_days_from_monday() as usize];
            let shock = spec.day_shock_frac * (wc * common[d] + wz * zonal[i][d]);
            for h in 0..SLOTS_PER_DAY {
                let k = d * SLOTS_PER_DAY + h;
                let base = zone.level_mw * profile[h] * week * (1.0 + shock);
                truth[i * per_series + k] = base + spec.slot_noise_frac * zone.level_mw * wiggle[k];
            }
        }
    }
    for k in 0..per_series {
        truth[nb * per_series + k] = (0..nb).map(|i| truth[i * per_series + k]).sum();
    }

    let total_level: f64 = spec.zones.iter().map(|z| z.level_mw).sum();
    let p = spec.experts.len();
    let mut fc = vec![0.0; n * p * per_series];
    for (j, e) in spec.experts.iter().enumerate() {
        let common = ar1_path(&mut rng, e.persistence, per_series);
        let (wc, wz) = (e.zone_corr.sqrt(), (1.0 - e.zone_corr).sqrt());
        let mut zone_fc = vec![vec![0.0; per_series]; nb];
        for (i, zone) in spec.zones.iter().enumerate() {
            let idio = ar1_path(&mut rng, e.persistence, per_series);
            for k in 0..per_series {
                let noise = e.noise_frac * zone.level_mw * (wc * common[k] + wz * idio[k]);
                zone_fc[i][k] = truth[i * per_series + k] + e.bias_frac * zone.level_mw + noise;
            }
        }
        let extra = ar1_path(&mut rng, e.persistence, per_series);
        for i in 0..n {
            let dst = &mut fc[(i * p + j) * per_series..(i * p + j + 1) * per_series];
            if i < nb {
                dst.copy_from_slice(&zone_fc[i]);
            } else {
                for k in 0..per_series {
                    let sum: f64 = zone_fc.iter().map(|z| z[k]).sum();
                    dst[k] = sum + e.total_extra_frac * total_level * extra[k];
                }
            }
        }
    }

    let series = hierarchy.series_ids();
    let panel = Panel::new(series.clone(), spec.start, days, truth)?;
    let forecasts = ForecastSet::new(
        series,
        spec.experts.iter().map(|e| e.name.clone()).collect(),
        spec.start,
        days,
        fc,
    )?;
    Ok(Synthetic {
        hierarchy,
        panel,
        forecasts,
    })
}
