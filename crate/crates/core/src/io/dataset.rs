//! Canonical on-disk dataset: a directory holding `dataset.toml` and the
//! canonical long CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{ForecastSet, Hierarchy, Panel};

use super::config::{DataSource, ExperimentConfig, HierarchySpec};
use super::csv::{parse_load_csv, write_canonical_csv, ColumnMapping, TimezonePolicy};
use super::synth::{synth_generate, Synthetic};

pub const DATASET_FILE: &str = "dataset.toml";
const LOAD_FILE: &str = "load.csv";

/// Actuals and expert forecasts, both in hierarchy order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub hierarchy: Hierarchy,
    pub panel: Panel,
    pub forecasts: ForecastSet,
}

impl Dataset {
    pub fn new(hierarchy: Hierarchy, panel: &Panel, forecasts: &ForecastSet) -> Result<Self> {
        let panel = panel.reorder(&hierarchy)?;
        let forecasts = forecasts.reorder(&hierarchy)?;
        forecasts.check_aligned(&panel)?;
        Ok(Self {
            hierarchy,
            panel,
            forecasts,
        })
    }
}

impl From<Synthetic> for Dataset {
    fn from(s: Synthetic) -> Self {
        Self {
            hierarchy: s.hierarchy,
            panel: s.panel,
            forecasts: s.forecasts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DatasetManifest {
    file: String,
    #[serde(flatten)]
    hierarchy: HierarchySpec,
}

pub fn save_dataset(dir: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = DatasetManifest {
        file: LOAD_FILE.into(),
        hierarchy: HierarchySpec::from(&data.hierarchy),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    let mpath = dir.join(DATASET_FILE);
    std::fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))?;
    let cpath = dir.join(LOAD_FILE);
    let file = std::fs::File::create(&cpath).map_err(|e| Error::io(&cpath, e))?;
    write_canonical_csv(
        std::io::BufWriter::new(file),
        &data.panel,
        Some(&data.forecasts),
    )
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let mpath = dir.join(DATASET_FILE);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: DatasetManifest =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", mpath.display())))?;
    let hierarchy = manifest.hierarchy.build()?;
    let data = parse_load_csv(
        dir.join(&manifest.file),
        &ColumnMapping::default(),
        TimezonePolicy::WallClock,
    )?;
    from_parts(hierarchy, data.panel, data.forecasts)
}

fn from_parts(
    hierarchy: Hierarchy,
    panel: Option<Panel>,
    fc: Option<ForecastSet>,
) -> Result<Dataset> {
    let panel = panel.ok_or_else(|| Error::Schema("no actual load column".into()))?;
    let fc = fc.ok_or_else(|| Error::Schema("no forecast column".into()))?;
    Dataset::new(hierarchy, &panel, &fc)
}

/// Loads or generates the data named by the config's source.
pub fn load_data(config: &ExperimentConfig) -> Result<Dataset> {
    match &config.data {
        DataSource::Csv {
            path,
            mapping,
            timezone,
        } => {
            let spec = config.hierarchy.as_ref().ok_or_else(|| {
                Error::Config("a csv data source needs a [hierarchy] section".into())
            })?;
            let data = parse_load_csv(path, mapping, *timezone)?;
            from_parts(spec.build()?, data.panel, data.forecasts)
        }
        DataSource::Dataset { dir } => {
            let data = load_dataset(dir)?;
            match &config.hierarchy {
                Some(spec) => Dataset::new(spec.build()?, &data.panel, &data.forecasts),
                None => Ok(data),
            }
        }
        DataSource::Synth(spec) => {
            let mut spec = spec.clone();
            if let Some(seed) = config.seed {
                spec.seed = seed;
            }
            Ok(synth_generate(&spec)?.into())
        }
    }
}
