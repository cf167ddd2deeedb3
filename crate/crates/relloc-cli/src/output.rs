//! Output document model: one domain column plus named data columns, with
//! the resolved configuration embedded in every artifact so a plot can be
//! traced back to the exact run that produced it.

use std::collections::BTreeMap;

use relloc::numkernel::Grid1D;
use relloc::Error;

pub struct Column {
    pub name: String,
    pub values: Vec<f64>,
    /// set when the column is a probability density over this grid; such
    /// columns are rejected unless they integrate to 1 within 1e-6
    pub density_on: Option<Grid1D>,
}

impl Column {
    pub fn plain(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self { name: name.into(), values, density_on: None }
    }

    pub fn density(name: impl Into<String>, values: Vec<f64>, grid: Grid1D) -> Self {
        Self { name: name.into(), values, density_on: Some(grid) }
    }
}

pub struct OutputDoc {
    pub experiment: &'static str,
    pub domain_name: String,
    pub domain: Vec<f64>,
    pub columns: Vec<Column>,
    /// resolved parameter values actually used by the run
    pub config: BTreeMap<String, String>,
}

impl OutputDoc {
    pub fn validate(&self) -> Result<(), Error> {
        for col in &self.columns {
            if col.values.len() != self.domain.len() {
                return Err(Error::Validation(format!(
                    "column '{}' has {} rows, domain has {}",
                    col.name,
                    col.values.len(),
                    self.domain.len()
                )));
            }
            if let Some(grid) = &col.density_on {
                let z = grid.integrate(&col.values)?;
                if (z - 1.0).abs() > 1e-6 {
                    return Err(Error::Validation(format!(
                        "density column '{}' integrates to {z}, outside 1 ± 1e-6",
                        col.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# experiment = {}\n", self.experiment));
        for (k, v) in &self.config {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        out.push_str(&format!("# version = {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&self.domain_name);
        for col in &self.columns {
            out.push(',');
            out.push_str(&col.name);
        }
        out.push('\n');
        for (i, x) in self.domain.iter().enumerate() {
            out.push_str(&format!("{x}"));
            for col in &self.columns {
                out.push_str(&format!(",{}", col.values[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let columns: Vec<serde_json::Value> = self
            .columns
            .iter()
            .map(|c| {
                serde_json::json!({
                    "name": c.name,
                    "values": c.values,
                })
            })
            .collect();
        let doc = serde_json::json!({
            "experiment": self.experiment,
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "domain": { "name": self.domain_name, "values": self.domain },
            "columns": columns,
        });
        let mut s = doc.to_string();
        s.push('\n');
        s
    }
}
