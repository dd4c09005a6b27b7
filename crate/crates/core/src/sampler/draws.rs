//! Flat per-iteration archive of sampler states and its CSV form.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::SweepStats;
use crate::error::{PgmmError, Result};
use crate::model::{ClassParams, ModelConfig, ModelState, SubjectEffects};

/// Column offsets of one flattened state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawLayout {
    pub max_changepoints: usize,
    pub n_classes: usize,
    pub n_subjects: usize,
}

impl DrawLayout {
    pub fn new(cfg: &ModelConfig, n_subjects: usize) -> Self {
        DrawLayout {
            max_changepoints: cfg.max_changepoints,
            n_classes: cfg.n_classes,
            n_subjects,
        }
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            max_changepoints: self.max_changepoints,
            n_classes: self.n_classes,
        }
    }

    fn nb(&self) -> usize {
        self.max_changepoints + 2
    }

    pub fn sigma_eps(&self) -> usize {
        0
    }

    pub fn beta_mean(&self, c: usize, k: usize) -> usize {
        1 + c * self.nb() + k
    }

    fn lambda_mean_base(&self) -> usize {
        1 + self.n_classes * self.nb()
    }

    pub fn lambda_mean(&self, c: usize, k: usize) -> usize {
        self.lambda_mean_base() + c * self.max_changepoints + k
    }

    fn sigma_beta_base(&self) -> usize {
        self.lambda_mean_base() + self.n_classes * self.max_changepoints
    }

    pub fn sigma_beta(&self, c: usize, k: usize) -> usize {
        self.sigma_beta_base() + c * self.nb() + k
    }

    fn sigma_lambda_base(&self) -> usize {
        self.sigma_beta_base() + self.n_classes * self.nb()
    }

    pub fn sigma_lambda(&self, c: usize, k: usize) -> usize {
        self.sigma_lambda_base() + c * self.max_changepoints + k
    }

    fn count_base(&self) -> usize {
        self.sigma_lambda_base() + self.n_classes * self.max_changepoints
    }

    pub fn count(&self, c: usize) -> usize {
        self.count_base() + c
    }

    pub fn nu(&self, c: usize) -> usize {
        self.count_base() + self.n_classes + c
    }

    fn psi_base(&self) -> usize {
        self.count_base() + 2 * self.n_classes
    }

    pub fn psi(&self, i: usize) -> usize {
        self.psi_base() + i
    }

    fn beta_base(&self) -> usize {
        self.psi_base() + self.n_subjects
    }

    pub fn beta(&self, i: usize, k: usize) -> usize {
        self.beta_base() + i * self.nb() + k
    }

    fn lambda_base(&self) -> usize {
        self.beta_base() + self.n_subjects * self.nb()
    }

    pub fn lambda(&self, i: usize, k: usize) -> usize {
        self.lambda_base() + i * self.max_changepoints + k
    }

    fn indicator_base(&self) -> usize {
        self.lambda_base() + self.n_subjects * self.max_changepoints
    }

    pub fn indicator(&self, c: usize, k: usize) -> usize {
        self.indicator_base() + c * self.max_changepoints + k
    }

    pub fn width(&self) -> usize {
        self.indicator_base() + self.n_classes * self.max_changepoints
    }

    pub fn column_names(&self) -> Vec<String> {
        let (kk, cc, n, nb) = (self.max_changepoints, self.n_classes, self.n_subjects, self.nb());
        let mut names = Vec::with_capacity(self.width());
        names.push("sigma_eps".to_string());
        for c in 1..=cc {
            names.extend((0..nb).map(|k| format!("beta_mean.{c}.{k}")));
        }
        for c in 1..=cc {
            names.extend((1..=kk).map(|k| format!("lambda_mean.{c}.{k}")));
        }
        for c in 1..=cc {
            names.extend((0..nb).map(|k| format!("sigma_beta.{c}.{k}")));
        }
        for c in 1..=cc {
            names.extend((1..=kk).map(|k| format!("sigma_lambda.{c}.{k}")));
        }
        names.extend((1..=cc).map(|c| format!("K.{c}")));
        names.extend((1..=cc).map(|c| format!("nu.{c}")));
        names.extend((1..=n).map(|i| format!("psi.{i}")));
        for i in 1..=n {
            names.extend((0..nb).map(|k| format!("beta.{i}.{k}")));
        }
        for i in 1..=n {
            names.extend((1..=kk).map(|k| format!("lambda.{i}.{k}")));
        }
        for c in 1..=cc {
            names.extend((1..=kk).map(|k| format!("I.{c}.{k}")));
        }
        names
    }

    /// Recover the layout from a CSV header.
    pub fn from_header(names: &[String]) -> Result<Self> {
        let count = |prefix: &str| names.iter().filter(|s| s.starts_with(prefix)).count();
        let n_classes = count("nu.");
        let n_subjects = count("psi.");
        let max_changepoints = count("lambda_mean.1.");
        let layout = DrawLayout {
            max_changepoints,
            n_classes,
            n_subjects,
        };
        if n_classes == 0 || layout.column_names() != names {
            return Err(PgmmError::validation("unrecognised draw archive header"));
        }
        Ok(layout)
    }

    pub fn write_state(&self, s: &ModelState, row: &mut [f64]) {
        row[self.sigma_eps()] = s.resid_var.sqrt();
        for (c, class) in s.classes.iter().enumerate() {
            for k in 0..self.nb() {
                row[self.beta_mean(c, k)] = class.beta_means[k];
                row[self.sigma_beta(c, k)] = class.beta_sds[k];
            }
            for k in 0..self.max_changepoints {
                row[self.lambda_mean(c, k)] = class.cp_means[k];
                row[self.sigma_lambda(c, k)] = class.cp_sds[k];
                row[self.indicator(c, k)] = if s.indicators[c][k] { 1.0 } else { 0.0 };
            }
            row[self.count(c)] = class.n_active as f64;
            row[self.nu(c)] = s.mixing[c];
        }
        for (i, e) in s.effects.iter().enumerate() {
            row[self.psi(i)] = (s.membership[i] + 1) as f64;
            for k in 0..self.nb() {
                row[self.beta(i, k)] = e.beta[k];
            }
            for k in 0..self.max_changepoints {
                row[self.lambda(i, k)] = e.lambda[k];
            }
        }
    }

    pub fn read_state(&self, row: &[f64]) -> ModelState {
        let (kk, nb) = (self.max_changepoints, self.nb());
        let s = row[self.sigma_eps()];
        ModelState {
            resid_var: s * s,
            classes: (0..self.n_classes)
                .map(|c| ClassParams {
                    beta_means: (0..nb).map(|k| row[self.beta_mean(c, k)]).collect(),
                    beta_sds: (0..nb).map(|k| row[self.sigma_beta(c, k)]).collect(),
                    cp_means: (0..kk).map(|k| row[self.lambda_mean(c, k)]).collect(),
                    cp_sds: (0..kk).map(|k| row[self.sigma_lambda(c, k)]).collect(),
                    n_active: row[self.count(c)] as usize,
                })
                .collect(),
            mixing: (0..self.n_classes).map(|c| row[self.nu(c)]).collect(),
            membership: (0..self.n_subjects).map(|i| row[self.psi(i)] as usize - 1).collect(),
            effects: (0..self.n_subjects)
                .map(|i| SubjectEffects {
                    beta: (0..nb).map(|k| row[self.beta(i, k)]).collect(),
                    lambda: (0..kk).map(|k| row[self.lambda(i, k)]).collect(),
                })
                .collect(),
            indicators: (0..self.n_classes)
                .map(|c| (0..kk).map(|k| row[self.indicator(c, k)] != 0.0).collect())
                .collect(),
        }
    }
}

/// Stored post-burn-in states of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDraws {
    pub chain_id: usize,
    pub seed: u64,
    pub layout: DrawLayout,
    pub stats: SweepStats,
    values: Vec<f64>,
}

impl ChainDraws {
    pub fn new(layout: DrawLayout, chain_id: usize, seed: u64) -> Self {
        ChainDraws {
            chain_id,
            seed,
            layout,
            stats: SweepStats::default(),
            values: Vec::new(),
        }
    }

    pub fn n_draws(&self) -> usize {
        self.values.len() / self.layout.width()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn push_state(&mut self, s: &ModelState) {
        let w = self.layout.width();
        let start = self.values.len();
        self.values.resize(start + w, 0.0);
        self.layout.write_state(s, &mut self.values[start..]);
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.layout.width());
        self.values.extend_from_slice(row);
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let w = self.layout.width();
        &self.values[t * w..(t + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.layout.width())
    }

    pub fn get(&self, t: usize, col: usize) -> f64 {
        self.values[t * self.layout.width() + col]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        self.rows().map(|r| r[col]).collect()
    }

    pub fn state(&self, t: usize) -> ModelState {
        self.layout.read_state(self.row(t))
    }

    pub fn set_state(&mut self, t: usize, s: &ModelState) {
        let w = self.layout.width();
        self.layout.write_state(s, &mut self.values[t * w..(t + 1) * w]);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.layout.column_names())?;
        let mut buf = Vec::with_capacity(self.layout.width());
        for row in self.rows() {
            buf.clear();
            buf.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, chain_id: usize, seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(|s| s.to_string()).collect();
        let layout = DrawLayout::from_header(&header)?;
        let mut draws = ChainDraws::new(layout, chain_id, seed);
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            for field in rec.iter() {
                let v: f64 = field.parse().map_err(|_| PgmmError::Parse {
                    line: line + 2,
                    message: format!("not a number: `{field}`"),
                })?;
                draws.values.push(v);
            }
        }
        Ok(draws)
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load_csv(path: impl AsRef<Path>, chain_id: usize, seed: u64) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f), chain_id, seed)
    }
}
