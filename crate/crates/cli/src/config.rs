use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use menshov::martingale::PathConfig;
use menshov::spectral::CircleGrid;
use menshov::Error;
use serde::Serialize;

/// Run parameters shared by every subcommand.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    /// Taken from the input file when unset.
    pub grid_n: Option<usize>,
    pub dt: f64,
    pub r_exit: f64,
    pub n_paths: usize,
    pub max_steps: u64,
    pub seed: u64,
    pub eps: f64,
    pub stop_tol: f64,
    pub lambda: Option<f64>,
    pub n_bound: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    pub input_path: Option<String>,
    #[serde(skip)]
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub dump_paths: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PathConfig::default();
        Self {
            grid_n: None,
            dt: p.dt,
            r_exit: p.r_exit,
            n_paths: p.n_paths,
            max_steps: p.max_steps,
            seed: p.seed,
            eps: 0.1,
            stop_tol: 1.0 / 256.0,
            lambda: None,
            n_bound: None,
            lambda_grid: None,
            input_path: None,
            output_dir: PathBuf::from("."),
            workers: 0,
            dump_paths: false,
        }
    }
}

/// Command-line overrides; every field mirrors a [`RunConfig`] key.
#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    /// Flat `key=value` file; flags take precedence over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub grid_n: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub r_exit: Option<f64>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long)]
    pub max_steps: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub stop_tol: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub n_bound: Option<f64>,
    /// Comma-separated, increasing.
    #[arg(long, value_delimiter = ',')]
    pub lambda_grid: Option<Vec<f64>>,
    /// Boundary CSV (`theta,re,im`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads for path simulation (0 = all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write the simulated paths to `paths.bin`.
    #[arg(long)]
    pub dump_paths: bool,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, Error>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Parse(format!("config key `{key}`: {e}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, Error> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl RunConfig {
    /// Defaults, then the config file (if any), then flags.
    pub fn resolve(o: &Overrides) -> Result<Self, Error> {
        let mut cfg = Self::default();
        if let Some(path) = &o.config {
            cfg.apply_file(path)?;
        }
        cfg.apply_overrides(o);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), Error> {
        let text = fs::read_to_string(path)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!(
                    "{}:{}: expected key=value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        let key = key.replace('-', "_").to_ascii_lowercase();
        match key.as_str() {
            "grid_n" => self.grid_n = Some(parse(&key, value)?),
            "dt" => self.dt = parse(&key, value)?,
            "r_exit" => self.r_exit = parse(&key, value)?,
            "n_paths" => self.n_paths = parse(&key, value)?,
            "max_steps" => self.max_steps = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "eps" => self.eps = parse(&key, value)?,
            "stop_tol" => self.stop_tol = parse(&key, value)?,
            "lambda" => self.lambda = Some(parse(&key, value)?),
            "n_bound" => self.n_bound = Some(parse(&key, value)?),
            "lambda_grid" => self.lambda_grid = Some(parse_list(&key, value)?),
            "input" | "input_path" => self.input_path = Some(value.to_string()),
            "output_dir" => self.output_dir = PathBuf::from(value),
            "workers" => self.workers = parse(&key, value)?,
            "dump_paths" => self.dump_paths = parse(&key, value)?,
            _ => return Err(Error::Parse(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    fn apply_overrides(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($f:ident),*) => { $(if let Some(v) = o.$f.clone() { self.$f = v; })* };
        }
        macro_rules! take_opt {
            ($($f:ident),*) => { $(if o.$f.is_some() { self.$f = o.$f.clone(); })* };
        }
        take!(dt, r_exit, n_paths, max_steps, seed, eps, stop_tol, output_dir, workers);
        take_opt!(grid_n, lambda, n_bound, lambda_grid);
        if let Some(p) = &o.input {
            self.input_path = Some(p.display().to_string());
        }
        self.dump_paths |= o.dump_paths;
    }

    pub fn validate(&self) -> Result<(), Error> {
        if let Some(n) = self.grid_n {
            CircleGrid::new(n)?;
        }
        self.path_config().validate()?;
        if !(self.eps > 0.0 && self.eps < 2.0 * std::f64::consts::PI) {
            return Err(Error::Param {
                name: "eps",
                reason: format!("{} not in (0, 2π)", self.eps),
            });
        }
        if !(self.stop_tol > 0.0 && self.stop_tol < 1.0) {
            return Err(Error::Param {
                name: "stop_tol",
                reason: format!("{} not in (0, 1)", self.stop_tol),
            });
        }
        if let Some(l) = self.lambda {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Param {
                    name: "lambda",
                    reason: format!("{l} is not a positive level"),
                });
            }
        }
        if let Some(b) = self.n_bound {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Param {
                    name: "n_bound",
                    reason: format!("{b} is not positive"),
                });
            }
        }
        if let Some(g) = &self.lambda_grid {
            if g.is_empty()
                || g.iter().any(|l| l.is_nan() || *l <= 0.0)
                || g.windows(2).any(|w| w[0] >= w[1])
            {
                return Err(Error::Param {
                    name: "lambda_grid",
                    reason: "must be positive and strictly increasing".into(),
                });
            }
        }
        Ok(())
    }

    pub fn path_config(&self) -> PathConfig {
        PathConfig {
            dt: self.dt,
            r_exit: self.r_exit,
            seed: self.seed,
            n_paths: self.n_paths,
            max_steps: self.max_steps,
            workers: self.workers,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(
            &path,
            "# comment\nseed = 7\nn-paths=123\nlambda_grid=1,2,3\n",
        )
        .unwrap();
        let o = Overrides {
            config: Some(path),
            seed: Some(9),
            ..Default::default()
        };
        let cfg = RunConfig::resolve(&o).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.n_paths, 123);
        assert_eq!(cfg.lambda_grid, Some(vec![1.0, 2.0, 3.0]));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut cfg = RunConfig::default();
        assert!(matches!(cfg.set("colour", "red"), Err(Error::Parse(_))));
        assert!(matches!(cfg.set("dt", "fast"), Err(Error::Parse(_))));
        cfg.eps = 7.0;
        assert!(matches!(
            cfg.validate(),
            Err(Error::Param { name: "eps", .. })
        ));
    }

    #[test]
    fn grid_must_be_increasing() {
        let o = Overrides {
            lambda_grid: Some(vec![2.0, 1.0]),
            ..Default::default()
        };
        assert!(RunConfig::resolve(&o).is_err());
    }
}
