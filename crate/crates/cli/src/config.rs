//! Experiment configuration: defaults, a flat `key = value` file, then
//! command-line overrides, applied in that order.

use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "INTEGRABLE_OUT_DIR";

macro_rules! tolerances {
    ($($field:ident = $key:literal, $default:expr;)*) => {
        #[derive(Clone, Debug, PartialEq)]
        pub struct Tolerances {
            $(pub $field: f64,)*
        }

        impl Default for Tolerances {
            fn default() -> Self {
                Self { $($field: $default,)* }
            }
        }

        impl Tolerances {
            pub const KEYS: &'static [&'static str] = &[$($key),*];

            fn get_mut(&mut self, key: &str) -> Option<&mut f64> {
                match key {
                    $($key => Some(&mut self.$field),)*
                    _ => None,
                }
            }

            fn all(&self) -> Vec<(&'static str, f64)> {
                vec![$(($key, self.$field)),*]
            }
        }
    };
}

tolerances! {
    form = "form", 1e-8;
    form_alt = "form-alt", 1e-10;
    form_exact = "form-exact", 1e-12;
    unitary = "unitary", 1e-10;
    bracket_exact = "bracket-exact", 1e-12;
    leibniz = "leibniz", 1e-9;
    jacobi = "jacobi", 1e-7;
    canonical = "canonical", 1e-8;
    nonlocal = "nonlocal", 1e-10;
    casimir = "casimir", 1e-10;
    flow_drift = "flow-drift", 1e-12;
    flow_rate = "flow-rate", 1e-10;
    flow_trajectory = "flow-trajectory", 1e-7;
    identity = "identity", 1e-9;
    action_drift = "action-drift", 1e-8;
    pendulum = "pendulum", 1e-5;
    energy = "energy", 1e-6;
    relations = "relations", 1e-8;
    theta = "theta", 1e-10;
    angle_form = "angle-form", 1e-6;
    scatter_zero = "scatter-zero", 1e-12;
    det = "det", 1e-8;
    unitarity = "unitarity", 1e-7;
    born = "born", 5.0;
    linearization = "linearization", 1e-3;
    order = "order", 0.2;
    invariance = "invariance", 1e-8;
    hamiltonian = "hamiltonian", 1e-8;
    recursion = "recursion", 1e-3;
}

/// Spatial grid [−L, L] with spacing h and the ξ-grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub l: f64,
    pub h: f64,
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_count: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Self { l: 12.0, h: 1.0 / 64.0, xi_min: -4.0, xi_max: 4.0, xi_count: 257 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n: usize,
    pub trials: usize,
    pub tol: Tolerances,
    pub grid: Grid,
    pub out: PathBuf,
    /// Amplitude of the bundled three-wave potential.
    pub amplitude: f64,
    pub pendulum_t: f64,
    pub pendulum_steps: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n: 3,
            trials: 100,
            tol: Tolerances::default(),
            grid: Grid::default(),
            out: default_out_dir(),
            amplitude: 0.2,
            pendulum_t: 10.0,
            pendulum_steps: 10_000,
        }
    }
}

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.trim().parse().map_err(|_| CliError::Config(format!("invalid value {value:?} for {key}")))
}

impl ExperimentConfig {
    /// Sets one key. File keys use `tol.NAME` / `grid.NAME`; the
    /// command-line spellings `tol-NAME` / `grid-NAME` are accepted too.
    pub fn set(&mut self, key: &str, value: &str) -> CliResult<()> {
        let key = key.trim();
        if let Some(name) = key.strip_prefix("tol.").or_else(|| key.strip_prefix("tol-")) {
            let slot = self.tol.get_mut(name).ok_or_else(|| CliError::Config(format!("unknown tolerance {name:?}")))?;
            *slot = parse(key, value)?;
            return Ok(());
        }
        if let Some(name) = key.strip_prefix("grid.").or_else(|| key.strip_prefix("grid-")) {
            match name {
                "l" => self.grid.l = parse(key, value)?,
                "h" => self.grid.h = parse(key, value)?,
                "xi-min" | "xi_min" => self.grid.xi_min = parse(key, value)?,
                "xi-max" | "xi_max" => self.grid.xi_max = parse(key, value)?,
                "xi-count" | "xi_count" => self.grid.xi_count = parse(key, value)?,
                _ => return Err(CliError::Config(format!("unknown grid parameter {name:?}"))),
            }
            return Ok(());
        }
        match key {
            "seed" => self.seed = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "out" => self.out = PathBuf::from(value.trim()),
            "amplitude" => self.amplitude = parse(key, value)?,
            "pendulum.t" => self.pendulum_t = parse(key, value)?,
            "pendulum.steps" => self.pendulum_steps = parse(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> CliResult<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v).map_err(|e| match e {
                CliError::Config(m) => CliError::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> CliResult<()> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(2..=integrable_core::matrix::MAX_DIM).contains(&self.n) {
            return Err(CliError::Config(format!("n = {} must lie in 2..={}", self.n, integrable_core::matrix::MAX_DIM)));
        }
        if self.trials == 0 {
            return Err(CliError::Config("trials must be at least 1".into()));
        }
        if let Some((k, v)) = self.tol.all().into_iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(CliError::Config(format!("tolerance {k} = {v} must be positive")));
        }
        let g = &self.grid;
        if g.xi_count < 3 {
            return Err(CliError::Config("grid xi-count must be at least 3".into()));
        }
        if !(g.h > 0.0) || !(g.l > 0.0) || 2.0 * g.l / g.h < 3.0 {
            return Err(CliError::Config(format!("grid needs L > 0 and at least 3 nodes (L = {}, h = {})", g.l, g.h)));
        }
        if !(g.xi_max > g.xi_min) {
            return Err(CliError::Config("grid xi-max must exceed xi-min".into()));
        }
        if !(self.pendulum_t > 0.0) || self.pendulum_steps == 0 {
            return Err(CliError::Config("pendulum run needs t > 0 and at least one step".into()));
        }
        Ok(())
    }
}

/// Pulls `--tol-NAME[=V]` and `--grid-NAME[=V]` out of an argument list,
/// returning the remaining arguments and the `(key, value)` overrides.
pub fn split_wildcard_flags(args: Vec<String>) -> CliResult<(Vec<String>, Vec<(String, String)>)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(body) = arg.strip_prefix("--").filter(|b| b.starts_with("tol-") || b.starts_with("grid-")) else {
            rest.push(arg);
            continue;
        };
        let (key, value) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().ok_or_else(|| CliError::Config(format!("--{body} needs a value")))?;
                (body.to_string(), v)
            }
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let mut c = ExperimentConfig::default();
        c.apply_text("seed = 7\n# comment\ntol.jacobi = 1e-6\ngrid.xi_count = 33  # coarse\n").unwrap();
        assert_eq!((c.seed, c.tol.jacobi, c.grid.xi_count), (7, 1e-6, 33));
        let (rest, ov) = split_wildcard_flags(
            ["verify", "--tol-jacobi", "1e-5", "--grid-h=0.03125", "--seed", "3"].iter().map(|s| s.to_string()).collect(),
        )
        .unwrap();
        assert_eq!(rest, ["verify", "--seed", "3"]);
        for (k, v) in ov {
            c.set(&k, &v).unwrap();
        }
        assert_eq!((c.tol.jacobi, c.grid.h), (1e-5, 0.03125));
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        let mut c = ExperimentConfig::default();
        assert!(c.apply_text("seed 7").is_err());
        assert!(c.set("tol.nonsense", "1").is_err());
        assert!(c.set("trials", "many").is_err());
        c.n = 1;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let mut c = ExperimentConfig::default();
        c.tol.form = -1.0;
        assert!(c.validate().is_err());
        assert!(split_wildcard_flags(vec!["--tol-form".into()]).is_err());
    }
}
