//! Flat `key=value` run configuration. Matrix and vector entries name CSV
//! files, resolved relative to the config file; grid entries are inline
//! comma-separated numbers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ifs_core::geometry::Point;
use ifs_core::ifs::{AffineContraction, IfsSystem};
use ifs_core::io::{read_matrix, read_vector};
use ifs_core::operators::OperatorMatrix;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    base: PathBuf,
}

fn parse_line(line: &str, lineno: usize, origin: &str) -> CliResult<Option<(String, String)>> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let (key, value) = line
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("{origin}:{lineno}: expected key=value, got {line:?}")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(CliError::Config(format!("{origin}:{lineno}: empty key")));
    }
    Ok(Some((key.to_string(), value.trim().to_string())))
}

impl RunConfig {
    pub fn parse(text: &str, base: impl Into<PathBuf>, origin: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            if let Some((k, v)) = parse_line(line, idx + 1, origin)? {
                values.insert(k, v);
            }
        }
        Ok(Self {
            values,
            base: base.into(),
        })
    }

    /// Reads `path` if given, then applies `overrides` (each `key=value`).
    pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                Self::parse(&text, base, &p.display().to_string())?
            }
            None => Self::default(),
        };
        for (i, o) in overrides.iter().enumerate() {
            let (k, v) = parse_line(o, i + 1, "--set")?
                .ok_or_else(|| CliError::Config(format!("empty override {o:?}")))?;
            cfg.values.insert(k, v);
        }
        Ok(cfg)
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        self.get(key)
            .ok_or_else(|| CliError::Config(format!("missing key {key:?}")))
    }

    pub fn parsed<T: FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::Config(format!("invalid value for {key}: {v:?}")))
            })
            .transpose()
    }

    pub fn parsed_or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T> {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn required<T: FromStr>(&self, key: &str) -> CliResult<T> {
        self.require(key)?;
        Ok(self.parsed(key)?.expect("key checked above"))
    }

    /// Positive finite real, if present.
    pub fn positive(&self, key: &str) -> CliResult<Option<f64>> {
        match self.parsed::<f64>(key)? {
            Some(x) if !(x > 0.0 && x.is_finite()) => {
                Err(CliError::Config(format!("{key} must be positive, got {x}")))
            }
            other => Ok(other),
        }
    }

    pub fn path(&self, key: &str) -> CliResult<PathBuf> {
        Ok(self.resolve(self.require(key)?))
    }

    fn resolve(&self, value: &str) -> PathBuf {
        let p = Path::new(value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn open(&self, path: &Path) -> CliResult<BufReader<File>> {
        File::open(path)
            .map(BufReader::new)
            .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))
    }

    fn matrix_at(&self, path: PathBuf) -> CliResult<OperatorMatrix> {
        read_matrix(self.open(&path)?).map_err(|source| CliError::File { path, source })
    }

    fn vector_at(&self, path: PathBuf) -> CliResult<Point> {
        read_vector(self.open(&path)?).map_err(|source| CliError::File { path, source })
    }

    pub fn matrix(&self, key: &str) -> CliResult<OperatorMatrix> {
        self.matrix_at(self.path(key)?)
    }

    pub fn vector(&self, key: &str) -> CliResult<Point> {
        self.vector_at(self.path(key)?)
    }

    /// Inline comma-separated numbers.
    pub fn numbers(&self, key: &str) -> CliResult<Vec<f64>> {
        let raw = self.require(key)?;
        raw.split(',')
            .map(|f| {
                let f = f.trim();
                f.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CliError::Config(format!("invalid number {f:?} in {key}")))
            })
            .collect()
    }

    fn list(&self, key: &str) -> CliResult<Vec<PathBuf>> {
        Ok(self
            .require(key)?
            .split(',')
            .map(|s| self.resolve(s.trim()))
            .collect())
    }

    /// Either `matrices`/`offsets` (parallel comma-separated file lists) or
    /// the two-map family `S`, `T`, `w`.
    pub fn system(&self) -> CliResult<IfsSystem> {
        if self.has("matrices") {
            let matrices = self.list("matrices")?;
            let offsets = self.list("offsets")?;
            if matrices.len() != offsets.len() {
                return Err(CliError::Config(format!(
                    "{} matrices but {} offsets",
                    matrices.len(),
                    offsets.len()
                )));
            }
            let maps = matrices
                .into_iter()
                .zip(offsets)
                .map(|(m, o)| Ok(AffineContraction::new(self.matrix_at(m)?, self.vector_at(o)?)?))
                .collect::<CliResult<Vec<_>>>()?;
            return Ok(IfsSystem::new(maps)?);
        }
        let cfg = ifs_core::sw_family::SwConfig::new(self.matrix("S")?, self.matrix("T")?, self.vector("w")?)?;
        Ok(ifs_core::sw_family::build_ifs(&cfg)?)
    }
}
