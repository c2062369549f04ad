use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use voxvid_core::voxel::{DEFAULT_RESOLUTION, MAX_RESOLUTION, MIN_RESOLUTION};
use voxvid_core::backend::{DEFAULT_COLOR_TOLERANCE, DEFAULT_SEED_SEARCH_RADIUS};

/// Prefix of the environment variables that override file settings.
pub const ENV_PREFIX: &str = "VOXVID_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("invalid value for {key}: {reason}")]
    Value { key: String, reason: String },
}

/// Which segmenter a session uses.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BackendSpec {
    Reference,
    Remote(String),
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Reference => f.write_str("reference"),
            BackendSpec::Remote(url) => write!(f, "remote:{url}"),
        }
    }
}

/// `reference`, `remote:<url>`, or a bare `http(s)://` URL.
impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "reference" {
            return Ok(BackendSpec::Reference);
        }
        let url = s.strip_prefix("remote:").unwrap_or(s);
        if url.starts_with("http://") || url.starts_with("https://") {
            Ok(BackendSpec::Remote(url.to_string()))
        } else {
            Err(format!("unknown backend `{s}` (expected `reference` or `remote:<url>`)"))
        }
    }
}

impl TryFrom<String> for BackendSpec {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<BackendSpec> for String {
    fn from(b: BackendSpec) -> String {
        b.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub default_resolution: usize,
    pub backend: BackendSpec,
    pub color_tolerance: f64,
    pub seed_search_radius: usize,
    pub persistence_dir: Option<PathBuf>,
    /// Per backend call, retries included.
    pub deadline_ms: u64,
    pub remote_retries: u32,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            listen: "127.0.0.1:8080".into(),
            default_resolution: DEFAULT_RESOLUTION,
            backend: BackendSpec::Reference,
            color_tolerance: DEFAULT_COLOR_TOLERANCE,
            seed_search_radius: DEFAULT_SEED_SEARCH_RADIUS,
            persistence_dir: None,
            deadline_ms: 60_000,
            remote_retries: 1,
        }
    }
}

fn parse_env<T: FromStr>(key: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    raw.trim().parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.to_string(),
        reason: e.to_string(),
    })
}

impl ServiceConfig {
    pub fn deadline(&self) -> Duration {
        Duration::from_millis(self.deadline_ms)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// Applies `VOXVID_*` overrides looked up through `var`.
    pub fn with_env(mut self, var: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let get = |name: &str| var(&format!("{ENV_PREFIX}{name}")).map(|v| (format!("{ENV_PREFIX}{name}"), v));
        if let Some((_, v)) = get("LISTEN") {
            self.listen = v;
        }
        if let Some((k, v)) = get("RESOLUTION") {
            self.default_resolution = parse_env(&k, &v)?;
        }
        if let Some((k, v)) = get("BACKEND") {
            self.backend = parse_env(&k, &v)?;
        }
        if let Some((k, v)) = get("TAU") {
            self.color_tolerance = parse_env(&k, &v)?;
        }
        if let Some((k, v)) = get("RHO") {
            self.seed_search_radius = parse_env(&k, &v)?;
        }
        if let Some((_, v)) = get("PERSIST_DIR") {
            self.persistence_dir = (!v.is_empty()).then(|| PathBuf::from(v));
        }
        if let Some((k, v)) = get("DEADLINE_MS") {
            self.deadline_ms = parse_env(&k, &v)?;
        }
        if let Some((k, v)) = get("RETRIES") {
            self.remote_retries = parse_env(&k, &v)?;
        }
        Ok(self)
    }

    /// File (if any), then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let base = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        let cfg = base.with_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, reason: String| {
            Err(ConfigError::Value {
                key: key.into(),
                reason,
            })
        };
        if !(MIN_RESOLUTION..=MAX_RESOLUTION).contains(&self.default_resolution) {
            return bad(
                "default_resolution",
                format!("{} outside [{MIN_RESOLUTION}, {MAX_RESOLUTION}]", self.default_resolution),
            );
        }
        if !(0.0..=1.0).contains(&self.color_tolerance) {
            return bad("color_tolerance", format!("{} outside [0, 1]", self.color_tolerance));
        }
        if self.deadline_ms == 0 {
            return bad("deadline_ms", "must be positive".into());
        }
        Ok(())
    }
}
