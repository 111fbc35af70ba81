use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scenario {
    Solve,
    Boundary,
    Bergman,
    Lemma4,
    Exponents,
    Admissibility,
    Maxreg,
    TraceBound,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Self::Solve,
        Self::Boundary,
        Self::Bergman,
        Self::Lemma4,
        Self::Exponents,
        Self::Admissibility,
        Self::Maxreg,
        Self::TraceBound,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Solve => "solve",
            Self::Boundary => "boundary",
            Self::Bergman => "bergman",
            Self::Lemma4 => "lemma4",
            Self::Exponents => "exponents",
            Self::Admissibility => "admissibility",
            Self::Maxreg => "maxreg",
            Self::TraceBound => "trace-bound",
        }
    }

    /// Parameter keys and their defaults. An empty default means "unset".
    pub fn schema(&self) -> &'static [(&'static str, &'static str)] {
        const THETA: &str = "0.7853981633974483";
        match self {
            Self::Solve => &[
                ("operator", "dirichlet"),
                ("modes", "64"),
                ("alpha", "0.5"),
                ("kernel", "exp:1,1"),
                ("forcing", "const"),
                ("T", "1"),
                ("dt", "0.001"),
                ("solver", "aug"),
            ],
            Self::Boundary => &[
                ("modes", "32"),
                ("alpha", "0.5"),
                ("kernel", "exp:1,1"),
                ("knorm", "0.1"),
                ("forcing", "random"),
                ("T", "1"),
                ("dt", "0.001"),
            ],
            Self::Bergman => &[("kernel", "exp:1,1"), ("q", "2"), ("theta", THETA)],
            Self::Lemma4 => &[
                ("kernel", "exp:1,1;exp:2,3;mexp:1,1,1"),
                ("q", "4"),
                ("s", "1.5"),
                ("theta", THETA),
                ("alpha", "default"),
                ("R", "0.1;1;10"),
            ],
            Self::Exponents => &[("q", ""), ("l", ""), ("count", "1000"), ("max", "20")],
            Self::Admissibility => &[
                ("operator", "dirichlet"),
                ("modes", "32"),
                ("observation", "frac:0.5"),
                ("p", "2"),
                ("window", "0.1;1;10"),
                ("probes", "32"),
            ],
            Self::Maxreg => &[
                ("modes", "32"),
                ("alpha", "0.5"),
                ("kernel", "exp:1,1"),
                ("p", "2"),
                ("q", ""),
                ("theta", THETA),
                ("T", "1"),
                ("dt", "0.001"),
                ("ensemble", "100"),
            ],
            Self::TraceBound => &[
                ("modes", "32"),
                ("alpha", "0.5"),
                ("kernel", "exp:1,1"),
                ("p", "2"),
                ("q", "6"),
                ("theta", THETA),
                ("T", "1"),
                ("dt", "0.001"),
                ("ensemble", "20"),
            ],
        }
    }

    /// Ensembles and random grids need an explicit seed.
    pub fn needs_seed(&self) -> bool {
        matches!(self, Self::Maxreg | Self::TraceBound)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| HarnessError::validation("scenario", format!("unknown scenario '{s}'")))
    }
}

/// A scenario plus its parameters, as read from a key=value file and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub params: BTreeMap<String, String>,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            seed: None,
            out: None,
            tol: None,
            params: BTreeMap::new(),
        }
    }

    /// Sets a key, rejecting anything outside the scenario's schema.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let value = value.trim();
        match key {
            "scenario" => {
                let s: Scenario = value.parse()?;
                if s != self.scenario {
                    return Err(HarnessError::validation(
                        "scenario",
                        format!("config is for '{s}' but '{}' was requested", self.scenario),
                    ));
                }
            }
            "seed" => {
                self.seed = Some(value.parse().map_err(|_| {
                    HarnessError::validation("seed", format!("'{value}' is not a non-negative integer"))
                })?)
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "tol" => {
                let t: f64 = value
                    .parse()
                    .map_err(|_| HarnessError::validation("tol", format!("'{value}' is not a number")))?;
                if !(t > 0.0 && t < 1.0) {
                    return Err(HarnessError::validation("tol", format!("{t} must lie in (0, 1)")));
                }
                self.tol = Some(t);
            }
            _ if self.scenario.schema().iter().any(|(k, _)| *k == key) => {
                self.params.insert(key.to_string(), value.to_string());
            }
            _ => {
                return Err(HarnessError::validation(
                    key,
                    format!("unknown key for scenario '{}'", self.scenario),
                ))
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(scenario: Scenario, text: &str) -> Result<Self, HarnessError> {
        let mut cfg = Self::new(scenario);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::validation("config", format!("line {}: expected key = value", i + 1)))?;
            cfg.set(k.trim(), v)?;
        }
        Ok(cfg)
    }

    /// Reads the scenario from the file's own `scenario` key.
    pub fn parse_any(text: &str) -> Result<Self, HarnessError> {
        let scenario = text
            .lines()
            .filter_map(|l| l.split('#').next()?.split_once('='))
            .find(|(k, _)| k.trim() == "scenario")
            .map(|(_, v)| v.trim().parse())
            .transpose()?
            .ok_or_else(|| HarnessError::validation("scenario", "missing"))?;
        Self::parse(scenario, text)
    }

    pub fn render(&self) -> String {
        let mut s = format!("scenario = {}\n", self.scenario);
        if let Some(seed) = self.seed {
            s += &format!("seed = {seed}\n");
        }
        if let Some(out) = &self.out {
            s += &format!("out = {}\n", out.display());
        }
        if let Some(tol) = self.tol {
            s += &format!("tol = {tol}\n");
        }
        for (k, v) in &self.params {
            s += &format!("{k} = {v}\n");
        }
        s
    }

    /// Explicit value, else the schema default; `None` when neither is set.
    pub fn get(&self, key: &str) -> Option<&str> {
        if let Some(v) = self.params.get(key) {
            return Some(v.as_str()).filter(|v| !v.is_empty());
        }
        self.scenario
            .schema()
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, d)| *d)
            .filter(|d| !d.is_empty())
    }

    pub fn require(&self, key: &str) -> Result<&str, HarnessError> {
        self.get(key).ok_or_else(|| HarnessError::validation(key, "required"))
    }

    pub fn parse_value<T: FromStr>(&self, key: &str) -> Result<T, HarnessError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.require(key)?;
        raw.parse::<T>()
            .map_err(|e| HarnessError::validation(key, format!("'{raw}': {e}")))
    }

    pub fn parse_optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, HarnessError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(_) => self.parse_value(key).map(Some),
        }
    }

    /// `;`-separated list.
    pub fn parse_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, HarnessError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.require(key)?;
        raw.split(';')
            .map(|item| {
                item.trim()
                    .parse::<T>()
                    .map_err(|e| HarnessError::validation(key, format!("'{}': {e}", item.trim())))
            })
            .collect()
    }
}
