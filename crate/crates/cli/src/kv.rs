//! Flat `key=value` parameters from a config file and `--key value` flags.
//!
//! Flags win over the file. Lists are comma-separated; complex numbers are
//! written `re` or `re:im`.

use ciltlab_core::Complex64;
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::str::FromStr;

/// A usage error naming the key and the expected domain.
#[derive(Debug)]
pub struct Usage(pub String);

impl Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub type UResult<T> = std::result::Result<T, Usage>;

#[derive(Debug, Default)]
pub struct Params {
    map: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl Params {
    /// Parses `--key value` and `--key=value` pairs.
    pub fn from_args(args: &[String]) -> UResult<Self> {
        let mut map = BTreeMap::new();
        let mut it = args.iter().peekable();
        while let Some(a) = it.next() {
            let Some(key) = a.strip_prefix("--") else {
                return Err(Usage(format!("unexpected argument '{a}' (parameters are --key value)")));
            };
            let (k, v) = match key.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| Usage(format!("--{key}: missing value")))?;
                    (key.to_string(), v.clone())
                }
            };
            if map.insert(k.clone(), v).is_some() {
                return Err(Usage(format!("--{k}: given twice")));
            }
        }
        Ok(Params { map, used: RefCell::default() })
    }

    /// Adds `key=value` lines (`#` comments, blank lines ignored) for keys
    /// not already set.
    pub fn merge_file(&mut self, text: &str, origin: &str) -> UResult<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Usage(format!("{origin}:{}: expected key=value", n + 1)))?;
            let k = k.trim().trim_start_matches("--").to_string();
            self.map.entry(k).or_insert_with(|| v.trim().to_string());
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.map.get(key).map(String::as_str)
    }

    fn parse<T: FromStr>(&self, key: &str, s: &str, what: &str) -> UResult<T> {
        s.trim()
            .parse()
            .map_err(|_| Usage(format!("--{key}: expected {what}, got '{s}'")))
    }

    pub fn opt<T: FromStr>(&self, key: &str, what: &str) -> UResult<Option<T>> {
        self.raw(key).map(|s| self.parse(key, s, what)).transpose()
    }

    pub fn f64_or(&self, key: &str, default: f64) -> UResult<f64> {
        Ok(self.opt(key, "a real number")?.unwrap_or(default))
    }

    pub fn u64_or(&self, key: &str, default: u64) -> UResult<u64> {
        Ok(self.opt(key, "a non-negative integer")?.unwrap_or(default))
    }

    pub fn i64_or(&self, key: &str, default: i64) -> UResult<i64> {
        Ok(self.opt(key, "an integer")?.unwrap_or(default))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> UResult<bool> {
        Ok(self.opt(key, "true or false")?.unwrap_or(default))
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.raw(key).unwrap_or(default)
    }

    /// One of `choices`.
    pub fn choice<'a>(&'a self, key: &str, choices: &[&'a str], default: &'a str) -> UResult<&'a str> {
        let v = self.str_or(key, default);
        choices
            .iter()
            .find(|c| **c == v)
            .copied()
            .ok_or_else(|| Usage(format!("--{key}: expected one of {}, got '{v}'", choices.join("|"))))
    }

    pub fn list<T: FromStr>(&self, key: &str, what: &str) -> UResult<Option<Vec<T>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) if s.trim().is_empty() => Ok(Some(Vec::new())),
            Some(s) => s.split(',').map(|x| self.parse(key, x, what)).collect::<UResult<_>>().map(Some),
        }
    }

    pub fn f64_list(&self, key: &str) -> UResult<Option<Vec<f64>>> {
        self.list(key, "a comma-separated list of real numbers")
    }

    pub fn i64_list(&self, key: &str) -> UResult<Option<Vec<i64>>> {
        self.list(key, "a comma-separated list of integers")
    }

    fn complex(&self, key: &str, s: &str) -> UResult<Complex64> {
        let bad = || Usage(format!("--{key}: expected re or re:im, got '{s}'"));
        let mut parts = s.trim().split(':');
        let re: f64 = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let im: f64 = match parts.next() {
            Some(x) => x.trim().parse().map_err(|_| bad())?,
            None => 0.0,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Complex64::new(re, im))
    }

    pub fn complex_or(&self, key: &str, default: Complex64) -> UResult<Complex64> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => self.complex(key, s),
        }
    }

    pub fn complex_list(&self, key: &str) -> UResult<Option<Vec<Complex64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s.split(',').map(|x| self.complex(key, x)).collect::<UResult<_>>().map(Some),
        }
    }

    /// Keys that no command looked at.
    pub fn unused(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.map.keys().filter(|k| !used.contains(*k)).cloned().collect()
    }

    pub fn echo(&self) -> &BTreeMap<String, String> {
        &self.map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn flags_override_the_file() {
        let mut p = Params::from_args(&args(&["--beta", "0.5", "--radius=2"])).unwrap();
        p.merge_file("beta = 1\n# comment\nmu = 2:1\n", "cfg").unwrap();
        assert_eq!(p.f64_or("beta", 9.0).unwrap(), 0.5);
        assert_eq!(p.f64_or("radius", 9.0).unwrap(), 2.0);
        assert_eq!(p.complex_or("mu", Complex64::new(0.0, 0.0)).unwrap(), Complex64::new(2.0, 1.0));
        assert!(p.unused().is_empty());
    }

    #[test]
    fn bad_values_name_the_key() {
        let p = Params::from_args(&args(&["--alpha", "-1,x"])).unwrap();
        let e = p.f64_list("alpha").unwrap_err();
        assert!(e.0.contains("--alpha"), "{e}");
        assert!(Params::from_args(&args(&["--beta"])).is_err());
        assert!(Params::from_args(&args(&["beta"])).is_err());
    }
}
