//! TOML configuration files with `[run]`, `[initial]`, `[constants]` and `[sweep]` tables.
//!
//! ```toml
//! [run]
//! n = 128
//! t_final = 0.5
//! kappa = 1e-2
//!
//! [initial]
//! family = "rough"
//! seed = 7
//!
//! [sweep]
//! nu_list = [1e-2, 1e-3, 1e-4]
//! p_list = [1, 2, 4, "inf"]
//! ```

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::dynamics::{InitialData, Perturbation, RunConfig};
use crate::error::{Error, Result};
use crate::estimates::{ConstantOptions, KForm};
use crate::harness::{parse_p, SweepConfig};

/// A parsed configuration file; the presence of a `[sweep]` table selects the variant.
#[derive(Clone, Debug, PartialEq)]
pub enum ConfigFile {
    Run(RunConfig),
    Sweep(SweepConfig),
}

pub const RUN_KEYS: [&str; 10] = [
    "n",
    "t_final",
    "nu",
    "kappa",
    "samples_per_unit",
    "startup_time",
    "startup_samples_per_unit",
    "checkpoint_times",
    "safety",
    "output_dir",
];
pub const INITIAL_KEYS: [&str; 6] = ["family", "vortex_amplitude", "omega_max", "seed", "theta_amplitude", "theta_width"];
pub const CONSTANT_KEYS: [&str; 5] = ["c_k", "c0", "c_univ", "e1", "k_form"];
pub const SWEEP_KEYS: [&str; 8] = [
    "nu_list",
    "p_list",
    "perturb_omega",
    "perturb_theta",
    "mollifier_cutoffs",
    "gronwall_cutoff",
    "snapshot_stride",
    "workers",
];

/// Reads a table, collecting every problem instead of stopping at the first.
struct Reader<'a> {
    name: &'a str,
    table: Option<&'a Table>,
    errs: &'a mut Vec<String>,
}

impl<'a> Reader<'a> {
    fn new(root: &'a Table, name: &'a str, allowed: &[&str], errs: &'a mut Vec<String>) -> Self {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                errs.push(format!("`{name}` must be a table"));
                None
            }
        };
        if let Some(t) = table {
            for key in t.keys() {
                if !allowed.contains(&key.as_str()) {
                    errs.push(format!("unknown key `{name}.{key}`"));
                }
            }
        }
        Self { name, table, errs }
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn missing(&mut self, key: &str) {
        self.errs.push(format!("missing required key `{}.{key}`", self.name));
    }

    fn wrong(&mut self, key: &str, want: &str) {
        self.errs.push(format!("`{}.{key}` must be {want}", self.name));
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.wrong(key, "a number");
                None
            }
        }
    }

    fn float_or(&mut self, key: &str, default: f64) -> f64 {
        self.float(key).unwrap_or(default)
    }

    fn required_float(&mut self, key: &str) -> f64 {
        if self.raw(key).is_none() {
            self.missing(key);
        }
        self.float(key).unwrap_or(f64::NAN)
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        match self.raw(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => {
                self.wrong(key, "a nonnegative integer");
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<&'a str> {
        match self.raw(key)? {
            Value::String(s) => Some(s.as_str()),
            _ => {
                self.wrong(key, "a string");
                None
            }
        }
    }

    fn array(&mut self, key: &str) -> Option<&'a [Value]> {
        match self.raw(key)? {
            Value::Array(a) => Some(a.as_slice()),
            _ => {
                self.wrong(key, "an array");
                None
            }
        }
    }

    fn floats(&mut self, key: &str) -> Option<Vec<f64>> {
        let items = self.array(key)?;
        let out: Option<Vec<f64>> = items
            .iter()
            .map(|v| match v {
                Value::Float(x) => Some(*x),
                Value::Integer(i) => Some(*i as f64),
                _ => None,
            })
            .collect();
        if out.is_none() {
            self.wrong(key, "an array of numbers");
        }
        out
    }
}

fn initial_data(r: &mut Reader<'_>) -> InitialData {
    let family = r.string("family").unwrap_or("smooth");
    let (theta_amplitude, theta_width) = match InitialData::smooth() {
        InitialData::Smooth {
            theta_amplitude,
            theta_width,
            ..
        } => (r.float_or("theta_amplitude", theta_amplitude), r.float_or("theta_width", theta_width)),
        InitialData::Rough { .. } => unreachable!("smooth() builds the smooth family"),
    };
    match family {
        "smooth" => {
            for key in ["omega_max", "seed"] {
                if r.raw(key).is_some() {
                    r.errs.push(format!("`initial.{key}` only applies to the rough family"));
                }
            }
            let default = match InitialData::smooth() {
                InitialData::Smooth { vortex_amplitude, .. } => vortex_amplitude,
                InitialData::Rough { .. } => unreachable!("smooth() builds the smooth family"),
            };
            InitialData::Smooth {
                vortex_amplitude: r.float_or("vortex_amplitude", default),
                theta_amplitude,
                theta_width,
            }
        }
        "rough" => {
            if r.raw("vortex_amplitude").is_some() {
                r.errs.push("`initial.vortex_amplitude` only applies to the smooth family".into());
            }
            let seed = if r.raw("seed").is_none() {
                r.errs.push("missing required key `initial.seed` (the rough family is random)".into());
                0
            } else {
                r.uint("seed").unwrap_or(0)
            };
            let default = match InitialData::rough(0) {
                InitialData::Rough { omega_max, .. } => omega_max,
                InitialData::Smooth { .. } => unreachable!("rough() builds the rough family"),
            };
            InitialData::Rough {
                omega_max: r.float_or("omega_max", default),
                seed,
                theta_amplitude,
                theta_width,
            }
        }
        other => {
            r.errs.push(format!("`initial.family` must be \"smooth\" or \"rough\", got {other:?}"));
            InitialData::smooth()
        }
    }
}

fn constants(r: &mut Reader<'_>) -> ConstantOptions {
    let d = ConstantOptions::default();
    let k_form = match r.string("k_form") {
        None => d.k_form,
        Some("proof") => KForm::Proof,
        Some("remark") => KForm::Remark,
        Some(other) => {
            r.errs.push(format!("`constants.k_form` must be \"proof\" or \"remark\", got {other:?}"));
            d.k_form
        }
    };
    ConstantOptions {
        c_k: r.float_or("c_k", d.c_k),
        c0: r.float_or("c0", d.c0),
        c_univ: r.float_or("c_univ", d.c_univ),
        e1: r.float_or("e1", d.e1),
        k_form,
    }
}

fn run_config(root: &Table, errs: &mut Vec<String>, is_sweep: bool) -> RunConfig {
    let mut r = Reader::new(root, "run", &RUN_KEYS, errs);
    if r.table.is_none() && !root.contains_key("run") {
        r.errs.push("missing required table `[run]`".into());
    }
    let n = if r.raw("n").is_none() {
        r.missing("n");
        0
    } else {
        r.uint("n").unwrap_or(0) as usize
    };
    let t_final = r.required_float("t_final");
    let kappa = r.required_float("kappa");
    let nu = if is_sweep {
        if r.raw("nu").is_some() {
            r.errs.push("`run.nu` is not used by sweeps; list viscosities in `sweep.nu_list`".into());
        }
        0.0
    } else {
        r.float_or("nu", 0.0)
    };
    let mut c = RunConfig::new(n, t_final, nu, kappa, InitialData::smooth());
    c.samples_per_unit = r.float_or("samples_per_unit", c.samples_per_unit);
    c.startup_time = r.float_or("startup_time", c.startup_time);
    c.startup_samples_per_unit = r.float_or("startup_samples_per_unit", c.startup_samples_per_unit);
    c.safety = r.float_or("safety", c.safety);
    if let Some(times) = r.floats("checkpoint_times") {
        c.checkpoint_times = times;
    }
    if let Some(dir) = r.string("output_dir") {
        c.output_dir = PathBuf::from(dir);
    }
    let mut ri = Reader::new(root, "initial", &INITIAL_KEYS, errs);
    c.initial = initial_data(&mut ri);
    let mut rc = Reader::new(root, "constants", &CONSTANT_KEYS, errs);
    c.constants = constants(&mut rc);
    c
}

fn sweep_config(root: &Table, template: RunConfig, errs: &mut Vec<String>) -> SweepConfig {
    let mut r = Reader::new(root, "sweep", &SWEEP_KEYS, errs);
    let nu_list = if r.raw("nu_list").is_none() {
        r.missing("nu_list");
        Vec::new()
    } else {
        r.floats("nu_list").unwrap_or_default()
    };
    let mut c = SweepConfig::new(template, nu_list);
    if let Some(items) = r.array("p_list") {
        let parsed: Option<Vec<f64>> = items
            .iter()
            .map(|v| match v {
                Value::Integer(i) => parse_p(&i.to_string()),
                Value::Float(x) => parse_p(&x.to_string()),
                Value::String(s) => parse_p(s),
                _ => None,
            })
            .collect();
        match parsed {
            Some(p) => c.p_list = p,
            None => r.wrong("p_list", "an array of exponents (numbers >= 1 or \"inf\")"),
        }
    }
    c.perturbation = Perturbation {
        omega: r.float_or("perturb_omega", 0.0),
        theta: r.float_or("perturb_theta", 0.0),
    };
    if let Some(cut) = r.floats("mollifier_cutoffs") {
        if cut.iter().all(|x| x.fract() == 0.0 && *x >= 1.0 && *x <= u32::MAX as f64) {
            c.mollifier_cutoffs = cut.into_iter().map(|x| x as u32).collect();
        } else {
            r.wrong("mollifier_cutoffs", "an array of positive integers");
        }
    }
    if let Some(g) = r.uint("gronwall_cutoff") {
        c.gronwall_cutoff = g.min(u32::MAX as u64) as u32;
    }
    if let Some(s) = r.uint("snapshot_stride") {
        c.snapshot_stride = s as usize;
    }
    if let Some(w) = r.uint("workers") {
        c.workers = Some(w as usize);
    }
    c
}

fn syntax_error(text: &str, e: &toml::de::Error) -> String {
    let Some(span) = e.span() else {
        return e.message().to_string();
    };
    let line = text[..span.start.min(text.len())].matches('\n').count() + 1;
    let snippet = text.get(span.clone()).unwrap_or("").trim();
    if e.message().starts_with("duplicate key") && !snippet.is_empty() {
        format!("duplicate key `{snippet}` on line {line}")
    } else {
        format!("{} on line {line}", e.message())
    }
}

/// Appends range violations, skipping keys that already failed to parse.
fn merge_semantic(errs: &mut Vec<String>, semantic: Vec<String>) {
    let broken: Vec<String> = errs
        .iter()
        .filter(|e| !e.starts_with("unknown key"))
        .filter_map(|e| Some(e.split('`').nth(1)?.to_string()))
        .collect();
    for e in semantic {
        let key = e.split_whitespace().next().unwrap_or("");
        let table = key.split('.').next().unwrap_or("");
        if !broken.iter().any(|b| b == key || *b == format!("[{table}]")) {
            errs.push(e);
        }
    }
}

/// Parses configuration text, reporting every violation at once.
pub fn parse_config_str(text: &str) -> Result<ConfigFile> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![syntax_error(text, &e)]))?;
    let mut errs = Vec::new();
    for key in root.keys() {
        if !["run", "initial", "constants", "sweep"].contains(&key.as_str()) {
            errs.push(format!("unknown table `{key}`"));
        }
    }
    let is_sweep = root.contains_key("sweep");
    let template = run_config(&root, &mut errs, is_sweep);
    let parsed = if is_sweep {
        let s = sweep_config(&root, template, &mut errs);
        let semantic = s.validate();
        merge_semantic(&mut errs, semantic);
        ConfigFile::Sweep(s)
    } else {
        let semantic = template.validate();
        merge_semantic(&mut errs, semantic);
        ConfigFile::Run(template)
    };
    if errs.is_empty() {
        Ok(parsed)
    } else {
        Err(Error::Config(errs))
    }
}

pub fn parse_config(path: &Path) -> Result<ConfigFile> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(text: &str) -> Vec<String> {
        match parse_config_str(text) {
            Err(Error::Config(e)) => e,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_run_gets_defaults() {
        let c = parse_config_str("[run]\nn = 64\nt_final = 0.5\nkappa = 0.01\n").unwrap();
        let ConfigFile::Run(c) = c else { panic!("expected a run config") };
        let mut want = RunConfig::new(64, 0.5, 0.0, 0.01, InitialData::smooth());
        want.output_dir = PathBuf::from("out");
        assert_eq!(c, want);
    }

    #[test]
    fn sweep_with_everything() {
        let text = r#"
[run]
n = 32
t_final = 1
kappa = 0.01
samples_per_unit = 32
checkpoint_times = [0.5]
safety = 0.4
output_dir = "results"

[initial]
family = "rough"
seed = 11
omega_max = 3.0

[constants]
c0 = 2
e1 = 10
k_form = "remark"

[sweep]
nu_list = [1e-2, 1e-3]
p_list = [2, "inf"]
perturb_theta = 1.0
mollifier_cutoffs = [2, 4]
gronwall_cutoff = 4
snapshot_stride = 2
workers = 1
"#;
        let ConfigFile::Sweep(s) = parse_config_str(text).unwrap() else { panic!("expected a sweep") };
        assert_eq!(s.nu_list, vec![1e-2, 1e-3]);
        assert_eq!(s.p_list, vec![2.0, f64::INFINITY]);
        assert_eq!(s.perturbation, Perturbation { omega: 0.0, theta: 1.0 });
        assert_eq!(s.template.initial, InitialData::Rough { omega_max: 3.0, seed: 11, theta_amplitude: 0.5, theta_width: 0.1 });
        assert_eq!(s.template.constants.k_form, KForm::Remark);
        assert_eq!(s.template.constants.c0, 2.0);
        assert_eq!(s.template.output_dir, PathBuf::from("results"));
        assert_eq!(s.workers, Some(1));
    }

    #[test]
    fn zero_kappa_cites_the_requirement() {
        let e = errors("[run]\nn = 64\nt_final = 1\nkappa = 0\n");
        assert_eq!(e.len(), 1);
        assert!(e[0].contains("kappa > 0"), "{e:?}");
    }

    #[test]
    fn duplicate_key_is_named() {
        let e = errors("[run]\nn = 64\nn = 32\nt_final = 1\nkappa = 1\n");
        assert!(e[0].contains("duplicate") && e[0].contains("`n`"), "{e:?}");
    }

    #[test]
    fn every_problem_is_reported() {
        let e = errors("[run]\nt_final = 1\nkapa = 1\n\n[initial]\nfamily = \"rough\"\n\n[bogus]\nx = 1\n");
        let joined = e.join("\n");
        for needle in ["unknown table `bogus`", "run.n", "run.kappa", "unknown key `run.kapa`", "initial.seed"] {
            assert!(joined.contains(needle), "missing {needle:?} in {joined}");
        }
    }

    #[test]
    fn invariants_checked_after_parsing() {
        let e = errors("[run]\nn = 7\nt_final = -1\nkappa = 1\n");
        assert_eq!(e.len(), 2, "{e:?}");
        let e = errors("[run]\nn = 16\nt_final = 1\nkappa = 1\n[sweep]\nnu_list = [1e-3, 1e-2]\np_list = [3]\n");
        assert!(e.iter().any(|m| m.contains("p_list")), "{e:?}");
        let e = errors("[run]\nn = 16\nt_final = 1\nkappa = 1\n[sweep]\nnu_list = [1e-3, 1e-2]\n");
        assert!(e.iter().any(|m| m.contains("strictly decreasing")), "{e:?}");
    }
}
