//! Flat `key = value` run configuration.
//!
//! ```text
//! # two photons on a decaying qubit
//! system.S = (1,0), (0,0), (0,0), (1,0)
//! system.L = 0, 0, 1, 0
//! system.H = 0, 0, 0, 0
//! system.initial_state = 0, 1
//! field.n = 2
//! pulse.1 = gaussian(1.46, 3)
//! pulse.2 = file(pulse2.csv)
//! time.t_final = 12
//! time.dt = 1e-3
//! observable.P_e = 1, 0, 0, 0
//! ```
//!
//! Matrices are row-major lists; an entry is either a real number or a
//! `(re,im)` pair, and the list may be wrapped in `[...]`. A `preset` key
//! fills in every block first; any other key then overrides it.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use photonfilter::ensemble::Detection;
use photonfilter::master::step_count;
use photonfilter::photon::MAX_PHOTONS;
use photonfilter::presets::{self, excited_projector};
use photonfilter::{ComplexMatrix, PhotonState, PulseSet, PulseShape, SystemModel};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },

    #[error("{}`{key}`: {reason}", .line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Key { line: Option<usize>, key: String, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub enum PulseSpec {
    Gaussian { omega: f64, center: f64 },
    /// A `t,re[,im]` table; the path is stored as resolved at parse time.
    File { path: PathBuf, shape: PulseShape },
}

impl PulseSpec {
    fn shape(&self) -> PulseShape {
        match self {
            PulseSpec::Gaussian { omega, center } => PulseShape::gaussian(*omega, *center),
            PulseSpec::File { shape, .. } => shape.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub model: SystemModel,
    pub pulses: Vec<PulseSpec>,
    pub t_final: f64,
    pub dt: f64,
    pub stride: usize,
    pub detection: Detection,
    pub seed: u64,
    pub trajectories: usize,
    pub observables: Vec<(String, ComplexMatrix)>,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = read(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    /// Expands a named preset with no further overrides.
    pub fn from_preset(name: &str) -> Result<Self, ConfigError> {
        Self::parse(&format!("preset = {name}\n"), Path::new("."))
    }

    /// Relative `file(...)` pulse paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let entries = Entries::collect(text)?;
        entries.build(base)
    }

    pub fn photons(&self) -> photonfilter::Result<PhotonState> {
        let shapes = self.pulses.iter().map(PulseSpec::shape).collect();
        Ok(PhotonState::new(PulseSet::new(shapes, self.dt, self.t_final)?))
    }

    pub fn observable_matrices(&self) -> Vec<ComplexMatrix> {
        self.observables.iter().map(|(_, m)| m.clone()).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.observables.iter().map(|(l, _)| l.clone()).collect()
    }

    /// Text that parses back to an equal config. Numbers carry 17
    /// significant digits.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(p) = &self.preset {
            let _ = writeln!(s, "preset = {p}");
        }
        let m = &self.model;
        let _ = writeln!(s, "system.dim = {}", m.dim());
        let _ = writeln!(s, "system.S = {}", list(m.scattering().as_slice()));
        let _ = writeln!(s, "system.L = {}", list(m.coupling().as_slice()));
        let _ = writeln!(s, "system.H = {}", list(m.hamiltonian().as_slice()));
        let _ = writeln!(s, "system.initial_state = {}", list(m.initial_state()));
        let _ = writeln!(s, "field.n = {}", self.pulses.len());
        for (i, p) in self.pulses.iter().enumerate() {
            match p {
                PulseSpec::Gaussian { omega, center } => {
                    let _ = writeln!(s, "pulse.{} = gaussian({}, {})", i + 1, real(*omega), real(*center));
                }
                PulseSpec::File { path, .. } => {
                    let _ = writeln!(s, "pulse.{} = file({})", i + 1, path.display());
                }
            }
        }
        let _ = writeln!(s, "time.t_final = {}", real(self.t_final));
        let _ = writeln!(s, "time.dt = {}", real(self.dt));
        let _ = writeln!(s, "time.stride = {}", self.stride);
        let _ = writeln!(s, "detection.mode = {}", self.detection);
        let _ = writeln!(s, "detection.seed = {}", self.seed);
        let _ = writeln!(s, "detection.N = {}", self.trajectories);
        for (label, x) in &self.observables {
            let _ = writeln!(s, "observable.{label} = {}", list(x.as_slice()));
        }
        s
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })
}

fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn complex(z: &Complex64) -> String {
    format!("({:.16e},{:.16e})", z.re, z.im)
}

fn list(zs: &[Complex64]) -> String {
    let items: Vec<String> = zs.iter().map(complex).collect();
    format!("[{}]", items.join(", "))
}

const FIXED_KEYS: [&str; 13] = [
    "preset",
    "system.dim",
    "system.S",
    "system.L",
    "system.H",
    "system.initial_state",
    "field.n",
    "time.t_final",
    "time.dt",
    "time.stride",
    "detection.mode",
    "detection.seed",
    "detection.N",
];

struct Entry {
    line: usize,
    value: String,
}

/// Raw key/value pairs, in file order, with the line each came from.
struct Entries {
    order: Vec<String>,
    map: HashMap<String, Entry>,
}

impl Entries {
    fn collect(text: &str) -> Result<Self, ConfigError> {
        let mut order = Vec::new();
        let mut map: HashMap<String, Entry> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line, reason: format!("expected `key = value`, got {content:?}") })?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            let known = FIXED_KEYS.contains(&key.as_str())
                || key.strip_prefix("pulse.").is_some_and(|k| k.parse::<usize>().is_ok())
                || key.strip_prefix("observable.").is_some_and(valid_label);
            if !known {
                return Err(ConfigError::Key { line: Some(line), key, reason: "unknown key".into() });
            }
            if let Some(prev) = map.get(&key) {
                return Err(ConfigError::Key {
                    line: Some(line),
                    key,
                    reason: format!("already set on line {}", prev.line),
                });
            }
            order.push(key.clone());
            map.insert(key, Entry { line, value });
        }
        Ok(Self { order, map })
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.map.get(key).map(|e| e.line)
    }

    fn err(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        ConfigError::Key { line: self.line(key), key: key.to_string(), reason: reason.into() }
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.map
            .get(key)
            .map(|e| e.value.parse::<T>().map_err(|err| self.err(key, format!("cannot parse {:?}: {err}", e.value))))
            .transpose()
    }

    fn vector(&self, key: &str) -> Result<Option<Vec<Complex64>>, ConfigError> {
        self.map
            .get(key)
            .map(|e| parse_list(&e.value).map_err(|reason| self.err(key, reason)))
            .transpose()
    }

    fn matrix(&self, key: &str, d: usize) -> Result<Option<ComplexMatrix>, ConfigError> {
        match self.vector(key)? {
            None => Ok(None),
            Some(v) if v.len() != d * d => Err(self.err(
                key,
                format!("has {} entries but the system dimension is {d} (needs {})", v.len(), d * d),
            )),
            Some(v) => ComplexMatrix::from_vec(d, d, v).map(Some).map_err(|e| self.err(key, e.to_string())),
        }
    }

    fn build(&self, base: &Path) -> Result<RunConfig, ConfigError> {
        let preset_name = self.map.get("preset").map(|e| e.value.clone());
        let preset = match &preset_name {
            Some(name) => Some(
                presets::preset(name)
                    .ok_or_else(|| self.err("preset", format!("unknown preset {name:?} (expected atom-2photon-a..d)")))?,
            ),
            None => None,
        };
        let base_model = preset.as_ref().map(|p| p.model());

        let initial = match (self.vector("system.initial_state")?, &base_model) {
            (Some(v), _) => v,
            (None, Some(m)) => m.initial_state().to_vec(),
            (None, None) => return Err(self.err("system.initial_state", "is required")),
        };
        let d = initial.len();
        if let Some(dim) = self.parsed::<usize>("system.dim")? {
            if dim != d {
                return Err(self.err("system.dim", format!("is {dim} but system.initial_state has {d} entries")));
            }
        }
        let s = match (self.matrix("system.S", d)?, &base_model) {
            (Some(m), _) => m,
            (None, Some(b)) if b.dim() == d => b.scattering().clone(),
            _ => ComplexMatrix::identity(d),
        };
        let l = match (self.matrix("system.L", d)?, &base_model) {
            (Some(m), _) => m,
            (None, Some(b)) if b.dim() == d => b.coupling().clone(),
            _ => return Err(self.err("system.L", "is required")),
        };
        let h = match (self.matrix("system.H", d)?, &base_model) {
            (Some(m), _) => m,
            (None, Some(b)) if b.dim() == d => b.hamiltonian().clone(),
            _ => ComplexMatrix::zeros(d, d),
        };
        let model = SystemModel::new(s, l, h, initial).map_err(|e| match e {
            photonfilter::Error::InvalidModel { field, reason } => self.err(&format!("system.{field}"), reason),
            other => self.err("system.L", other.to_string()),
        })?;

        let pulses = self.pulses(base, preset.as_ref())?;

        let t_final = match (self.parsed::<f64>("time.t_final")?, &preset) {
            (Some(t), _) => t,
            (None, Some(p)) => p.t_final,
            (None, None) => return Err(self.err("time.t_final", "is required")),
        };
        let dt = match (self.parsed::<f64>("time.dt")?, &preset) {
            (Some(t), _) => t,
            (None, Some(_)) => 1e-3,
            (None, None) => return Err(self.err("time.dt", "is required")),
        };
        step_count(t_final, dt).map_err(|e| self.err("time.dt", e.to_string()))?;
        let stride = self.parsed::<usize>("time.stride")?.unwrap_or(if preset.is_some() { 10 } else { 1 });
        if stride == 0 {
            return Err(self.err("time.stride", "must be at least 1"));
        }

        let detection = match self.map.get("detection.mode") {
            Some(e) => e.value.parse().map_err(|err: photonfilter::Error| self.err("detection.mode", err.to_string()))?,
            None => Detection::Homodyne,
        };
        let seed = self.parsed::<u64>("detection.seed")?.unwrap_or(0);
        let trajectories = self.parsed::<usize>("detection.N")?.unwrap_or(100);
        if trajectories == 0 {
            return Err(self.err("detection.N", "must be at least 1"));
        }

        let mut observables: Vec<(String, ComplexMatrix)> = Vec::new();
        if preset.is_some() {
            observables.push(("P_e".into(), excited_projector()));
        }
        for key in self.order.iter().filter(|k| k.starts_with("observable.")) {
            let label = key["observable.".len()..].to_string();
            let x = self.matrix(key, d)?.expect("key present");
            if !x.is_hermitian(1e-12) {
                return Err(self.err(key, "is not Hermitian"));
            }
            match observables.iter_mut().find(|(l, _)| *l == label) {
                Some(slot) => slot.1 = x,
                None => observables.push((label, x)),
            }
        }
        // a preset observable no longer fits an overridden system of another size
        observables.retain(|(_, x)| x.rows() == d);

        let config = RunConfig {
            preset: preset_name,
            model,
            pulses,
            t_final,
            dt,
            stride,
            detection,
            seed,
            trajectories,
            observables,
        };
        config.photons().map_err(|e| match e {
            photonfilter::Error::InvalidPulse { index, reason } => self.err(&format!("pulse.{}", index + 1), reason),
            other => self.err("field.n", other.to_string()),
        })?;
        Ok(config)
    }

    fn pulses(&self, base: &Path, preset: Option<&presets::AtomPreset>) -> Result<Vec<PulseSpec>, ConfigError> {
        let mut keyed: Vec<(usize, &str)> = self
            .order
            .iter()
            .filter_map(|k| k.strip_prefix("pulse.").map(|i| (i.parse::<usize>().expect("checked"), k.as_str())))
            .collect();
        keyed.sort();
        let pulses = if keyed.is_empty() {
            match preset {
                Some(p) => p.pulses.iter().map(|&(omega, center)| PulseSpec::Gaussian { omega, center }).collect(),
                None => Vec::new(),
            }
        } else {
            let mut out = Vec::new();
            for (expected, (i, key)) in (1..).zip(&keyed) {
                if *i != expected {
                    return Err(self.err(key, format!("pulses must be numbered 1, 2, …; expected pulse.{expected}")));
                }
                out.push(self.pulse(key, base)?);
            }
            out
        };
        match self.parsed::<usize>("field.n")? {
            Some(n) if n != pulses.len() => {
                Err(self.err("field.n", format!("is {n} but {} pulse(s) are defined", pulses.len())))
            }
            _ if pulses.len() > MAX_PHOTONS => {
                Err(self.err("field.n", format!("at most {MAX_PHOTONS} photons are supported")))
            }
            _ => Ok(pulses),
        }
    }

    fn pulse(&self, key: &str, base: &Path) -> Result<PulseSpec, ConfigError> {
        let value = &self.map[key].value;
        let call = |name: &str| value.strip_prefix(name).and_then(|r| r.trim().strip_prefix('(')).and_then(|r| r.strip_suffix(')'));
        if let Some(args) = call("gaussian") {
            let nums: Result<Vec<f64>, _> = args.split(',').map(|a| a.trim().parse::<f64>()).collect();
            return match nums.as_deref() {
                Ok([omega, center]) => Ok(PulseSpec::Gaussian { omega: *omega, center: *center }),
                _ => Err(self.err(key, format!("expected gaussian(omega, center), got {value:?}"))),
            };
        }
        if let Some(arg) = call("file") {
            let path = base.join(arg.trim());
            let text = std::fs::read_to_string(&path)
                .map_err(|e| self.err(key, format!("cannot read {}: {e}", path.display())))?;
            let shape = PulseShape::parse_table(&text).map_err(|e| self.err(key, e.to_string()))?;
            let path = std::path::absolute(&path).unwrap_or(path);
            return Ok(PulseSpec::File { path, shape });
        }
        Err(self.err(key, format!("expected gaussian(omega, center) or file(path), got {value:?}")))
    }
}

fn valid_label(label: &str) -> bool {
    !label.is_empty() && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_complex(item: &str) -> Result<Complex64, String> {
    let item = item.trim();
    if let Some(inner) = item.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
        let (re, im) = inner.split_once(',').ok_or_else(|| format!("expected (re,im), got {item:?}"))?;
        let re = re.trim().parse::<f64>().map_err(|e| format!("bad real part in {item:?}: {e}"))?;
        let im = im.trim().parse::<f64>().map_err(|e| format!("bad imaginary part in {item:?}: {e}"))?;
        return Ok(Complex64::new(re, im));
    }
    item.parse::<f64>().map(|re| Complex64::new(re, 0.0)).map_err(|_| format!("expected a number or (re,im), got {item:?}"))
}

/// Splits on commas outside parentheses.
fn parse_list(value: &str) -> Result<Vec<Complex64>, String> {
    let mut body = value.trim();
    if let Some(inner) = body.strip_prefix('[') {
        body = inner.strip_suffix(']').ok_or("unclosed `[`")?;
    }
    let mut items = Vec::new();
    let (mut depth, mut start) = (0i32, 0);
    for (i, c) in body.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                items.push(&body[start..i]);
                start = i + 1;
            }
            _ => {}
        }
        if depth < 0 {
            return Err("unbalanced `)`".into());
        }
    }
    if depth != 0 {
        return Err("unclosed `(`".into());
    }
    items.push(&body[start..]);
    if items.iter().all(|s| s.trim().is_empty()) {
        return Err("empty list".into());
    }
    items.into_iter().map(parse_complex).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        RunConfig::parse(text, Path::new("."))
    }

    const QUBIT: &str = "\
system.L = 0, 0, 1, 0
system.initial_state = 0, 1
field.n = 1
pulse.1 = gaussian(1.46, 3)
time.t_final = 8
time.dt = 1e-3
";

    #[test]
    fn preset_d_expands() {
        let c = RunConfig::from_preset("atom-2photon-d").unwrap();
        assert_eq!(
            c.pulses,
            vec![PulseSpec::Gaussian { omega: 2.92, center: 3.0 }, PulseSpec::Gaussian { omega: 2.92, center: 5.5 }]
        );
        assert_eq!(c.model, presets::atom_model());
        assert_eq!(c.labels(), vec!["P_e"]);
    }

    #[test]
    fn preset_a_expands_to_decaying_qubit() {
        let c = RunConfig::from_preset("atom-2photon-a").unwrap();
        assert_eq!(c.model.coupling(), &presets::lowering());
        assert_eq!(c.model.scattering(), &ComplexMatrix::identity(2));
        assert_eq!(c.model.initial_state(), &[Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
        assert_eq!(c.pulses, vec![PulseSpec::Gaussian { omega: 1.46, center: 3.0 }; 2]);
    }

    #[test]
    fn explicit_keys_override_preset() {
        let c = parse("preset = b\ntime.t_final = 5\npulse.1 = gaussian(2, 2.5)\nfield.n = 1\n").unwrap();
        assert_eq!(c.t_final, 5.0);
        assert_eq!(c.pulses.len(), 1);
    }

    #[test]
    fn minimal_config_defaults() {
        let c = parse(QUBIT).unwrap();
        assert_eq!(c.model.scattering(), &ComplexMatrix::identity(2));
        assert_eq!(c.stride, 1);
        assert_eq!(c.detection, Detection::Homodyne);
        assert!(c.observables.is_empty());
    }

    #[test]
    fn non_hermitian_h_names_the_key() {
        let text = format!("{QUBIT}system.H = 0, (0,1), 0, 0\n");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("`system.H`"), "{err}");
        assert!(err.contains("line 7"), "{err}");
    }

    #[test]
    fn non_unitary_s_and_bad_dimensions() {
        let err = parse(&format!("{QUBIT}system.S = 2, 0, 0, 1\n")).unwrap_err().to_string();
        assert!(err.contains("`system.S`") && err.contains("unitary"), "{err}");
        let err = parse(&format!("{QUBIT}system.H = 0, 0, 0\n")).unwrap_err().to_string();
        assert!(err.contains("`system.H`") && err.contains("3 entries"), "{err}");
        let err = parse(&format!("{QUBIT}system.dim = 3\n")).unwrap_err().to_string();
        assert!(err.contains("`system.dim`"), "{err}");
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let err = parse(&format!("{QUBIT}system.K = 1\n")).unwrap_err().to_string();
        assert!(err.contains("unknown key") && err.contains("line 7"), "{err}");
        let err = parse(&format!("{QUBIT}time.dt = 1e-2\n")).unwrap_err().to_string();
        assert!(err.contains("already set on line 6"), "{err}");
        assert!(parse("this is not a pair").is_err());
    }

    #[test]
    fn field_count_must_match_pulses() {
        let err = parse(&QUBIT.replace("field.n = 1", "field.n = 2")).unwrap_err().to_string();
        assert!(err.contains("`field.n`"), "{err}");
        let err = parse(&QUBIT.replace("pulse.1", "pulse.2")).unwrap_err().to_string();
        assert!(err.contains("`pulse.2`"), "{err}");
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_list("[(1,-2), 3, ( 0.5 , 1e-3 )]").unwrap(), vec![
            Complex64::new(1.0, -2.0),
            Complex64::new(3.0, 0.0),
            Complex64::new(0.5, 1e-3)
        ]);
        assert!(parse_list("(1,2").is_err());
        assert!(parse_list("[]").is_err());
        assert!(parse_list("1, x").is_err());
    }

    #[test]
    fn text_round_trip_is_exact() {
        let text = "\
system.S = (0.6,0.8), 0, 0, (0.28,-0.96)
system.L = (0.1,0.30000000000000004), (1e-300,2), 1, (0,0.7)
system.H = 0.1, (0.2,0.3), (0.2,-0.3), -1.5
system.initial_state = (0.6,0), (0,0.8)
pulse.1 = gaussian(1.4600000000000002, 3.1)
pulse.2 = gaussian(2.92, 2.9)
field.n = 2
time.t_final = 4
time.dt = 0.002
time.stride = 3
detection.mode = counting
detection.seed = 18446744073709551615
detection.N = 17
observable.X = 0, 1, 1, 0
observable.Y = 0, (0,-1), (0,1), 0
";
        let c = parse(text).unwrap();
        let again = parse(&c.to_text()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.detection, Detection::Photocount);

        let p = RunConfig::from_preset("c").unwrap();
        assert_eq!(parse(&p.to_text()).unwrap(), p);
    }

    #[test]
    fn tabulated_pulse_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let (omega, center) = (2.0f64, 3.0f64);
        let mut table = String::from("t,re,im\n");
        for k in 0..=800 {
            let t = k as f64 * 0.01;
            let v = (omega * omega / (2.0 * std::f64::consts::PI)).powf(0.25) * (-omega * omega * (t - center).powi(2) / 4.0).exp();
            let _ = writeln!(table, "{t},{v},0");
        }
        std::fs::write(dir.path().join("xi.csv"), table).unwrap();
        let text = QUBIT.replace("gaussian(1.46, 3)", "file(xi.csv)");
        let c = RunConfig::parse(&text, dir.path()).unwrap();
        assert!(matches!(&c.pulses[0], PulseSpec::File { path, .. } if path.is_absolute()));
        assert_eq!(parse(&c.to_text()).unwrap(), c);

        let err = RunConfig::parse(&QUBIT.replace("gaussian(1.46, 3)", "file(missing.csv)"), dir.path()).unwrap_err();
        assert!(err.to_string().contains("`pulse.1`"), "{err}");
    }
}
