//! Strict flat `key = value` run configuration.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::Splitting;
use crate::grid::C64;

macro_rules! string_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err(format!(
                        "unknown value `{s}` (expected one of: {})",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

string_enum!(
    /// Named experiment with fully specified defaults.
    PresetName {
        ExactPlaneWave => "exact_plane_wave",
        SteadyState => "steady_state",
        SelfConsistent => "self_consistent",
        Harmonic => "harmonic",
        NrGaussian => "nr_gaussian",
        NrHarmonic => "nr_harmonic",
        Custom => "custom",
    }
);

string_enum!(SolverKind { Md => "md", Wkb => "wkb", Sp => "sp" });

string_enum!(
    /// Shape of the initial spinor.
    InitKind { Gaussian => "gaussian", PlaneWave => "plane_wave" }
);

string_enum!(
    /// Initial phase profile.
    PhaseProfile { Zero => "zero", CosineBump => "cosine_bump" }
);

string_enum!(
    /// How the spinor amplitude is chosen.
    AmplitudeKind { Constant => "constant", Polarized => "polarized" }
);

string_enum!(
    /// Initial electromagnetic potentials for the full system.
    PotentialInitMode { Zero => "zero", Poisson => "poisson", Static => "static" }
);

string_enum!(
    /// Electron/positron split used by the non-relativistic solver.
    ProjectionKind { Delta => "delta", Formal => "formal" }
);

string_enum!(ConvergeAxis { Space => "space", Time => "time" });

string_enum!(RegimePair { MdVsWkb => "md_vs_wkb", MdVsSp => "md_vs_sp", MdVsMd => "md_vs_md" });

/// Every tunable of a run, with defaults taken from the preset.
#[derive(Debug, Clone, PartialEq)]
pub struct RunParams {
    pub preset: PresetName,
    pub solver: SolverKind,
    pub grid_n: [usize; 3],
    pub grid_lower: [f64; 3],
    pub grid_upper: [f64; 3],
    pub epsilon: f64,
    pub delta: f64,
    pub splitting: Splitting,
    pub neutralize: bool,
    pub dealias: bool,
    pub potential_init: PotentialInitMode,
    pub mean_warning: f64,
    pub dt: f64,
    pub t_final: f64,
    pub init_kind: InitKind,
    pub wave_modes: [i64; 3],
    pub center: [f64; 3],
    pub width: f64,
    pub chi: [C64; 4],
    pub phase: PhaseProfile,
    pub amplitude: AmplitudeKind,
    pub harmonic: f64,
    pub plane_wave_fields: bool,
    pub caustic_threshold: f64,
    pub projection: ProjectionKind,
    pub self_consistent: bool,
    pub out_dir: PathBuf,
    pub dump_times: Vec<f64>,
    pub stride: usize,
    pub converge_axis: ConvergeAxis,
    pub converge_levels: Vec<f64>,
    pub compare_pair: RegimePair,
    pub compare_values: Vec<f64>,
    pub compare_t_final: f64,
}

pub const KEYS: &[&str] = &[
    "preset.name",
    "solver.kind",
    "grid.n",
    "grid.lower",
    "grid.upper",
    "md.epsilon",
    "md.delta",
    "md.splitting",
    "md.neutralize",
    "md.dealias",
    "md.init",
    "md.mean_warning",
    "time.dt",
    "time.t_final",
    "init.kind",
    "init.wave_modes",
    "init.center",
    "init.width",
    "init.chi",
    "init.phase",
    "init.amplitude",
    "external.harmonic",
    "external.plane_wave",
    "wkb.caustic_threshold",
    "sp.projection",
    "sp.self_consistent",
    "output.dir",
    "output.dump_times",
    "output.stride",
    "converge.axis",
    "converge.levels",
    "compare.pair",
    "compare.values",
    "compare.t_final",
];

/// Parse a number, accepting simple fractions such as `1/128`.
pub fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| format!("invalid number `{s}`"))?;
        let b: f64 = b.trim().parse().map_err(|_| format!("invalid number `{s}`"))?;
        if b == 0.0 {
            return Err(format!("division by zero in `{s}`"));
        }
        return Ok(a / b);
    }
    s.parse().map_err(|_| format!("invalid number `{s}`"))
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<Vec<T>, String> {
    let s = s.trim();
    if s.is_empty() || s == "none" {
        return Ok(Vec::new());
    }
    s.split(',').map(|p| f(p.trim())).collect()
}

fn parse_triple<T: Copy>(s: &str, f: impl Fn(&str) -> std::result::Result<T, String>) -> std::result::Result<[T; 3], String> {
    let v = parse_list(s, f)?;
    match v.len() {
        1 => Ok([v[0]; 3]),
        3 => Ok([v[0], v[1], v[2]]),
        n => Err(format!("expected 1 or 3 values, got {n}")),
    }
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(format!("invalid boolean `{other}`")),
    }
}

fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let t = s.trim();
    if let Ok(x) = parse_number(t) {
        return Ok(C64::new(x, 0.0));
    }
    C64::from_str(t).map_err(|_| format!("invalid complex number `{t}`"))
}

fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_list<T>(v: &[T], f: impl Fn(&T) -> String) -> String {
    if v.is_empty() {
        "none".into()
    } else {
        v.iter().map(f).collect::<Vec<_>>().join(",")
    }
}

fn fmt_complex(z: &C64) -> String {
    if z.im == 0.0 {
        fmt_f64(z.re)
    } else {
        format!("{:?}{}{:?}i", z.re, if z.im < 0.0 || z.im.is_sign_negative() { "" } else { "+" }, z.im)
    }
}

const UNIT: [C64; 4] = [C64 { re: 1.0, im: 0.0 }, C64 { re: 0.0, im: 0.0 }, C64 { re: 0.0, im: 0.0 }, C64 { re: 0.0, im: 0.0 }];

impl RunParams {
    /// Defaults of a named experiment.
    pub fn preset(name: PresetName) -> Self {
        let mut p = Self {
            preset: name,
            solver: SolverKind::Md,
            grid_n: [32; 3],
            grid_lower: [-0.5; 3],
            grid_upper: [0.5; 3],
            epsilon: 1.0,
            delta: 1.0,
            splitting: Splitting::Strang,
            neutralize: false,
            dealias: false,
            potential_init: PotentialInitMode::Zero,
            mean_warning: crate::md::MEAN_REMOVAL_WARNING,
            dt: 1.0 / 128.0,
            t_final: 0.25,
            init_kind: InitKind::Gaussian,
            wave_modes: [1, 2, 3],
            center: [0.0; 3],
            width: 1.0 / 16.0,
            chi: UNIT,
            phase: PhaseProfile::Zero,
            amplitude: AmplitudeKind::Constant,
            harmonic: 0.0,
            plane_wave_fields: false,
            caustic_threshold: crate::wkb::DEFAULT_CAUSTIC_THRESHOLD,
            projection: ProjectionKind::Delta,
            self_consistent: true,
            out_dir: PathBuf::from("out"),
            dump_times: Vec::new(),
            stride: 1,
            converge_axis: ConvergeAxis::Time,
            converge_levels: Vec::new(),
            compare_pair: RegimePair::MdVsMd,
            compare_values: Vec::new(),
            compare_t_final: 0.25,
        };
        match name {
            PresetName::ExactPlaneWave => {
                p.init_kind = InitKind::PlaneWave;
                p.plane_wave_fields = true;
                p.t_final = 1.0;
                p.converge_axis = ConvergeAxis::Time;
                p.converge_levels = vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
            }
            PresetName::SteadyState => {
                p.epsilon = 0.01;
                p.t_final = 0.5;
                p.compare_pair = RegimePair::MdVsWkb;
                p.compare_values = vec![1e-2, 1e-3];
            }
            PresetName::SelfConsistent => {
                p.epsilon = 0.01;
                p.grid_n = [64; 3];
                p.t_final = 0.625;
                p.phase = PhaseProfile::CosineBump;
                p.amplitude = AmplitudeKind::Polarized;
                p.compare_pair = RegimePair::MdVsWkb;
                p.compare_values = vec![1e-2, 1e-1];
                p.compare_t_final = 0.125;
            }
            PresetName::Harmonic => {
                p.epsilon = 0.01;
                p.dt = 1.0 / 32.0;
                p.t_final = 1.0;
                p.center = [0.1, -0.1, 0.0];
                p.harmonic = 1.0;
            }
            PresetName::NrGaussian => {
                p.delta = 0.01;
                p.grid_n = [64; 3];
                p.t_final = 1.0;
                p.chi = [C64::new(1.0, 0.0); 4];
                p.potential_init = PotentialInitMode::Poisson;
                p.neutralize = true;
                p.compare_pair = RegimePair::MdVsSp;
                p.compare_values = vec![1.0, 0.1, 0.01];
            }
            PresetName::NrHarmonic => {
                p.delta = 0.01;
                p.grid_n = [64; 3];
                p.t_final = 1.0;
                p.center = [0.1, -0.1, 0.0];
                p.chi = [C64::new(1.0, 0.0), C64::default(), C64::new(1.0, 0.0), C64::default()];
                p.harmonic = 100.0;
                p.potential_init = PotentialInitMode::Poisson;
                p.neutralize = true;
                p.compare_pair = RegimePair::MdVsSp;
                p.compare_values = vec![1.0, 0.1, 0.01];
            }
            PresetName::Custom => {}
        }
        p
    }

    /// Set one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let wrap = |r: std::result::Result<(), String>| r.map_err(|msg| Error::config(key, msg));
        wrap((|| -> std::result::Result<(), String> {
            match key {
                "preset.name" => {
                    let name: PresetName = v.parse()?;
                    if name != self.preset {
                        return Err("the preset must be chosen before other keys are applied".into());
                    }
                }
                "solver.kind" => self.solver = v.parse()?,
                "grid.n" => {
                    self.grid_n = parse_triple(v, |s| s.parse::<usize>().map_err(|_| format!("invalid count `{s}`")))?
                }
                "grid.lower" => self.grid_lower = parse_triple(v, parse_number)?,
                "grid.upper" => self.grid_upper = parse_triple(v, parse_number)?,
                "md.epsilon" => self.epsilon = parse_number(v)?,
                "md.delta" => self.delta = parse_number(v)?,
                "md.splitting" => self.splitting = v.parse()?,
                "md.neutralize" => self.neutralize = parse_bool(v)?,
                "md.dealias" => self.dealias = parse_bool(v)?,
                "md.init" => self.potential_init = v.parse()?,
                "md.mean_warning" => self.mean_warning = parse_number(v)?,
                "time.dt" => self.dt = parse_number(v)?,
                "time.t_final" => self.t_final = parse_number(v)?,
                "init.kind" => self.init_kind = v.parse()?,
                "init.wave_modes" => {
                    self.wave_modes = parse_triple(v, |s| s.parse::<i64>().map_err(|_| format!("invalid integer `{s}`")))?
                }
                "init.center" => self.center = parse_triple(v, parse_number)?,
                "init.width" => self.width = parse_number(v)?,
                "init.chi" => {
                    let c = parse_list(v, parse_complex)?;
                    if c.len() != 4 {
                        return Err(format!("expected 4 components, got {}", c.len()));
                    }
                    self.chi = [c[0], c[1], c[2], c[3]];
                }
                "init.phase" => self.phase = v.parse()?,
                "init.amplitude" => self.amplitude = v.parse()?,
                "external.harmonic" => self.harmonic = parse_number(v)?,
                "external.plane_wave" => self.plane_wave_fields = parse_bool(v)?,
                "wkb.caustic_threshold" => self.caustic_threshold = parse_number(v)?,
                "sp.projection" => self.projection = v.parse()?,
                "sp.self_consistent" => self.self_consistent = parse_bool(v)?,
                "output.dir" => self.out_dir = PathBuf::from(v),
                "output.dump_times" => self.dump_times = parse_list(v, parse_number)?,
                "output.stride" => {
                    self.stride = v.parse::<usize>().map_err(|_| format!("invalid stride `{v}`"))?;
                    if self.stride == 0 {
                        return Err("stride must be at least 1".into());
                    }
                }
                "converge.axis" => self.converge_axis = v.parse()?,
                "converge.levels" => self.converge_levels = parse_list(v, parse_number)?,
                "compare.pair" => self.compare_pair = v.parse()?,
                "compare.values" => self.compare_values = parse_list(v, parse_number)?,
                "compare.t_final" => self.compare_t_final = parse_number(v)?,
                _ => return Err("unknown configuration key".into()),
            }
            Ok(())
        })())
    }

    /// Textual value of one key, in the same syntax `set` accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        let t = |a: &[f64; 3]| fmt_list(a, |x| fmt_f64(*x));
        Some(match key {
            "preset.name" => self.preset.to_string(),
            "solver.kind" => self.solver.to_string(),
            "grid.n" => fmt_list(&self.grid_n, |x| x.to_string()),
            "grid.lower" => t(&self.grid_lower),
            "grid.upper" => t(&self.grid_upper),
            "md.epsilon" => fmt_f64(self.epsilon),
            "md.delta" => fmt_f64(self.delta),
            "md.splitting" => self.splitting.to_string(),
            "md.neutralize" => self.neutralize.to_string(),
            "md.dealias" => self.dealias.to_string(),
            "md.init" => self.potential_init.to_string(),
            "md.mean_warning" => fmt_f64(self.mean_warning),
            "time.dt" => fmt_f64(self.dt),
            "time.t_final" => fmt_f64(self.t_final),
            "init.kind" => self.init_kind.to_string(),
            "init.wave_modes" => fmt_list(&self.wave_modes, |x| x.to_string()),
            "init.center" => t(&self.center),
            "init.width" => fmt_f64(self.width),
            "init.chi" => fmt_list(&self.chi, fmt_complex),
            "init.phase" => self.phase.to_string(),
            "init.amplitude" => self.amplitude.to_string(),
            "external.harmonic" => fmt_f64(self.harmonic),
            "external.plane_wave" => self.plane_wave_fields.to_string(),
            "wkb.caustic_threshold" => fmt_f64(self.caustic_threshold),
            "sp.projection" => self.projection.to_string(),
            "sp.self_consistent" => self.self_consistent.to_string(),
            "output.dir" => self.out_dir.display().to_string(),
            "output.dump_times" => fmt_list(&self.dump_times, |x| fmt_f64(*x)),
            "output.stride" => self.stride.to_string(),
            "converge.axis" => self.converge_axis.to_string(),
            "converge.levels" => fmt_list(&self.converge_levels, |x| fmt_f64(*x)),
            "compare.pair" => self.compare_pair.to_string(),
            "compare.values" => fmt_list(&self.compare_values, |x| fmt_f64(*x)),
            "compare.t_final" => fmt_f64(self.compare_t_final),
            _ => return None,
        })
    }

    /// All resolved keys in the configuration syntax.
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        for key in KEYS {
            let _ = writeln!(s, "{key} = {}", self.get(key).expect("every listed key is readable"));
        }
        s
    }

    /// Parse a configuration text, then apply `overrides` in order.
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let entries = parse_entries(text)?;
        let preset_of = |list: &[(String, String)]| list.iter().rev().find(|(k, _)| k == "preset.name").map(|(_, v)| v.clone());
        let name = preset_of(overrides).or_else(|| preset_of(&entries)).unwrap_or_else(|| "custom".into());
        let name: PresetName = name.trim().parse().map_err(|m| Error::config("preset.name", m))?;
        let mut p = Self::preset(name);
        for (k, v) in entries.iter().chain(overrides) {
            if k == "preset.name" {
                continue;
            }
            p.set(k, v)?;
        }
        Ok(p)
    }
}

/// Split configuration text into `(key, value)` pairs; duplicates are fatal.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}", ln + 1), format!("expected `key = value`, got `{line}`")))?;
        let k = k.trim().to_string();
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::config(k, "unknown configuration key"));
        }
        if !seen.insert(k.clone()) {
            return Err(Error::config(k, "key given more than once"));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

/// Parse a `key=value` override from the command line.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s.split_once('=').ok_or_else(|| Error::config(s, "override must look like key=value"))?;
    let k = k.trim();
    if !KEYS.contains(&k) {
        return Err(Error::config(k, "unknown configuration key"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}
