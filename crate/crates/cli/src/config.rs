//! Scenario configuration: a flat key-value text format with dotted
//! sections, its parser and canonical writer, and the figure presets.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use toa_core::{
    CrossingKind, GaussianSpec, PhysicalUnits, PiecewisePotential, PotentialSegment, SeriesKind,
    SpatialGrid, TimeGrid,
};

use crate::CliError;

/// Everything a run needs, fully validated at load time.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub units: PhysicalUnits,
    pub packet: GaussianSpec,
    pub potential: PiecewisePotential,
    pub arrivals: Vec<f64>,
    pub times: TimeGrid,
    pub kinds: Vec<SeriesKind>,
    pub numerics: Numerics,
}

/// Discretization knobs; every field has a default so configs only state
/// what they change.
#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    /// Minimum momentum-node count; the automatic sizing still wins when
    /// it asks for more.
    pub momentum_nodes: Option<usize>,
    pub spatial: SpatialGrid,
    pub classical_samples: usize,
    pub seed: u64,
    pub bandwidth: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            momentum_nodes: None,
            spatial: SpatialGrid::new(-30.0, 40.0, 2048).expect("default window"),
            classical_samples: 100_000,
            seed: 7,
            bandwidth: 0.05,
        }
    }
}

pub(crate) const KIND_TAGS: [(&str, SeriesKind); 8] = [
    ("kijowski-free", SeriesKind::Crossing(CrossingKind::KijowskiFree)),
    ("pi1", SeriesKind::Crossing(CrossingKind::Proposal1)),
    ("pi2+", SeriesKind::Crossing(CrossingKind::Proposal2Plus)),
    ("pi2-", SeriesKind::Crossing(CrossingKind::Proposal2Minus)),
    ("pi3+", SeriesKind::Crossing(CrossingKind::Proposal3Plus)),
    ("pi3-", SeriesKind::Crossing(CrossingKind::Proposal3Minus)),
    ("flux", SeriesKind::Flux),
    ("classical", SeriesKind::Classical),
];

pub fn kind_tag(kind: SeriesKind) -> &'static str {
    KIND_TAGS
        .iter()
        .find(|(_, k)| *k == kind)
        .map(|(t, _)| *t)
        .expect("every series kind has a tag")
}

/// Filesystem-safe name of a kind, used in CSV file names and manifest keys.
pub fn kind_slug(kind: SeriesKind) -> &'static str {
    match kind {
        SeriesKind::Crossing(CrossingKind::KijowskiFree) => "kijowski_free",
        SeriesKind::Crossing(CrossingKind::Proposal1) => "pi1",
        SeriesKind::Crossing(CrossingKind::Proposal2Plus) => "pi2_plus",
        SeriesKind::Crossing(CrossingKind::Proposal2Minus) => "pi2_minus",
        SeriesKind::Crossing(CrossingKind::Proposal3Plus) => "pi3_plus",
        SeriesKind::Crossing(CrossingKind::Proposal3Minus) => "pi3_minus",
        SeriesKind::Flux => "flux",
        SeriesKind::Classical => "classical",
    }
}

/// Arrival point rendered for file names and manifest keys: integers stay
/// plain, a fractional part swaps its dot for `p` (x2p5).
pub fn format_x(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}").replace('.', "p")
    }
}

/// Raw key/value lines of the flat format: `key = value`, `#` comments,
/// blank lines. Values keep internal spaces; keys must be unique.
pub(crate) fn parse_key_values(
    path: &Path,
    text: &str,
) -> Result<BTreeMap<String, (usize, String)>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected `key = value`, got `{trimmed}`"),
            });
        };
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                msg: "empty key".into(),
            });
        }
        if let Some((prev, _)) = map.insert(key.clone(), (line, value.trim().to_string())) {
            return Err(CliError::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("duplicate key `{key}` (first set on line {prev})"),
            });
        }
    }
    Ok(map)
}

struct Extractor {
    path: PathBuf,
    map: BTreeMap<String, (usize, String)>,
}

impl Extractor {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn parse_err(&self, line: usize, msg: String) -> CliError {
        CliError::Parse {
            path: self.path.clone(),
            line,
            msg,
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.take(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse()
                .map_err(|_| self.parse_err(line, format!("{key}: invalid number `{v}`"))),
        }
    }

    fn req_f64(&mut self, key: &str) -> Result<f64, CliError> {
        let (line, v) = self
            .take(key)
            .ok_or_else(|| self.parse_err(0, format!("missing required key `{key}`")))?;
        v.parse()
            .map_err(|_| self.parse_err(line, format!("{key}: invalid number `{v}`")))
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize, CliError> {
        match self.take(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse()
                .map_err(|_| self.parse_err(line, format!("{key}: invalid count `{v}`"))),
        }
    }

    fn u64_or(&mut self, key: &str, default: u64) -> Result<u64, CliError> {
        match self.take(key) {
            None => Ok(default),
            Some((line, v)) => v
                .parse()
                .map_err(|_| self.parse_err(line, format!("{key}: invalid integer `{v}`"))),
        }
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let Some((line, v)) = self.take(key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for item in v.split(',') {
            let item = item.trim();
            if item.is_empty() {
                continue;
            }
            out.push(item.parse().map_err(|_| {
                self.parse_err(line, format!("{key}: invalid number `{item}`"))
            })?);
        }
        Ok(Some(out))
    }

    fn finish(self) -> Result<(), CliError> {
        if let Some((key, (line, _))) = self.map.into_iter().next() {
            return Err(CliError::Parse {
                path: self.path,
                line,
                msg: format!("unknown key `{key}`"),
            });
        }
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(path, &text)
}

pub fn parse_config(path: &Path, text: &str) -> Result<ScenarioConfig, CliError> {
    let map = parse_key_values(path, text)?;
    let mut ex = Extractor {
        path: path.to_path_buf(),
        map,
    };

    let units = PhysicalUnits::new(ex.f64_or("units.hbar", 1.0)?, ex.f64_or("units.mass", 1.0)?)?;
    let packet = GaussianSpec::new(
        ex.req_f64("packet.x0")?,
        ex.req_f64("packet.p0")?,
        ex.req_f64("packet.dx")?,
    )?;

    let mut segments = Vec::new();
    for n in 1.. {
        let prefix = format!("potential.segment.{n}");
        let has = |ex: &Extractor, field: &str| ex.map.contains_key(&format!("{prefix}.{field}"));
        if !(has(&ex, "left") || has(&ex, "right") || has(&ex, "v0")) {
            break;
        }
        segments.push(PotentialSegment {
            left: ex.req_f64(&format!("{prefix}.left"))?,
            right: ex.req_f64(&format!("{prefix}.right"))?,
            height: ex.req_f64(&format!("{prefix}.v0"))?,
        });
    }
    let potential = PiecewisePotential::new(segments)?;

    let arrivals = ex
        .f64_list("arrivals.x")?
        .ok_or_else(|| CliError::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "missing required key `arrivals.x`".into(),
        })?;
    if arrivals.is_empty() {
        return Err(CliError::Parse {
            path: path.to_path_buf(),
            line: 0,
            msg: "arrivals.x needs at least one arrival point".into(),
        });
    }

    let times = TimeGrid::new(
        ex.f64_or("time.t_min", 0.0)?,
        ex.f64_or("time.t_max", 10.0)?,
        ex.usize_or("time.count", 401)?,
    )?;

    let kinds = match ex.take("kinds") {
        None => Vec::new(),
        Some((line, v)) => {
            let mut kinds = Vec::new();
            for tag in v.split(',') {
                let tag = tag.trim();
                if tag.is_empty() {
                    continue;
                }
                let kind = KIND_TAGS
                    .iter()
                    .find(|(t, _)| *t == tag)
                    .map(|(_, k)| *k)
                    .ok_or_else(|| {
                        let all: Vec<_> = KIND_TAGS.iter().map(|(t, _)| *t).collect();
                        ex.parse_err(
                            line,
                            format!("unknown series kind `{tag}` (expected {})", all.join(", ")),
                        )
                    })?;
                kinds.push(kind);
            }
            kinds
        }
    };

    let momentum_nodes = match ex.take("numerics.momentum.nodes") {
        None => None,
        Some((line, v)) => Some(v.parse().map_err(|_| {
            ex.parse_err(line, format!("numerics.momentum.nodes: invalid count `{v}`"))
        })?),
    };
    let defaults = Numerics::default();
    let spatial = SpatialGrid::new(
        ex.f64_or("numerics.spatial.x_min", defaults.spatial.x_min())?,
        ex.f64_or("numerics.spatial.x_max", defaults.spatial.x_max())?,
        ex.usize_or("numerics.spatial.count", defaults.spatial.len())?,
    )?;
    let numerics = Numerics {
        momentum_nodes,
        spatial,
        classical_samples: ex.usize_or("numerics.classical.samples", defaults.classical_samples)?,
        seed: ex.u64_or("numerics.classical.seed", defaults.seed)?,
        bandwidth: ex.f64_or("numerics.classical.bandwidth", defaults.bandwidth)?,
    };
    ex.finish()?;

    Ok(ScenarioConfig {
        units,
        packet,
        potential,
        arrivals,
        times,
        kinds,
        numerics,
    })
}

fn push_f64_list(out: &mut String, key: &str, values: &[f64]) {
    let rendered: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
    let _ = writeln!(out, "{key} = {}", rendered.join(", "));
}

/// Canonical text form; `parse_config(write_config(c)) == c`.
pub fn write_config(config: &ScenarioConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "units.hbar = {}", config.units.hbar);
    let _ = writeln!(out, "units.mass = {}", config.units.mass);
    let _ = writeln!(out, "packet.x0 = {}", config.packet.x0);
    let _ = writeln!(out, "packet.p0 = {}", config.packet.p0);
    let _ = writeln!(out, "packet.dx = {}", config.packet.dx);
    for (i, seg) in config.potential.segments().iter().enumerate() {
        let n = i + 1;
        let _ = writeln!(out, "potential.segment.{n}.left = {}", seg.left);
        let _ = writeln!(out, "potential.segment.{n}.right = {}", seg.right);
        let _ = writeln!(out, "potential.segment.{n}.v0 = {}", seg.height);
    }
    push_f64_list(&mut out, "arrivals.x", &config.arrivals);
    let _ = writeln!(out, "time.t_min = {}", config.times.t_min);
    let _ = writeln!(out, "time.t_max = {}", config.times.t_max);
    let _ = writeln!(out, "time.count = {}", config.times.count);
    let tags: Vec<&str> = config.kinds.iter().map(|&k| kind_tag(k)).collect();
    let _ = writeln!(out, "kinds = {}", tags.join(", "));
    if let Some(n) = config.numerics.momentum_nodes {
        let _ = writeln!(out, "numerics.momentum.nodes = {n}");
    }
    let _ = writeln!(out, "numerics.spatial.x_min = {}", config.numerics.spatial.x_min());
    let _ = writeln!(out, "numerics.spatial.x_max = {}", config.numerics.spatial.x_max());
    let _ = writeln!(out, "numerics.spatial.count = {}", config.numerics.spatial.len());
    let _ = writeln!(out, "numerics.classical.samples = {}", config.numerics.classical_samples);
    let _ = writeln!(out, "numerics.classical.seed = {}", config.numerics.seed);
    let _ = writeln!(out, "numerics.classical.bandwidth = {}", config.numerics.bandwidth);
    out
}

pub const PRESET_NAMES: [&str; 5] = ["figure1", "figure2", "figure3", "figure4", "figure5"];

/// Built-in scenarios reproducing the reference experiment: the fast packet
/// against the tall square barrier watched before, inside, and past it, and
/// the slow packet it reflects.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let tag = |t: &str| {
        KIND_TAGS
            .iter()
            .find(|(s, _)| *s == t)
            .map(|(_, k)| *k)
            .expect("preset tags are valid")
    };
    let fast = GaussianSpec::new(-6.0, 6.0, 1.0).expect("preset packet");
    let barrier = PiecewisePotential::square_barrier(10.0, 0.0, 10.0).expect("preset barrier");
    let times = TimeGrid::new(0.0, 10.0, 401).expect("preset times");
    let mut config = ScenarioConfig {
        units: PhysicalUnits::natural(),
        packet: fast,
        potential: barrier,
        arrivals: vec![-2.0, 5.0, 12.0],
        times,
        kinds: Vec::new(),
        numerics: Numerics::default(),
    };
    match name {
        "figure1" => config.kinds = vec![tag("kijowski-free"), tag("pi2+")],
        "figure2" => config.kinds = vec![tag("pi2-"), tag("flux")],
        "figure3" => {
            config.arrivals = vec![-2.0];
            config.kinds = vec![tag("pi1"), tag("pi3+"), tag("flux")];
        }
        "figure4" => {
            config.arrivals = vec![5.0];
            config.kinds = vec![tag("pi1"), tag("pi3+"), tag("flux")];
        }
        "figure5" => {
            config.packet = GaussianSpec::new(-9.0, 3.0, 1.0).expect("preset packet");
            config.arrivals = vec![-5.0];
            config.kinds = vec![tag("pi1"), tag("pi3+"), tag("pi2+"), tag("pi2-"), tag("flux")];
            config.times = TimeGrid::new(0.0, 14.0, 561).expect("preset times");
            config.numerics.spatial = SpatialGrid::new(-60.0, 40.0, 2048).expect("preset window");
        }
        _ => return None,
    }
    Some(config)
}
