//! Convergence studies and their CSV output. The flat `key = value`
//! configuration format shared with the CLI lives here too.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{CaseDefinition, CaseKind, Grid, State};
use crate::parallel::{self, Execution};
use crate::recovery::GhostPolicy;
use crate::schemes::{run, Discretization, LfViscosity, RunResult, SchemeConfig, SchemeKind};

pub const DEFAULT_EPS_LIST: [f64; 4] = [1e-1, 1e-2, 1e-4, 1e-8];

/// A sweep over schemes, stiffness parameters and resolutions for one case.
#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub schemes: Vec<SchemeKind>,
    pub case: CaseKind,
    pub eps_list: Vec<f64>,
    pub nx_list: Vec<usize>,
    pub cfl_hat: f64,
    pub t_final: f64,
    pub discretization: Discretization,
}

impl Default for StudySpec {
    fn default() -> Self {
        StudySpec {
            schemes: SchemeKind::ALL.to_vec(),
            case: CaseKind::Smooth,
            eps_list: DEFAULT_EPS_LIST.to_vec(),
            nx_list: (1..=12).map(|k| 1usize << k).collect(),
            cfl_hat: SchemeConfig::DEFAULT_CFL_HAT,
            t_final: SchemeConfig::DEFAULT_T_FINAL,
            discretization: Discretization::default(),
        }
    }
}

impl StudySpec {
    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() || self.eps_list.is_empty() || self.nx_list.is_empty() {
            return Err(Error::InvalidArgument(
                "study needs at least one scheme, eps and nx".into(),
            ));
        }
        if let Some(&eps) = self.eps_list.iter().find(|e| !(**e > 0.0 && **e < 1.0)) {
            return Err(Error::InvalidEps {
                eps,
                allowed: "(0, 1)",
            });
        }
        if self.nx_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "nx list must be strictly increasing".into(),
            ));
        }
        if self.nx_list[0] < 2 {
            return Err(Error::InvalidGrid("need at least 2 cells".into()));
        }
        self.config(self.schemes[0], self.eps_list[0], self.nx_list[0])
            .validate()
    }

    pub fn config(&self, kind: SchemeKind, eps: f64, n_cells: usize) -> SchemeConfig {
        SchemeConfig {
            kind,
            eps,
            cfl_hat: self.cfl_hat,
            t_final: self.t_final,
            case: self.case,
            n_cells,
            discretization: self.discretization,
        }
    }

    /// All `(scheme, eps, nx)` cells in lexicographic order, duplicates
    /// removed.
    pub fn cells(&self) -> Vec<(SchemeKind, f64, usize)> {
        let mut schemes = self.schemes.clone();
        schemes.sort();
        schemes.dedup();
        let mut eps = self.eps_list.clone();
        eps.sort_by(f64::total_cmp);
        eps.dedup();
        let mut out = Vec::with_capacity(schemes.len() * eps.len() * self.nx_list.len());
        for &s in &schemes {
            for &e in &eps {
                for &n in &self.nx_list {
                    out.push((s, e, n));
                }
            }
        }
        out
    }

    /// Build from configuration entries; absent keys keep their defaults.
    pub fn from_entries(entries: &Entries) -> Result<Self> {
        let mut spec = StudySpec::default();
        if let Some(v) = entries.get("scheme") {
            spec.schemes = parse_list("scheme", v)?;
        }
        if let Some(v) = entries.get("case") {
            spec.case = parse_value("case", v)?;
        }
        if let Some(v) = entries.get("eps") {
            spec.eps_list = parse_list("eps", v)?;
        }
        if let Some(v) = entries.get("nx") {
            spec.nx_list = parse_list("nx", v)?;
        }
        if let Some(v) = entries.get("cfl_hat") {
            spec.cfl_hat = parse_value("cfl_hat", v)?;
        }
        if let Some(v) = entries.get("t_final") {
            spec.t_final = parse_value("t_final", v)?;
        }
        spec.discretization = discretization_from_entries(entries)?;
        spec.validate()?;
        Ok(spec)
    }
}

fn discretization_from_entries(entries: &Entries) -> Result<Discretization> {
    let mut d = Discretization::default();
    if let Some(v) = entries.get("viscosity") {
        d.viscosity = parse_value::<LfViscosity>("viscosity", v)?;
    }
    if let Some(v) = entries.get("ghosts") {
        d.ghosts = parse_value::<GhostPolicy>("ghosts", v)?;
    }
    Ok(d)
}

/// Single-run configuration from entries. `scheme`, `case`, `eps` and `nx`
/// are required.
pub fn scheme_config_from_entries(entries: &Entries) -> Result<SchemeConfig> {
    let need = |k: &str| {
        entries
            .get(k)
            .ok_or_else(|| Error::InvalidArgument(format!("missing required setting '{k}'")))
    };
    let mut c = SchemeConfig::new(
        parse_value("scheme", need("scheme")?)?,
        parse_value("case", need("case")?)?,
        parse_value("eps", need("eps")?)?,
        parse_value("nx", need("nx")?)?,
    );
    if let Some(v) = entries.get("cfl_hat") {
        c.cfl_hat = parse_value("cfl_hat", v)?;
    }
    if let Some(v) = entries.get("t_final") {
        c.t_final = parse_value("t_final", v)?;
    }
    c.discretization = discretization_from_entries(entries)?;
    c.validate()?;
    Ok(c)
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e: T::Err| {
            let msg = e.to_string();
            let msg = msg.trim_start_matches("invalid argument: ");
            Error::InvalidArgument(format!("{key} = '{}': {msg}", raw.trim()))
        })
}

fn parse_list<T: FromStr>(key: &str, raw: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = raw
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_value(key, s))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::InvalidArgument(format!("{key}: empty list")));
    }
    Ok(items)
}

/// Discrete l2 errors against the exact solution at `state.time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Errors {
    pub v: f64,
    pub u: f64,
    pub combined: f64,
}

pub fn l2_error(state: &State, case: &CaseDefinition, grid: &Grid) -> Result<L2Errors> {
    state.check_matches(grid)?;
    let t = state.time;
    let (mut sv, mut su) = (0.0, 0.0);
    for (i, &x) in grid.midpoints().iter().enumerate() {
        sv += (state.v[i] - case.v_exact(x, t)).powi(2);
        su += (state.u[i] - case.u_exact(x, t)).powi(2);
    }
    let v = (grid.dx() * sv).sqrt();
    let u = (grid.dx() * su).sqrt();
    Ok(L2Errors {
        v,
        u,
        combined: v.hypot(u),
    })
}

/// Order between consecutive `(nx, error)` points,
/// `log(e_k / e_{k+1}) / log(n_{k+1} / n_k)`. Zero or non-finite errors give
/// `None`.
pub fn observed_order(points: &[(usize, f64)]) -> Result<Vec<Option<f64>>> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "observed order needs at least two points".into(),
        ));
    }
    Ok(points
        .windows(2)
        .map(|w| {
            let ((n0, e0), (n1, e1)) = (w[0], w[1]);
            let usable = |e: f64| e.is_finite() && e > 0.0;
            if !usable(e0) || !usable(e1) || n1 <= n0 {
                return None;
            }
            Some((e0 / e1).ln() / (n1 as f64 / n0 as f64).ln())
        })
        .collect())
}

/// Least-squares slope of `log e` against `log n`; the average order over a
/// window of resolutions.
pub fn fitted_order(points: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, e)| ((n as f64).ln(), e))
        .collect();
    log_log_slope(&pts).map(|s| -s)
}

/// Least-squares slope of `ln y` against the first coordinate, which must
/// already be logarithmic. Needs two usable points.
pub(crate) fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(_, y)| y.is_finite() && *y > 0.0)
        .map(|&(x, y)| (x, y.ln()))
        .collect();
    if pts.len() < 2 || pts.len() != points.len() {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Flag {
    /// A linear solve exceeded the condition threshold.
    IllConditioned,
    /// The run aborted; errors are absent.
    RunFailed,
    /// The order against the previous resolution could not be formed.
    OrderUndefined,
}

impl Flag {
    pub fn token(self) -> &'static str {
        match self {
            Flag::IllConditioned => "ill_conditioned",
            Flag::RunFailed => "run_failed",
            Flag::OrderUndefined => "order_undefined",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub scheme: SchemeKind,
    pub case: CaseKind,
    pub eps: f64,
    pub n_cells: usize,
    pub dt: f64,
    /// NaN when the run failed.
    pub err_v: f64,
    pub err_u: f64,
    pub err_combined: f64,
    pub observed_order: Option<f64>,
    pub flags: Vec<Flag>,
    pub max_condition: Option<f64>,
    /// Failure message of an aborted run.
    pub failure: Option<String>,
}

impl ErrorRecord {
    pub fn has_flag(&self, f: Flag) -> bool {
        self.flags.contains(&f)
    }

    fn add_flag(&mut self, f: Flag) {
        if !self.has_flag(f) {
            self.flags.push(f);
            self.flags.sort();
        }
    }
}

/// Record for a completed run, flagged when any step was ill-conditioned.
pub fn record_from_run(config: &SchemeConfig, result: &RunResult) -> Result<ErrorRecord> {
    let e = l2_error(&result.final_state, &result.case, &result.grid)?;
    let mut rec = ErrorRecord {
        scheme: config.kind,
        case: config.case,
        eps: config.eps,
        n_cells: config.n_cells,
        dt: result.dt_used,
        err_v: e.v,
        err_u: e.u,
        err_combined: e.combined,
        observed_order: None,
        flags: Vec::new(),
        max_condition: Some(result.max_condition_estimate()),
        failure: None,
    };
    if result.ill_conditioned() {
        rec.add_flag(Flag::IllConditioned);
    }
    Ok(rec)
}

fn run_cell(spec: &StudySpec, kind: SchemeKind, eps: f64, n: usize) -> ErrorRecord {
    let config = spec.config(kind, eps, n);
    match run(&config).and_then(|r| record_from_run(&config, &r)) {
        Ok(rec) => rec,
        Err(e) => ErrorRecord {
            scheme: kind,
            case: spec.case,
            eps,
            n_cells: n,
            dt: config.time_slabs().1,
            err_v: f64::NAN,
            err_u: f64::NAN,
            err_combined: f64::NAN,
            observed_order: None,
            flags: vec![Flag::RunFailed],
            max_condition: None,
            failure: Some(e.to_string()),
        },
    }
}

/// Run every cell of the study. Failed runs become flagged records. Rows
/// are ordered by `(scheme, eps, nx)` whatever the execution order.
pub fn run_study(spec: &StudySpec, exec: Execution) -> Result<Vec<ErrorRecord>> {
    spec.validate()?;
    let cells = spec.cells();
    let mut records = parallel::map(exec, &cells, |&(k, e, n)| run_cell(spec, k, e, n));

    for i in 1..records.len() {
        let (prev, cur) = records.split_at_mut(i);
        let (prev, cur) = (&prev[i - 1], &mut cur[0]);
        if prev.scheme != cur.scheme || prev.eps.to_bits() != cur.eps.to_bits() {
            continue;
        }
        let pts = [
            (prev.n_cells, prev.err_combined),
            (cur.n_cells, cur.err_combined),
        ];
        cur.observed_order = observed_order(&pts)?[0];
        if cur.observed_order.is_none() {
            cur.add_flag(Flag::OrderUndefined);
        }
    }
    Ok(records)
}

/// Shortest decimal that parses back to `x`; positional notation for
/// moderate magnitudes, exponent notation otherwise. Non-finite values map
/// to the empty string.
pub fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return String::new();
    }
    let a = x.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub const CSV_HEADER: &str = "scheme,case,eps,nx,dt,err_v,err_u,err_combined,observed_order,flags";

pub fn write_csv(records: &[ErrorRecord], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        let flags: Vec<&str> = r.flags.iter().map(|f| f.token()).collect();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.scheme.name(),
            r.case.name(),
            format_float(r.eps),
            r.n_cells,
            format_float(r.dt),
            format_float(r.err_v),
            format_float(r.err_u),
            format_float(r.err_combined),
            r.observed_order.map(format_float).unwrap_or_default(),
            flags.join(";"),
        )?;
    }
    Ok(())
}

pub fn csv_string(records: &[ErrorRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

pub fn emit_csv(records: &[ErrorRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records to write".into()));
    }
    fs::write(path, csv_string(records)).map_err(|e| Error::io(path, e))
}

/// One `nx error` table per `(scheme, eps)`, using the combined error.
/// Returns the written paths in record order.
pub fn write_plot_tables(records: &[ErrorRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tables: BTreeMap<(SchemeKind, u64), (PathBuf, String)> = BTreeMap::new();
    for r in records {
        let (_, body) = tables.entry((r.scheme, r.eps.to_bits())).or_insert_with(|| {
            let name = format!("{}_{}_eps{}.dat", r.case.name(), r.scheme.name(), format_float(r.eps));
            (dir.join(name), String::from("nx error\n"))
        });
        if r.err_combined.is_finite() {
            let _ = writeln!(body, "{} {}", r.n_cells, format_float(r.err_combined));
        }
    }
    let mut written: Vec<PathBuf> = Vec::new();
    for (path, body) in tables.into_values() {
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// Settings read from a configuration file, keyed by flag name with dashes
/// replaced by underscores.
pub type Entries = BTreeMap<String, String>;

pub const CONFIG_KEYS: [&str; 11] = [
    "scheme",
    "case",
    "eps",
    "nx",
    "cfl_hat",
    "t_final",
    "out",
    "viscosity",
    "ghosts",
    "emit_plot_table",
    "threads",
];

/// Parse `key = value` lines. `#` starts a comment; blank lines are
/// skipped; a key may appear once.
pub fn parse_config(text: &str, path: &Path) -> Result<Entries> {
    let mut entries = Entries::new();
    for (idx, raw) in text.lines().enumerate() {
        let err = |msg: String| Error::Config {
            path: path.to_path_buf(),
            line: idx + 1,
            msg,
        };
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(err(format!("unknown key '{key}'")));
        }
        if value.is_empty() {
            return Err(err(format!("empty value for '{key}'")));
        }
        if entries.insert(key.clone(), value.to_string()).is_some() {
            return Err(err(format!("duplicate key '{key}'")));
        }
    }
    Ok(entries)
}

pub fn load_config(path: &Path) -> Result<Entries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{case_smooth, unit_grid};

    #[test]
    fn exact_state_has_zero_error() {
        let g = unit_grid(16).unwrap();
        let c = case_smooth(0.1).unwrap();
        let s = State::from_case(&c, &g, 0.07);
        assert_eq!(l2_error(&s, &c, &g).unwrap().combined, 0.0);
    }

    #[test]
    fn constant_offset() {
        let g = unit_grid(10).unwrap();
        let c = case_smooth(0.1).unwrap();
        let mut s = State::from_case(&c, &g, 0.0);
        s.v.iter_mut().for_each(|v| *v += 0.3);
        let e = l2_error(&s, &c, &g).unwrap();
        assert!((e.v - 0.3).abs() < 1e-15);
        assert_eq!(e.u, 0.0);
    }

    #[test]
    fn orders() {
        let o = observed_order(&[(64, 1e-3), (128, 5e-4), (256, 1.25e-4)]).unwrap();
        assert!((o[0].unwrap() - 1.0).abs() < 1e-14);
        assert!((o[1].unwrap() - 2.0).abs() < 1e-14);
        let o = observed_order(&[(64, 1e-3), (128, 0.0), (256, f64::NAN)]).unwrap();
        assert_eq!(o, vec![None, None]);
        assert!(observed_order(&[(64, 1.0)]).is_err());
    }

    #[test]
    fn fitted_order_of_power_law() {
        let pts: Vec<(usize, f64)> = [16, 32, 64, 128]
            .iter()
            .map(|&n| (n, 3.0 * (n as f64).powf(-1.5)))
            .collect();
        assert!((fitted_order(&pts).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1e-8, 0.0125, 5.526e-20, 123.0, 1.0 / 3.0, 0.0, 4096.0] {
            let s = format_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(format_float(0.1), "0.1");
        assert_eq!(format_float(1e-8), "1e-8");
        assert_eq!(format_float(f64::NAN), "");
    }

    #[test]
    fn config_parsing() {
        let p = Path::new("x.cfg");
        let e = parse_config("# study\nscheme = ap, imex\neps=1e-2 # trailing\n\ncfl-hat = 0.5\n", p)
            .unwrap();
        assert_eq!(e["scheme"], "ap, imex");
        assert_eq!(e["eps"], "1e-2");
        assert_eq!(e["cfl_hat"], "0.5");
        assert!(parse_config("nonsense", p).is_err());
        assert!(parse_config("colour = red", p).is_err());
        assert!(parse_config("eps = 1\neps = 2", p).is_err());
        match parse_config("eps = 1\nbad line", p) {
            Err(Error::Config { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spec_from_entries() {
        let e = parse_config("scheme = imex,ap\neps = 1e-2\nnx = 8,16\ncase = kink", Path::new("s"))
            .unwrap();
        let s = StudySpec::from_entries(&e).unwrap();
        assert_eq!(s.case, CaseKind::Kink);
        let cells = s.cells();
        assert_eq!(cells.len(), 4);
        assert_eq!(cells[0], (SchemeKind::Ap, 1e-2, 8));
        assert_eq!(cells[3], (SchemeKind::Imex, 1e-2, 16));

        let bad = parse_config("nx = 16,8", Path::new("s")).unwrap();
        assert!(StudySpec::from_entries(&bad).is_err());
    }

    #[test]
    fn default_spec() {
        let s = StudySpec::default();
        assert_eq!(s.nx_list.first(), Some(&2));
        assert_eq!(s.nx_list.last(), Some(&4096));
        assert_eq!(s.cells().len(), 3 * 4 * 12);
        s.validate().unwrap();
    }
}
