use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use twistknot::braidtrace::{BraidAnalysis, WindingTrace};
use twistknot::circuit::{k_grid, tracked_bands, Outcome};
use twistknot::knots::{alexander, burau, classify_link, jones, kauffman_bracket};
use twistknot::pipeline::{run, run_spectral, RunResult, Topology};
use twistknot::twister::{
    analytic_spectrum_2band, analytic_spectrum_4band, boundary_values_2band, boundary_values_4band, phase_region_2band,
    phase_region_4band, torus_embedding, torus_link_components, PhaseRegion, TwisterError, BOUNDARY_NAMES_2BAND,
    BOUNDARY_NAMES_4BAND,
};
use twistknot::{BraidWord, C64};

use crate::config::{ModelKind, RunManifest, Settings};
use crate::error::CliError;
use crate::svg::{color, Chart, Series};

/// Output directory plus the names of the files written so far.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn text(&mut self, name: &str, content: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, content).map_err(CliError::io(&path))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn toml<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let text = toml::to_string(value).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
        self.text(name, &text)
    }

    pub fn csv(
        &mut self,
        name: &str,
        header: &[String],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let csv_err = |e: csv::Error| CliError::Io { path: path.clone(), source: std::io::Error::other(e) };
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(CliError::io(&path))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<PathBuf, CliError> {
        manifest.outputs = self.written;
        manifest.write(&self.dir)
    }
}

fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn f(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Route {
    /// Simulated circuits and reconstructed eigenstates.
    Quantum,
    /// Exact diagonalisation.
    Spectral,
}

pub fn spectrum(settings: &Settings, out: &mut Outputs) -> Result<String, CliError> {
    let grid = k_grid(settings.k_points);
    let bands = tracked_bands(&settings.spec, &grid).map_err(twistknot::pipeline::PipelineError::from)?;
    let mut rows = Vec::new();
    for (m, (&k, dec)) in grid.iter().zip(&bands).enumerate() {
        let analytic: Option<Vec<C64>> = settings.concrete().map(|(m0, m1)| match settings.model {
            ModelKind::TwoBand => analytic_spectrum_2band(m0, m1, k).to_vec(),
            _ => analytic_spectrum_4band(m0, m1, k).to_vec(),
        });
        let matched = analytic.map(|a| match_nearest(&dec.eigenvalues, &a));
        for (b, e) in dec.eigenvalues.iter().enumerate() {
            let (are, aim) = match &matched {
                Some(a) => (f(a[b].re), f(a[b].im)),
                None => (String::new(), String::new()),
            };
            rows.push(vec![m.to_string(), f(k), b.to_string(), f(e.re), f(e.im), are, aim]);
        }
    }
    let n_rows = rows.len();
    out.csv("spectrum.csv", &header(&["k_index", "k", "band", "re", "im", "analytic_re", "analytic_im"]), rows)?;
    Ok(format!("{} bands x {} k-points ({n_rows} rows)", settings.spec.n_bands, grid.len()))
}

/// Reorders `candidates` so entry `b` is the one closest to `reference[b]`.
fn match_nearest(reference: &[C64], candidates: &[C64]) -> Vec<C64> {
    let mut used = vec![false; candidates.len()];
    reference
        .iter()
        .map(|r| {
            let (j, _) = candidates
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .min_by(|a, b| (a.1 - r).norm().total_cmp(&(b.1 - r).norm()))
                .expect("equal lengths");
            used[j] = true;
            candidates[j]
        })
        .collect()
}

#[derive(Debug, Serialize)]
struct TopologySummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<String>,
    route: String,
    word: String,
    reduced_word: String,
    strands: usize,
    writhe: i64,
    components: usize,
    alexander: String,
    jones: String,
    trajectory_source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    min_fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    median_infidelity: Option<f64>,
    crossings: usize,
    tangential_touches: usize,
    permutation: Vec<usize>,
    winding_max_deviation: f64,
    winding_end: Vec<Vec<f64>>,
    winding_matrix: Vec<Vec<f64>>,
}

fn summary(topology: &Topology, route: Route, result: Option<&RunResult>) -> TopologySummary {
    let word = topology.word();
    TopologySummary {
        class: topology.class.map(|c| c.name().to_string()),
        route: format!("{route:?}").to_lowercase(),
        word: word.to_string(),
        reduced_word: topology.reduced_word.to_string(),
        strands: word.strands(),
        writhe: word.writhe(),
        components: word.closure_components(),
        alexander: topology.alexander.to_string(),
        jones: topology.jones.to_string(),
        trajectory_source: format!("{:?}", topology.source).to_lowercase(),
        min_fidelity: result.map(|r| r.min_fidelity()),
        median_infidelity: result.map(|r| r.median_infidelity()),
        crossings: topology.analysis.crossings.events.len(),
        tangential_touches: topology.analysis.crossings.tangential.len(),
        permutation: topology.permutation().mapping.clone(),
        winding_max_deviation: topology.winding.max_deviation,
        winding_end: topology.analysis.trace.end_matrix(),
        winding_matrix: topology.winding.entries.clone(),
    }
}

fn topology_for(settings: &Settings, route: Route) -> Result<(Topology, Option<RunResult>), CliError> {
    let cfg = settings.run_config();
    match route {
        Route::Quantum => {
            let result = run(&cfg)?;
            Ok((result.topology.clone(), Some(result)))
        }
        Route::Spectral => Ok((run_spectral(&cfg)?, None)),
    }
}

fn winding_rows(trace: &WindingTrace) -> (Vec<String>, Vec<Vec<String>>) {
    let mut head = vec!["k".to_string()];
    head.extend(trace.pairs.iter().map(|p| format!("W{}{}", p.i, p.j)));
    let rows = trace
        .k_grid
        .iter()
        .enumerate()
        .map(|(m, &k)| std::iter::once(f(k)).chain(trace.pairs.iter().map(|p| f(p.values[m]))).collect())
        .collect();
    (head, rows)
}

fn write_analysis(analysis: &BraidAnalysis, out: &mut Outputs) -> Result<(), CliError> {
    let (head, rows) = winding_rows(&analysis.shifted);
    out.csv("winding.csv", &head, rows)?;
    let (head, rows) = winding_rows(&analysis.trace);
    out.csv("winding_raw.csv", &head, rows)?;
    let rows = analysis
        .crossings
        .events
        .iter()
        .map(|c| vec![f(c.k), c.i.to_string(), c.j.to_string(), c.r.to_string(), f(c.level())]);
    out.csv("crossings.csv", &header(&["k", "i", "j", "r", "level"]), rows)?;
    Ok(())
}

fn write_trajectories(topology: &Topology, out: &mut Outputs) -> Result<(), CliError> {
    let t = &topology.trajectories;
    let rows = t.lambda.iter().enumerate().flat_map(|(b, series)| {
        series
            .iter()
            .enumerate()
            .map(move |(m, z)| vec![b.to_string(), m.to_string(), f(t.k_grid[m]), f(z.re), f(z.im)])
    });
    out.csv("trajectories.csv", &header(&["band", "k_index", "k", "re", "im"]), rows.collect::<Vec<_>>())?;
    Ok(())
}

fn write_run(result: &RunResult, out: &mut Outputs) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for r in &result.records {
        let common = [
            r.k_index.to_string(),
            f(r.k),
            r.band.to_string(),
            r.setting.label(),
            format!("{:?}", r.method).to_lowercase(),
            f(r.lambda),
            f(r.selection_overlap),
            f(r.discarded_fraction),
        ];
        match &r.outcome {
            Outcome::Exact { probabilities } => {
                for (bits, p) in probabilities {
                    let mut row = common.to_vec();
                    row.extend([bits.clone(), f(*p), String::new()]);
                    rows.push(row);
                }
            }
            Outcome::Sampled { counts, .. } => {
                let retained: u64 = counts.values().sum();
                for (bits, c) in counts {
                    let mut row = common.to_vec();
                    row.extend([bits.clone(), f(*c as f64 / retained.max(1) as f64), c.to_string()]);
                    rows.push(row);
                }
            }
        }
    }
    let head = header(&[
        "k_index",
        "k",
        "band",
        "setting",
        "method",
        "lambda",
        "selection_overlap",
        "discarded_fraction",
        "bitstring",
        "probability",
        "count",
    ]);
    out.csv("records.csv", &head, rows)?;

    let n = result.config.spec.n_bands;
    let mut head = header(&["band", "k_index", "k"]);
    for c in 0..n {
        head.push(format!("re{c}"));
        head.push(format!("im{c}"));
    }
    head.extend(header(&["fidelity", "degenerate_phase", "empty_sector", "clamped"]));
    let mut rows = Vec::new();
    for (b, series) in result.states.iter().enumerate() {
        for (m, s) in series.iter().enumerate() {
            let mut row = vec![b.to_string(), m.to_string(), f(s.k)];
            for a in &s.amplitudes {
                row.push(f(a.re));
                row.push(f(a.im));
            }
            row.push(f(result.fidelity[b][m]));
            row.extend([s.flags.degenerate_phase, s.flags.empty_sector, s.flags.clamped].map(|x| x.to_string()));
            rows.push(row);
        }
    }
    out.csv("states.csv", &head, rows)?;
    Ok(())
}

fn one_line(s: &TopologySummary) -> String {
    let word = if s.word.is_empty() { "(empty)" } else { &s.word };
    format!(
        "word {word}; class {}; Jones {}; Alexander {}",
        s.class.as_deref().unwrap_or("unclassified"),
        s.jones,
        s.alexander
    )
}

pub fn simulate(settings: &Settings, out: &mut Outputs) -> Result<String, CliError> {
    let result = run(&settings.run_config())?;
    write_run(&result, out)?;
    write_trajectories(&result.topology, out)?;
    write_analysis(&result.topology.analysis, out)?;
    let s = summary(&result.topology, Route::Quantum, Some(&result));
    out.toml("summary.toml", &s)?;
    Ok(format!("{}; min fidelity {:.6}", one_line(&s), result.min_fidelity()))
}

pub fn winding(settings: &Settings, route: Route, out: &mut Outputs) -> Result<String, CliError> {
    let (topology, result) = topology_for(settings, route)?;
    write_trajectories(&topology, out)?;
    write_analysis(&topology.analysis, out)?;
    let s = summary(&topology, route, result.as_ref());
    out.toml("summary.toml", &s)?;
    let ends: Vec<String> = topology
        .analysis
        .trace
        .pairs
        .iter()
        .map(|p| format!("W{}{}={:.4}", p.i, p.j, p.values.last().unwrap_or(&0.0)))
        .collect();
    Ok(format!("{}; 𝒲 max deviation {:.2e}", ends.join(" "), topology.winding.max_deviation))
}

pub fn braid(settings: &Settings, route: Route, out: &mut Outputs) -> Result<String, CliError> {
    let (topology, result) = topology_for(settings, route)?;
    write_analysis(&topology.analysis, out)?;
    let s = summary(&topology, route, result.as_ref());
    out.toml("summary.toml", &s)?;
    Ok(one_line(&s))
}

#[derive(Debug, Serialize)]
struct InvariantReport {
    word: String,
    strands: usize,
    writhe: i64,
    components: usize,
    alexander: String,
    jones: String,
    kauffman_bracket: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<String>,
    burau: Vec<Vec<String>>,
}

pub fn invariants(
    settings: &Settings,
    word: Option<&str>,
    strands: Option<usize>,
    route: Route,
    out: &mut Outputs,
) -> Result<String, CliError> {
    let (word, class) = match word {
        Some(text) => {
            let n = strands.unwrap_or(settings.spec.n_bands);
            let w = BraidWord::parse(text, n).map_err(|e| CliError::Config(format!("--word: {e}")))?;
            let class = classify_link(&w, None).ok();
            (w, class)
        }
        None => {
            let (topology, _) = topology_for(settings, route)?;
            (topology.reduced_word.clone(), topology.class)
        }
    };
    let b = burau(&word);
    let dim = b.dim();
    let report = InvariantReport {
        word: word.to_string(),
        strands: word.strands(),
        writhe: word.writhe(),
        components: word.closure_components(),
        alexander: alexander(&word)?.to_string(),
        jones: jones(&word)?.to_string(),
        kauffman_bracket: kauffman_bracket(&word)?.to_a_string(),
        class: class.map(|c| c.name().to_string()),
        burau: (0..dim).map(|i| (0..dim).map(|j| b.get(i, j).to_string()).collect()).collect(),
    };
    out.toml("invariants.toml", &report)?;
    Ok(format!(
        "word {}; writhe {}; Alexander {}; Jones {}; class {}",
        if report.word.is_empty() { "(empty)" } else { &report.word },
        report.writhe,
        report.alexander,
        report.jones,
        report.class.as_deref().unwrap_or("unclassified")
    ))
}

type BoundaryFn = fn(f64, f64) -> Vec<Option<f64>>;
type RegionFn = fn(f64, f64) -> Result<PhaseRegion, TwisterError>;

pub const BOUNDARY_LABEL: &str = "boundary";
pub const UNLABELLED: &str = "unlabelled";

pub fn phase_diagram(
    model: ModelKind,
    lo: f64,
    hi: f64,
    resolution: usize,
    out: &mut Outputs,
) -> Result<String, CliError> {
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) || resolution == 0 {
        return Err(CliError::Config(format!("bad window [{lo}, {hi}] or resolution {resolution}")));
    }
    let (values, names, classify): (BoundaryFn, &[&str], RegionFn) = match model {
        ModelKind::TwoBand => (boundary_values_2band, &BOUNDARY_NAMES_2BAND, phase_region_2band),
        ModelKind::FourBand => (boundary_values_4band, &BOUNDARY_NAMES_4BAND, phase_region_4band),
        ModelKind::Custom => return Err(CliError::Config("phase-diagram needs --model 2band or 4band".into())),
    };
    let step = (hi - lo) / resolution as f64;
    let corner = |i: usize, j: usize| values(lo + i as f64 * step, lo + j as f64 * step);
    let corners: Vec<Vec<Vec<Option<f64>>>> =
        (0..=resolution).map(|i| (0..=resolution).map(|j| corner(i, j)).collect()).collect();
    let mut rows = Vec::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for i in 0..resolution {
        for j in 0..resolution {
            let (m0, m1) = (lo + (i as f64 + 0.5) * step, lo + (j as f64 + 0.5) * step);
            let quad = [&corners[i][j], &corners[i + 1][j], &corners[i][j + 1], &corners[i + 1][j + 1]];
            let crosses = (0..names.len()).any(|b| {
                let vals: Option<Vec<f64>> = quad.iter().map(|c| c[b]).collect();
                vals.is_some_and(|v| v.iter().any(|x| *x > 0.0) && v.iter().any(|x| *x <= 0.0))
            });
            let label = if crosses {
                BOUNDARY_LABEL.to_string()
            } else {
                match classify(m0, m1) {
                    Ok(region) => region.label.name().to_string(),
                    Err(TwisterError::OnBoundary { .. } | TwisterError::DegeneratePoint { .. }) => {
                        BOUNDARY_LABEL.to_string()
                    }
                    Err(TwisterError::NoAnchor { .. }) => UNLABELLED.to_string(),
                    Err(e) => return Err(e.into()),
                }
            };
            *counts.entry(label.clone()).or_default() += 1;
            rows.push(vec![i.to_string(), j.to_string(), f(m0), f(m1), label]);
        }
    }
    out.csv("phase_diagram.csv", &header(&["i", "j", "m0", "m1", "label"]), rows)?;

    let mut segments = Vec::new();
    for (b, name) in names.iter().enumerate() {
        let mut id = 0usize;
        for i in 0..resolution {
            for j in 0..resolution {
                let p = |di: usize, dj: usize| {
                    corners[i + di][j + dj][b].map(|v| (lo + (i + di) as f64 * step, lo + (j + dj) as f64 * step, v))
                };
                let (Some(a), Some(bb), Some(c), Some(d)) = (p(0, 0), p(1, 0), p(1, 1), p(0, 1)) else { continue };
                let mut hits = Vec::new();
                for (u, v) in [(a, bb), (bb, c), (c, d), (d, a)] {
                    if (u.2 > 0.0) != (v.2 > 0.0) {
                        let s = u.2 / (u.2 - v.2);
                        hits.push((u.0 + s * (v.0 - u.0), u.1 + s * (v.1 - u.1)));
                    }
                }
                for pair in hits.chunks(2).filter(|p| p.len() == 2) {
                    for pt in pair {
                        segments.push(vec![name.to_string(), id.to_string(), f(pt.0), f(pt.1)]);
                    }
                    id += 1;
                }
            }
        }
    }
    out.csv("boundaries.csv", &header(&["boundary", "segment", "m0", "m1"]), segments)?;
    let parts: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    Ok(parts.join(" "))
}

pub fn torus_export(strands: usize, twists: usize, samples: usize, out: &mut Outputs) -> Result<String, CliError> {
    if strands < 1 || twists < 1 || samples < 2 {
        return Err(CliError::Config("torus-export needs --strands, --twists ≥ 1 and --samples ≥ 2".into()));
    }
    let mut rows = Vec::new();
    for j in 0..strands {
        for s in 0..samples {
            let k = 2.0 * PI * s as f64 / (samples - 1) as f64;
            let [x, y, z] = torus_embedding(strands, twists, j, k);
            rows.push(vec![j.to_string(), f(k), f(x), f(y), f(z)]);
        }
    }
    out.csv("torus.csv", &header(&["strand", "k", "x", "y", "z"]), rows)?;
    let t = torus_link_components(twists, strands);
    Ok(format!(
        "T({twists},{strands}): {} component(s), each a ({},{}) torus knot",
        t.components, t.component_type.0, t.component_type.1
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    /// `winding.csv`: phase-shifted winding traces with crossing levels.
    Winding,
    /// `trajectories.csv`: projected strand coordinates against k.
    Braid,
    /// `torus.csv`: top view of torus-embedded strands.
    Torus,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::input(path, e))?;
    let header: Vec<String> = r.headers().map_err(|e| CliError::input(path, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(path, e))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::input(path, format!("row {}: {e}", line + 1)))?;
        if row.len() != header.len() {
            return Err(CliError::input(
                path,
                format!("row {} has {} fields, expected {}", line + 1, row.len(), header.len()),
            ));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn column(t: &Table, name: &str, path: &Path) -> Result<usize, CliError> {
    t.header.iter().position(|h| h == name).ok_or_else(|| CliError::input(path, format!("missing column `{name}`")))
}

fn infer_kind(t: &Table) -> Option<PlotKind> {
    let h: Vec<&str> = t.header.iter().map(String::as_str).collect();
    match h.as_slice() {
        ["k", rest @ ..] if rest.iter().all(|c| c.starts_with('W')) => Some(PlotKind::Winding),
        ["band", "k_index", "k", "re", "im"] => Some(PlotKind::Braid),
        ["strand", "k", "x", "y", "z"] => Some(PlotKind::Torus),
        _ => None,
    }
}

/// Groups rows by an integer id column into `(id, points)` series.
fn grouped(
    t: &Table,
    id: usize,
    x: impl Fn(&[f64]) -> f64,
    y: impl Fn(&[f64]) -> f64,
) -> Vec<(usize, Vec<(f64, f64)>)> {
    let mut groups: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for row in &t.rows {
        groups.entry(row[id] as usize).or_default().push((x(row), y(row)));
    }
    groups.into_iter().collect()
}

pub fn plot(
    input: &Path,
    kind: Option<PlotKind>,
    crossings: Option<&Path>,
    angle: f64,
    output: Option<&str>,
    out: &mut Outputs,
) -> Result<String, CliError> {
    let table = read_table(input)?;
    let kind = kind
        .or_else(|| infer_kind(&table))
        .ok_or_else(|| CliError::input(input, "cannot infer plot kind from header; pass --kind"))?;
    let chart = match kind {
        PlotKind::Winding => {
            let k = column(&table, "k", input)?;
            let series: Vec<Series> = table
                .header
                .iter()
                .enumerate()
                .filter(|(c, _)| *c != k)
                .enumerate()
                .map(|(n, (c, name))| Series {
                    label: name.replace('W', "W̃"),
                    points: table.rows.iter().map(|r| (r[k], r[c])).collect(),
                    color: color(n),
                })
                .collect();
            let ys = series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
            let (ymin, ymax) = ys.fold((0.0f64, 1.0f64), |(a, b), y| (a.min(y), b.max(y)));
            let r_lo = ((ymin - 0.25) / 0.5).floor() as i64;
            let r_hi = ((ymax - 0.25) / 0.5).ceil() as i64;
            let levels = (r_lo..=r_hi).map(|r| 0.25 + 0.5 * r as f64).collect();
            let default_crossings = input.with_file_name("crossings.csv");
            let crossing_path =
                crossings.map(Path::to_path_buf).or_else(|| default_crossings.exists().then_some(default_crossings));
            let markers = match crossing_path {
                Some(p) => {
                    let c = read_table(&p)?;
                    let (ck, cl) = (column(&c, "k", &p)?, column(&c, "level", &p)?);
                    c.rows.iter().map(|r| (r[ck], r[cl])).collect()
                }
                None => Vec::new(),
            };
            Chart {
                title: "Phase-shifted winding".into(),
                x_label: "k".into(),
                y_label: "W̃(k)".into(),
                series,
                levels,
                markers,
                equal_aspect: false,
            }
        }
        PlotKind::Braid => {
            let (b, k, re, im) = (
                column(&table, "band", input)?,
                column(&table, "k", input)?,
                column(&table, "re", input)?,
                column(&table, "im", input)?,
            );
            let (c, s) = (angle.cos(), angle.sin());
            let series = grouped(&table, b, |r| r[k], |r| c * r[re] + s * r[im])
                .into_iter()
                .map(|(id, points)| Series { label: format!("band {id}"), points, color: color(id) })
                .collect();
            Chart {
                title: "Braid diagram".into(),
                x_label: "k".into(),
                y_label: format!("Re(e^(-i·{angle:.4})Λ)"),
                series,
                ..Default::default()
            }
        }
        PlotKind::Torus => {
            let (sid, x, y) =
                (column(&table, "strand", input)?, column(&table, "x", input)?, column(&table, "y", input)?);
            let series = grouped(&table, sid, |r| r[x], |r| r[y])
                .into_iter()
                .map(|(id, points)| Series { label: format!("strand {id}"), points, color: color(id) })
                .collect();
            Chart {
                title: "Torus embedding (top view)".into(),
                x_label: "x".into(),
                y_label: "y".into(),
                series,
                equal_aspect: true,
                ..Default::default()
            }
        }
    };
    let name = match output {
        Some(n) => n.to_string(),
        None => format!("{}.svg", input.file_stem().and_then(|s| s.to_str()).unwrap_or("plot")),
    };
    let path = out.text(&name, &chart.render())?;
    Ok(format!("{:?} plot with {} series -> {}", kind, chart.series.len(), path.display()))
}
