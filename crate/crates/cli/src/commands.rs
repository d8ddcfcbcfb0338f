use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mcdicke::analysis::{line_crossings, sensitivity};
use mcdicke::ed::{locate_critical_entropy, solve_with_policy, CritEntropyOptions, CutoffPolicy, EdOptions};
use mcdicke::fluctuations::analyze;
use mcdicke::io::{self, Metadata, Table};
use mcdicke::meanfield::{
    c2_residual, landau_coefficients, ordinary_critical_residual, scan_phase_diagram, tclass_criticality_order,
    tclass_determinant, HParam, ScanAxis, ScanSpec,
};
use mcdicke::{AtomModel, Error, ModelParams, Result};
use rayon::prelude::*;

use crate::{Command, GlobalArgs};

const LOG_FILE: &str = "mcdicke.log";

pub fn parse_axis(s: &str) -> Result<ScanAxis> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || Error::InvalidArgument(format!("axis `{s}` is not `h<kk>:start:end:points`"));
    if parts.len() != 4 {
        return Err(bad());
    }
    let param: HParam = parts[0].parse().map_err(|_| bad())?;
    let start: f64 = parts[1].parse().map_err(|_| bad())?;
    let end: f64 = parts[2].parse().map_err(|_| bad())?;
    let points: usize = parts[3].parse().map_err(|_| bad())?;
    if !start.is_finite() || !end.is_finite() || points == 0 {
        return Err(bad());
    }
    Ok(ScanAxis {
        param,
        start,
        end,
        points,
    })
}

fn parse_axes(axes: &[String], max: usize) -> Result<Vec<ScanAxis>> {
    if axes.len() > max {
        return Err(Error::InvalidArgument(format!("at most {max} axes allowed here")));
    }
    axes.iter().map(|a| parse_axis(a)).collect()
}

fn parse_policy(s: &str) -> Result<CutoffPolicy> {
    if s == "auto" {
        return Ok(CutoffPolicy::Auto);
    }
    s.parse()
        .map(CutoffPolicy::Fixed)
        .map_err(|_| Error::InvalidArgument(format!("n-max must be a count or `auto`, got `{s}`")))
}

fn parse_list(s: &str, n: usize, what: &str) -> Result<Vec<f64>> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidArgument(format!("{what} `{s}` is not {n} comma-separated numbers")))?;
    if v.len() != n || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} `{s}` is not {n} comma-separated numbers")));
    }
    Ok(v)
}

/// Grid coordinates, last axis fastest.
fn grid(axes: &[ScanAxis]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for a in axes {
        out = out
            .into_iter()
            .flat_map(|c| {
                (0..a.points).map(move |i| {
                    let mut c = c.clone();
                    c.push(a.value(i));
                    c
                })
            })
            .collect();
    }
    out
}

fn model_at(model: &AtomModel, axes: &[ScanAxis], coords: &[f64]) -> AtomModel {
    axes.iter()
        .zip(coords)
        .fold(model.clone(), |m, (a, &x)| m.with_h(a.param.index(), x))
}

fn axis_names(axes: &[ScanAxis]) -> Vec<String> {
    axes.iter().map(|a| a.param.to_string()).collect()
}

fn load(g: &GlobalArgs) -> Result<(AtomModel, ModelParams)> {
    let path = g
        .model
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("--model is required".into()))?;
    let (model, params, _) = io::load_model(path)?;
    Ok((model, params))
}

fn ed_options(g: &GlobalArgs) -> EdOptions {
    let mut opts = EdOptions {
        mem_cap_mb: g.mem_cap_mb,
        ..EdOptions::default()
    };
    opts.lanczos.seed = g.seed;
    opts
}

/// Order of the first Landau coefficient above `tol`.
pub fn landau_order(model: &AtomModel, kappa: f64, tol: f64) -> Result<usize> {
    let c = landau_coefficients(model, kappa, model.levels().max(5))?;
    c.first_nonvanishing(tol)
        .ok_or_else(|| Error::InvalidArgument("every Landau coefficient vanishes; pass --order".into()))
}

struct Output<'a> {
    dir: &'a Path,
    meta: Metadata,
    files: Vec<PathBuf>,
}

impl Output<'_> {
    fn write(&mut self, stem: &str, table: &Table) -> Result<()> {
        io::write_table(self.dir, stem, table, &self.meta)?;
        self.files.push(self.dir.join(format!("{stem}.csv")));
        self.files.push(self.dir.join(format!("{stem}.json")));
        Ok(())
    }
}

fn append_log(dir: &Path, meta: &Metadata, workers: usize, files: &[PathBuf]) -> Result<()> {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join(LOG_FILE))?;
    let names: Vec<String> = files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    writeln!(
        f,
        "unix_time={secs} subcommand={} config_hash={} workers={workers} files={}",
        meta.subcommand,
        meta.config_hash,
        names.join(",")
    )?;
    Ok(())
}

pub fn run(g: &GlobalArgs, cmd: &Command, workers: usize) -> Result<Vec<PathBuf>> {
    let mut config = serde_json::json!({ "command": cmd, "seed": g.seed });
    let model_hash;
    let loaded = match cmd {
        Command::Fit { inputs } => {
            let mut hashes = Vec::new();
            for p in inputs {
                hashes.push(io::sha256_hex(&std::fs::read(p).map_err(|e| {
                    Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
                })?));
            }
            config["input_sha256"] = hashes.into();
            model_hash = None;
            None
        }
        _ => {
            let (model, params) = load(g)?;
            model_hash = Some(io::model_hash(&model, &params));
            Some((model, params))
        }
    };
    let name = config["command"]
        .as_object()
        .and_then(|o| o.keys().next().cloned())
        .unwrap_or_default();
    let mut out = Output {
        dir: &g.out,
        meta: Metadata::new(&name, &config, model_hash, g.seed),
        files: Vec::new(),
    };

    match (cmd, loaded) {
        (Command::Fit { inputs }, _) => fit(inputs, &mut out)?,
        (cmd, Some((model, params))) => match cmd {
            Command::MfScan { axes, jump_threshold } => mf_scan(&model, &params, axes, *jump_threshold, g, &mut out)?,
            Command::CritCheck { max_order, tol } => crit_check(&model, &params, *max_order, *tol, &mut out)?,
            Command::Fluct { axes, atoms } => fluct(&model, &params, axes, *atoms, &mut out)?,
            Command::Ed {
                atoms,
                n_max,
                axes,
                observables,
            } => ed(&model, &params, atoms, n_max, axes, observables, g, &mut out)?,
            Command::CritEntropy {
                atoms,
                bracket,
                lo_rule,
                param,
                prescan,
                tol,
                n_max,
                order,
            } => {
                let crit = CritEntropyOptions {
                    param: param.parse().map_err(|e: Error| e)?,
                    prescan_points: *prescan,
                    tol: *tol,
                    policy: parse_policy(n_max)?,
                };
                let bracket = parse_list(bracket, 2, "bracket")?;
                let rule = lo_rule.as_deref().map(|r| parse_list(r, 3, "lo-rule")).transpose()?;
                crit_entropy(&model, &params, atoms, (bracket[0], bracket[1]), rule, &crit, *order, param, g, &mut out)?
            }
            Command::Fit { .. } => unreachable!(),
        },
        (_, None) => unreachable!("every subcommand but fit loads a model"),
    }
    append_log(out.dir, &out.meta, workers, &out.files)?;
    Ok(out.files)
}

fn mf_scan(
    model: &AtomModel,
    params: &ModelParams,
    axes: &[String],
    jump_threshold: f64,
    g: &GlobalArgs,
    out: &mut Output,
) -> Result<()> {
    let mut spec = ScanSpec::new(parse_axes(axes, 3)?);
    spec.mem_cap_mb = g.mem_cap_mb;
    spec.crossing.jump_threshold = jump_threshold;
    let scan = scan_phase_diagram(model, params.kappa(), &spec)?;
    out.write("mf_scan", &io::scan_table(&scan))?;
    if scan.axes.len() == 1 {
        let crossings = line_crossings(&scan)?;
        out.write("mf_scan_crossings", &io::line_crossing_table(&scan, &crossings))?;
    }
    if let Some((crossings, segments)) = io::boundary_tables(&scan) {
        out.write("mf_scan_crossings", &crossings)?;
        out.write("mf_scan_segments", &segments)?;
    }
    Ok(())
}

fn crit_check(model: &AtomModel, params: &ModelParams, max_order: usize, tol: f64, out: &mut Output) -> Result<()> {
    let kappa = params.kappa();
    let mut t = Table::new(["quantity", "value"]);
    let mut put = |k: &str, v: String| t.push(vec![k.to_string(), v]);
    put("levels", model.levels().to_string());
    put("kappa", io::fmt_f64(kappa));
    put("ordinary_residual", io::fmt_f64(ordinary_critical_residual(model, kappa)));
    put("c2_residual", io::fmt_f64(c2_residual(model, kappa)));
    match model.as_tclass() {
        Some(tc) => {
            put("tclass_order", tclass_criticality_order(&tc, kappa, tol).to_string());
            let z = tclass_determinant(&tc, kappa, 1.0);
            put("zeta_lowest_power", z.lowest_power.map(|p| p.to_string()).unwrap_or_default());
        }
        None => {
            put("tclass_order", "skipped".into());
            put("zeta_lowest_power", "skipped".into());
        }
    }
    let c = landau_coefficients(model, kappa, max_order.max(1))?;
    for (k, ck) in c.c.iter().enumerate().skip(1) {
        put(&format!("c{k}"), io::fmt_f64(*ck));
    }
    put(
        "landau_order",
        c.first_nonvanishing(tol).map(|n| n.to_string()).unwrap_or_default(),
    );
    for r in &t.rows {
        println!("{} = {}", r[0], r[1]);
    }
    out.write("crit_check", &t)
}

fn fluct(model: &AtomModel, params: &ModelParams, axes: &[String], atoms: Option<f64>, out: &mut Output) -> Result<()> {
    let axes = parse_axes(axes, 2)?;
    let points = grid(&axes);
    let rows: Vec<Vec<String>> = points
        .par_iter()
        .map(|c| {
            let (input, spec) = analyze(&model_at(model, &axes, c), params)?;
            Ok(io::fluct_row(c, &input, &spec, atoms))
        })
        .collect::<Result<_>>()?;
    let mut t = Table::new(io::fluct_header(&axis_names(&axes)));
    rows.into_iter().for_each(|r| t.push(r));
    out.write("fluct", &t)
}

const OBSERVABLE_COLUMNS: [(&str, &[&str]); 4] = [
    ("energy", &["e0", "e1"]),
    ("gap", &["gap"]),
    ("entropy", &["entropy"]),
    ("photons", &["photon_number"]),
];

#[allow(clippy::too_many_arguments)]
fn ed(
    model: &AtomModel,
    params: &ModelParams,
    atoms: &[usize],
    n_max: &str,
    axes: &[String],
    observables: &[String],
    g: &GlobalArgs,
    out: &mut Output,
) -> Result<()> {
    for o in observables {
        if !OBSERVABLE_COLUMNS.iter().any(|(k, _)| k == o) {
            return Err(Error::InvalidArgument(format!(
                "unknown observable `{o}` (expected energy, gap, entropy or photons)"
            )));
        }
    }
    let axes = parse_axes(axes, 1)?;
    let policy = parse_policy(n_max)?;
    let mut opts = ed_options(g);
    opts.want_gap = observables.iter().any(|o| o == "gap" || o == "energy");
    let header = io::ed_header(&axis_names(&axes));
    let hidden: Vec<usize> = OBSERVABLE_COLUMNS
        .iter()
        .filter(|(k, _)| !observables.iter().any(|o| o == k))
        .flat_map(|(_, cols)| cols.iter())
        .filter_map(|c| header.iter().position(|h| h == c))
        .collect();
    let mut t = Table::new(header);
    for &n in atoms {
        for c in grid(&axes) {
            let report = solve_with_policy(&model_at(model, &axes, &c), params, n, policy, &opts)?;
            let mut row = io::ed_row(&c, &report);
            for &i in &hidden {
                row[i].clear();
            }
            t.push(row);
        }
    }
    out.write("ed", &t)
}

#[allow(clippy::too_many_arguments)]
fn crit_entropy(
    model: &AtomModel,
    params: &ModelParams,
    atoms: &[usize],
    bracket: (f64, f64),
    lo_rule: Option<Vec<f64>>,
    crit: &CritEntropyOptions,
    order: Option<usize>,
    param: &str,
    g: &GlobalArgs,
    out: &mut Output,
) -> Result<()> {
    let order = match order {
        Some(o) => o,
        None => landau_order(model, params.kappa(), 1e-9)?,
    };
    let opts = ed_options(g);
    let mut rows = Vec::new();
    for &n in atoms {
        let lo = match &lo_rule {
            Some(r) => bracket.0.max(r[0] - r[1] * (n as f64).powf(-r[2])),
            None => bracket.0,
        };
        rows.push(locate_critical_entropy(model, params, n, (lo, bracket.1), crit, &opts)?);
    }
    out.write("crit_entropy", &io::crit_entropy_table(order, &rows, param))
}

fn fit(inputs: &[PathBuf], out: &mut Output) -> Result<()> {
    let mut by_order: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    let mut skipped = 0;
    for p in inputs {
        let t = io::read_table(p)?;
        let points = io::certified_points(&t)?;
        skipped += t.rows.len() - points.len();
        for (order, n, s) in points {
            by_order.entry(order).or_default().push((n, s));
        }
    }
    if skipped > 0 {
        eprintln!("fit: skipped {skipped} uncertified row(s)");
    }
    let mut rows = Vec::new();
    for (order, mut pts) in by_order {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows.push((order, sensitivity(&pts)?));
    }
    out.write("table1", &io::table1(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_syntax() {
        let a = parse_axis("h22:1:3:201").unwrap();
        assert_eq!(a.param.index(), 1);
        assert_eq!((a.start, a.end, a.points), (1.0, 3.0, 201));
        for bad in ["h22:1:3", "x:1:3:4", "h22:a:3:4", "h22:1:3:0"] {
            assert!(parse_axis(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn grid_is_last_axis_fastest() {
        let axes = vec![parse_axis("h22:0:1:2").unwrap(), parse_axis("h33:5:7:3").unwrap()];
        let g = grid(&axes);
        assert_eq!(g.len(), 6);
        assert_eq!(g[1], vec![0.0, 6.0]);
        assert_eq!(g[3], vec![1.0, 5.0]);
        assert_eq!(grid(&[]), vec![Vec::<f64>::new()]);
    }

    #[test]
    fn cutoff_policy() {
        assert_eq!(parse_policy("auto").unwrap(), CutoffPolicy::Auto);
        assert_eq!(parse_policy("40").unwrap(), CutoffPolicy::Fixed(40));
        assert!(parse_policy("many").is_err());
    }

    #[test]
    fn landau_order_of_reference_models() {
        for n in 2..=5 {
            let (t, p) = mcdicke::model::reference_model(n).unwrap();
            assert_eq!(landau_order(&t.to_atom_model(), p.kappa(), 1e-9).unwrap(), n);
        }
    }
}
