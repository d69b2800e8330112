use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hexperc::bounds::{decomposition_table, parse_grid, q_lower_bound, threshold_upper_bound};
use hexperc::census::{border_census_with_budget, load_or_compute, CacheOutcome, CacheStatus, CensusDocument, CensusTable};
use hexperc::clusters::ProbabilityMode;
use hexperc::connmat::{check_structure, empirical_matrix, spectral_summary, theorem4_matrix, ConnMatrix, DIM};
use hexperc::field::{check_concentration, sample_replicate, Window};
use hexperc::mc::{estimate_q, origin_cluster_histogram, QEstimate};
use serde_json::json;

use crate::error::CliError;
use crate::manifest::CacheRecord;
use crate::{BoundArgs, CacheArgs, CensusArgs, Command, DecomposeArgs, Format, MatrixArgs, McArgs};

pub struct Context {
    pub format: Format,
}

#[derive(Debug, Default)]
pub struct Output {
    pub stdout: String,
    /// Human-readable lines for stderr.
    pub notes: Vec<String>,
    pub seed: Option<u64>,
    pub caches: Vec<CacheRecord>,
    /// Default manifest location when the command writes a file.
    pub manifest_hint: Option<PathBuf>,
    /// Set when the output was produced but a check failed.
    pub failure: Option<CliError>,
}

pub fn run(cmd: &Command, ctx: &Context) -> Result<Output, CliError> {
    match cmd {
        Command::Census(a) => census(a, ctx),
        Command::Matrix(a) => matrix(a, ctx),
        Command::Bound(a) => bound(a, ctx),
        Command::Mc(a) => mc(a, ctx),
        Command::Decompose(a) => decompose(a, ctx),
    }
}

fn pretty(v: &impl serde::Serialize) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn cache_dir(a: &CacheArgs) -> Option<PathBuf> {
    if a.no_cache {
        return None;
    }
    if let Some(d) = &a.cache {
        return Some(d.clone());
    }
    if let Some(d) = std::env::var_os("HEXPERC_CACHE").filter(|d| !d.is_empty()) {
        return Some(PathBuf::from(d));
    }
    let base = std::env::var_os("XDG_CACHE_HOME")
        .filter(|d| !d.is_empty())
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| Path::new(&h).join(".cache")))?;
    Some(base.join("hexperc"))
}

fn load_census(k: usize, a: &CacheArgs, out: &mut Output) -> Result<CensusTable, CliError> {
    let (table, outcome) = load_or_compute(k, cache_dir(a).as_deref())?;
    out.notes.push(format!("census k={k}: cache {}", status_name(outcome.status)));
    out.caches.push(CacheRecord { k, outcome });
    Ok(table)
}

fn status_name(s: CacheStatus) -> &'static str {
    match s {
        CacheStatus::Hit => "hit",
        CacheStatus::Miss => "miss",
        CacheStatus::Invalid => "invalid, rebuilt",
        CacheStatus::Disabled => "disabled",
    }
}

fn census(a: &CensusArgs, ctx: &Context) -> Result<Output, CliError> {
    let k = a.max_size as usize;
    let mut out = Output::default();
    let table = match a.budget {
        Some(limit) => {
            let t = border_census_with_budget(k, Some(limit))?;
            let checksum = t.checksum();
            out.caches.push(CacheRecord { k, outcome: CacheOutcome { status: CacheStatus::Disabled, path: None, checksum } });
            t
        }
        None => load_census(k, &a.cache, &mut out)?,
    };
    let body = match ctx.format {
        Format::Csv => table.rn_csv(),
        Format::Json => pretty(&CensusDocument::from_table(&table))?,
    };
    out.notes.push(format!(
        "{} clusters, {} borders, {} with enclosed vacancies",
        table.total_clusters(),
        table.total_borders(),
        table.clusters_with_holes
    ));
    match &a.out {
        Some(path) => {
            fs::write(path, body)?;
            let mut hint = path.clone().into_os_string();
            hint.push(".manifest.json");
            out.manifest_hint = Some(hint.into());
        }
        None => out.stdout = body,
    }
    Ok(out)
}

fn read_matrix(path: &Path) -> Result<ConnMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let bad = |m: String| CliError::Usage(format!("{}: {m}", path.display()));
    let rows: Vec<Vec<u8>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && l.starts_with(|c: char| c.is_ascii_digit()))
        .map(|l| l.split(',').map(|x| x.trim().parse::<u8>().map_err(|e| bad(format!("{x:?}: {e}")))).collect())
        .collect::<Result<_, _>>()?;
    if rows.len() != DIM || rows.iter().any(|r| r.len() != DIM) {
        return Err(bad(format!("expected {DIM} rows of {DIM} entries")));
    }
    let mut entries = [[0u8; DIM]; DIM];
    for (dst, src) in entries.iter_mut().zip(&rows) {
        dst.copy_from_slice(src);
    }
    ConnMatrix::from_entries(entries).map_err(|e| bad(e.to_string()))
}

fn matrix(a: &MatrixArgs, ctx: &Context) -> Result<Output, CliError> {
    let mut out = Output::default();
    let m = match &a.input {
        Some(p) => read_matrix(p)?,
        None => theorem4_matrix(),
    };
    let report = check_structure(&m);
    let passed = report.checks.iter().filter(|c| c.passed).count();
    out.notes.push(format!("n_star={}", m.n_star()));
    out.notes.push(format!("structure checks: {passed}/{} passed", report.checks.len()));
    if !report.all_passed() {
        out.failure = Some(CliError::Internal(format!("structure checks failed: {}", report.failures().join(", "))));
    }
    let spectral = if report.all_passed() { Some(spectral_summary(&m)?) } else { None };

    let empirical = match a.verify_empirical {
        Some(k) => {
            let table = load_census(k as usize, &a.cache, &mut out)?;
            let cmp = empirical_matrix(table.witnessed_pairs.iter().copied()).compare(&m);
            let verdict = match (cmp.consistent(), cmp.complete()) {
                (true, true) => "no contradictions; all one-entries witnessed".to_string(),
                (true, false) => format!("no contradictions; {} one-entries not yet witnessed", cmp.unwitnessed.len()),
                (false, _) => format!("{} witnessed pairs contradict zero entries", cmp.contradictions.len()),
            };
            out.notes.push(format!("empirical k={k}: {verdict}"));
            if !cmp.consistent() && out.failure.is_none() {
                out.failure = Some(CliError::Internal(format!("empirical cross-check at k={k}: {verdict}")));
            }
            Some(json!({
                "k": k,
                "consistent": cmp.consistent(),
                "complete": cmp.complete(),
                "contradictions": cmp.contradictions,
                "unwitnessed": cmp.unwitnessed,
            }))
        }
        None => None,
    };

    out.stdout = match ctx.format {
        Format::Csv => {
            let mut s = String::from("i");
            for j in 1..=DIM {
                write!(s, ",{j}").unwrap();
            }
            s.push_str(",row_sum\n");
            for (i, (row, sum)) in m.entries().iter().zip(m.row_sums()).enumerate() {
                write!(s, "{}", i + 1).unwrap();
                for x in row {
                    write!(s, ",{x}").unwrap();
                }
                writeln!(s, ",{sum}").unwrap();
            }
            s
        }
        Format::Json => pretty(&json!({
            "matrix": m,
            "F": m.f(),
            "G": m.g(),
            "H": m.h(),
            "row_sums": m.row_sums(),
            "n_star": m.n_star(),
            "structure": report,
            "spectral": spectral,
            "empirical": empirical,
        }))?,
    };
    Ok(out)
}

fn bound(a: &BoundArgs, ctx: &Context) -> Result<Output, CliError> {
    let mut out = Output::default();
    let m = theorem4_matrix();
    let summary = spectral_summary(&m)?;
    let c_star = threshold_upper_bound(summary.lambda0)?;
    let head = format!("lambda0={}, c_star_upper={}", summary.lambda0, c_star);
    let rows = match &a.c_grid {
        Some(spec) if !a.threshold_only => parse_grid(spec)?
            .into_iter()
            .map(|c| q_lower_bound(c, summary.lambda0, m.n_star(), a.c_constant, a.truncation))
            .collect::<Result<Vec<_>, _>>()?,
        _ => Vec::new(),
    };
    if a.threshold_only {
        out.stdout = match ctx.format {
            Format::Csv => format!("lambda0,c_star_upper\n{},{}\n", summary.lambda0, c_star),
            Format::Json => pretty(&json!({
                "lambda0": summary.lambda0,
                "c_star_upper": c_star,
                "n_star": summary.n_star,
                "char_poly": summary.char_poly,
                "roots": summary.roots,
            }))?,
        };
        return Ok(out);
    }
    out.notes.push(head);
    let invalid = rows.iter().filter(|r| !r.valid).count();
    if invalid > 0 {
        out.notes.push(format!("{invalid} of {} grid points have (1 - c) lambda0 >= 1", rows.len()));
    }
    out.stdout = match ctx.format {
        Format::Csv => {
            let mut s = format!("{}\n", hexperc::bounds::BoundReport::CSV_HEADER);
            for r in &rows {
                s.push_str(&r.csv_row());
                s.push('\n');
            }
            s
        }
        Format::Json => pretty(&json!({
            "lambda0": summary.lambda0,
            "c_star_upper": c_star,
            "n_star": m.n_star(),
            "C": a.c_constant,
            "rows": rows,
        }))?,
    };
    Ok(out)
}

fn concentrations(spec: &str) -> Result<Vec<f64>, CliError> {
    if spec.contains(':') {
        return Ok(parse_grid(spec)?);
    }
    let c: f64 = spec.trim().parse().map_err(|_| CliError::Usage(format!("bad concentration {spec:?}")))?;
    Ok(vec![check_concentration(c)?])
}

fn mc(a: &McArgs, ctx: &Context) -> Result<Output, CliError> {
    let mut out = Output { seed: Some(a.seed), ..Output::default() };
    let grid = concentrations(&a.c)?;
    if let Some(path) = &a.save_config {
        let conf = sample_replicate(Window::new(a.l)?, grid[0], a.seed, 0)?;
        fs::write(path, pretty(&conf.to_document())?)?;
    }
    match a.histogram {
        None => {
            let rows: Vec<QEstimate> =
                grid.iter().map(|&c| estimate_q(c, a.l, a.trials, a.seed)).collect::<Result<_, _>>()?;
            out.stdout = match ctx.format {
                Format::Csv => {
                    let mut s = format!("{}\n", QEstimate::CSV_HEADER);
                    for r in &rows {
                        s.push_str(&r.csv_row());
                        s.push('\n');
                    }
                    s
                }
                Format::Json => pretty(&rows)?,
            };
        }
        Some(k) => {
            let hists = grid
                .iter()
                .map(|&c| origin_cluster_histogram(c, a.l, a.trials, a.seed, k))
                .collect::<Result<Vec<_>, _>>()?;
            out.stdout = match ctx.format {
                Format::Csv => {
                    let mut s = String::from("c,L,trials,seed,size,count,frequency\n");
                    for h in &hists {
                        let pre = format!("{},{},{},{}", h.c, h.l, h.trials, h.seed);
                        for (size, &n) in h.counts.iter().enumerate() {
                            writeln!(s, "{pre},{size},{n},{}", h.frequency(size)).unwrap();
                        }
                        writeln!(s, "{pre},>{},{},{}", h.k, h.overflow, h.overflow_frequency()).unwrap();
                    }
                    s
                }
                Format::Json => pretty(&hists)?,
            };
        }
    }
    Ok(out)
}

fn decompose(a: &DecomposeArgs, ctx: &Context) -> Result<Output, CliError> {
    let mut out = Output::default();
    let mode: ProbabilityMode = a.mode.parse().map_err(CliError::Usage)?;
    if check_concentration(a.c)? >= 1.0 {
        return Err(CliError::Usage("the decomposition needs c < 1".into()));
    }
    let k = a.max_size as usize;
    let table = load_census(k, &a.cache, &mut out)?;
    let rows = decomposition_table(a.c, mode, &table)?;
    if mode == ProbabilityMode::Paper {
        if let Some(r) = rows.iter().find(|r| r.partial_sum > 1.0) {
            out.notes.push(format!("paper-mode partial sum exceeds 1 from k={}", r.k));
        }
    }
    out.stdout = match ctx.format {
        Format::Csv => {
            let mut s = String::from("k,partial_sum,gap\n");
            for r in &rows {
                writeln!(s, "{},{},{}", r.k, r.partial_sum, r.gap).unwrap();
            }
            s
        }
        Format::Json => pretty(&json!({ "c": a.c, "mode": mode, "max_size": k, "rows": rows }))?,
    };
    Ok(out)
}
