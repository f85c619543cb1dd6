//! Output files and their readers.
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64`. Every CSV has a header row; empty cells mean "not defined".
//!
//! | file | columns |
//! |---|---|
//! | `report.txt` | `key=value` lines, see [`report_text`] |
//! | `qq.csv` | `theoretical,empirical` |
//! | `samples.csv` | `replication,t,field,oracle` |
//! | `convergence.csv` | `r,t,R,S,R_err,S_err` |
//! | `limit_paths.csv`, `limit_covariance.csv` | header row of `t`, then one row per path (or kernel row) |
//! | `density.csv` | `lambda,density` |
//! | `covariance.csv` | `lag,value,error,empirical,stderr` |
//! | `field.csv` | `x1,..,xn,value` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{ConvergenceTable, ExperimentReport};
use crate::stats::KsResult;

pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

fn csv(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Deterministic `key=value` summary of an experiment. Per-`t` keys are
/// prefixed `t<k>.` with `k` the grid index. Wall-clock time is left out so
/// that reruns compare equal.
pub fn report_text(rep: &ExperimentReport) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}={v}");
    };
    kv("n", rep.n.to_string());
    kv("j", rep.j.to_string());
    kv("r", num(rep.r));
    kv("replications", rep.replications.to_string());
    kv("frequencies", rep.frequencies.to_string());
    kv("seed", rep.seed.to_string());
    kv("integration", rep.integration.name().to_string());
    kv("degenerate", rep.degenerate.to_string());
    kv("t_grid", rep.t_grid.iter().map(|&t| num(t)).collect::<Vec<_>>().join(","));
    let ks = |k: &Option<KsResult>| (opt(k.map(|k| k.statistic)), opt(k.map(|k| k.p_value)));
    for (k, ts) in rep.per_t.iter().enumerate() {
        let p = format!("t{k}.");
        kv(&format!("{p}t"), num(ts.t));
        kv(&format!("{p}mean"), num(ts.field.mean));
        kv(&format!("{p}mean_stderr"), num(ts.field.mean_stderr));
        kv(&format!("{p}variance"), num(ts.field.variance));
        kv(&format!("{p}variance_stderr"), num(ts.field.variance_stderr));
        kv(&format!("{p}oracle_variance"), num(ts.oracle_variance.value));
        kv(&format!("{p}oracle_variance_error"), num(ts.oracle_variance.error));
        kv(&format!("{p}limit_variance"), num(ts.limit_variance));
        let (d, pv) = ks(&ts.ks);
        kv(&format!("{p}ks_statistic"), d);
        kv(&format!("{p}ks_p_value"), pv);
        kv(&format!("{p}oracle_path_variance"), num(ts.oracle.variance));
        let (d, pv) = ks(&ts.oracle_ks);
        kv(&format!("{p}oracle_path_ks_statistic"), d);
        kv(&format!("{p}oracle_path_ks_p_value"), pv);
    }
    if let Some(c) = &rep.convergence {
        kv("convergence_rows", c.rows.len().to_string());
        kv("convergence_decreasing", c.decreasing().map(|b| b.to_string()).unwrap_or_default());
    }
    s
}

pub fn parse_report(text: &str) -> Result<BTreeMap<String, String>> {
    text.lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .ok_or_else(|| Error::Config(format!("malformed report line '{l}'")))
        })
        .collect()
}

pub fn qq_csv(points: &[(f64, f64)]) -> String {
    csv(&strings(&["theoretical", "empirical"]), points.iter().map(|&(a, b)| vec![num(a), num(b)]))
}

pub fn samples_csv(rep: &ExperimentReport) -> String {
    let rows = rep.samples.iter().zip(&rep.oracle_samples).enumerate().flat_map(|(i, (f, o))| {
        rep.t_grid.iter().enumerate().map(move |(k, &t)| vec![i.to_string(), num(t), num(f[k]), num(o[k])])
    });
    csv(&strings(&["replication", "t", "field", "oracle"]), rows)
}

pub fn convergence_csv(table: &ConvergenceTable) -> String {
    csv(
        &strings(&["r", "t", "R", "S", "R_err", "S_err"]),
        table.rows.iter().map(|row| {
            vec![
                num(row.r),
                num(row.t),
                num(row.r_value.value),
                opt(row.s_value.map(|s| s.value)),
                num(row.r_value.error),
                opt(row.s_value.map(|s| s.error)),
            ]
        }),
    )
}

/// Header row of `t`, then one row per path.
pub fn grid_csv(t_grid: &[f64], rows: &[Vec<f64>]) -> String {
    csv(
        &t_grid.iter().map(|&t| num(t)).collect::<Vec<_>>(),
        rows.iter().map(|r| r.iter().map(|&x| num(x)).collect()),
    )
}

/// Columns given by `header`, cells by `rows`; `None` is written empty.
pub fn table_csv(header: &[&str], rows: &[Vec<Option<f64>>]) -> String {
    csv(&strings(header), rows.iter().map(|r| r.iter().map(|&x| opt(x)).collect()))
}

/// A parsed CSV: header and rows of optional numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Config("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != header.len() {
                return Err(Error::Config(format!("CSV row {} has {} cells, header has {}", i + 1, cells.len(), header.len())));
            }
            cells
                .into_iter()
                .map(|c| {
                    if c.is_empty() {
                        Ok(None)
                    } else {
                        c.parse::<f64>().map(Some).map_err(|_| Error::Config(format!("bad number '{c}' in CSV row {}", i + 1)))
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(Table { header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run_experiment, ExperimentConfig, Integration};
    use crate::models::preset;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 1e22, 0.0, -0.0, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn experiment_files_round_trip() {
        let p = preset("line-seasonal").unwrap();
        let mut cfg = ExperimentConfig::new(p.model, p.weight);
        cfg.replications = 10;
        cfg.frequencies = 64;
        cfg.integration = Integration::Exact;
        cfg.t_grid = vec![0.5, 1.0];
        cfg.ladder = vec![10.0, 100.0];
        let rep = run_experiment(&cfg).unwrap();

        let qq = parse_csv(&qq_csv(&rep.qq)).unwrap();
        assert_eq!(qq.rows.len(), 10);
        let back: Vec<(f64, f64)> = qq.rows.iter().map(|r| (r[0].unwrap(), r[1].unwrap())).collect();
        assert_eq!(back, rep.qq);

        let s = parse_csv(&samples_csv(&rep)).unwrap();
        assert_eq!(s.rows.len(), 20);
        assert_eq!(s.column("field").unwrap()[3], Some(rep.samples[1][1]));

        let c = parse_csv(&convergence_csv(rep.convergence.as_ref().unwrap())).unwrap();
        assert_eq!(c.header, ["r", "t", "R", "S", "R_err", "S_err"]);
        assert_eq!(c.rows.len(), 2);
        assert!(c.rows.iter().all(|r| r[3].is_some()));

        let kv = parse_report(&report_text(&rep)).unwrap();
        assert_eq!(kv["replications"], "10");
        assert_eq!(kv["t1.variance"].parse::<f64>().unwrap(), rep.per_t[1].field.variance);
        assert_eq!(kv["convergence_rows"], "2");
    }

    #[test]
    fn grids_and_gaps() {
        let text = grid_csv(&[0.5, 1.0], &[vec![1.0, 2.0], vec![-0.25, 3.5]]);
        let t = parse_csv(&text).unwrap();
        assert_eq!(t.header, ["0.5", "1.0"]);
        assert_eq!(t.rows[1], vec![Some(-0.25), Some(3.5)]);
        let t = parse_csv(&table_csv(&["a", "b"], &[vec![Some(1.0), None]])).unwrap();
        assert_eq!(t.rows[0], vec![Some(1.0), None]);
        assert!(parse_csv("a,b\n1\n").is_err());
        assert!(parse_csv("a\nx\n").is_err());
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = std::env::temp_dir().join(format!("cyclofield-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let f = dir.join("x.csv");
        write_atomic(&f, b"a\n1\n").unwrap();
        write_atomic(&f, b"a\n2\n").unwrap();
        assert_eq!(fs::read_to_string(&f).unwrap(), "a\n2\n");
        assert!(!dir.join("x.csv.tmp").exists());
        fs::remove_dir_all(&dir).unwrap();
    }
}
