//! Run configuration: a TOML file naming the two schedule files plus grid,
//! hurdles, deadlines, seed and output directory.

use std::path::{Path, PathBuf};

use repomech::contract::Deadlines;
use repomech::schedules::{SchedulePair, ScheduleModel};
use repomech::EngineError;

const KEYS: [&str; 8] = ["demand", "supply", "grid", "kappa_mm", "kappa_rm", "seed", "out", "deadlines"];
const DEADLINE_KEYS: [&str; 4] = ["commit", "negotiate", "select", "execute"];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub demand_path: PathBuf,
    pub supply_path: PathBuf,
    pub market: SchedulePair,
    pub grid: usize,
    pub kappa_mm: f64,
    pub kappa_rm: f64,
    pub deadlines: Deadlines,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, EngineError> {
    std::fs::read_to_string(path).map_err(|e| EngineError::config(format!("cannot read {}: {e}", path.display())))
}

fn float(table: &toml::Table, key: &str, default: f64, problems: &mut Vec<String>) -> f64 {
    match table.get(key) {
        None => default,
        Some(v) => match v.as_float().or_else(|| v.as_integer().map(|i| i as f64)) {
            Some(x) if x.is_finite() && x >= 0.0 => x,
            _ => {
                problems.push(format!("`{key}`: expected a nonnegative number"));
                default
            }
        },
    }
}

fn integer(table: &toml::Table, key: &str, default: i64, problems: &mut Vec<String>) -> i64 {
    match table.get(key) {
        None => default,
        Some(v) => match v.as_integer() {
            Some(i) if i >= 0 => i,
            _ => {
                problems.push(format!("`{key}`: expected a nonnegative integer"));
                default
            }
        },
    }
}

fn load_schedule(path: &Path, label: &str, problems: &mut Vec<String>) -> Option<ScheduleModel> {
    let text = match read(path) {
        Ok(t) => t,
        Err(e) => {
            problems.push(format!("`{label}`: {}", message(&e)));
            return None;
        }
    };
    match ScheduleModel::from_toml_str(&text) {
        Ok(m) => Some(m),
        Err(EngineError::Config(list)) => {
            problems.extend(list.into_iter().map(|p| format!("{}: {p}", path.display())));
            None
        }
        Err(e) => {
            problems.push(format!("{}: {e}", path.display()));
            None
        }
    }
}

fn message(e: &EngineError) -> String {
    match e {
        EngineError::Config(list) => list.join("; "),
        other => other.to_string(),
    }
}

/// Reads and validates a run config. Schedule paths are relative to the
/// config file. Every problem found is reported together.
pub fn load_config(path: &Path) -> Result<RunConfig, EngineError> {
    let text = read(path)?;
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| EngineError::config(format!("{}: {}", path.display(), e.message())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut problems = Vec::new();
    for key in table.keys() {
        if !KEYS.contains(&key.as_str()) {
            problems.push(format!("`{key}`: unknown key"));
        }
    }
    let mut paths = Vec::new();
    for key in ["demand", "supply"] {
        match table.get(key).and_then(|v| v.as_str()) {
            Some(p) => paths.push(Some(base.join(p))),
            None => {
                problems.push(format!("`{key}`: missing schedule file path"));
                paths.push(None);
            }
        }
    }
    let grid = integer(&table, "grid", 101, &mut problems);
    if grid < 2 {
        problems.push(format!("`grid`: need at least 2 points, got {grid}"));
    }
    let kappa_mm = float(&table, "kappa_mm", 0.0, &mut problems);
    let kappa_rm = float(&table, "kappa_rm", 0.0, &mut problems);
    let seed = integer(&table, "seed", 0, &mut problems) as u64;
    let out = match table.get("out") {
        None => None,
        Some(v) => match v.as_str() {
            Some(p) => Some(base.join(p)),
            None => {
                problems.push("`out`: expected a path string".into());
                None
            }
        },
    };
    let mut deadlines = Deadlines { commit: 10, negotiate: 20, select: 30, execute: 40 };
    match table.get("deadlines") {
        None => {}
        Some(toml::Value::Table(d)) => {
            for key in d.keys() {
                if !DEADLINE_KEYS.contains(&key.as_str()) {
                    problems.push(format!("`deadlines.{key}`: unknown key"));
                }
            }
            let get = |k: &str, default: u64, problems: &mut Vec<String>| integer(d, k, default as i64, problems) as u64;
            deadlines = Deadlines {
                commit: get("commit", deadlines.commit, &mut problems),
                negotiate: get("negotiate", deadlines.negotiate, &mut problems),
                select: get("select", deadlines.select, &mut problems),
                execute: get("execute", deadlines.execute, &mut problems),
            };
        }
        Some(_) => problems.push("`deadlines`: expected a table".into()),
    }
    let demand = paths[0].as_ref().and_then(|p| load_schedule(p, "demand", &mut problems));
    let supply = paths[1].as_ref().and_then(|p| load_schedule(p, "supply", &mut problems));
    if !problems.is_empty() {
        return Err(EngineError::Config(problems));
    }
    let market = SchedulePair::new(demand.unwrap(), supply.unwrap())?;
    Ok(RunConfig {
        demand_path: paths[0].clone().unwrap(),
        supply_path: paths[1].clone().unwrap(),
        market,
        grid: grid as usize,
        kappa_mm,
        kappa_rm,
        deadlines,
        seed,
        out,
    })
}
