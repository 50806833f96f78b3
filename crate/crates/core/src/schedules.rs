//! Client demand and supply schedules.
//!
//! The money-market client lends cash against collateral according to a
//! concave increasing demand curve `D(r)`; the repo-market client borrows
//! according to a concave decreasing supply curve `S(r)`. Both live on the
//! rate interval `[0, r_b]` with `D(0) = 0` and `S(r_b) = 0`, and both can be
//! scaled by a multiplicative type shock `theta`.
//!
//! Three families are supported:
//!
//! * `sqrt`: `D = theta * a * sqrt(r)`, `S = theta * a * sqrt(r_b - r)` (the
//!   reference family; every inverse has a closed form),
//! * `quadratic-cap`: `D = theta * a * r * (2 r_b - r)`,
//!   `S = theta * a * (r_b^2 - r^2)`,
//! * `tabulated`: piecewise-linear interpolation through `(rate, volume)`
//!   knots, validated concave at load.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::numeric::{bisect, linspace};

/// Number of mesh points used to validate monotonicity and concavity.
pub const VALIDATION_MESH: usize = 1_000;

/// Slack allowed when a rate or volume lands a hair outside its domain
/// through floating-point arithmetic.
const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Demand,
    Supply,
}

/// Knots of a tabulated schedule, before the type shock is applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    rates: Vec<f64>,
    volumes: Vec<f64>,
}

impl Table {
    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.rates.iter().copied().zip(self.volumes.iter().copied())
    }

    fn segment(&self, r: f64) -> usize {
        // index of the segment [rates[k], rates[k + 1]] containing r
        let k = self.rates.partition_point(|&x| x <= r);
        k.saturating_sub(1).min(self.rates.len() - 2)
    }

    fn slope(&self, k: usize) -> f64 {
        (self.volumes[k + 1] - self.volumes[k]) / (self.rates[k + 1] - self.rates[k])
    }

    fn interpolate(&self, r: f64) -> f64 {
        let k = self.segment(r);
        self.volumes[k] + self.slope(k) * (r - self.rates[k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Sqrt,
    QuadraticCap,
    Tabulated(Table),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Sqrt => "sqrt",
            Family::QuadraticCap => "quadratic-cap",
            Family::Tabulated(_) => "tabulated",
        }
    }
}

/// A validated client schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleModel {
    side: Side,
    family: Family,
    scale: f64,
    rate_bound: f64,
    shock: f64,
}

impl ScheduleModel {
    pub fn sqrt(side: Side, scale: f64, rate_bound: f64, shock: f64) -> Result<Self> {
        Self::parametric(side, Family::Sqrt, scale, rate_bound, shock)
    }

    pub fn quadratic_cap(side: Side, scale: f64, rate_bound: f64, shock: f64) -> Result<Self> {
        Self::parametric(side, Family::QuadraticCap, scale, rate_bound, shock)
    }

    fn parametric(side: Side, family: Family, scale: f64, rate_bound: f64, shock: f64) -> Result<Self> {
        let mut problems = Vec::new();
        check_positive("a", scale, &mut problems);
        check_positive("r_b", rate_bound, &mut problems);
        check_positive("theta", shock, &mut problems);
        if !problems.is_empty() {
            return Err(EngineError::Config(problems));
        }
        let model = ScheduleModel { side, family, scale, rate_bound, shock };
        model.validate_shape()?;
        Ok(model)
    }

    /// Builds a tabulated schedule from `(rate, volume)` knots. The first
    /// knot must sit at rate 0 and the last knot's rate becomes `r_b`.
    pub fn tabulated(side: Side, knots: &[(f64, f64)], shock: f64) -> Result<Self> {
        let mut problems = Vec::new();
        check_positive("theta", shock, &mut problems);
        if knots.len() < 2 {
            problems.push("`table`: needs at least two (rate, volume) pairs".into());
            return Err(EngineError::Config(problems));
        }
        let rates: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let volumes: Vec<f64> = knots.iter().map(|k| k.1).collect();
        if rates.iter().chain(volumes.iter()).any(|v| !v.is_finite()) {
            problems.push("`table`: entries must be finite".into());
        }
        if rates[0] != 0.0 {
            problems.push("`table`: first rate must be 0".into());
        }
        if rates.windows(2).any(|w| w[1] <= w[0]) {
            problems.push("`table`: rates must be strictly increasing".into());
        }
        if volumes.iter().any(|&v| v < 0.0) {
            problems.push("`table`: volumes must be nonnegative".into());
        }
        if !problems.is_empty() {
            return Err(EngineError::Config(problems));
        }
        match side {
            Side::Demand if volumes[0] != 0.0 => {
                problems.push("`table`: demand volume at rate 0 must be 0".into())
            }
            Side::Supply if *volumes.last().unwrap() != 0.0 => {
                problems.push("`table`: supply volume at r_b must be 0".into())
            }
            _ => {}
        }
        let table = Table { rates, volumes };
        let slopes: Vec<f64> = (0..table.rates.len() - 1).map(|k| table.slope(k)).collect();
        let monotone = match side {
            Side::Demand => slopes.iter().all(|&s| s > 0.0),
            Side::Supply => slopes.iter().all(|&s| s < 0.0),
        };
        if !monotone {
            problems.push(format!(
                "`table`: {} schedule must be strictly {}",
                side_name(side),
                if side == Side::Demand { "increasing" } else { "decreasing" }
            ));
        }
        if let Some(k) = slopes.windows(2).position(|w| w[1] >= w[0]) {
            problems.push(format!(
                "`table`: not concave (slope does not decrease at knot {}, rate {})",
                k + 1,
                table.rates[k + 1]
            ));
        }
        if !problems.is_empty() {
            return Err(EngineError::Config(problems));
        }
        let rate_bound = *table.rates.last().unwrap();
        let model = ScheduleModel {
            side,
            family: Family::Tabulated(table),
            scale: 1.0,
            rate_bound,
            shock,
        };
        model.validate_shape()?;
        Ok(model)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn rate_bound(&self) -> f64 {
        self.rate_bound
    }

    pub fn shock(&self) -> f64 {
        self.shock
    }

    /// Same schedule with a different type shock.
    pub fn with_shock(&self, shock: f64) -> Result<Self> {
        if !(shock.is_finite() && shock > 0.0) {
            return Err(EngineError::config(format!("`theta`: must be positive, got {shock}")));
        }
        Ok(ScheduleModel { shock, ..self.clone() })
    }

    /// The unshocked (theta = 1) curve.
    fn baseline(&self, r: f64) -> f64 {
        let rb = self.rate_bound;
        match (&self.family, self.side) {
            (Family::Sqrt, Side::Demand) => self.scale * r.sqrt(),
            (Family::Sqrt, Side::Supply) => self.scale * (rb - r).max(0.0).sqrt(),
            (Family::QuadraticCap, Side::Demand) => self.scale * r * (2.0 * rb - r),
            (Family::QuadraticCap, Side::Supply) => self.scale * (rb * rb - r * r),
            (Family::Tabulated(t), _) => t.interpolate(r),
        }
    }

    fn clamp_rate(&self, r: f64) -> Result<f64> {
        let slack = DOMAIN_SLACK * self.rate_bound.max(1.0);
        if !(r >= -slack && r <= self.rate_bound + slack) {
            return Err(EngineError::Domain { rate: r, bound: self.rate_bound });
        }
        Ok(r.clamp(0.0, self.rate_bound))
    }

    /// Client volume at rate `r`.
    pub fn eval(&self, r: f64) -> Result<f64> {
        let r = self.clamp_rate(r)?;
        Ok(self.shock * self.baseline(r))
    }

    /// Largest volume the schedule can deliver (at `r_b` for demand, at 0
    /// for supply).
    pub fn max_volume(&self) -> f64 {
        match self.side {
            Side::Demand => self.shock * self.baseline(self.rate_bound),
            Side::Supply => self.shock * self.baseline(0.0),
        }
    }

    /// Derivative of the schedule with respect to the rate. Tabulated
    /// schedules use the slope of the segment to the right of `r` (left at
    /// `r_b`).
    pub fn slope(&self, r: f64) -> Result<f64> {
        let r = self.clamp_rate(r)?;
        let (a, rb, th) = (self.scale, self.rate_bound, self.shock);
        Ok(match (&self.family, self.side) {
            (Family::Sqrt, Side::Demand) => th * a / (2.0 * r.sqrt()),
            (Family::Sqrt, Side::Supply) => -th * a / (2.0 * (rb - r).sqrt()),
            (Family::QuadraticCap, Side::Demand) => 2.0 * th * a * (rb - r),
            (Family::QuadraticCap, Side::Supply) => -2.0 * th * a * r,
            (Family::Tabulated(t), _) => th * t.slope(t.segment(r)),
        })
    }

    fn check_volume(&self, volume: f64) -> Result<f64> {
        let max = self.max_volume();
        let slack = DOMAIN_SLACK * max.max(1.0);
        if !(volume >= -slack && volume <= max + slack) {
            return Err(EngineError::InfeasibleVolume { volume, max });
        }
        Ok(volume.clamp(0.0, max))
    }

    /// Rate at which the client trades exactly `volume`.
    pub fn inverse(&self, volume: f64) -> Result<f64> {
        let t = self.check_volume(volume)?;
        let rb = self.rate_bound;
        let u = t / (self.shock * self.scale);
        let rate = match (&self.family, self.side) {
            (Family::Sqrt, Side::Demand) => u * u,
            (Family::Sqrt, Side::Supply) => rb - u * u,
            (Family::QuadraticCap, Side::Demand) => rb - (rb * rb - u).max(0.0).sqrt(),
            (Family::QuadraticCap, Side::Supply) => (rb * rb - u).max(0.0).sqrt(),
            (Family::Tabulated(_), _) => {
                return bisect(|r| self.shock * self.baseline(r) - t, 0.0, rb);
            }
        };
        Ok(rate.clamp(0.0, rb))
    }

    /// Derivative of [`ScheduleModel::inverse`] with respect to volume.
    pub fn inverse_slope(&self, volume: f64) -> Result<f64> {
        let t = self.check_volume(volume)?;
        let (a, rb, th) = (self.scale, self.rate_bound, self.shock);
        let k = th * a;
        Ok(match (&self.family, self.side) {
            (Family::Sqrt, Side::Demand) => 2.0 * t / (k * k),
            (Family::Sqrt, Side::Supply) => -2.0 * t / (k * k),
            (Family::QuadraticCap, Side::Demand) => 1.0 / (2.0 * k * (rb * rb - t / k).sqrt()),
            (Family::QuadraticCap, Side::Supply) => -1.0 / (2.0 * k * (rb * rb - t / k).sqrt()),
            (Family::Tabulated(_), _) => 1.0 / self.slope(self.inverse(t)?)?,
        })
    }

    /// Mesh check of the declared monotonicity and concavity.
    fn validate_shape(&self) -> Result<()> {
        let mesh = linspace(0.0, self.rate_bound, VALIDATION_MESH);
        let values: Vec<f64> = mesh.iter().map(|&r| self.shock * self.baseline(r)).collect();
        let mut problems = Vec::new();
        let first: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let monotone = match self.side {
            Side::Demand => first.iter().all(|&d| d > 0.0),
            Side::Supply => first.iter().all(|&d| d < 0.0),
        };
        if !monotone {
            problems.push(format!(
                "{} schedule is not strictly {} on the validation mesh",
                side_name(self.side),
                if self.side == Side::Demand { "increasing" } else { "decreasing" }
            ));
        }
        // piecewise-linear tables are flat between knots; their strict
        // concavity is checked on the knots instead
        let strict = !matches!(self.family, Family::Tabulated(_));
        let noise = 64.0 * f64::EPSILON * values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let concave = first.windows(2).map(|w| w[1] - w[0]).all(|d2| {
            if strict {
                d2 < 0.0
            } else {
                d2 <= noise
            }
        });
        if !concave {
            problems.push(format!(
                "{} schedule is not concave on the validation mesh",
                side_name(self.side)
            ));
        }
        let endpoint = match self.side {
            Side::Demand => values[0],
            Side::Supply => *values.last().unwrap(),
        };
        if endpoint != 0.0 {
            problems.push(format!(
                "{} schedule must vanish at its zero-trade endpoint",
                side_name(self.side)
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(EngineError::Config(problems))
        }
    }

    /// Parses a schedule from structured text with keys `side`, `family`,
    /// `a`, `r_b`, `theta` and (tabulated only) `table`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| EngineError::config(format!("malformed schedule file: {}", e.message())))?;
        Self::from_toml_table(&value)
    }

    /// Like [`ScheduleModel::from_toml_str`] for an already parsed table.
    /// Every bad key is reported, not just the first.
    pub fn from_toml_table(table: &toml::Table) -> Result<Self> {
        let mut problems = Vec::new();
        for key in table.keys() {
            if !["side", "family", "a", "r_b", "theta", "table"].contains(&key.as_str()) {
                problems.push(format!("`{key}`: unknown key"));
            }
        }
        let side = match table.get("side").and_then(|v| v.as_str()) {
            Some("demand") => Some(Side::Demand),
            Some("supply") => Some(Side::Supply),
            Some(other) => {
                problems.push(format!("`side`: expected \"demand\" or \"supply\", got \"{other}\""));
                None
            }
            None => {
                problems.push("`side`: missing or not a string".into());
                None
            }
        };
        let family = table.get("family").and_then(|v| v.as_str()).unwrap_or("sqrt").to_string();
        if !["sqrt", "quadratic-cap", "tabulated"].contains(&family.as_str()) {
            problems.push(format!("`family`: unknown family \"{family}\""));
        }
        let tabulated = family == "tabulated";
        let theta = number(table, "theta", Some(1.0), &mut problems);
        let a = number(table, "a", if tabulated { Some(1.0) } else { None }, &mut problems);
        let r_b = number(table, "r_b", if tabulated { Some(f64::NAN) } else { None }, &mut problems);
        if let Some(v) = theta {
            check_positive("theta", v, &mut problems);
        }
        if let Some(v) = a {
            check_positive("a", v, &mut problems);
        }
        if let Some(v) = r_b {
            if !v.is_nan() {
                check_positive("r_b", v, &mut problems);
            }
        }
        let knots = if tabulated {
            match table.get("table") {
                Some(v) => parse_knots(v, &mut problems),
                None => {
                    problems.push("`table`: required for the tabulated family".into());
                    None
                }
            }
        } else {
            if table.contains_key("table") {
                problems.push("`table`: only valid for the tabulated family".into());
            }
            None
        };
        if !problems.is_empty() {
            return Err(EngineError::Config(problems));
        }
        let (side, theta) = (side.unwrap(), theta.unwrap());
        match family.as_str() {
            "sqrt" => ScheduleModel::sqrt(side, a.unwrap(), r_b.unwrap(), theta),
            "quadratic-cap" => ScheduleModel::quadratic_cap(side, a.unwrap(), r_b.unwrap(), theta),
            _ => {
                let knots = knots.unwrap();
                let model = ScheduleModel::tabulated(side, &knots, theta)?;
                if let Some(rb) = r_b.filter(|v| !v.is_nan()) {
                    if (rb - model.rate_bound).abs() > DOMAIN_SLACK {
                        return Err(EngineError::config(format!(
                            "`r_b`: {rb} disagrees with last table rate {}",
                            model.rate_bound
                        )));
                    }
                }
                Ok(model)
            }
        }
    }
}

fn side_name(side: Side) -> &'static str {
    match side {
        Side::Demand => "demand",
        Side::Supply => "supply",
    }
}

fn check_positive(key: &str, value: f64, problems: &mut Vec<String>) {
    if !(value.is_finite() && value > 0.0) {
        problems.push(format!("`{key}`: must be positive, got {value}"));
    }
}

fn number(table: &toml::Table, key: &str, default: Option<f64>, problems: &mut Vec<String>) -> Option<f64> {
    match table.get(key) {
        Some(toml::Value::Float(v)) => Some(*v),
        Some(toml::Value::Integer(v)) => Some(*v as f64),
        Some(_) => {
            problems.push(format!("`{key}`: expected a number"));
            None
        }
        None if default.is_some() => default,
        None => {
            problems.push(format!("`{key}`: missing"));
            None
        }
    }
}

fn parse_knots(value: &toml::Value, problems: &mut Vec<String>) -> Option<Vec<(f64, f64)>> {
    let as_f64 = |v: &toml::Value| match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(x) => Some(*x as f64),
        _ => None,
    };
    let rows = match value.as_array() {
        Some(rows) => rows,
        None => {
            problems.push("`table`: expected an array of [rate, volume] pairs".into());
            return None;
        }
    };
    let mut knots = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        match row.as_array().map(|p| p.iter().map(as_f64).collect::<Option<Vec<f64>>>()) {
            Some(Some(pair)) if pair.len() == 2 => knots.push((pair[0], pair[1])),
            _ => {
                problems.push(format!("`table`: row {i} is not a [rate, volume] pair"));
                return None;
            }
        }
    }
    Some(knots)
}

/// Strictly increasing list of trade volumes agreed before reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeGrid(Vec<f64>);

impl VolumeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(EngineError::config("volume grid is empty"));
        }
        if points[0] < 0.0 || points.iter().any(|p| !p.is_finite()) {
            return Err(EngineError::config("volume grid must be finite and nonnegative"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(EngineError::config("volume grid must be strictly increasing"));
        }
        Ok(VolumeGrid(points))
    }

    /// `count` evenly spaced volumes on `[0, t_max]`.
    pub fn uniform(t_max: f64, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(EngineError::config(format!("grid size must be at least 2, got {count}")));
        }
        Self::new(linspace(0.0, t_max, count))
    }

    pub fn points(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Volume grid with the client reservation rates at every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Discretization {
    pub grid: VolumeGrid,
    pub r_mm: Vec<f64>,
    pub r_rm: Vec<f64>,
}

/// A demand schedule (money-market side) paired with a supply schedule
/// (repo-market side) over a common rate bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulePair {
    demand: ScheduleModel,
    supply: ScheduleModel,
    crossing_rate: f64,
    max_trade: f64,
}

impl SchedulePair {
    pub fn new(demand: ScheduleModel, supply: ScheduleModel) -> Result<Self> {
        let mut problems = Vec::new();
        if demand.side != Side::Demand {
            problems.push("money-market schedule must have side = \"demand\"".to_string());
        }
        if supply.side != Side::Supply {
            problems.push("repo-market schedule must have side = \"supply\"".to_string());
        }
        if (demand.rate_bound - supply.rate_bound).abs() > DOMAIN_SLACK * demand.rate_bound.max(1.0) {
            problems.push(format!(
                "`r_b`: demand ({}) and supply ({}) disagree",
                demand.rate_bound, supply.rate_bound
            ));
        }
        if !problems.is_empty() {
            return Err(EngineError::Config(problems));
        }
        let rb = demand.rate_bound;
        // D(0) = 0 < S(0) and D(r_b) > 0 = S(r_b) guarantee a sign change
        let crossing_rate = bisect(
            |r| demand.shock * demand.baseline(r) - supply.shock * supply.baseline(r),
            0.0,
            rb,
        )?;
        let max_trade = demand.eval(crossing_rate)?;
        Ok(SchedulePair { demand, supply, crossing_rate, max_trade })
    }

    /// The symmetric square-root pair `a = 1, theta = 1` with bound `r_b`.
    pub fn symmetric_sqrt(rate_bound: f64) -> Result<Self> {
        Self::new(
            ScheduleModel::sqrt(Side::Demand, 1.0, rate_bound, 1.0)?,
            ScheduleModel::sqrt(Side::Supply, 1.0, rate_bound, 1.0)?,
        )
    }

    pub fn demand(&self) -> &ScheduleModel {
        &self.demand
    }

    pub fn supply(&self) -> &ScheduleModel {
        &self.supply
    }

    pub fn rate_bound(&self) -> f64 {
        self.demand.rate_bound
    }

    /// `(r_hat, T_max)`: the common rate at which `D = S` and the traded
    /// volume there, the largest balanced trade.
    pub fn crossing(&self) -> (f64, f64) {
        (self.crossing_rate, self.max_trade)
    }

    pub fn crossing_rate(&self) -> f64 {
        self.crossing_rate
    }

    pub fn max_trade(&self) -> f64 {
        self.max_trade
    }

    /// Same shapes with new type shocks on each side.
    pub fn with_shocks(&self, theta_mm: f64, theta_rm: f64) -> Result<Self> {
        Self::new(self.demand.with_shock(theta_mm)?, self.supply.with_shock(theta_rm)?)
    }

    /// Repo-market rate that balances the client volumes: `S^-1(D(r_mm))`.
    pub fn balanced_counterpart(&self, r_mm: f64) -> Result<f64> {
        let slack = DOMAIN_SLACK * self.rate_bound().max(1.0);
        if r_mm > self.crossing_rate + slack {
            return Err(EngineError::InfeasibleVolume {
                volume: self.demand.eval(r_mm)?,
                max: self.max_trade,
            });
        }
        let volume = self.demand.eval(r_mm)?;
        self.supply.inverse(volume.min(self.supply.max_volume()))
    }

    /// Money-market rate that balances the client volumes: `D^-1(S(r_rm))`.
    pub fn balanced_mm(&self, r_rm: f64) -> Result<f64> {
        let volume = self.supply.eval(r_rm)?;
        self.demand.inverse(volume.min(self.demand.max_volume()))
    }

    /// Uniform grid of `count` volumes on `[0, T_max]` with both clients'
    /// reservation rates.
    pub fn discretize(&self, count: usize) -> Result<Discretization> {
        let grid = VolumeGrid::uniform(self.max_trade, count)?;
        let r_mm = grid.points().iter().map(|&t| self.demand.inverse(t)).collect::<Result<Vec<_>>>()?;
        let r_rm = grid.points().iter().map(|&t| self.supply.inverse(t)).collect::<Result<Vec<_>>>()?;
        Ok(Discretization { grid, r_mm, r_rm })
    }
}
