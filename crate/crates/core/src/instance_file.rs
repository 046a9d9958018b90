//! Reading and writing instance files.
//!
//! An instance file is TOML:
//!
//! ```toml
//! states  = ["a", "b"]
//! gamma   = "1/2"            # or "0.5"
//! alpha   = "1/2"            # or a list, one entry per period, last repeats
//! rewards = [["0", "1"], ["0", "0"]]        # |S| rows of [idle, pull]
//! kernel0 = [["1", "0"], ["0", "1"]]        # idle transitions, row-stochastic
//! kernel1 = [["1", "0"], ["1/2", "1/2"]]    # pull transitions
//! initial = ["1/2", "1/2"]   # fractions; a list of integers means counts
//! N = 2                      # optional
//! ```
//!
//! Numeric entries may be strings (`"p/q"`, integers, decimals) or TOML
//! numbers; all are read as exact rationals. Floats go through their
//! shortest decimal form.

use std::path::Path;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use toml::Value;

use crate::error::{Error, Result};
use crate::experiments::builders::InstanceTemplate;
use crate::model::{ArmModel, InitialOccupancy, InstanceSpec};
use crate::scalar::{parse_rational, rational_from_f64, Rational, Scalar};
use crate::ExactRational;

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceFile {
    pub states: Vec<String>,
    pub gamma: Rational,
    pub alpha: Vec<Rational>,
    pub rewards: Vec<[Rational; 2]>,
    pub kernel0: Vec<Vec<Rational>>,
    pub kernel1: Vec<Vec<Rational>>,
    pub initial: InitialOccupancy,
    pub arms: Option<u64>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn rational(v: &Value, what: &str) -> Result<Rational> {
    match v {
        Value::String(s) => parse_rational(s).ok_or_else(|| bad(format!("{what}: cannot read {s:?} as a rational"))),
        Value::Integer(i) => Ok(Rational::from_integer(*i)),
        Value::Float(f) => rational_from_f64(*f).ok_or_else(|| bad(format!("{what}: non-finite number"))),
        other => Err(bad(format!("{what}: expected a number, found {}", other.type_str()))),
    }
}

fn list<'a>(v: &'a Value, what: &str) -> Result<&'a [Value]> {
    v.as_array().map(Vec::as_slice).ok_or_else(|| bad(format!("{what}: expected a list")))
}

fn matrix(v: &Value, what: &str) -> Result<Vec<Vec<Rational>>> {
    list(v, what)?
        .iter()
        .enumerate()
        .map(|(i, row)| list(row, what)?.iter().map(|x| rational(x, &format!("{what}[{i}]"))).collect())
        .collect()
}

fn field<'a>(table: &'a toml::Table, key: &str) -> Result<&'a Value> {
    table.get(key).ok_or_else(|| bad(format!("missing field {key:?}")))
}

fn text(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn small(r: &ExactRational) -> Result<Rational> {
    let conv = |b: &BigInt| b.to_i64().ok_or_else(|| bad(format!("{r} does not fit in 64-bit parts")));
    Ok(Rational::new(conv(r.numer())?, conv(r.denom())?))
}

fn big(r: &Rational) -> ExactRational {
    ExactRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

impl InstanceFile {
    pub fn parse(source: &str) -> Result<Self> {
        let table: toml::Table = source.parse().map_err(|e: toml::de::Error| bad(e.message().to_string()))?;
        let known = ["states", "gamma", "alpha", "rewards", "kernel0", "kernel1", "initial", "N"];
        if let Some(k) = table.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(bad(format!("unknown field {k:?}")));
        }
        let states = list(field(&table, "states")?, "states")?
            .iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| bad("states: expected strings")))
            .collect::<Result<Vec<_>>>()?;
        let gamma = rational(field(&table, "gamma")?, "gamma")?;
        let alpha = match field(&table, "alpha")? {
            Value::Array(xs) => xs.iter().map(|x| rational(x, "alpha")).collect::<Result<Vec<_>>>()?,
            v => vec![rational(v, "alpha")?],
        };
        let rewards = matrix(field(&table, "rewards")?, "rewards")?
            .into_iter()
            .map(|row| <[Rational; 2]>::try_from(row).map_err(|_| bad("rewards: each row needs [idle, pull]")))
            .collect::<Result<Vec<_>>>()?;
        let kernel0 = matrix(field(&table, "kernel0")?, "kernel0")?;
        let kernel1 = matrix(field(&table, "kernel1")?, "kernel1")?;
        let init = list(field(&table, "initial")?, "initial")?;
        let initial = if !init.is_empty() && init.iter().all(|v| matches!(v, Value::Integer(_))) {
            let counts = init
                .iter()
                .map(|v| u64::try_from(v.as_integer().expect("integer")).map_err(|_| bad("initial: negative count")))
                .collect::<Result<Vec<_>>>()?;
            InitialOccupancy::Counts(counts)
        } else {
            InitialOccupancy::Fractions(init.iter().map(|v| rational(v, "initial")).collect::<Result<Vec<_>>>()?)
        };
        let arms = match table.get("N") {
            None => None,
            Some(Value::Integer(n)) if *n > 0 => Some(*n as u64),
            Some(_) => return Err(bad("N: expected a positive integer")),
        };
        let file = Self { states, gamma, alpha, rewards, kernel0, kernel1, initial, arms };
        file.exact_model()?;
        Ok(file)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_toml())?)
    }

    pub fn to_toml(&self) -> String {
        let row = |r: &[Rational]| format!("[{}]", r.iter().map(|x| format!("\"{}\"", text(x))).collect::<Vec<_>>().join(", "));
        let mat = |m: &[Vec<Rational>]| format!("[\n{}\n]", m.iter().map(|r| format!("  {},", row(r))).collect::<Vec<_>>().join("\n"));
        let mut out = String::new();
        let labels: Vec<String> = self.states.iter().map(|s| format!("{:?}", s)).collect();
        out.push_str(&format!("states = [{}]\n", labels.join(", ")));
        out.push_str(&format!("gamma = \"{}\"\n", text(&self.gamma)));
        if self.alpha.len() == 1 {
            out.push_str(&format!("alpha = \"{}\"\n", text(&self.alpha[0])));
        } else {
            out.push_str(&format!("alpha = {}\n", row(&self.alpha)));
        }
        let rewards: Vec<Vec<Rational>> = self.rewards.iter().map(|r| r.to_vec()).collect();
        out.push_str(&format!("rewards = {}\n", mat(&rewards)));
        out.push_str(&format!("kernel0 = {}\n", mat(&self.kernel0)));
        out.push_str(&format!("kernel1 = {}\n", mat(&self.kernel1)));
        match &self.initial {
            InitialOccupancy::Counts(c) => {
                let c: Vec<String> = c.iter().map(u64::to_string).collect();
                out.push_str(&format!("initial = [{}]\n", c.join(", ")));
            }
            InitialOccupancy::Fractions(f) => out.push_str(&format!("initial = {}\n", row(f))),
        }
        if let Some(n) = self.arms {
            out.push_str(&format!("N = {n}\n"));
        }
        out
    }

    /// The model in exact arithmetic; validation errors surface here.
    pub fn exact_model(&self) -> Result<ArmModel<ExactRational>> {
        let conv = |k: &[Vec<Rational>]| k.iter().map(|r| r.iter().map(big).collect()).collect();
        ArmModel::new(
            self.states.clone(),
            conv(&self.kernel0),
            conv(&self.kernel1),
            self.rewards.iter().map(|[a, b]| [big(a), big(b)]).collect(),
            big(&self.gamma),
        )
    }

    pub fn model<S: Scalar>(&self) -> Result<ArmModel<S>> {
        let exact = self.exact_model()?;
        Ok(exact.map_scalar(|r| S::from_ratio(&small(r).expect("parsed from 64-bit rationals"))))
    }

    /// Instance with `arms` arms, falling back to the file's `N`, then to the
    /// sum of initial counts.
    pub fn instance<S: Scalar>(&self, arms: Option<u64>) -> Result<InstanceSpec<S>> {
        let from_counts = match &self.initial {
            InitialOccupancy::Counts(c) => Some(c.iter().sum()),
            InitialOccupancy::Fractions(_) => None,
        };
        let arms = arms
            .or(self.arms)
            .or(from_counts)
            .ok_or_else(|| bad("arm count N missing from both file and command line"))?;
        InstanceSpec::new(self.model()?, arms, self.alpha.clone(), self.initial.clone())
    }

    /// Template for sweeps; needs fractional initial occupancy.
    pub fn template<S: Scalar>(&self) -> Result<InstanceTemplate<S>> {
        match &self.initial {
            InitialOccupancy::Fractions(f) => Ok(InstanceTemplate::new(self.model()?, self.alpha.clone(), f.clone())),
            InitialOccupancy::Counts(_) => Err(bad("a sweep over N needs initial fractions, not counts")),
        }
    }

    pub fn from_exact(
        model: &ArmModel<ExactRational>,
        alpha: Vec<Rational>,
        initial: InitialOccupancy,
        arms: Option<u64>,
    ) -> Result<Self> {
        let conv = |k: &[Vec<ExactRational>]| -> Result<Vec<Vec<Rational>>> {
            k.iter().map(|r| r.iter().map(small).collect()).collect()
        };
        let rewards =
            model.rewards().iter().map(|[a, b]| Ok([small(a)?, small(b)?])).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            states: model.labels().to_vec(),
            gamma: small(model.discount())?,
            alpha,
            rewards,
            kernel0: conv(model.kernel(0))?,
            kernel1: conv(model.kernel(1))?,
            initial,
            arms,
        })
    }

    pub fn from_template(template: &InstanceTemplate<ExactRational>, arms: Option<u64>) -> Result<Self> {
        Self::from_exact(
            template.model(),
            template.budget().to_vec(),
            InitialOccupancy::Fractions(template.initial_fractions().to_vec()),
            arms,
        )
    }
}
