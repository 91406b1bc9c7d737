//! Scenario files: parsing, validation and canonical rendering.
//!
//! The format is sectioned key-value text:
//!
//! ```text
//! # comment
//! [params]
//! n = 10
//! theta = 0.900000
//! ...
//! [stakes]
//! w0 = 0.100000
//! ...
//! [strategies]
//! w0 = diligent
//! ...
//! [collusion]        # optional
//! kind = lazy
//! leader = w0
//! deposit = 20000.000000
//! [whistleblower]    # optional
//! reward = 121000.000000
//! deposit = 10.000000
//! [simulation]
//! asserter_fault_rate = 0.000000
//! epochs = 1000
//! seed = 42
//! ```
//!
//! Rendering is canonical: sections and keys in sorted order, reals with
//! six decimal places (exactly the micro-unit resolution of monetary
//! fields), so semantically equal scenarios render identically.

use crate::engine::{CollusionKind, ProtocolParams, MICRO_PER_UNIT};
use crate::games::solve::DcLeaderAction;
use crate::watchtower::{CollusionRole, Strategy};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// All validation problems found, not just the first.
#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid scenario:\n{}", errors.join("\n"))]
pub struct ScenarioErrors {
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollusionSection {
    pub kind: CollusionKind,
    pub leader: String,
    /// Present for diligent collusion only.
    pub leader_action: Option<DcLeaderAction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhistleblowerSection {
    pub reward_micro: i64,
    pub deposit_micro: i64,
}

/// A fully specified, reproducible simulation setup.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: ProtocolParams,
    pub stakes: Vec<f64>,
    pub strategies: Vec<Strategy>,
    pub collusion: Option<CollusionSection>,
    pub whistleblower: Option<WhistleblowerSection>,
    pub asserter_fault_rate: f64,
    /// When set, fabricating watchtowers copy the posted state root and
    /// randomize only the trace root.
    pub lazy_copies_assertion: bool,
    pub epochs: u64,
    /// Mandatory; omitting it is a validation error, not a random default.
    pub seed: u64,
}

fn parse_units(s: &str) -> Result<i64, String> {
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1i64, rest),
        None => (1i64, s),
    };
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("expected a decimal number, got `{s}`"));
    }
    if frac_part.len() > 6 || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("at most 6 decimal places supported, got `{s}`"));
    }
    let int: i64 = int_part
        .parse()
        .map_err(|_| format!("integer part out of range in `{s}`"))?;
    let mut frac: i64 = if frac_part.is_empty() {
        0
    } else {
        frac_part.parse().unwrap()
    };
    frac *= 10i64.pow(6 - frac_part.len() as u32);
    Ok(sign * (int * MICRO_PER_UNIT + frac))
}

fn render_units(micro: i64) -> String {
    let sign = if micro < 0 { "-" } else { "" };
    let abs = micro.abs();
    format!("{}{}.{:06}", sign, abs / MICRO_PER_UNIT, abs % MICRO_PER_UNIT)
}

fn strategy_from_str(s: &str) -> Option<Strategy> {
    Some(match s {
        "diligent" => Strategy::Diligent,
        "lazy" => Strategy::LazyDeceitful,
        "obey" => Strategy::CollusionMember(CollusionRole::Obey),
        "betray" => Strategy::CollusionMember(CollusionRole::Betray),
        "report" => Strategy::CollusionMember(CollusionRole::Report),
        _ => return None,
    })
}

type Sections = BTreeMap<String, BTreeMap<String, String>>;

fn split_sections(text: &str, errors: &mut Vec<String>) -> Sections {
    let mut sections: Sections = BTreeMap::new();
    let mut current: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = match raw.split_once('#') {
            Some((before, _)) => before.trim(),
            None => raw.trim(),
        };
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_string();
            if sections.contains_key(&name) {
                errors.push(format!("line {}: duplicate section [{name}]", lineno + 1));
            }
            sections.entry(name.clone()).or_default();
            current = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected `key = value`, got `{line}`", lineno + 1));
            continue;
        };
        let Some(section) = &current else {
            errors.push(format!("line {}: key outside any [section]", lineno + 1));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let entry = sections.get_mut(section).unwrap();
        if entry.insert(key.clone(), value).is_some() {
            errors.push(format!("line {}: duplicate key `{section}.{key}`", lineno + 1));
        }
    }
    sections
}

struct SectionReader<'a> {
    name: &'a str,
    keys: BTreeMap<String, String>,
    errors: &'a mut Vec<String>,
}

impl<'a> SectionReader<'a> {
    fn take(&mut self, key: &str) -> Option<String> {
        self.keys.remove(key)
    }

    fn required<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        match self.take(key) {
            None => {
                self.errors.push(format!("{}.{}: missing required key", self.name, key));
                None
            }
            Some(v) => match parse(&v) {
                Ok(t) => Some(t),
                Err(e) => {
                    self.errors.push(format!("{}.{}: {}", self.name, key, e));
                    None
                }
            },
        }
    }

    fn optional<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T, String>) -> Option<T> {
        match self.take(key) {
            None => None,
            Some(v) => match parse(&v) {
                Ok(t) => Some(t),
                Err(e) => {
                    self.errors.push(format!("{}.{}: {}", self.name, key, e));
                    None
                }
            },
        }
    }

    fn finish(self) {
        for key in self.keys.keys() {
            self.errors.push(format!("{}.{}: unknown key", self.name, key));
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.parse::<f64>().map_err(|_| format!("expected a real number, got `{s}`"))
}

fn parse_usize(s: &str) -> Result<usize, String> {
    s.parse::<usize>().map_err(|_| format!("expected an integer, got `{s}`"))
}

fn parse_u64(s: &str) -> Result<u64, String> {
    s.parse::<u64>().map_err(|_| format!("expected an integer, got `{s}`"))
}

fn parse_u32(s: &str) -> Result<u32, String> {
    s.parse::<u32>().map_err(|_| format!("expected an integer, got `{s}`"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{s}`")),
    }
}

/// Parses and fully validates a scenario, reporting every problem found.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioErrors> {
    let mut errors = Vec::new();
    let mut sections = split_sections(text, &mut errors);

    let known = ["params", "stakes", "strategies", "collusion", "whistleblower", "simulation"];
    for name in sections.keys() {
        if !known.contains(&name.as_str()) {
            errors.push(format!("[{name}]: unknown section"));
        }
    }

    fn reader<'a>(
        sections: &mut Sections,
        name: &'static str,
        errors: &'a mut Vec<String>,
    ) -> Option<SectionReader<'a>> {
        sections
            .remove(name)
            .map(|keys| SectionReader { name, keys, errors })
    }

    // [params]
    let mut n = 0usize;
    let mut params = None;
    if let Some(mut p) = reader(&mut sections, "params", &mut errors) {
        let n_val = p.required("n", parse_usize);
        let total_stake = p.required("total_stake", parse_units);
        let theta = p.required("theta", parse_f64);
        let alpha_0 = p.required("alpha_0", parse_f64);
        let r_b = p.required("r_b", parse_units);
        let r_c = p.required("r_c", parse_units);
        let c_t = p.required("c_t", parse_units);
        let c_v = p.required("c_v", parse_units);
        let t1 = p.required("t1_ticks", parse_u32);
        let tc = p.required("tc_ticks", parse_u32);
        let tlc = p.required("tlc_ticks", parse_u32);
        p.finish();
        if let (
            Some(n_val),
            Some(total_stake),
            Some(theta),
            Some(alpha_0),
            Some(r_b),
            Some(r_c),
            Some(c_t),
            Some(c_v),
            Some(t1),
            Some(tc),
            Some(tlc),
        ) = (n_val, total_stake, theta, alpha_0, r_b, r_c, c_t, c_v, t1, tc, tlc)
        {
            n = n_val;
            params = Some(ProtocolParams {
                n: n_val,
                total_stake_micro: total_stake,
                theta,
                alpha_0,
                r_b_micro: r_b,
                r_c_micro: r_c,
                r_w_micro: 0,
                c_t_micro: c_t,
                c_v_micro: c_v,
                collusion_deposit_micro: 0,
                rent_micro: 0,
                wb_deposit_micro: 0,
                t1_ticks: t1,
                tc_ticks: tc,
                tlc_ticks: tlc,
            });
        }
    } else {
        errors.push("[params]: missing required section".to_string());
    }

    // [stakes] and [strategies]: one `w<i>` key per watchtower
    let mut stakes = vec![0.0; n];
    if let Some(mut s) = reader(&mut sections, "stakes", &mut errors) {
        for (i, stake) in stakes.iter_mut().enumerate() {
            if let Some(v) = s.required(&format!("w{i}"), parse_f64) {
                *stake = v;
            }
        }
        s.finish();
    } else {
        errors.push("[stakes]: missing required section".to_string());
    }

    let mut strategies = vec![Strategy::Diligent; n];
    if let Some(mut s) = reader(&mut sections, "strategies", &mut errors) {
        for (i, strat) in strategies.iter_mut().enumerate() {
            if let Some(v) = s.required(&format!("w{i}"), |s| {
                strategy_from_str(s).ok_or_else(|| {
                    format!("expected diligent|lazy|obey|betray|report, got `{s}`")
                })
            }) {
                *strat = v;
            }
        }
        s.finish();
    } else {
        errors.push("[strategies]: missing required section".to_string());
    }

    // [collusion] (optional)
    let mut collusion = None;
    if let Some(mut c) = reader(&mut sections, "collusion", &mut errors) {
        let kind = c.required("kind", |s| match s {
            "lazy" => Ok(CollusionKind::Lazy),
            "diligent" => Ok(CollusionKind::Diligent),
            _ => Err(format!("expected lazy|diligent, got `{s}`")),
        });
        let leader = c.required("leader", |s| Ok::<String, String>(s.to_string()));
        let deposit = c.required("deposit", parse_units);
        let rent = c.optional("rent", parse_units);
        let leader_action = c.optional("leader_action", |s| match s {
            "obey" => Ok(DcLeaderAction::Obey),
            "betray" => Ok(DcLeaderAction::Betray),
            "cheat" => Ok(DcLeaderAction::Cheat),
            _ => Err(format!("expected obey|betray|cheat, got `{s}`")),
        });
        c.finish();
        if let (Some(kind), Some(leader), Some(deposit)) = (kind, leader, deposit) {
            if let Some(p) = params.as_mut() {
                p.collusion_deposit_micro = deposit;
                p.rent_micro = rent.unwrap_or(0);
            }
            collusion = Some(CollusionSection {
                kind,
                leader,
                leader_action,
            });
        }
    }

    // [whistleblower] (optional)
    let mut whistleblower = None;
    if let Some(mut w) = reader(&mut sections, "whistleblower", &mut errors) {
        let reward = w.required("reward", parse_units);
        let deposit = w.required("deposit", parse_units);
        w.finish();
        if let (Some(reward), Some(deposit)) = (reward, deposit) {
            if let Some(p) = params.as_mut() {
                p.r_w_micro = reward;
                p.wb_deposit_micro = deposit;
            }
            whistleblower = Some(WhistleblowerSection {
                reward_micro: reward,
                deposit_micro: deposit,
            });
        }
    }

    // [simulation]
    let mut asserter_fault_rate = 0.0;
    let mut lazy_copies_assertion = false;
    let mut epochs = 0;
    let mut seed = None;
    if let Some(mut s) = reader(&mut sections, "simulation", &mut errors) {
        if let Some(v) = s.required("asserter_fault_rate", parse_f64) {
            asserter_fault_rate = v;
        }
        if let Some(v) = s.optional("lazy_copies_assertion", parse_bool) {
            lazy_copies_assertion = v;
        }
        if let Some(v) = s.required("epochs", parse_u64) {
            epochs = v;
        }
        seed = s.required("seed", parse_u64);
        s.finish();
    } else {
        errors.push("[simulation]: missing required section".to_string());
    }

    let Some(params) = params else {
        return Err(ScenarioErrors { errors });
    };
    let scenario = Scenario {
        params,
        stakes,
        strategies,
        collusion,
        whistleblower,
        asserter_fault_rate,
        lazy_copies_assertion,
        epochs,
        seed: seed.unwrap_or(0),
    };
    if let Err(e) = scenario.validate() {
        errors.extend(e.errors);
    }
    if errors.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioErrors { errors })
    }
}

impl Scenario {
    /// Structural validation; every failed invariant is reported with its
    /// field path and the offending value.
    pub fn validate(&self) -> Result<(), ScenarioErrors> {
        let mut errors = Vec::new();
        let n = self.params.n;
        if let Err(e) = self.params.validate() {
            errors.push(format!("params: {e}"));
        }
        if self.stakes.len() != n {
            errors.push(format!("stakes: {} entries != n = {}", self.stakes.len(), n));
        }
        let sum: f64 = self.stakes.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            errors.push(format!("stakes: sum {sum:.6} != 1"));
        }
        for (i, &alpha) in self.stakes.iter().enumerate() {
            if alpha + 1e-12 < self.params.alpha_0 {
                errors.push(format!(
                    "stakes.w{i}: {alpha:.6} below the unit stake fraction {:.6}",
                    self.params.alpha_0
                ));
            }
        }
        if self.strategies.len() != n {
            errors.push(format!(
                "strategies: {} entries != n = {}",
                self.strategies.len(),
                n
            ));
        }
        if !(0.0..=1.0).contains(&self.asserter_fault_rate) {
            errors.push(format!(
                "simulation.asserter_fault_rate: {} outside [0,1]",
                self.asserter_fault_rate
            ));
        }
        if self.epochs == 0 {
            errors.push("simulation.epochs: must be >= 1".to_string());
        }

        let members: Vec<usize> = self
            .strategies
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, Strategy::CollusionMember(_)))
            .map(|(i, _)| i)
            .collect();
        match &self.collusion {
            None => {
                if !members.is_empty() {
                    errors.push(format!(
                        "strategies.w{}: collusion role without a [collusion] section",
                        members[0]
                    ));
                }
            }
            Some(c) => {
                let leader_index = c
                    .leader
                    .strip_prefix('w')
                    .and_then(|rest| rest.parse::<usize>().ok())
                    .filter(|i| *i < n);
                match leader_index {
                    None => errors.push(format!(
                        "collusion.leader: `{}` is not a watchtower id",
                        c.leader
                    )),
                    Some(i) => {
                        if !matches!(self.strategies[i], Strategy::CollusionMember(_)) {
                            errors.push(format!(
                                "collusion.leader: w{i} does not have a collusion strategy"
                            ));
                        }
                    }
                }
                match c.kind {
                    CollusionKind::Lazy => {
                        if c.leader_action.is_some() {
                            errors.push(
                                "collusion.leader_action: only meaningful for kind = diligent"
                                    .to_string(),
                            );
                        }
                    }
                    CollusionKind::Diligent => {
                        if c.leader_action.is_none() {
                            errors.push(
                                "collusion.leader_action: required for kind = diligent".to_string(),
                            );
                        }
                        if self.params.rent_micro >= self.params.c_t_micro {
                            errors.push(format!(
                                "collusion.rent: {} not strictly below c_t {}",
                                render_units(self.params.rent_micro),
                                render_units(self.params.c_t_micro)
                            ));
                        }
                        for &i in &members {
                            if Some(i) != leader_index
                                && self.strategies[i]
                                    != Strategy::CollusionMember(CollusionRole::Obey)
                            {
                                errors.push(format!(
                                    "strategies.w{i}: diligent-collusion followers can only obey"
                                ));
                            }
                        }
                    }
                }
            }
        }
        if self.whistleblower.is_none()
            && self
                .strategies.contains(&Strategy::CollusionMember(CollusionRole::Report))
        {
            errors.push(
                "strategies: report role requires a [whistleblower] section".to_string(),
            );
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(ScenarioErrors { errors })
        }
    }
}

/// Canonical rendering: stable section order, sorted keys, six decimal
/// places for reals.
pub fn render_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    if let Some(c) = &s.collusion {
        out.push_str("[collusion]\n");
        out.push_str(&format!("deposit = {}\n", render_units(s.params.collusion_deposit_micro)));
        let kind = match c.kind {
            CollusionKind::Lazy => "lazy",
            CollusionKind::Diligent => "diligent",
        };
        out.push_str(&format!("kind = {kind}\n"));
        out.push_str(&format!("leader = {}\n", c.leader));
        if let Some(action) = c.leader_action {
            let action = match action {
                DcLeaderAction::Obey => "obey",
                DcLeaderAction::Betray => "betray",
                DcLeaderAction::Cheat => "cheat",
            };
            out.push_str(&format!("leader_action = {action}\n"));
        }
        if s.params.rent_micro != 0 {
            out.push_str(&format!("rent = {}\n", render_units(s.params.rent_micro)));
        }
        out.push('\n');
    }
    out.push_str("[params]\n");
    out.push_str(&format!("alpha_0 = {:.6}\n", s.params.alpha_0));
    out.push_str(&format!("c_t = {}\n", render_units(s.params.c_t_micro)));
    out.push_str(&format!("c_v = {}\n", render_units(s.params.c_v_micro)));
    out.push_str(&format!("n = {}\n", s.params.n));
    out.push_str(&format!("r_b = {}\n", render_units(s.params.r_b_micro)));
    out.push_str(&format!("r_c = {}\n", render_units(s.params.r_c_micro)));
    out.push_str(&format!("t1_ticks = {}\n", s.params.t1_ticks));
    out.push_str(&format!("tc_ticks = {}\n", s.params.tc_ticks));
    out.push_str(&format!("theta = {:.6}\n", s.params.theta));
    out.push_str(&format!("tlc_ticks = {}\n", s.params.tlc_ticks));
    out.push_str(&format!("total_stake = {}\n", render_units(s.params.total_stake_micro)));
    out.push('\n');
    out.push_str("[simulation]\n");
    out.push_str(&format!("asserter_fault_rate = {:.6}\n", s.asserter_fault_rate));
    out.push_str(&format!("epochs = {}\n", s.epochs));
    if s.lazy_copies_assertion {
        out.push_str("lazy_copies_assertion = true\n");
    }
    out.push_str(&format!("seed = {}\n", s.seed));
    out.push('\n');
    out.push_str("[stakes]\n");
    for (i, stake) in s.stakes.iter().enumerate() {
        out.push_str(&format!("w{i} = {stake:.6}\n"));
    }
    out.push('\n');
    out.push_str("[strategies]\n");
    for (i, strategy) in s.strategies.iter().enumerate() {
        out.push_str(&format!("w{i} = {}\n", crate::engine::strategy_label(strategy)));
    }
    if let Some(w) = &s.whistleblower {
        out.push('\n');
        out.push_str("[whistleblower]\n");
        out.push_str(&format!("deposit = {}\n", render_units(w.deposit_micro)));
        out.push_str(&format!("reward = {}\n", render_units(w.reward_micro)));
    }
    out
}
