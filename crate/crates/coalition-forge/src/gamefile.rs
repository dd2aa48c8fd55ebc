//! The on-disk game description: a small versioned JSON format shared by
//! every subcommand.
//!
//! One file describes one game in one of four modes:
//!
//! * `worth-table` — a finite peer-assisted game given by its
//!   single-provider coalition worths (unlisted coalitions default to 0);
//! * `cost-curves` — a finite game built from provider cost-curve
//!   expressions evaluated at peer counts `0..=eta`;
//! * `fluid` — provider cost curves for the fluid-limit solvers;
//! * `dtn` — two delay-tolerant-network providers competing for free
//!   users.
//!
//! Loading validates the schema version and that exactly the sections the
//! mode needs are present, so [`canonical`] round-trips: parsing the
//! canonical form of a loaded file yields an identical structure.

use std::collections::BTreeMap;
use std::path::Path;

use coalition_core::dtn_app::DtnParams;
use coalition_core::expr;
use coalition_core::fluid_payoffs::{FluidCost, FluidSystem, QuadratureConfig};
use coalition_core::game_core::{Partition, WeightVector, WorthFunction};
use coalition_core::peer_worth::{self, PeerGameSpec, WorthTableSpec};
use coalition_core::{parse_rational, CoreError, Rational};
use serde::{Deserialize, Serialize};

/// The only schema this build reads or writes.
pub const SCHEMA: &str = "coalition-forge/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    WorthTable,
    CostCurves,
    Fluid,
    Dtn,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::WorthTable => "worth-table",
            Mode::CostCurves => "cost-curves",
            Mode::Fluid => "fluid",
            Mode::Dtn => "dtn",
        })
    }
}

/// One provider cost curve: an expression in `x` plus bound parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveEntry {
    pub name: String,
    pub curve: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
}

/// One DTN provider: meeting rate, age target, deadline, locked-in base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DtnEntry {
    pub name: String,
    pub lambda: f64,
    pub g: f64,
    pub g_max: f64,
    pub x0: f64,
}

/// Optional quadrature overrides for the fluid solvers.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_depth: Option<u32>,
}

/// A parsed game file. Sections not used by `mode` must be absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub schema: String,
    pub mode: Mode,
    /// worth-table: provider names, in player order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub providers: Option<Vec<String>>,
    /// worth-table: peer names, following the providers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub peers: Option<Vec<String>>,
    /// worth-table: worths of single-provider coalitions, keyed by
    /// space-separated player names; unlisted coalitions are 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worth: Option<BTreeMap<String, String>>,
    /// cost-curves: number of peers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<usize>,
    /// cost-curves: significant decimal digits kept when a curve value
    /// has no exact rational form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digits: Option<u32>,
    /// cost-curves and fluid: provider curves, in provider order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<Vec<CurveEntry>>,
    /// dtn: exactly two providers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtn: Option<Vec<DtnEntry>>,
    /// default player weights for the χ value (rationals).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<BTreeMap<String, String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<QuadratureSection>,
}

/// Read and validate a game file.
pub fn load(path: &Path) -> Result<GameFile, CoreError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CoreError::invalid(format!("cannot read {}: {e}", path.display())))?;
    let file: GameFile = serde_json::from_str(&text)
        .map_err(|e| CoreError::invalid(format!("{}: {e}", path.display())))?;
    validate(&file)?;
    Ok(file)
}

/// The canonical serialized form (sorted maps, stable field order, LF).
pub fn canonical(file: &GameFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("game files always serialize");
    s.push('\n');
    s
}

fn require<T>(field: Option<&T>, mode: Mode, name: &str) -> Result<(), CoreError> {
    if field.is_none() {
        return Err(CoreError::invalid(format!(
            "{mode} mode requires the `{name}` section"
        )));
    }
    Ok(())
}

fn forbid<T>(field: Option<&T>, mode: Mode, name: &str) -> Result<(), CoreError> {
    if field.is_some() {
        return Err(CoreError::invalid(format!(
            "{mode} mode does not use the `{name}` section"
        )));
    }
    Ok(())
}

fn validate(file: &GameFile) -> Result<(), CoreError> {
    if file.schema != SCHEMA {
        return Err(CoreError::invalid(format!(
            "unsupported schema `{}` (this build reads `{SCHEMA}`)",
            file.schema
        )));
    }
    let m = file.mode;
    match m {
        Mode::WorthTable => {
            require(file.providers.as_ref(), m, "providers")?;
            require(file.peers.as_ref(), m, "peers")?;
            require(file.worth.as_ref(), m, "worth")?;
            forbid(file.curves.as_ref(), m, "curves")?;
            forbid(file.eta.as_ref(), m, "eta")?;
            forbid(file.digits.as_ref(), m, "digits")?;
            forbid(file.dtn.as_ref(), m, "dtn")?;
            forbid(file.quadrature.as_ref(), m, "quadrature")?;
        }
        Mode::CostCurves => {
            // `quadrature` stays legal: these files also feed the fluid
            // solvers.
            require(file.curves.as_ref(), m, "curves")?;
            require(file.eta.as_ref(), m, "eta")?;
            forbid(file.providers.as_ref(), m, "providers")?;
            forbid(file.peers.as_ref(), m, "peers")?;
            forbid(file.worth.as_ref(), m, "worth")?;
            forbid(file.dtn.as_ref(), m, "dtn")?;
        }
        Mode::Fluid => {
            require(file.curves.as_ref(), m, "curves")?;
            forbid(file.providers.as_ref(), m, "providers")?;
            forbid(file.peers.as_ref(), m, "peers")?;
            forbid(file.worth.as_ref(), m, "worth")?;
            forbid(file.eta.as_ref(), m, "eta")?;
            forbid(file.digits.as_ref(), m, "digits")?;
            forbid(file.dtn.as_ref(), m, "dtn")?;
        }
        Mode::Dtn => {
            require(file.dtn.as_ref(), m, "dtn")?;
            forbid(file.providers.as_ref(), m, "providers")?;
            forbid(file.peers.as_ref(), m, "peers")?;
            forbid(file.worth.as_ref(), m, "worth")?;
            forbid(file.curves.as_ref(), m, "curves")?;
            forbid(file.eta.as_ref(), m, "eta")?;
            forbid(file.digits.as_ref(), m, "digits")?;
            forbid(file.weights.as_ref(), m, "weights")?;
        }
    }
    Ok(())
}

fn parsed_curves(file: &GameFile) -> Result<Vec<(String, expr::CostCurve)>, CoreError> {
    file.curves
        .as_ref()
        .expect("validated")
        .iter()
        .map(|entry| {
            let curve = expr::parse(&entry.curve)?
                .with_params(entry.params.iter().map(|(k, v)| (k.clone(), *v)))?;
            Ok((entry.name.clone(), curve))
        })
        .collect()
}

/// Build the finite game a `worth-table` or `cost-curves` file describes.
pub fn finite_game(file: &GameFile) -> Result<WorthFunction, CoreError> {
    match file.mode {
        Mode::WorthTable => {
            let entries = file
                .worth
                .as_ref()
                .expect("validated")
                .iter()
                .map(|(k, v)| Ok((k.clone(), parse_rational(v)?)))
                .collect::<Result<Vec<_>, CoreError>>()?;
            let spec = WorthTableSpec::new(
                file.providers.clone().expect("validated"),
                file.peers.clone().expect("validated"),
                entries,
            )?;
            peer_worth::build_worth_from_table(&spec)
        }
        Mode::CostCurves => {
            let mut spec =
                PeerGameSpec::new(parsed_curves(file)?, file.eta.expect("validated"))?;
            if let Some(d) = file.digits {
                spec = spec.with_sig_digits(d);
            }
            peer_worth::build_worth_function(&spec)
        }
        other => Err(CoreError::invalid(format!(
            "`{other}` files do not define a finite game; use a worth-table or \
             cost-curves file"
        ))),
    }
}

/// Build the fluid cost system a `fluid` or `cost-curves` file describes.
pub fn fluid_system(file: &GameFile) -> Result<FluidSystem, CoreError> {
    match file.mode {
        Mode::Fluid | Mode::CostCurves => FluidSystem::new(
            parsed_curves(file)?
                .into_iter()
                .map(|(name, curve)| FluidCost::new(name, curve))
                .collect(),
        ),
        other => Err(CoreError::invalid(format!(
            "`{other}` files do not define fluid cost curves; use a fluid or \
             cost-curves file"
        ))),
    }
}

/// The two DTN providers of a `dtn` file: `(name, params)` for p, then q.
pub fn dtn_pair(file: &GameFile) -> Result<[(String, DtnParams); 2], CoreError> {
    let entries = file.dtn.as_ref().expect("validated");
    let [p, q] = entries.as_slice() else {
        return Err(CoreError::invalid(format!(
            "dtn mode needs exactly two providers, found {}",
            entries.len()
        )));
    };
    if p.name == q.name {
        return Err(CoreError::invalid(format!(
            "duplicate dtn provider name `{}`",
            p.name
        )));
    }
    let to_params =
        |e: &DtnEntry| -> Result<DtnParams, CoreError> { DtnParams::new(e.lambda, e.g, e.g_max, e.x0) };
    Ok([
        (p.name.clone(), to_params(p)?),
        (q.name.clone(), to_params(q)?),
    ])
}

/// Quadrature settings: library defaults, overridden by the file's
/// `quadrature` section, overridden by an explicit `--tolerance`.
pub fn quadrature_config(
    file: &GameFile,
    tolerance: Option<f64>,
) -> Result<QuadratureConfig, CoreError> {
    let mut cfg = QuadratureConfig::default();
    if let Some(section) = &file.quadrature {
        if let Some(tol) = section.tol {
            cfg.tol = tol;
        }
        if let Some(depth) = section.max_depth {
            cfg.max_depth = depth;
        }
    }
    if let Some(tol) = tolerance {
        cfg.tol = tol;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Parse `"{a b | c d}"`, `"grand"`, or `"singletons"` against the game's
/// player names.
pub fn parse_partition(text: &str, v: &WorthFunction) -> Result<Partition, CoreError> {
    let t = text.trim();
    match t {
        "grand" => return Ok(Partition::grand(v.n())),
        "singletons" => return Ok(Partition::singletons(v.n())),
        _ => {}
    }
    let inner = t
        .strip_prefix('{')
        .and_then(|rest| rest.strip_suffix('}'))
        .ok_or_else(|| {
            CoreError::invalid(format!(
                "partition must be `grand`, `singletons`, or `{{a b | c d}}`, got `{text}`"
            ))
        })?;
    let mut blocks = Vec::new();
    for block_text in inner.split('|') {
        let mut block = coalition_core::PlayerSet::EMPTY;
        for name in block_text.split_whitespace() {
            let i = v
                .player_index(name)
                .ok_or_else(|| CoreError::UnknownIdentifier {
                    name: name.to_string(),
                })?;
            if block.contains(i) {
                return Err(CoreError::invalid(format!(
                    "player `{name}` listed twice in one block"
                )));
            }
            block = block.with(i);
        }
        if block.is_empty() {
            return Err(CoreError::invalid(format!("empty block in `{text}`")));
        }
        blocks.push(block);
    }
    Partition::new(blocks, v.n())
}

/// Merge `--weights k=v,…` over the file's `weights` section into a full
/// rational weight vector (default weight 1 per player).
pub fn weight_vector(
    v: &WorthFunction,
    file: &GameFile,
    flag: Option<&str>,
) -> Result<WeightVector, CoreError> {
    let mut weights: Vec<Rational> = vec![Rational::from_integer(1.into()); v.n()];
    let mut apply = |name: &str, value: Rational| -> Result<(), CoreError> {
        let i = v
            .player_index(name)
            .ok_or_else(|| CoreError::UnknownIdentifier {
                name: name.to_string(),
            })?;
        weights[i] = value;
        Ok(())
    };
    if let Some(section) = &file.weights {
        for (name, text) in section {
            apply(name, parse_rational(text)?)?;
        }
    }
    for (name, text) in parse_weight_flag(flag)? {
        apply(&name, parse_rational(&text)?)?;
    }
    WeightVector::new(weights)
}

/// Merge `--weights k=v,…` over the file's `weights` section into per-
/// provider `f64` weights for the fluid χ value (default 1).
pub fn fluid_weights(
    sys: &FluidSystem,
    file: &GameFile,
    flag: Option<&str>,
) -> Result<Vec<f64>, CoreError> {
    let mut weights = vec![1.0; sys.len()];
    let mut apply = |name: &str, value: f64| -> Result<(), CoreError> {
        let i = sys
            .index_of(name)
            .ok_or_else(|| CoreError::UnknownIdentifier {
                name: name.to_string(),
            })?;
        weights[i] = value;
        Ok(())
    };
    if let Some(section) = &file.weights {
        for (name, text) in section {
            let value: f64 = text
                .trim()
                .parse()
                .map_err(|_| CoreError::invalid(format!("bad weight `{text}` for `{name}`")))?;
            apply(name, value)?;
        }
    }
    for (name, text) in parse_weight_flag(flag)? {
        let value: f64 = text
            .trim()
            .parse()
            .map_err(|_| CoreError::invalid(format!("bad weight `{text}` for `{name}`")))?;
        apply(&name, value)?;
    }
    Ok(weights)
}

/// Split `"a=1,b=2/3"` into `(name, value-text)` pairs.
fn parse_weight_flag(flag: Option<&str>) -> Result<Vec<(String, String)>, CoreError> {
    let Some(text) = flag else {
        return Ok(Vec::new());
    };
    text.split(',')
        .filter(|part| !part.trim().is_empty())
        .map(|part| {
            let (name, value) = part.split_once('=').ok_or_else(|| {
                CoreError::invalid(format!("weight `{part}` is not of the form name=value"))
            })?;
            Ok((name.trim().to_string(), value.trim().to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worth_table_json() -> String {
        r#"{
            "schema": "coalition-forge/1",
            "mode": "worth-table",
            "providers": ["p1", "p2"],
            "peers": ["n1", "n2"],
            "worth": { "p1 n1": "5", "p2 n1 n2": "9" }
        }"#
        .to_string()
    }

    #[test]
    fn canonical_round_trips() {
        let file: GameFile = serde_json::from_str(&worth_table_json()).unwrap();
        validate(&file).unwrap();
        let c1 = canonical(&file);
        let again: GameFile = serde_json::from_str(&c1).unwrap();
        assert_eq!(file, again);
        assert_eq!(c1, canonical(&again));
    }

    #[test]
    fn schema_and_section_validation() {
        let mut file: GameFile = serde_json::from_str(&worth_table_json()).unwrap();
        file.schema = "coalition-forge/2".into();
        assert!(validate(&file).is_err());

        let mut file: GameFile = serde_json::from_str(&worth_table_json()).unwrap();
        file.eta = Some(3);
        assert!(validate(&file).is_err());

        let mut file: GameFile = serde_json::from_str(&worth_table_json()).unwrap();
        file.worth = None;
        assert!(validate(&file).is_err());
    }

    #[test]
    fn partition_text_forms() {
        let file: GameFile = serde_json::from_str(&worth_table_json()).unwrap();
        let v = finite_game(&file).unwrap();
        let grand = parse_partition("grand", &v).unwrap();
        assert!(grand.is_grand());
        let singles = parse_partition("singletons", &v).unwrap();
        assert_eq!(singles.blocks().len(), 4);
        let p = parse_partition("{p1 n1 | p2 n2}", &v).unwrap();
        assert_eq!(p.blocks().len(), 2);
        assert!(parse_partition("{p1 | bogus}", &v).is_err());
        assert!(parse_partition("{p1 | p2 n1}", &v).is_err()); // n2 missing
        assert!(parse_partition("p1 | p2", &v).is_err()); // no braces
    }

    #[test]
    fn weight_merging() {
        let file: GameFile = serde_json::from_str(&worth_table_json()).unwrap();
        let v = finite_game(&file).unwrap();
        let w = weight_vector(&v, &file, Some("p1=2, n2=1/3")).unwrap();
        assert_eq!(w.get(0), &coalition_core::rat(2, 1));
        assert_eq!(w.get(1), &coalition_core::rat(1, 1));
        assert_eq!(w.get(3), &coalition_core::rat(1, 3));
        assert!(weight_vector(&v, &file, Some("bogus=1")).is_err());
        assert!(weight_vector(&v, &file, Some("p1")).is_err());
    }
}
