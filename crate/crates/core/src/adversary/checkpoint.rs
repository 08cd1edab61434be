//! On-disk checkpoints: a JSON manifest plus one little-endian `f64`
//! parameter blob per network, keyed by name (`member.0`, ..., `disc`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Discriminator, DiscriminatorConfig};
use crate::dynamics::{DynamicsEnsemble, Normalizer, ProbabilisticModel};
use crate::error::{check_len, Error, Result};
use crate::nn::{Activation, AdamConfig, Mlp};
use crate::rng::Streams;

pub const CHECKPOINT_SCHEMA: &str = "v1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub name: String,
    pub file: String,
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub num_params: usize,
    pub adam_steps: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorMeta {
    pub context_len: usize,
    pub horizon: usize,
    pub state_dim: usize,
    pub action_dim: usize,
    pub training_threshold: f64,
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub schema: String,
    pub seed: u64,
    pub normalizer: Normalizer,
    pub networks: Vec<NetworkEntry>,
    pub discriminator: Option<DiscriminatorMeta>,
}

fn write_blob(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

fn read_blob(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    check_len("checkpoint blob bytes", expected * 8, bytes.len())?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn entry(name: String, net: &Mlp, adam_steps: u64) -> NetworkEntry {
    NetworkEntry {
        file: format!("{name}.bin"),
        name,
        layer_sizes: net.layer_sizes().to_vec(),
        activation: net.activation(),
        num_params: net.num_params(),
        adam_steps,
    }
}

/// Writes the ensemble and optional discriminator into `dir`.
pub fn save_checkpoint(
    dir: &Path,
    ensemble: &DynamicsEnsemble,
    disc: Option<&Discriminator>,
    seed: u64,
) -> Result<CheckpointManifest> {
    fs::create_dir_all(dir)?;
    let mut networks = Vec::new();
    for (k, m) in ensemble.members().iter().enumerate() {
        let e = entry(format!("member.{k}"), m.net(), m.optimizer().steps());
        write_blob(&dir.join(&e.file), &m.net().to_flat())?;
        networks.push(e);
    }
    let discriminator = match disc {
        Some(d) => {
            let e = entry("disc".to_string(), d.net(), d.optimizer().steps());
            write_blob(&dir.join(&e.file), &d.net().to_flat())?;
            networks.push(e);
            Some(DiscriminatorMeta {
                context_len: d.context_len(),
                horizon: d.horizon(),
                state_dim: d.state_dim(),
                action_dim: d.action_dim(),
                training_threshold: d.training_threshold(),
                input_shift: d.input_shift().to_vec(),
                input_scale: d.input_scale().to_vec(),
            })
        }
        None => None,
    };
    let manifest = CheckpointManifest {
        schema: CHECKPOINT_SCHEMA.to_string(),
        seed,
        normalizer: ensemble.normalizer().clone(),
        networks,
        discriminator,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn load_net(dir: &Path, e: &NetworkEntry) -> Result<Mlp> {
    let mut net = Mlp::zeros(&e.layer_sizes, e.activation)?;
    check_len("checkpoint parameter count", net.num_params(), e.num_params)?;
    net.set_flat(&read_blob(&dir.join(&e.file), e.num_params)?)?;
    Ok(net)
}

/// Loads a checkpoint. Optimizer moments are not stored; the returned
/// networks get fresh Adam state with the given configs.
pub fn load_checkpoint(
    dir: &Path,
    model_adam: AdamConfig,
    disc_config: &DiscriminatorConfig,
) -> Result<(DynamicsEnsemble, Option<Discriminator>, CheckpointManifest)> {
    let manifest: CheckpointManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    if manifest.schema != CHECKPOINT_SCHEMA {
        return Err(Error::Invalid(format!(
            "unsupported checkpoint schema {:?}",
            manifest.schema
        )));
    }
    let mut members = Vec::new();
    for k in 0.. {
        let name = format!("member.{k}");
        let Some(e) = manifest.networks.iter().find(|e| e.name == name) else {
            break;
        };
        members.push(ProbabilisticModel::from_net(
            load_net(dir, e)?,
            model_adam,
            manifest.normalizer.clone(),
        )?);
    }
    let ensemble = DynamicsEnsemble::from_members(members)?;
    let disc = match (&manifest.discriminator, manifest.networks.iter().find(|e| e.name == "disc")) {
        (Some(meta), Some(e)) => {
            let cfg = DiscriminatorConfig {
                hidden: e.layer_sizes[1..e.layer_sizes.len() - 1].to_vec(),
                training_threshold: meta.training_threshold,
                ..disc_config.clone()
            };
            // initialization is overwritten by the stored parameters
            let mut d = Discriminator::new(
                meta.context_len,
                meta.horizon,
                meta.state_dim,
                meta.action_dim,
                &cfg,
                &mut Streams::new(manifest.seed).stream("checkpoint"),
            )?;
            let net = load_net(dir, e)?;
            d.net_mut().set_flat(&net.to_flat())?;
            d.set_input_scaling(meta.input_shift.clone(), meta.input_scale.clone())?;
            Some(d)
        }
        (None, None) => None,
        _ => return Err(Error::Invalid("discriminator entry without metadata".into())),
    };
    Ok((ensemble, disc, manifest))
}
