use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::graph::{FEATURE_DIM, RELATION_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Elu,
    Identity,
}

/// Output side of a transposed convolution.
pub fn transposed_out(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    ((input.checked_sub(1)? * stride) + kernel).checked_sub(2 * padding).filter(|&v| v > 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub rgcn_layers: usize,
    /// Node feature width before the first and after every graph layer.
    pub dim_schedule: Vec<usize>,
    pub relation_count: usize,
    /// Equal to `relation_count` means one free matrix per relation.
    pub num_bases: usize,
    /// Grid nodes per side fed to the decoder.
    pub grid_side: usize,
    /// (input, hidden, output) channels of the two transposed convolutions.
    pub conv_channels: [usize; 3],
    pub kernels: [usize; 2],
    pub stride: usize,
    pub padding: usize,
    pub activation: Activation,
    pub output_side: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            rgcn_layers: 8,
            dim_schedule: vec![21, 19, 17, 15, 13, 11, 9, 8, 7],
            relation_count: RELATION_COUNT,
            num_bases: RELATION_COUNT,
            grid_side: 18,
            conv_channels: [7, 4, 1],
            kernels: [5, 3],
            stride: 2,
            padding: 1,
            activation: Activation::Elu,
            output_side: 73,
        }
    }
}

impl ModelConfig {
    /// Two graph layers on a 2×2 lattice decoded to 9×9; small enough for
    /// finite-difference checks over every parameter.
    pub fn tiny() -> Self {
        Self {
            rgcn_layers: 2,
            dim_schedule: vec![FEATURE_DIM, 6, 5],
            grid_side: 2,
            conv_channels: [5, 3, 1],
            output_side: 9,
            ..Self::default()
        }
    }

    /// Spatial sizes through the decoder: grid, hidden, output.
    pub fn spatial_chain(&self) -> Option<[usize; 3]> {
        let mid = transposed_out(self.grid_side, self.kernels[0], self.stride, self.padding)?;
        let out = transposed_out(mid, self.kernels[1], self.stride, self.padding)?;
        Some([self.grid_side, mid, out])
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let err = |m: String| Err(ModelError::Config(m));
        if self.rgcn_layers == 0 || self.dim_schedule.len() != self.rgcn_layers + 1 {
            return err(format!(
                "dim_schedule needs rgcn_layers + 1 = {} widths, got {}",
                self.rgcn_layers + 1,
                self.dim_schedule.len()
            ));
        }
        if self.dim_schedule[0] != FEATURE_DIM {
            return err(format!("dim_schedule must start at {FEATURE_DIM}, got {}", self.dim_schedule[0]));
        }
        if self.dim_schedule.iter().any(|&d| d == 0) {
            return err("dim_schedule widths must be positive".into());
        }
        if *self.dim_schedule.last().unwrap() != self.conv_channels[0] {
            return err(format!(
                "last graph width {} must equal decoder input channels {}",
                self.dim_schedule.last().unwrap(),
                self.conv_channels[0]
            ));
        }
        if self.conv_channels.iter().any(|&c| c == 0) || self.conv_channels[2] != 1 {
            return err("decoder channels must be positive and end in a single channel".into());
        }
        if self.relation_count == 0 || self.num_bases == 0 || self.num_bases > self.relation_count {
            return err(format!("num_bases must lie in 1..={}", self.relation_count));
        }
        if self.stride == 0 || self.kernels.iter().any(|&k| k == 0) || self.grid_side < 2 {
            return err("kernels, stride and grid side must be positive".into());
        }
        match self.spatial_chain() {
            Some([_, _, out]) if out == self.output_side => Ok(()),
            Some(chain) => err(format!(
                "decoder maps {}x{0} to {}x{1} then {}x{2}, not the configured {}x{3}",
                chain[0], chain[1], chain[2], self.output_side
            )),
            None => err("decoder arithmetic yields an empty output".into()),
        }
    }

    pub fn uses_bases(&self) -> bool {
        self.num_bases < self.relation_count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without dev improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 3e-3, batch_size: 8, max_epochs: 50, patience: 10, seed: 1 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(ModelError::Config("learning rate, batch size, epochs and patience must be positive".into()));
        }
        if self.patience > self.max_epochs {
            return Err(ModelError::Config(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_chain_is_18_37_73() {
        let c = ModelConfig::default();
        assert_eq!(transposed_out(18, 5, 2, 1), Some(37));
        assert_eq!(transposed_out(37, 3, 2, 1), Some(73));
        assert_eq!(c.spatial_chain(), Some([18, 37, 73]));
        c.validate().unwrap();
        ModelConfig::tiny().validate().unwrap();
    }

    #[test]
    fn wrong_arithmetic_rejected() {
        for cfg in [
            ModelConfig { kernels: [3, 3], ..Default::default() },
            ModelConfig { padding: 0, ..Default::default() },
            ModelConfig { stride: 3, ..Default::default() },
            ModelConfig { grid_side: 17, ..Default::default() },
        ] {
            assert!(matches!(cfg.validate(), Err(ModelError::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn schedule_checks() {
        let bad_start = ModelConfig { dim_schedule: vec![20, 19, 17, 15, 13, 11, 9, 8, 7], ..Default::default() };
        assert!(bad_start.validate().is_err());
        let bad_end = ModelConfig { dim_schedule: vec![21, 19, 17, 15, 13, 11, 9, 8, 6], ..Default::default() };
        assert!(bad_end.validate().is_err());
        let bad_len = ModelConfig { rgcn_layers: 7, ..Default::default() };
        assert!(bad_len.validate().is_err());
        let bases = ModelConfig { num_bases: 30, ..Default::default() };
        assert!(bases.validate().is_err());
    }

    #[test]
    fn train_config_checks() {
        TrainConfig::default().validate().unwrap();
        assert!(TrainConfig { patience: 60, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
    }
}
