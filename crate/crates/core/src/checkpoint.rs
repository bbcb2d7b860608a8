//! Parameter checkpoints in the container format.

use std::path::Path;

use crate::container::Container;
use crate::error::{Error, Result};
use crate::network::{MlpConfig, ParamVector};

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ParamVector,
    pub seed: u64,
    pub iteration: usize,
    /// Additional `key=value` fields, such as the run configuration.
    pub extra: Vec<(String, String)>,
}

const RESERVED: [&str; 7] = ["kind", "input_dim", "width", "depth", "output_dim", "seed", "iteration"];

impl Checkpoint {
    pub fn to_container(&self) -> Container {
        let c = &self.params.config;
        let mut header: Vec<(String, String)> = vec![
            ("kind".into(), "checkpoint".into()),
            ("input_dim".into(), c.input_dim.to_string()),
            ("width".into(), c.width.to_string()),
            ("depth".into(), c.depth.to_string()),
            ("output_dim".into(), c.output_dim.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("iteration".into(), self.iteration.to_string()),
        ];
        header.extend(
            self.extra
                .iter()
                .filter(|(k, _)| !RESERVED.contains(&k.as_str()))
                .cloned(),
        );
        Container::new(header, self.params.data.clone())
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        if c.get("kind") != Some("checkpoint") {
            return Err(Error::Format("not a checkpoint file".into()));
        }
        let config = MlpConfig {
            input_dim: c.parse("input_dim")?,
            width: c.parse("width")?,
            depth: c.parse("depth")?,
            output_dim: c.parse("output_dim")?,
        };
        config.validate()?;
        let params = ParamVector::from_vec(config, c.data.clone())?;
        let extra = c
            .header
            .iter()
            .filter(|(k, _)| !RESERVED.contains(&k.as_str()))
            .cloned()
            .collect();
        Ok(Self {
            params,
            seed: c.parse("seed")?,
            iteration: c.parse("iteration")?,
            extra,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_container().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_container(&Container::load(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_xavier;

    #[test]
    fn round_trip_is_lossless() {
        let cfg = MlpConfig::new(2, 7, 3);
        let mut params = init_xavier(&cfg, 5).unwrap();
        params.data[0] = f64::MIN_POSITIVE;
        params.data[1] = -0.1;
        let ck = Checkpoint {
            params,
            seed: 5,
            iteration: 42,
            extra: vec![("problem".into(), "burgers".into())],
        };
        let mut buf = Vec::new();
        ck.to_container().write_to(&mut buf).unwrap();
        let back = Checkpoint::from_container(&Container::read_from(&buf[..]).unwrap()).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn wrong_length_is_rejected() {
        let cfg = MlpConfig::new(2, 4, 2);
        let mut c = Checkpoint {
            params: ParamVector::zeros(cfg),
            seed: 0,
            iteration: 0,
            extra: Vec::new(),
        }
        .to_container();
        c.data.pop();
        assert!(Checkpoint::from_container(&c).is_err());
    }
}
