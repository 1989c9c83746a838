//! Bundled layer-shape presets.
//!
//! Shapes follow the public model cards. DeiT models run 197 tokens (196
//! patches plus the class token) with 64-dim heads and a 4x MLP. LeViT is
//! a multi-stage design; these presets use its first-stage attention shape
//! (196 tokens, d_k = C/N, 2x MLP) as the representative layer.

use crate::error::{Error, Result};
use crate::sim::LayerShape;

#[derive(Debug, Clone, Copy)]
pub struct ModelPreset {
    pub name: &'static str,
    pub shape: LayerShape,
}

const fn shape(n: usize, h: usize, d_k: usize, mlp_hidden: usize) -> LayerShape {
    LayerShape {
        n,
        h,
        d_k,
        d: h * d_k,
        mlp_hidden,
    }
}

pub const PRESETS: &[ModelPreset] = &[
    ModelPreset {
        name: "deit-tiny",
        shape: shape(197, 3, 64, 768),
    },
    ModelPreset {
        name: "deit-small",
        shape: shape(197, 6, 64, 1536),
    },
    ModelPreset {
        name: "deit-base",
        shape: shape(197, 12, 64, 3072),
    },
    ModelPreset {
        name: "levit-128",
        shape: shape(196, 4, 32, 256),
    },
    ModelPreset {
        name: "levit-192",
        shape: shape(196, 3, 64, 384),
    },
    ModelPreset {
        name: "levit-256",
        shape: shape(196, 4, 64, 512),
    },
];

pub fn preset(name: &str) -> Result<ModelPreset> {
    PRESETS
        .iter()
        .find(|p| p.name == name)
        .copied()
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
            Error::Argument(format!(
                "unknown preset '{name}'; available: {}",
                names.join(", ")
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deit_base_shape() {
        let p = preset("deit-base").unwrap();
        assert_eq!(p.shape.n, 197);
        assert_eq!(p.shape.h, 12);
        assert_eq!(p.shape.d, 768);
    }

    #[test]
    fn all_presets_consistent() {
        for p in PRESETS {
            assert_eq!(p.shape.d, p.shape.h * p.shape.d_k, "{}", p.name);
            assert!(p.shape.n > 0 && p.shape.mlp_hidden > 0);
        }
    }

    #[test]
    fn unknown_preset_errors() {
        assert!(preset("resnet-50").is_err());
    }
}
