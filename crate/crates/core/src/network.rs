//! Fully-connected approximator with explicit weight storage.
//!
//! The plain `forward` evaluation here is deliberately independent of the
//! autodiff stack so the two paths can cross-check each other at order zero.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// What an input slot feeds the network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    /// Spatial coordinate along the given axis.
    Space(usize),
    Time,
    /// Problem parameter by index into the problem's parameter vector.
    Param(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSlot {
    pub name: String,
    pub kind: SlotKind,
    /// The trunk consumes `raw * scale`; derivatives requested through the
    /// autodiff stack are always with respect to the raw coordinate.
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputLayout {
    pub slots: Vec<InputSlot>,
}

impl InputLayout {
    pub fn new(slots: Vec<InputSlot>) -> Self {
        InputLayout { slots }
    }

    pub fn arity(&self) -> usize {
        self.slots.len()
    }

    pub fn slot_named(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    pub fn param_slot(&self, param_idx: usize) -> Option<usize> {
        self.slots
            .iter()
            .position(|s| s.kind == SlotKind::Param(param_idx))
    }

    pub fn space_slot(&self, axis: usize) -> Option<usize> {
        self.slots
            .iter()
            .position(|s| s.kind == SlotKind::Space(axis))
    }

    pub fn time_slot(&self) -> Option<usize> {
        self.slots.iter().position(|s| s.kind == SlotKind::Time)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_layout: InputLayout,
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub output_dim: usize,
    pub activation: Activation,
    pub init_seed: u64,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers < 1 {
            return Err(CoreError::InvalidNetworkSpec("hidden_layers must be >= 1".into()));
        }
        if self.hidden_width < 1 {
            return Err(CoreError::InvalidNetworkSpec("hidden_width must be >= 1".into()));
        }
        if self.output_dim < 1 {
            return Err(CoreError::InvalidNetworkSpec("output_dim must be >= 1".into()));
        }
        if self.input_layout.arity() == 0 {
            return Err(CoreError::InvalidNetworkSpec("input layout is empty".into()));
        }
        Ok(())
    }
}

/// Multiplicative/additive output envelopes in the raw inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Wrapper {
    /// u = x*y*(x-1)*(y-1) * trunk — vanishes on the unit-square boundary.
    UnitSquareZero,
    /// Diagnostic: replaces the output with the closed-form steady
    /// advection-diffusion solution of the (x, eps) inputs.
    ManufacturedAdvDiff,
    /// Diagnostic: replaces the two outputs with p = 1 - x, c = 1.
    ManufacturedTwoPhaseSteady,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    /// Row-major (out x in).
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub layers: Vec<Layer>,
    pub wrapper: Option<Wrapper>,
}

impl Network {
    /// Glorot-uniform weights, zero biases, fully determined by `init_seed`.
    pub fn init(spec: NetworkSpec) -> Result<Network> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.init_seed);
        let mut layers = Vec::with_capacity(spec.hidden_layers + 1);
        let mut fan_in = spec.input_layout.arity();
        for l in 0..=spec.hidden_layers {
            let fan_out = if l == spec.hidden_layers {
                spec.output_dim
            } else {
                spec.hidden_width
            };
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            layers.push(Layer {
                w,
                b: vec![0.0; fan_out],
                rows: fan_out,
                cols: fan_in,
            });
            fan_in = fan_out;
        }
        Ok(Network {
            spec,
            layers,
            wrapper: None,
        })
    }

    pub fn with_wrapper(mut self, wrapper: Wrapper) -> Network {
        self.wrapper = Some(wrapper);
        self
    }

    pub fn weight_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Canonical flat ordering: per layer, row-major weights then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.weight_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.weight_count() {
            return Err(CoreError::DimensionMismatch {
                expected: self.weight_count(),
                got: flat.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&flat[off..off + nw]);
            off += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Raw trunk output (no wrapper), scaled inputs applied.
    pub fn trunk_forward(&self, point: &[f64]) -> Result<Vec<f64>> {
        let arity = self.spec.input_layout.arity();
        if point.len() != arity {
            return Err(CoreError::DimensionMismatch {
                expected: arity,
                got: point.len(),
            });
        }
        let mut a: Vec<f64> = point
            .iter()
            .zip(&self.spec.input_layout.slots)
            .map(|(x, s)| x * s.scale)
            .collect();
        let n_layers = self.layers.len();
        for (li, l) in self.layers.iter().enumerate() {
            let mut z = vec![0.0; l.rows];
            for r in 0..l.rows {
                let row = &l.w[r * l.cols..(r + 1) * l.cols];
                let mut acc = l.b[r];
                for (wi, ai) in row.iter().zip(&a) {
                    acc += wi * ai;
                }
                z[r] = acc;
            }
            if li + 1 < n_layers {
                for v in &mut z {
                    *v = v.tanh();
                }
            }
            a = z;
        }
        Ok(a)
    }

    /// Wrapped output: envelope(point) * trunk(point) + offset(point).
    pub fn forward(&self, point: &[f64]) -> Result<Vec<f64>> {
        let trunk = self.trunk_forward(point)?;
        Ok(match self.wrapper {
            None => trunk,
            Some(Wrapper::UnitSquareZero) => {
                let layout = &self.spec.input_layout;
                let x = point[layout.space_slot(0).expect("x slot")];
                let y = point[layout.space_slot(1).expect("y slot")];
                let env = x * y * (x - 1.0) * (y - 1.0);
                trunk.iter().map(|u| env * u).collect()
            }
            Some(Wrapper::ManufacturedAdvDiff) => {
                let x = point[0];
                let eps = point[1];
                vec![manufactured_adv_diff(x, eps)]
            }
            Some(Wrapper::ManufacturedTwoPhaseSteady) => {
                let x = point[0];
                vec![1.0 - x, 1.0]
            }
        })
    }

    pub fn save(&self) -> Vec<u8> {
        let doc = CheckpointDoc {
            schema: 1,
            spec: self.spec.clone(),
            weights: self.layers.iter().map(|l| l.w.clone()).collect(),
            biases: self.layers.iter().map(|l| l.b.clone()).collect(),
            wrapper: self.wrapper,
        };
        serde_json::to_vec_pretty(&doc).expect("checkpoint serialization")
    }

    pub fn load(bytes: &[u8]) -> Result<Network> {
        let doc: CheckpointDoc = serde_json::from_slice(bytes)?;
        if doc.schema != 1 {
            return Err(CoreError::CheckpointSchema(format!(
                "unsupported schema version {}",
                doc.schema
            )));
        }
        doc.spec.validate()?;
        let mut shapes = Vec::new();
        let mut fan_in = doc.spec.input_layout.arity();
        for l in 0..=doc.spec.hidden_layers {
            let fan_out = if l == doc.spec.hidden_layers {
                doc.spec.output_dim
            } else {
                doc.spec.hidden_width
            };
            shapes.push((fan_out, fan_in));
            fan_in = fan_out;
        }
        if doc.weights.len() != shapes.len() || doc.biases.len() != shapes.len() {
            return Err(CoreError::CheckpointSchema(format!(
                "expected {} layers, found {} weight and {} bias arrays",
                shapes.len(),
                doc.weights.len(),
                doc.biases.len()
            )));
        }
        let mut layers = Vec::with_capacity(shapes.len());
        for (i, (rows, cols)) in shapes.iter().enumerate() {
            if doc.weights[i].len() != rows * cols || doc.biases[i].len() != *rows {
                return Err(CoreError::CheckpointSchema(format!(
                    "layer {} shape mismatch: expected {}x{}",
                    i, rows, cols
                )));
            }
            layers.push(Layer {
                w: doc.weights[i].clone(),
                b: doc.biases[i].clone(),
                rows: *rows,
                cols: *cols,
            });
        }
        Ok(Network {
            spec: doc.spec,
            layers,
            wrapper: doc.wrapper,
        })
    }
}

/// Closed-form steady advection-diffusion solution used by the diagnostic
/// wrapper: u = x + 1 - B + B e^{x/eps}, B = 1/(e^{1/eps} - 1).
pub(crate) fn manufactured_adv_diff(x: f64, eps: f64) -> f64 {
    let b = 1.0 / (1.0 / eps).exp_m1();
    x + 1.0 - b + b * (x / eps).exp()
}

#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    schema: u32,
    spec: NetworkSpec,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    wrapper: Option<Wrapper>,
}

/// Convenience layouts used across problems and tests.
pub fn layout_1d_steady(param_names: &[&str]) -> InputLayout {
    let mut slots = vec![InputSlot {
        name: "x".into(),
        kind: SlotKind::Space(0),
        scale: 1.0,
    }];
    for (i, p) in param_names.iter().enumerate() {
        slots.push(InputSlot {
            name: (*p).into(),
            kind: SlotKind::Param(i),
            scale: 1.0,
        });
    }
    InputLayout::new(slots)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec_5x20() -> NetworkSpec {
        NetworkSpec {
            input_layout: layout_1d_steady(&["eps"]),
            hidden_layers: 5,
            hidden_width: 20,
            output_dim: 1,
            activation: Activation::Tanh,
            init_seed: 7,
        }
    }

    #[test]
    fn same_seed_gives_bit_identical_networks() {
        let a = Network::init(spec_5x20()).unwrap();
        let b = Network::init(spec_5x20()).unwrap();
        assert_eq!(a.to_flat(), b.to_flat());
    }

    #[test]
    fn glorot_bound_holds_for_every_layer() {
        let net = Network::init(spec_5x20()).unwrap();
        for l in &net.layers {
            let bound = (6.0 / (l.rows + l.cols) as f64).sqrt();
            assert!(l.w.iter().all(|w| w.abs() < bound));
            assert!(l.b.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn zero_seed_network_is_finite_at_origin() {
        let mut spec = spec_5x20();
        spec.init_seed = 0;
        let net = Network::init(spec).unwrap();
        let out = net.forward(&[0.0, 0.0]).unwrap();
        assert!(out[0].is_finite());
    }

    #[test]
    fn identity_single_layer_returns_input() {
        let spec = NetworkSpec {
            input_layout: InputLayout::new(vec![
                InputSlot { name: "a".into(), kind: SlotKind::Space(0), scale: 1.0 },
                InputSlot { name: "b".into(), kind: SlotKind::Space(1), scale: 1.0 },
            ]),
            hidden_layers: 0,
            hidden_width: 1,
            output_dim: 2,
            activation: Activation::Tanh,
            init_seed: 0,
        };
        // hidden_layers = 0 is rejected by validate; build by hand instead.
        let net = Network {
            spec: NetworkSpec { hidden_layers: 0, ..spec },
            layers: vec![Layer {
                w: vec![1.0, 0.0, 0.0, 1.0],
                b: vec![0.0, 0.0],
                rows: 2,
                cols: 2,
            }],
            wrapper: None,
        };
        let out = net.forward(&[0.3, -0.7]).unwrap();
        assert_eq!(out, vec![0.3, -0.7]);
    }

    #[test]
    fn unit_square_wrapper_vanishes_on_boundary() {
        let spec = NetworkSpec {
            input_layout: InputLayout::new(vec![
                InputSlot { name: "x".into(), kind: SlotKind::Space(0), scale: 1.0 },
                InputSlot { name: "y".into(), kind: SlotKind::Space(1), scale: 1.0 },
            ]),
            hidden_layers: 2,
            hidden_width: 8,
            output_dim: 1,
            activation: Activation::Tanh,
            init_seed: 3,
        };
        let net = Network::init(spec).unwrap().with_wrapper(Wrapper::UnitSquareZero);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let s: f64 = rng.gen();
            let edge = rng.gen_range(0..4);
            let (x, y) = match edge {
                0 => (0.0, s),
                1 => (1.0, s),
                2 => (s, 0.0),
                _ => (s, 1.0),
            };
            let u = net.forward(&[x, y]).unwrap()[0];
            assert!(u.abs() < 1e-15, "wrapped output {} at ({}, {})", u, x, y);
        }
    }

    #[test]
    fn checkpoint_round_trip_is_exact_and_idempotent() {
        let net = Network::init(spec_5x20()).unwrap();
        let bytes = net.save();
        let loaded = Network::load(&bytes).unwrap();
        assert_eq!(net.to_flat(), loaded.to_flat());
        assert_eq!(bytes, loaded.save());
        // Loaded network forward-matches bit-for-bit.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = [rng.gen::<f64>(), rng.gen::<f64>()];
            assert_eq!(net.forward(&p).unwrap(), loaded.forward(&p).unwrap());
        }
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let net = Network::init(spec_5x20()).unwrap();
        let bytes = net.save();
        let err = Network::load(&bytes[..bytes.len() / 2]);
        assert!(err.is_err());
        // Wrong schema version is a schema error.
        let mut doc: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        doc["schema"] = serde_json::json!(99);
        let err = Network::load(serde_json::to_vec(&doc).unwrap().as_slice());
        assert!(matches!(err, Err(CoreError::CheckpointSchema(_))));
    }
}
