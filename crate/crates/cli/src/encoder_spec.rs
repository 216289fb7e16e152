//! Text grammar for encoder architectures.
//!
//! A spec is a whitespace-separated list of layer items, e.g.
//! `dense(160,100,relu) dense(100,40,relu) dense(40,2,sigmoid)` or
//! `conv1d(1,128,10,tanh) avgpool1d(2) flatten dense(4800,20,sigmoid)`.
//! The same grammar appears in config files (`encoder = ...`) and in
//! checkpoint headers, so a checkpoint is self-describing.

use bipde_core::nn::{Activation, Conv1dLayer, Conv2dLayer, DenseLayer, Layer, Model};
use rand::RngCore;

use crate::config::ConfigError;

#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
        act: Activation,
    },
    Conv1d {
        in_ch: usize,
        out_ch: usize,
        k: usize,
        act: Activation,
    },
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        k: usize,
        act: Activation,
    },
    MaxPool1d { pool: usize },
    MaxPool2d { pool: usize },
    AvgPool1d { pool: usize },
    AvgPool2d { pool: usize },
    Dropout { rate: f64 },
    Flatten,
}

fn act_to_string(act: &Activation) -> String {
    match act {
        Activation::Identity => "identity".into(),
        Activation::Relu => "relu".into(),
        Activation::Sigmoid => "sigmoid".into(),
        Activation::Tanh => "tanh".into(),
        Activation::ScaledSigmoid { lo, hi } => format!("scaled_sigmoid({lo},{hi})"),
    }
}

fn parse_act(s: &str) -> Result<Activation, ConfigError> {
    let s = s.trim();
    match s {
        "identity" => Ok(Activation::Identity),
        "relu" => Ok(Activation::Relu),
        "sigmoid" => Ok(Activation::Sigmoid),
        "tanh" => Ok(Activation::Tanh),
        _ => {
            if let Some(args) = s
                .strip_prefix("scaled_sigmoid(")
                .and_then(|r| r.strip_suffix(')'))
            {
                let (lo, hi) = args
                    .split_once(',')
                    .ok_or_else(|| ConfigError::new("scaled_sigmoid needs two bounds"))?;
                let lo: f64 = lo
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError::new("bad scaled_sigmoid bound"))?;
                let hi: f64 = hi
                    .trim()
                    .parse()
                    .map_err(|_| ConfigError::new("bad scaled_sigmoid bound"))?;
                Ok(Activation::ScaledSigmoid { lo, hi })
            } else {
                Err(ConfigError::new(format!("unknown activation '{s}'")))
            }
        }
    }
}

impl LayerSpec {
    pub fn to_text(&self) -> String {
        match self {
            LayerSpec::Dense { input, output, act } => {
                format!("dense({input},{output},{})", act_to_string(act))
            }
            LayerSpec::Conv1d {
                in_ch,
                out_ch,
                k,
                act,
            } => format!("conv1d({in_ch},{out_ch},{k},{})", act_to_string(act)),
            LayerSpec::Conv2d {
                in_ch,
                out_ch,
                k,
                act,
            } => format!("conv2d({in_ch},{out_ch},{k},{})", act_to_string(act)),
            LayerSpec::MaxPool1d { pool } => format!("maxpool1d({pool})"),
            LayerSpec::MaxPool2d { pool } => format!("maxpool2d({pool})"),
            LayerSpec::AvgPool1d { pool } => format!("avgpool1d({pool})"),
            LayerSpec::AvgPool2d { pool } => format!("avgpool2d({pool})"),
            LayerSpec::Dropout { rate } => format!("dropout({rate})"),
            LayerSpec::Flatten => "flatten".into(),
        }
    }
}

/// Split a spec string into layer items at paren depth zero.
fn split_items(spec: &str) -> Vec<String> {
    let mut items = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for ch in spec.chars() {
        match ch {
            '(' => {
                depth += 1;
                cur.push(ch);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                cur.push(ch);
            }
            c if c.is_whitespace() && depth == 0 => {
                if !cur.is_empty() {
                    items.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        items.push(cur);
    }
    items
}

/// Split an argument list at comma depth zero (activations may nest parens).
fn split_args(args: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0usize;
    let mut cur = String::new();
    for ch in args.chars() {
        match ch {
            '(' => {
                depth += 1;
                cur.push(ch);
            }
            ')' => {
                depth = depth.saturating_sub(1);
                cur.push(ch);
            }
            ',' if depth == 0 => out.push(std::mem::take(&mut cur)),
            c => cur.push(c),
        }
    }
    out.push(cur);
    out
}

pub fn parse_spec(spec: &str) -> Result<Vec<LayerSpec>, ConfigError> {
    let mut layers = Vec::new();
    for item in split_items(spec) {
        if item == "flatten" {
            layers.push(LayerSpec::Flatten);
            continue;
        }
        let (name, rest) = item
            .split_once('(')
            .ok_or_else(|| ConfigError::new(format!("bad layer item '{item}'")))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| ConfigError::new(format!("unbalanced parens in '{item}'")))?;
        let args = split_args(args);
        let n = |i: usize| -> Result<usize, ConfigError> {
            args.get(i)
                .and_then(|a| a.trim().parse().ok())
                .ok_or_else(|| ConfigError::new(format!("bad integer argument in '{item}'")))
        };
        let layer = match name {
            "dense" => LayerSpec::Dense {
                input: n(0)?,
                output: n(1)?,
                act: parse_act(args.get(2).map(|s| s.as_str()).unwrap_or(""))?,
            },
            "conv1d" => LayerSpec::Conv1d {
                in_ch: n(0)?,
                out_ch: n(1)?,
                k: n(2)?,
                act: parse_act(args.get(3).map(|s| s.as_str()).unwrap_or(""))?,
            },
            "conv2d" => LayerSpec::Conv2d {
                in_ch: n(0)?,
                out_ch: n(1)?,
                k: n(2)?,
                act: parse_act(args.get(3).map(|s| s.as_str()).unwrap_or(""))?,
            },
            "maxpool1d" => LayerSpec::MaxPool1d { pool: n(0)? },
            "maxpool2d" => LayerSpec::MaxPool2d { pool: n(0)? },
            "avgpool1d" => LayerSpec::AvgPool1d { pool: n(0)? },
            "avgpool2d" => LayerSpec::AvgPool2d { pool: n(0)? },
            "dropout" => {
                let rate: f64 = args
                    .first()
                    .and_then(|a| a.trim().parse().ok())
                    .ok_or_else(|| ConfigError::new("bad dropout rate"))?;
                LayerSpec::Dropout { rate }
            }
            other => return Err(ConfigError::new(format!("unknown layer '{other}'"))),
        };
        layers.push(layer);
    }
    if layers.is_empty() {
        return Err(ConfigError::new("empty encoder spec"));
    }
    Ok(layers)
}

pub fn spec_to_text(specs: &[LayerSpec]) -> String {
    specs
        .iter()
        .map(LayerSpec::to_text)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Instantiate a model with Glorot-uniform weights from the given RNG.
pub fn build_model(specs: &[LayerSpec], rng: &mut dyn RngCore) -> Model {
    let layers = specs
        .iter()
        .map(|spec| match *spec {
            LayerSpec::Dense { input, output, act } => {
                Layer::Dense(DenseLayer::glorot(input, output, act, rng))
            }
            LayerSpec::Conv1d {
                in_ch,
                out_ch,
                k,
                act,
            } => Layer::Conv1d(Conv1dLayer::glorot(in_ch, out_ch, k, act, rng)),
            LayerSpec::Conv2d {
                in_ch,
                out_ch,
                k,
                act,
            } => Layer::Conv2d(Conv2dLayer::glorot(in_ch, out_ch, k, act, rng)),
            LayerSpec::MaxPool1d { pool } => Layer::MaxPool1d { pool },
            LayerSpec::MaxPool2d { pool } => Layer::MaxPool2d { pool },
            LayerSpec::AvgPool1d { pool } => Layer::AvgPool1d { pool },
            LayerSpec::AvgPool2d { pool } => Layer::AvgPool2d { pool },
            LayerSpec::Dropout { rate } => Layer::Dropout { rate },
            LayerSpec::Flatten => Layer::Flatten,
        })
        .collect();
    Model::new(layers)
}

/// Recover the spec of an instantiated model (for checkpoint headers).
pub fn spec_of_model(model: &Model) -> Vec<LayerSpec> {
    model
        .layers
        .iter()
        .map(|layer| match layer {
            Layer::Dense(l) => LayerSpec::Dense {
                input: l.w.shape()[1],
                output: l.w.shape()[0],
                act: l.activation,
            },
            Layer::Conv1d(l) => LayerSpec::Conv1d {
                in_ch: l.kernels.shape()[1],
                out_ch: l.kernels.shape()[0],
                k: l.kernels.shape()[2],
                act: l.activation,
            },
            Layer::Conv2d(l) => LayerSpec::Conv2d {
                in_ch: l.kernels.shape()[1],
                out_ch: l.kernels.shape()[0],
                k: l.kernels.shape()[2],
                act: l.activation,
            },
            Layer::MaxPool1d { pool } => LayerSpec::MaxPool1d { pool: *pool },
            Layer::MaxPool2d { pool } => LayerSpec::MaxPool2d { pool: *pool },
            Layer::AvgPool1d { pool } => LayerSpec::AvgPool1d { pool: *pool },
            Layer::AvgPool2d { pool } => LayerSpec::AvgPool2d { pool: *pool },
            Layer::Dropout { rate } => LayerSpec::Dropout { rate: *rate },
            Layer::Flatten => LayerSpec::Flatten,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spec_text_roundtrips() {
        let text = "conv1d(1,128,10,tanh) avgpool1d(2) flatten dense(4800,20,sigmoid) dropout(0.2) dense(20,2,scaled_sigmoid(0,0.05))";
        let specs = parse_spec(text).unwrap();
        assert_eq!(spec_to_text(&specs), text);
        let again = parse_spec(&spec_to_text(&specs)).unwrap();
        assert_eq!(specs, again);
    }

    #[test]
    fn bad_specs_are_rejected() {
        assert!(parse_spec("").is_err());
        assert!(parse_spec("dense(3,2,relu").is_err());
        assert!(parse_spec("swish(1)").is_err());
        assert!(parse_spec("dense(a,b,relu)").is_err());
    }

    #[test]
    fn built_model_matches_parameter_count() {
        // The 1D inverse-transform encoder: 20,222 trainable parameters.
        let specs =
            parse_spec("dense(160,100,relu) dense(100,40,relu) dense(40,2,sigmoid)").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = build_model(&specs, &mut rng);
        assert_eq!(model.param_count(), 20_222);
        assert_eq!(spec_of_model(&model), specs);
    }

    #[test]
    fn rbf_inverse_encoder_matches_parameter_count() {
        // conv(32,k5) pool conv(16,k5) pool flatten dense(352,100) dense(100,41):
        // 42,209 trainable parameters on a length-100 input.
        let specs = parse_spec(
            "conv1d(1,32,5,relu) maxpool1d(2) conv1d(32,16,5,relu) maxpool1d(2) flatten dense(352,100,relu) dense(100,41,sigmoid)",
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let model = build_model(&specs, &mut rng);
        assert_eq!(model.param_count(), 42_209);
    }
}
