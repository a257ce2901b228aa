//! Line-oriented text format for network weights.
//!
//! ```text
//! DFAOIT-MLP 1
//! 10 32 16 3
//! <bias> <w_0> ... <w_{in-1}>      one line per output neuron, layer by layer
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::network::{Activation, Dense, MlpWeights, DFAOIT_DIMS};
use super::MlpError;

pub const WEIGHTS_MAGIC: &str = "DFAOIT-MLP 1";

pub fn weights_to_string(net: &MlpWeights) -> String {
    let mut out = String::new();
    out.push_str(WEIGHTS_MAGIC);
    out.push('\n');
    let dims: Vec<String> = net.dims().iter().map(usize::to_string).collect();
    out.push_str(&dims.join(" "));
    out.push('\n');
    for layer in net.layers() {
        for o in 0..layer.outputs {
            write!(out, "{:.16e}", layer.biases[o]).unwrap();
            for w in layer.row(o) {
                write!(out, " {w:.16e}").unwrap();
            }
            out.push('\n');
        }
    }
    out
}

/// Parses a weights file. With `expected` set, the layer widths must match it.
pub fn parse_weights(text: &str, expected: Option<&[usize]>) -> Result<MlpWeights, MlpError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, magic)) if magic == WEIGHTS_MAGIC => {}
        _ => return Err(MlpError::BadMagic),
    }
    let (dim_line, dims_text) = lines.next().ok_or(MlpError::Malformed { line: 2, message: "missing layer widths".into() })?;
    let dims = dims_text
        .split_whitespace()
        .map(|tok| tok.parse::<usize>().map_err(|_| MlpError::NonNumeric { line: dim_line, token: tok.to_string() }))
        .collect::<Result<Vec<_>, _>>()?;
    if dims.len() < 2 || dims.contains(&0) {
        return Err(MlpError::Malformed { line: dim_line, message: format!("bad layer widths {dims:?}") });
    }
    if let Some(expected) = expected {
        if dims != expected {
            return Err(MlpError::DimMismatch { expected: expected.to_vec(), found: dims });
        }
    }

    let count = dims.len() - 1;
    let mut layers = Vec::with_capacity(count);
    for (l, w) in dims.windows(2).enumerate() {
        let activation = if l + 1 == count { Activation::Sigmoid } else { Activation::Relu };
        let mut layer = Dense::zeros(w[0], w[1], activation);
        for o in 0..layer.outputs {
            let (line, row) = lines
                .next()
                .ok_or(MlpError::Malformed { line: 0, message: format!("file ends inside layer {l}") })?;
            let values = row
                .split_whitespace()
                .map(|tok| match tok.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(MlpError::NonNumeric { line, token: tok.to_string() }),
                })
                .collect::<Result<Vec<_>, _>>()?;
            if values.len() != layer.inputs + 1 {
                return Err(MlpError::Malformed {
                    line,
                    message: format!("expected {} values, found {}", layer.inputs + 1, values.len()),
                });
            }
            layer.biases[o] = values[0];
            layer.weights[o * layer.inputs..(o + 1) * layer.inputs].copy_from_slice(&values[1..]);
        }
        layers.push(layer);
    }
    if let Some((line, extra)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(MlpError::Malformed { line, message: format!("trailing content: {extra:.32}") });
    }
    Ok(MlpWeights::from_layers(layers))
}

pub fn save_weights(net: &MlpWeights, path: impl AsRef<Path>) -> Result<(), MlpError> {
    fs::write(path, weights_to_string(net))?;
    Ok(())
}

/// Loads a weights file, requiring the 10-32-16-3 layout.
pub fn load_weights(path: impl AsRef<Path>) -> Result<MlpWeights, MlpError> {
    parse_weights(&fs::read_to_string(path)?, Some(&DFAOIT_DIMS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_net_round_trip_exact() {
        let net = MlpWeights::dfaoit_zeros();
        assert_eq!(parse_weights(&weights_to_string(&net), Some(&DFAOIT_DIMS)).unwrap(), net);
    }

    #[test]
    fn layout() {
        let text = weights_to_string(&MlpWeights::dfaoit_zeros());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "DFAOIT-MLP 1");
        assert_eq!(lines[1], "10 32 16 3");
        assert_eq!(lines.len(), 2 + 32 + 16 + 3);
        assert_eq!(lines[2].split_whitespace().count(), 11);
        assert_eq!(lines.last().unwrap().split_whitespace().count(), 17);
    }

    #[test]
    fn wrong_dims_rejected() {
        let text = weights_to_string(&MlpWeights::zeros(&[10, 32, 16, 4]));
        assert!(matches!(
            parse_weights(&text, Some(&DFAOIT_DIMS)),
            Err(MlpError::DimMismatch { found, .. }) if found == vec![10, 32, 16, 4]
        ));
        assert!(parse_weights(&text, None).is_ok());
    }

    #[test]
    fn errors_are_distinct() {
        let good = weights_to_string(&MlpWeights::dfaoit_zeros());
        assert!(matches!(parse_weights(&good.replacen("DFAOIT-MLP 1", "MLP 2", 1), None), Err(MlpError::BadMagic)));
        assert!(matches!(parse_weights("", None), Err(MlpError::BadMagic)));
        let bad_token = good.replacen("0.0000000000000000e0", "zero", 1);
        assert!(matches!(parse_weights(&bad_token, None), Err(MlpError::NonNumeric { line: 3, .. })), "{bad_token:.80}");
        let truncated: String = good.lines().take(20).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_weights(&truncated, None), Err(MlpError::Malformed { .. })));
        let extra = format!("{good}1 2 3\n");
        assert!(matches!(parse_weights(&extra, None), Err(MlpError::Malformed { .. })));
        assert!(matches!(parse_weights(&good.replacen("10 32", "10 x", 1), None), Err(MlpError::NonNumeric { line: 2, .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn random_net_round_trip(seed in any::<u64>()) {
            let net = MlpWeights::he_uniform(&DFAOIT_DIMS, seed);
            let back = parse_weights(&weights_to_string(&net), Some(&DFAOIT_DIMS)).unwrap();
            for (a, b) in net.layers().iter().zip(back.layers()) {
                for (x, y) in a.weights.iter().chain(&a.biases).zip(b.weights.iter().chain(&b.biases)) {
                    prop_assert!((x - y).abs() <= 1e-7);
                }
            }
        }
    }
}
