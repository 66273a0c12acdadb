//! Sequence layers recorded on the tape: bidirectional LSTM and the
//! convolutional sequence encoder.

use super::params::{ParamInit, ParamStore};
use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Slot handles for one LSTM direction. Gate layout in the stacked weight
/// matrices is input, forget, candidate, output.
#[derive(Clone, Copy, Debug)]
pub struct LstmDir {
    pub w_ih: usize,
    pub w_hh: usize,
    pub b: usize,
}

/// Slot handles for a bidirectional LSTM.
#[derive(Clone, Copy, Debug)]
pub struct BiLstm {
    pub fwd: LstmDir,
    pub bwd: LstmDir,
    pub input_dim: usize,
    pub hidden: usize,
}

impl BiLstm {
    /// Registers fresh parameters under `prefix`.
    pub fn register<S: Scalar>(
        store: &mut ParamStore<S>,
        init: &mut ParamInit,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
    ) -> Result<Self> {
        let dir = |store: &mut ParamStore<S>, init: &mut ParamInit, d: &str| -> Result<LstmDir> {
            Ok(LstmDir {
                w_ih: store.register(
                    &format!("{prefix}.{d}.w_ih"),
                    init.glorot(&[4 * hidden, input_dim], input_dim, 4 * hidden),
                )?,
                w_hh: store.register(
                    &format!("{prefix}.{d}.w_hh"),
                    init.glorot(&[4 * hidden, hidden], hidden, 4 * hidden),
                )?,
                b: store.register(&format!("{prefix}.{d}.b"), init.zeros(&[4 * hidden]))?,
            })
        };
        Ok(BiLstm {
            fwd: dir(store, init, "fwd")?,
            bwd: dir(store, init, "bwd")?,
            input_dim,
            hidden,
        })
    }

    /// Registers `prefix` as aliases of another BiLSTM's slots.
    pub fn alias<S: Scalar>(store: &mut ParamStore<S>, of: &BiLstm, prefix: &str) -> Result<Self> {
        let dir = |store: &mut ParamStore<S>, src: &LstmDir, d: &str| -> Result<LstmDir> {
            store.alias(&format!("{prefix}.{d}.w_ih"), src.w_ih)?;
            store.alias(&format!("{prefix}.{d}.w_hh"), src.w_hh)?;
            store.alias(&format!("{prefix}.{d}.b"), src.b)?;
            Ok(*src)
        };
        Ok(BiLstm {
            fwd: dir(store, &of.fwd, "fwd")?,
            bwd: dir(store, &of.bwd, "bwd")?,
            input_dim: of.input_dim,
            hidden: of.hidden,
        })
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden
    }
}

fn lstm_direction<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    dir: &LstmDir,
    hidden: usize,
    inputs: &[NodeId],
) -> Result<Vec<NodeId>> {
    let w_ih = tape.param(store, dir.w_ih);
    let w_hh = tape.param(store, dir.w_hh);
    let b = tape.param(store, dir.b);
    let mut h = tape.constant(Tensor::zeros(&[hidden]));
    let mut c = tape.constant(Tensor::zeros(&[hidden]));
    let mut states = Vec::with_capacity(inputs.len());
    for &x in inputs {
        let zx = tape.matvec(w_ih, x)?;
        let zh = tape.matvec(w_hh, h)?;
        let z0 = tape.add(zx, zh)?;
        let z = tape.add(z0, b)?;
        let i_gate = tape.slice(z, 0, hidden)?;
        let f_gate = tape.slice(z, hidden, hidden)?;
        let g_cand = tape.slice(z, 2 * hidden, hidden)?;
        let o_gate = tape.slice(z, 3 * hidden, hidden)?;
        let i = tape.logistic(i_gate)?;
        let f = tape.logistic(f_gate)?;
        let g = tape.tanh(g_cand)?;
        let o = tape.logistic(o_gate)?;
        let fc = tape.mul(f, c)?;
        let ig = tape.mul(i, g)?;
        c = tape.add(fc, ig)?;
        let ct = tape.tanh(c)?;
        h = tape.mul(o, ct)?;
        states.push(h);
    }
    Ok(states)
}

/// Runs a bidirectional LSTM over per-step input vectors.
///
/// Returns the per-step states `[fwd_t ; bwd_t]` and the final state built
/// from each direction's last processed step, `[fwd_T ; bwd_0]`.
pub fn bilstm<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    layer: &BiLstm,
    inputs: &[NodeId],
) -> Result<(Vec<NodeId>, NodeId)> {
    if inputs.is_empty() {
        return Err(Error::Argument("bilstm over an empty sequence".into()));
    }
    let fwd = lstm_direction(tape, store, &layer.fwd, layer.hidden, inputs)?;
    let rev_inputs: Vec<NodeId> = inputs.iter().rev().copied().collect();
    let bwd_rev = lstm_direction(tape, store, &layer.bwd, layer.hidden, &rev_inputs)?;
    let t_len = inputs.len();
    let mut states = Vec::with_capacity(t_len);
    for t in 0..t_len {
        states.push(tape.concat(&[fwd[t], bwd_rev[t_len - 1 - t]])?);
    }
    let last = tape.concat(&[fwd[t_len - 1], bwd_rev[t_len - 1]])?;
    Ok((states, last))
}

/// Slot handles for the convolutional encoder: one filter bank per window
/// width plus the projection that merges the pooled features.
#[derive(Clone, Debug)]
pub struct ConvBlock {
    pub filters: Vec<(usize, usize, usize)>, // (width, weight slot, bias slot)
    pub proj_w: usize,
    pub proj_b: usize,
    pub input_dim: usize,
    pub per_width: usize,
    pub output_dim: usize,
}

impl ConvBlock {
    pub const WIDTHS: [usize; 3] = [3, 4, 5];

    pub fn register<S: Scalar>(
        store: &mut ParamStore<S>,
        init: &mut ParamInit,
        prefix: &str,
        input_dim: usize,
        per_width: usize,
        output_dim: usize,
    ) -> Result<Self> {
        let mut filters = Vec::new();
        for width in Self::WIDTHS {
            let w = store.register(
                &format!("{prefix}.conv{width}.w"),
                init.glorot(&[per_width, width * input_dim], width * input_dim, per_width),
            )?;
            let b = store.register(&format!("{prefix}.conv{width}.b"), init.zeros(&[per_width]))?;
            filters.push((width, w, b));
        }
        let total = Self::WIDTHS.len() * per_width;
        let proj_w = store.register(
            &format!("{prefix}.proj.w"),
            init.glorot(&[output_dim, total], total, output_dim),
        )?;
        let proj_b = store.register(&format!("{prefix}.proj.b"), init.zeros(&[output_dim]))?;
        Ok(ConvBlock {
            filters,
            proj_w,
            proj_b,
            input_dim,
            per_width,
            output_dim,
        })
    }

    pub fn alias<S: Scalar>(store: &mut ParamStore<S>, of: &ConvBlock, prefix: &str) -> Result<Self> {
        for (width, w, b) in &of.filters {
            store.alias(&format!("{prefix}.conv{width}.w"), *w)?;
            store.alias(&format!("{prefix}.conv{width}.b"), *b)?;
        }
        store.alias(&format!("{prefix}.proj.w"), of.proj_w)?;
        store.alias(&format!("{prefix}.proj.b"), of.proj_b)?;
        Ok(of.clone())
    }
}

/// Multi-width 1-D convolution over time, tanh, max-over-time pooling,
/// concatenation and a linear projection.
///
/// The input must already be padded to at least the widest window.
pub fn conv_encode<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    block: &ConvBlock,
    inputs: &[NodeId],
) -> Result<NodeId> {
    let max_width = *ConvBlock::WIDTHS.iter().max().expect("non-empty widths");
    if inputs.len() < max_width {
        return Err(Error::Argument(format!(
            "conv_encode needs at least {max_width} steps, got {}",
            inputs.len()
        )));
    }
    let mut pooled = Vec::new();
    for &(width, w, b) in &block.filters {
        let wp = tape.param(store, w);
        let bp = tape.param(store, b);
        let mut responses = Vec::new();
        for start in 0..=inputs.len() - width {
            let window = tape.concat(&inputs[start..start + width])?;
            let lin = tape.matvec(wp, window)?;
            let biased = tape.add(lin, bp)?;
            responses.push(tape.tanh(biased)?);
        }
        pooled.push(tape.max_rows(&responses)?);
    }
    let cat = tape.concat(&pooled)?;
    let proj_w = tape.param(store, block.proj_w);
    let proj_b = tape.param(store, block.proj_b);
    let projected = tape.matvec(proj_w, cat)?;
    tape.add(projected, proj_b)
}

/// Slot handles for a single feed-forward layer `tanh(Wx + b)`.
#[derive(Clone, Copy, Debug)]
pub struct Dense {
    pub w: usize,
    pub b: usize,
}

impl Dense {
    pub fn register<S: Scalar>(
        store: &mut ParamStore<S>,
        init: &mut ParamInit,
        prefix: &str,
        input_dim: usize,
        output_dim: usize,
    ) -> Result<Self> {
        Ok(Dense {
            w: store.register(
                &format!("{prefix}.w"),
                init.glorot(&[output_dim, input_dim], input_dim, output_dim),
            )?,
            b: store.register(&format!("{prefix}.b"), init.zeros(&[output_dim]))?,
        })
    }
}

/// Applies `tanh(Wx + b)`.
pub fn dense_tanh<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    layer: &Dense,
    x: NodeId,
) -> Result<NodeId> {
    let w = tape.param(store, layer.w);
    let b = tape.param(store, layer.b);
    let lin = tape.matvec(w, x)?;
    let biased = tape.add(lin, b)?;
    tape.tanh(biased)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::fd::fd_check;
    use crate::autodiff::params::ParamInit;

    fn const_rows(tape: &mut Tape<f64>, rows: &[Vec<f64>]) -> Vec<NodeId> {
        rows.iter()
            .map(|r| tape.constant(Tensor::vector(r.clone())))
            .collect()
    }

    #[test]
    fn bilstm_with_zero_weights_and_inputs_is_zero() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let mut init = ParamInit::new(0);
        let layer = BiLstm::register(&mut store, &mut init, "enc", 3, 2).unwrap();
        for slot in 0..store.n_slots() {
            for v in store.get_mut(slot).data_mut() {
                *v = 0.0;
            }
        }
        let mut tape = Tape::new();
        let inputs = const_rows(&mut tape, &[vec![0.0; 3], vec![0.0; 3]]);
        let (_, last) = bilstm(&mut tape, &store, &layer, &inputs).unwrap();
        assert!(tape.value(last).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bilstm_single_step_states_equal_final() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let mut init = ParamInit::new(3);
        let layer = BiLstm::register(&mut store, &mut init, "enc", 3, 2).unwrap();
        let mut tape = Tape::new();
        let inputs = const_rows(&mut tape, &[vec![0.4, -0.2, 0.9]]);
        let (states, last) = bilstm(&mut tape, &store, &layer, &inputs).unwrap();
        assert_eq!(states.len(), 1);
        assert_eq!(tape.value(states[0]).data(), tape.value(last).data());
    }

    #[test]
    fn bilstm_rejects_empty_sequences() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let mut init = ParamInit::new(3);
        let layer = BiLstm::register(&mut store, &mut init, "enc", 3, 2).unwrap();
        let mut tape = Tape::new();
        assert!(bilstm(&mut tape, &store, &layer, &[]).is_err());
    }

    #[test]
    fn bilstm_gradients_match_finite_differences() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let mut init = ParamInit::new(11);
        let layer = BiLstm::register(&mut store, &mut init, "enc", 3, 2).unwrap();
        let xs = vec![vec![0.3, -0.8, 0.1], vec![1.2, 0.4, -0.5], vec![-0.7, 0.2, 0.6]];
        let run = |store: &ParamStore<f64>| -> crate::error::Result<f64> {
            let mut tape = Tape::new();
            let inputs = const_rows(&mut tape, &xs);
            let (states, last) = bilstm(&mut tape, store, &layer, &inputs)?;
            let mean = tape.mean_rows(&states)?;
            let loss = tape.dot(last, mean)?;
            tape.item(loss)
        };
        let analytic = {
            let mut tape = Tape::new();
            let inputs = const_rows(&mut tape, &xs);
            let (states, last) = bilstm(&mut tape, &store, &layer, &inputs).unwrap();
            let mean = tape.mean_rows(&states).unwrap();
            let loss = tape.dot(last, mean).unwrap();
            tape.backward(loss, &store).unwrap()
        };
        let err = fd_check(&store, &analytic, 1e-4, run).unwrap();
        assert!(err < 1e-3, "max relative error {err}");
    }

    #[test]
    fn conv_with_zero_inputs_and_biases_is_zero() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let mut init = ParamInit::new(5);
        let block = ConvBlock::register(&mut store, &mut init, "enc", 3, 2, 4).unwrap();
        let mut tape = Tape::new();
        let inputs = const_rows(&mut tape, &vec![vec![0.0; 3]; 6]);
        let out = conv_encode(&mut tape, &store, &block, &inputs).unwrap();
        assert!(tape.value(out).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_pooling_is_invariant_over_constant_sequences() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let mut init = ParamInit::new(6);
        let block = ConvBlock::register(&mut store, &mut init, "enc", 3, 2, 4).unwrap();
        let row = vec![0.3, -0.9, 0.5];
        let out_of = |len: usize| {
            let mut tape = Tape::new();
            let inputs = const_rows(&mut tape, &vec![row.clone(); len]);
            let out = conv_encode(&mut tape, &store, &block, &inputs).unwrap();
            tape.value(out).data().to_vec()
        };
        assert_eq!(out_of(5), out_of(9));
    }

    #[test]
    fn conv_rejects_sequences_shorter_than_the_widest_window() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let mut init = ParamInit::new(6);
        let block = ConvBlock::register(&mut store, &mut init, "enc", 3, 2, 4).unwrap();
        let mut tape = Tape::new();
        let inputs = const_rows(&mut tape, &vec![vec![0.0; 3]; 4]);
        assert!(conv_encode(&mut tape, &store, &block, &inputs).is_err());
    }

    #[test]
    fn conv_gradients_match_finite_differences() {
        let mut store: ParamStore<f64> = ParamStore::new();
        let mut init = ParamInit::new(9);
        let block = ConvBlock::register(&mut store, &mut init, "enc", 2, 2, 3).unwrap();
        let xs: Vec<Vec<f64>> = vec![
            vec![0.3, -0.8],
            vec![1.2, 0.4],
            vec![-0.7, 0.2],
            vec![0.9, -0.1],
            vec![-0.4, 0.6],
            vec![0.1, 0.8],
        ];
        let run = |store: &ParamStore<f64>| -> crate::error::Result<f64> {
            let mut tape = Tape::new();
            let inputs = const_rows(&mut tape, &xs);
            let out = conv_encode(&mut tape, store, &block, &inputs)?;
            let loss = tape.dot(out, out)?;
            tape.item(loss)
        };
        let analytic = {
            let mut tape = Tape::new();
            let inputs = const_rows(&mut tape, &xs);
            let out = conv_encode(&mut tape, &store, &block, &inputs).unwrap();
            let loss = tape.dot(out, out).unwrap();
            tape.backward(loss, &store).unwrap()
        };
        let err = fd_check(&store, &analytic, 1e-4, run).unwrap();
        assert!(err < 1e-3, "max relative error {err}");
    }
}
