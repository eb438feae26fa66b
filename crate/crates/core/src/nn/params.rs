//! Named parameter traversal and the `NNP1` tensor container.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"NNP1";

/// A model whose trainable tensors can be enumerated by name in a fixed order.
///
/// Gradients are represented by a value of the same type (see `zeros_like`),
/// so optimizers and the gradient checker can walk model and gradient in lockstep.
pub trait Parameterized {
    fn visit_params(&self, f: &mut dyn FnMut(&str, &Tensor));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |_, t| n += t.len());
        n
    }

    /// Sum of squared weights over the tensors subject to ℓ2 decay.
    fn l2_norm_sq(&self) -> f64 {
        let mut s = 0.0;
        self.visit_params(&mut |name, t| {
            if is_decayed(name) {
                s += t.sum_squares();
            }
        });
        s
    }

    fn zero_grads(&mut self) {
        self.visit_params_mut(&mut |_, t| t.fill(0.0));
    }
}

/// Weight tensors (last name segment starting with `w`) carry ℓ2 decay; biases do not.
pub fn is_decayed(name: &str) -> bool {
    name.rsplit('.').next().is_some_and(|s| s.starts_with('w'))
}

/// Adds `2λ·w` to the gradient of every decayed tensor.
pub fn add_l2_grad<P: Parameterized>(params: &P, grads: &mut P, lambda: f64) {
    if lambda == 0.0 {
        return;
    }
    let mut weights: Vec<Option<Vec<f64>>> = Vec::new();
    params.visit_params(&mut |name, t| {
        weights.push(is_decayed(name).then(|| t.values().to_vec()));
    });
    let mut i = 0;
    grads.visit_params_mut(&mut |_, g| {
        if let Some(w) = &weights[i] {
            for (gv, wv) in g.values_mut().iter_mut().zip(w) {
                *gv += 2.0 * lambda * wv;
            }
        }
        i += 1;
    });
}

pub fn flatten<P: Parameterized>(p: &P) -> Vec<f64> {
    let mut out = Vec::with_capacity(p.param_count());
    p.visit_params(&mut |_, t| out.extend_from_slice(t.values()));
    out
}

pub fn load_flat<P: Parameterized>(p: &mut P, flat: &[f64]) {
    let mut off = 0;
    p.visit_params_mut(&mut |_, t| {
        let n = t.len();
        t.values_mut().copy_from_slice(&flat[off..off + n]);
        off += n;
    });
    assert_eq!(off, flat.len(), "flat parameter length mismatch");
}

/// Name of every parameter scalar, in flat order (`name[i]`).
pub fn flat_names<P: Parameterized>(p: &P) -> Vec<String> {
    let mut out = Vec::new();
    p.visit_params(&mut |name, t| {
        out.extend((0..t.len()).map(|i| format!("{name}[{i}]")));
    });
    out
}

pub fn write_tensors<W: Write>(mut w: W, tensors: &[(String, &Tensor)]) -> Result<()> {
    w.write_all(MAGIC)?;
    for (name, t) in tensors {
        let name_bytes = name.as_bytes();
        let len = u16::try_from(name_bytes.len())
            .map_err(|_| Error::Format(format!("tensor name too long: {name}")))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(name_bytes)?;
        let rank = u8::try_from(t.rank())
            .map_err(|_| Error::Format(format!("rank too large for {name}")))?;
        w.write_all(&[rank])?;
        for &e in t.shape() {
            let e = u32::try_from(e)
                .map_err(|_| Error::Format(format!("extent too large for {name}")))?;
            w.write_all(&e.to_le_bytes())?;
        }
        for v in t.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_tensors<R: Read>(mut r: R) -> Result<Vec<(String, Tensor)>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    let mut cur = Cursor { buf: &buf, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("bad NNP1 magic".into()));
    }
    let mut out = Vec::new();
    while cur.pos < buf.len() {
        let len = u16::from_le_bytes(cur.take(2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = cur.take(1)?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(cur.take(4)?.try_into().unwrap()) as usize);
        }
        let n: usize = shape.iter().product();
        let raw = cur.take(n * 8)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((name, Tensor::new(shape, values)?));
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("truncated NNP1 container".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
}

/// Serializes every parameter of `p` under `prefix`.
pub fn save_params<P: Parameterized>(p: &P, prefix: &str) -> Result<Vec<u8>> {
    let mut named: Vec<(String, Tensor)> = Vec::new();
    p.visit_params(&mut |name, t| named.push((format!("{prefix}{name}"), t.clone())));
    let refs: Vec<(String, &Tensor)> = named.iter().map(|(n, t)| (n.clone(), t)).collect();
    let mut out = Vec::new();
    write_tensors(&mut out, &refs)?;
    Ok(out)
}

/// Overwrites the parameters of an already-shaped model from an `NNP1` blob.
/// Every tensor of the model must be present with the identical shape.
pub fn load_params<P: Parameterized>(p: &mut P, prefix: &str, bytes: &[u8]) -> Result<()> {
    let tensors = read_tensors(bytes)?;
    let mut err = None;
    p.visit_params_mut(&mut |name, t| {
        if err.is_some() {
            return;
        }
        let full = format!("{prefix}{name}");
        match tensors.iter().find(|(n, _)| *n == full) {
            None => err = Some(Error::Format(format!("missing tensor {full}"))),
            Some((_, src)) if src.shape() != t.shape() => {
                err = Some(Error::shape(format!(
                    "{full}: stored {:?}, expected {:?}",
                    src.shape(),
                    t.shape()
                )))
            }
            Some((_, src)) => t.values_mut().copy_from_slice(src.values()),
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decay_applies_to_weights_only() {
        assert!(is_decayed("dense0.w"));
        assert!(is_decayed("lstm1.wh"));
        assert!(!is_decayed("dense0.b"));
    }

    #[test]
    fn container_layout_is_bit_exact() {
        let t = Tensor::new(vec![1, 2], vec![1.0, -2.5]).unwrap();
        let mut out = Vec::new();
        write_tensors(&mut out, &[("a".to_string(), &t)]).unwrap();
        let mut want = b"NNP1".to_vec();
        want.extend_from_slice(&1u16.to_le_bytes());
        want.push(b'a');
        want.push(2);
        want.extend_from_slice(&1u32.to_le_bytes());
        want.extend_from_slice(&2u32.to_le_bytes());
        want.extend_from_slice(&1.0f64.to_le_bytes());
        want.extend_from_slice(&(-2.5f64).to_le_bytes());
        assert_eq!(out, want);
    }

    #[test]
    fn truncated_and_bad_magic_rejected() {
        let t = Tensor::vector(vec![1.0, 2.0]);
        let mut out = Vec::new();
        write_tensors(&mut out, &[("x".to_string(), &t)]).unwrap();
        assert!(read_tensors(&out[..out.len() - 1]).is_err());
        let mut bad = out.clone();
        bad[0] = b'X';
        assert!(read_tensors(&bad[..]).is_err());
    }

    proptest! {
        #[test]
        fn container_round_trip(values in proptest::collection::vec(-1e300f64..1e300, 0..40), name in "[a-z.]{1,12}") {
            let t = Tensor::vector(values);
            let mut out = Vec::new();
            write_tensors(&mut out, &[(name.clone(), &t)]).unwrap();
            let back = read_tensors(&out[..]).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(&back[0].0, &name);
            prop_assert_eq!(&back[0].1, &t);
        }
    }
}
