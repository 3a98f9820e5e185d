//! Model persistence. The container is deliberately simple and fully
//! self-describing:
//!
//! ```text
//! "QCNN"  magic, 4 bytes
//! u8      format version (currently 1)
//! u32 LE  manifest length, then that many bytes of JSON (spec, optimizer
//!         config, seed, precision, epochs trained)
//! u64 LE  parameter scalar count
//! f32 LE  parameters in (layer, array, index) order; f64 models are
//!         quantized on save
//! u8      1 if optimizer state follows, else 0
//! u64 LE  optimizer block byte length, then the block: u64 LE update
//!         count followed by the moment buffers as f32 LE in the frozen
//!         buffer order
//! ```
//!
//! The byte-length prefix lets readers skip optimizer state they do not
//! care about without understanding the optimizer config.

use crate::error::{Error, Result};
use crate::net::{Network, NetworkSpec};
use crate::num::Real;
use crate::training::optim::{Optimizer, OptimizerConfig};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 4] = b"QCNN";
const VERSION: u8 = 1;

/// The JSON header stored inside a checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: NetworkSpec,
    pub optimizer: Option<OptimizerConfig>,
    pub seed: u64,
    /// "f32" or "f64": the precision the model was trained in. Parameter
    /// values are stored as f32 either way.
    pub precision: String,
    pub epochs_trained: u64,
}

/// A checkpoint pulled back into memory.
pub struct LoadedCheckpoint<F> {
    pub net: Network<F>,
    pub optimizer: Option<Optimizer<F>>,
    pub manifest: Manifest,
}

/// Write the network (and optionally its optimizer state) to `path`.
pub fn save<F: Real>(
    path: &Path,
    net: &Network<F>,
    optimizer: Option<&Optimizer<F>>,
    seed: u64,
    epochs_trained: u64,
) -> Result<()> {
    let manifest = Manifest {
        spec: net.spec().clone(),
        optimizer: optimizer.map(|o| *o.config()),
        seed,
        precision: precision_name::<F>(),
        epochs_trained,
    };
    let manifest_json =
        serde_json::to_vec(&manifest).map_err(|e| Error::CheckpointFormat(e.to_string()))?;

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(manifest_json.len() as u32).to_le_bytes());
    out.extend_from_slice(&manifest_json);

    out.extend_from_slice(&(net.num_params() as u64).to_le_bytes());
    for p in net.layer_params() {
        for a in p.arrays() {
            for &v in a {
                out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
        }
    }

    match optimizer {
        Some(opt) => {
            out.push(1);
            let mut block = Vec::new();
            block.extend_from_slice(&opt.step_count().to_le_bytes());
            for buf in opt.buffers() {
                for &v in buf {
                    block.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
                }
            }
            out.extend_from_slice(&(block.len() as u64).to_le_bytes());
            out.extend_from_slice(&block);
        }
        None => out.push(0),
    }

    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a checkpoint back, rebuilding the network and, if present and
/// described in the manifest, the optimizer.
pub fn load<F: Real>(path: &Path) -> Result<LoadedCheckpoint<F>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };

    let magic = r.take(4, "magic")?;
    if magic != MAGIC {
        return Err(Error::CheckpointFormat(format!(
            "bad magic {:02x?}, not a checkpoint",
            &magic[..magic.len().min(4)]
        )));
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(Error::CheckpointFormat(format!(
            "unsupported format version {version}, expected {VERSION}"
        )));
    }
    let mlen = r.u32("manifest length")? as usize;
    let manifest: Manifest = serde_json::from_slice(r.take(mlen, "manifest")?)
        .map_err(|e| Error::CheckpointFormat(format!("manifest does not parse: {e}")))?;

    let mut net = Network::<F>::build_zeroed(manifest.spec.clone())?;
    let count = r.u64("parameter count")? as usize;
    if count != net.num_params() {
        return Err(Error::CheckpointFormat(format!(
            "checkpoint holds {count} parameters but the spec needs {}",
            net.num_params()
        )));
    }
    for p in net.layer_params_mut() {
        for a in p.arrays_mut() {
            for v in a.iter_mut() {
                *v = F::from_f64(r.f32("parameter")? as f64);
            }
        }
    }

    let has_opt = r.u8("optimizer flag")?;
    let optimizer = match (has_opt, manifest.optimizer) {
        (0, _) => None,
        (1, Some(config)) => {
            let block_len = r.u64("optimizer block length")? as usize;
            let block_end = r.pos + block_len;
            if block_end > bytes.len() {
                return Err(Error::CheckpointFormat(
                    "optimizer block extends past end of file".into(),
                ));
            }
            let step = r.u64("optimizer step count")?;
            let per = config.buffers_per_array();
            let mut buffers = Vec::new();
            for p in net.layer_params() {
                for a in p.arrays() {
                    for _ in 0..per {
                        let mut buf = Vec::with_capacity(a.len());
                        for _ in 0..a.len() {
                            buf.push(F::from_f64(r.f32("optimizer buffer")? as f64));
                        }
                        buffers.push(buf);
                    }
                }
            }
            if r.pos != block_end {
                return Err(Error::CheckpointFormat(format!(
                    "optimizer block length {} does not match its contents",
                    block_len
                )));
            }
            Some(Optimizer::from_state(config, &net, step, buffers)?)
        }
        (1, None) => {
            return Err(Error::CheckpointFormat(
                "optimizer state present but manifest names no optimizer".into(),
            ))
        }
        (flag, _) => {
            return Err(Error::CheckpointFormat(format!(
                "optimizer flag must be 0 or 1, got {flag}"
            )))
        }
    };

    Ok(LoadedCheckpoint { net, optimizer, manifest })
}

/// Read only the JSON header, e.g. to pick a precision before loading.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader { bytes: &bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::CheckpointFormat("bad magic, not a checkpoint".into()));
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(Error::CheckpointFormat(format!(
            "unsupported format version {version}, expected {VERSION}"
        )));
    }
    let mlen = r.u32("manifest length")? as usize;
    serde_json::from_slice(r.take(mlen, "manifest")?)
        .map_err(|e| Error::CheckpointFormat(format!("manifest does not parse: {e}")))
}

pub fn precision_name<F: Real>() -> String {
    if std::mem::size_of::<F>() == 4 { "f32".into() } else { "f64".into() }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::CheckpointFormat(format!(
                "file truncated while reading {what} (need {n} bytes at offset {})",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::Padding;
    use crate::net::{InputKind, LayerGrads, LayerSpec, NetworkSpec, Value};
    use crate::qtensor::QFeatureMap;
    use rand::{Rng, SeedableRng};

    fn small_spec() -> NetworkSpec {
        NetworkSpec {
            input: InputKind::Quaternion { replicate: 3 },
            input_h: 6,
            input_w: 6,
            layers: vec![
                LayerSpec::QConv { out_channels: 2, ksize: 3, stride: 1, padding: Padding::Same },
                LayerSpec::Relu,
                LayerSpec::MaxPool { window: 2 },
                LayerSpec::Flatten,
                LayerSpec::RealDense { out_len: 4 },
            ],
            skips: vec![],
        }
    }

    fn load_failure(path: &std::path::Path) -> String {
        match load::<f32>(path) {
            Ok(_) => panic!("expected load to fail"),
            Err(e) => e.to_string(),
        }
    }

    fn fake_grads(net: &Network<f32>, fill: f32) -> Vec<LayerGrads<f32>> {
        net.layer_params()
            .iter()
            .map(|p| p.arrays().iter().map(|a| vec![fill; a.len()]).collect())
            .collect()
    }

    #[test]
    fn f32_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.qcnn");
        let mut net = Network::<f32>::build(small_spec(), 42).unwrap();
        save(&path, &net, None, 42, 3).unwrap();
        let loaded = load::<f32>(&path).unwrap();
        let mut back = loaded.net;
        assert_eq!(loaded.manifest.seed, 42);
        assert_eq!(loaded.manifest.epochs_trained, 3);
        assert_eq!(loaded.manifest.precision, "f32");
        assert!(loaded.optimizer.is_none());

        for (a, b) in net.layer_params().iter().zip(back.layer_params()) {
            for (x, y) in a.arrays().iter().zip(b.arrays()) {
                assert_eq!(x.as_slice(), y.as_slice());
            }
        }

        // Same outputs on the same input.
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let data: Vec<f32> = (0..3 * 36).map(|_| rng.random_range(0.0..1.0)).collect();
        let x = Value::QMap(QFeatureMap::from_vec(1, 6, 6, data).unwrap());
        let t1 = net.forward(&x).unwrap();
        let t2 = back.forward(&x).unwrap();
        assert_eq!(t1.output().as_slice(), t2.output().as_slice());
    }

    #[test]
    fn f64_models_quantize_to_f32_on_save() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.qcnn");
        let net = Network::<f64>::build(small_spec(), 7).unwrap();
        save(&path, &net, None, 7, 0).unwrap();
        let back = load::<f64>(&path).unwrap();
        assert_eq!(back.manifest.precision, "f64");
        for (a, b) in net.layer_params().iter().zip(back.net.layer_params()) {
            for (x, y) in a.arrays().iter().zip(b.arrays()) {
                for (u, v) in x.iter().zip(y.iter()) {
                    assert_eq!(*u as f32, *v as f32); // survives as f32
                    assert!((u - v).abs() <= u.abs() * 1e-7 + 1e-30);
                }
            }
        }
    }

    #[test]
    fn resumed_optimizer_continues_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.qcnn");
        let mut net = Network::<f32>::build(small_spec(), 9).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig::adam(1e-3), &net);
        let g1 = fake_grads(&net, 0.3);
        opt.apply(&mut net, &g1).unwrap();
        let g2 = fake_grads(&net, -0.2);
        opt.apply(&mut net, &g2).unwrap();
        save(&path, &net, Some(&opt), 9, 1).unwrap();

        // Path A: continue in memory.
        let g3 = fake_grads(&net, 0.1);
        opt.apply(&mut net, &g3).unwrap();

        // Path B: reload and take the same step.
        let loaded = load::<f32>(&path).unwrap();
        let mut net_b = loaded.net;
        let mut opt_b = loaded.optimizer.unwrap();
        assert_eq!(opt_b.step_count(), 2);
        let g3b = fake_grads(&net_b, 0.1);
        opt_b.apply(&mut net_b, &g3b).unwrap();

        for (a, b) in net.layer_params().iter().zip(net_b.layer_params()) {
            for (x, y) in a.arrays().iter().zip(b.arrays()) {
                assert_eq!(x.as_slice(), y.as_slice());
            }
        }
    }

    #[test]
    fn corrupted_files_are_rejected_with_reasons() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.qcnn");
        let net = Network::<f32>::build(small_spec(), 1).unwrap();
        save(&path, &net, None, 1, 0).unwrap();
        let good = fs::read(&path).unwrap();

        // Wrong magic.
        let mut bad = good.clone();
        bad[0] = b'X';
        fs::write(&path, &bad).unwrap();
        assert!(load_failure(&path).contains("magic"));

        // Future version.
        let mut bad = good.clone();
        bad[4] = 9;
        fs::write(&path, &bad).unwrap();
        assert!(load_failure(&path).contains("version 9"));

        // Truncated parameters.
        let bad = good[..good.len() - 10].to_vec();
        fs::write(&path, &bad).unwrap();
        assert!(load_failure(&path).contains("truncated"));
    }

    #[test]
    fn manifest_reads_without_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.qcnn");
        let net = Network::<f64>::build(small_spec(), 5).unwrap();
        save(&path, &net, None, 5, 12).unwrap();
        let m = read_manifest(&path).unwrap();
        assert_eq!(m.precision, "f64");
        assert_eq!(m.epochs_trained, 12);
        assert_eq!(m.spec, small_spec());
    }
}
