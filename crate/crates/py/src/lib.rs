//! Python bindings: the quaternion/color primitives, the image metrics, and
//! a `Network` class wrapping build, checkpoint I/O, and inference.
//!
//! Images cross the boundary as flat row-major r,g,b lists in [0, 1] plus
//! explicit height and width, matching the library's raster exchange type.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use qcnn_core::net::{self, NetworkSpec, Shape};
use qcnn_core::qtensor::ImageBuf;
use qcnn_core::quat::{self, ColorVector, Quaternion};
use qcnn_core::training::{self, checkpoint};
use qcnn_core::{metrics, presets};
use std::path::PathBuf;

fn err(e: qcnn_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn image(height: usize, width: usize, rgb: Vec<f32>) -> PyResult<ImageBuf> {
    ImageBuf::from_vec(height, width, rgb).map_err(err)
}

/// Hamilton product of two quaternions given as (w, x, y, z) tuples.
#[pyfunction]
fn hamilton_product(p: (f64, f64, f64, f64), q: (f64, f64, f64, f64)) -> (f64, f64, f64, f64) {
    let r = quat::hamilton_product(
        Quaternion::new(p.0, p.1, p.2, p.3),
        Quaternion::new(q.0, q.1, q.2, q.3),
    );
    (r.w, r.x, r.y, r.z)
}

/// The unit gray axis in RGB space.
#[pyfunction]
fn gray_axis() -> (f64, f64, f64) {
    let a = quat::gray_axis::<f64>();
    (a[0], a[1], a[2])
}

/// Coefficients (f1, f2, f3) of the circulant matrix rotating colors about
/// the gray axis by `theta`.
#[pyfunction]
fn rotation_coeffs(theta: f64) -> (f64, f64, f64) {
    let c = quat::rotation_coeffs(theta);
    (c.f1, c.f2, c.f3)
}

/// Derivative of [`rotation_coeffs`] with respect to theta.
#[pyfunction]
fn rotation_coeffs_deriv(theta: f64) -> (f64, f64, f64) {
    let c = quat::rotation_coeffs_deriv(theta);
    (c.f1, c.f2, c.f3)
}

/// One filter tap: rotate an (r, g, b) color about the gray axis by `theta`
/// and scale by `s`.
#[pyfunction]
fn apply_color_rotation(s: f64, theta: f64, rgb: (f64, f64, f64)) -> (f64, f64, f64) {
    let out = quat::apply_color_rotation(s, theta, ColorVector::new(rgb.0, rgb.1, rgb.2));
    let v = out.as_array();
    (v[0], v[1], v[2])
}

/// Peak signal-to-noise ratio in dB between two equal-length signals with
/// peak 1.0; infinity when they are identical.
#[pyfunction]
fn psnr(a: Vec<f32>, b: Vec<f32>) -> PyResult<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(PyValueError::new_err(format!(
            "psnr needs two equal nonempty signals, got lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(metrics::psnr(&a, &b))
}

/// Mean per-pixel saturation (max-min over max) of a flat RGB image.
#[pyfunction]
fn mean_saturation(height: usize, width: usize, rgb: Vec<f32>) -> PyResult<f64> {
    Ok(metrics::mean_saturation(&image(height, width, rgb)?))
}

/// Mean per-pixel angle (radians) between the color and the gray axis.
#[pyfunction]
fn mean_gray_angle(height: usize, width: usize, rgb: Vec<f32>) -> PyResult<f64> {
    Ok(metrics::mean_gray_angle(&image(height, width, rgb)?))
}

fn preset_spec(preset: &str, quaternion: bool) -> PyResult<NetworkSpec> {
    Ok(match preset {
        "shallow-cifar" => presets::shallow_classifier(
            quaternion,
            presets::SHALLOW_CONV_WIDTHS,
            presets::SHALLOW_DENSE_WIDTH,
            10,
        ),
        "denoiser" => presets::denoiser(quaternion, presets::DENOISER_BASE_WIDTH),
        "vggs" => presets::vggs_classifier(quaternion, 10),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown preset `{other}` (expected shallow-cifar, denoiser, or vggs)"
            )))
        }
    })
}

/// A built network (single precision): preset construction, checkpoint
/// save/load, and inference on single images.
#[pyclass]
struct Network {
    inner: net::Network<f32>,
}

#[pymethods]
impl Network {
    /// Build a named preset with fresh seeded parameters.
    #[staticmethod]
    #[pyo3(signature = (preset, quaternion = true, seed = 0))]
    fn from_preset(preset: &str, quaternion: bool, seed: u64) -> PyResult<Self> {
        let spec = preset_spec(preset, quaternion)?;
        Ok(Network { inner: net::Network::build(spec, seed).map_err(err)? })
    }

    /// Load a checkpoint written by `save` or the command-line `train`.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Network { inner: checkpoint::load::<f32>(&path).map_err(err)?.net })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        checkpoint::save(&path, &self.inner, None, 0, 0).map_err(err)
    }

    fn param_count(&self) -> usize {
        self.inner.num_params()
    }

    /// (height, width) the network expects.
    fn input_size(&self) -> (usize, usize) {
        (self.inner.spec().input_h, self.inner.spec().input_w)
    }

    fn output_shape(&self) -> String {
        self.inner.output_shape().to_string()
    }

    /// Per-layer (index, kind, params, mults) rows.
    fn summary(&self) -> PyResult<Vec<(usize, String, u64, u64)>> {
        let rows = net::audit(self.inner.spec()).map_err(err)?;
        Ok(rows.into_iter().map(|r| (r.index, r.label, r.params, r.mults)).collect())
    }

    fn check_input(&self, height: usize, width: usize) -> PyResult<()> {
        let (h, w) = self.input_size();
        if (height, width) != (h, w) {
            return Err(PyValueError::new_err(format!(
                "network expects a {h}x{w} image, got {height}x{width}"
            )));
        }
        Ok(())
    }

    /// Raw flat output values for one image.
    fn predict(&mut self, height: usize, width: usize, rgb: Vec<f32>) -> PyResult<Vec<f32>> {
        self.check_input(height, width)?;
        let x = training::image_to_input::<f32>(self.inner.spec().input, &image(height, width, rgb)?)
            .map_err(err)?;
        let trace = self.inner.forward(&x).map_err(err)?;
        Ok(trace.output().as_slice().to_vec())
    }

    /// Index of the highest-scoring class; the network must end in a plain
    /// vector of scores.
    fn predict_class(&mut self, height: usize, width: usize, rgb: Vec<f32>) -> PyResult<usize> {
        if !matches!(self.inner.output_shape(), Shape::Vec { .. }) {
            return Err(PyValueError::new_err(format!(
                "predict_class needs a classifier, this network outputs {}",
                self.inner.output_shape()
            )));
        }
        let scores = self.predict(height, width, rgb)?;
        Ok(metrics::argmax(&scores))
    }

    /// Run a restoration network and return the flat RGB output, clamped to
    /// [0, 1].
    fn denoise(&mut self, height: usize, width: usize, rgb: Vec<f32>) -> PyResult<Vec<f32>> {
        self.check_input(height, width)?;
        let out = training::denoise_image(&mut self.inner, &image(height, width, rgb)?)
            .map_err(err)?;
        Ok(out.data)
    }

    fn __repr__(&self) -> String {
        format!(
            "Network({} params, input {}x{}, output {})",
            self.inner.num_params(),
            self.inner.spec().input_h,
            self.inner.spec().input_w,
            self.inner.output_shape()
        )
    }
}

#[pymodule]
fn qcnn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(hamilton_product, m)?)?;
    m.add_function(wrap_pyfunction!(gray_axis, m)?)?;
    m.add_function(wrap_pyfunction!(rotation_coeffs, m)?)?;
    m.add_function(wrap_pyfunction!(rotation_coeffs_deriv, m)?)?;
    m.add_function(wrap_pyfunction!(apply_color_rotation, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(mean_saturation, m)?)?;
    m.add_function(wrap_pyfunction!(mean_gray_angle, m)?)?;
    m.add_class::<Network>()?;
    Ok(())
}
