//! Python bindings: networks, training, compilation and integer inference.
//!
//! Inputs and outputs are flat row-major lists of floats.

use lutnet::clustering::{kmeans_1d, laplacian_levels as levels_closed_form};
use lutnet::data::{gen_parabola, Dataset, DatasetTargets};
use lutnet::train::train_loop;
use lutnet::{
    compile_model, conformance, estimate_storage, forward_int, load_model, save_model,
    Activation, ActivationKind, ActivationSpec, Checkpoint, ClusterConfig, ClusterMethod,
    CompileOptions, DenseNet, Error, Head, LrSchedule, LutModel, LutOutput,
    ModelFile, Task, TrainConfig, WeightCodebook,
};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(py_err)
}

/// A quantized activation function.
#[pyclass(name = "ActivationSpec", module = "lutnet_py", frozen)]
struct PyActivationSpec {
    spec: ActivationSpec,
}

#[pymethods]
impl PyActivationSpec {
    #[new]
    #[pyo3(signature = (kind = "tanhd", levels = 32))]
    fn new(kind: &str, levels: usize) -> PyResult<Self> {
        let spec = ActivationSpec::new(parse(kind)?, levels).map_err(py_err)?;
        Ok(Self { spec })
    }

    /// `(level index, level value)` of `x`.
    fn quantize(&self, x: f64) -> (usize, f64) {
        self.spec.quantize(x)
    }

    #[getter]
    fn levels(&self) -> Vec<f64> {
        self.spec.level_values().to_vec()
    }

    #[getter]
    fn boundaries(&self) -> Vec<f64> {
        self.spec.boundaries().to_vec()
    }
}

/// A float network, optionally snapped to a weight codebook.
#[pyclass(name = "Network", module = "lutnet_py")]
struct PyNetwork {
    net: DenseNet,
    codebook: Option<WeightCodebook>,
}

fn build_dataset(net: &DenseNet, inputs: Vec<f64>, targets: Vec<f64>) -> PyResult<Dataset> {
    let dim = net.input_dim();
    if dim == 0 || inputs.len() % dim != 0 {
        return Err(PyValueError::new_err(format!("inputs are not a multiple of {dim}")));
    }
    let n = inputs.len() / dim;
    let targets = match net.head {
        Head::SoftmaxCrossEntropy => {
            if targets.len() != n {
                return Err(PyValueError::new_err("expected one label per sample"));
            }
            let classes = net.output_dim();
            let labels = targets
                .iter()
                .map(|&t| {
                    let l = t as usize;
                    if t >= 0.0 && t.fract() == 0.0 && l < classes {
                        Ok(l)
                    } else {
                        Err(PyValueError::new_err(format!("label {t} out of range")))
                    }
                })
                .collect::<PyResult<_>>()?;
            DatasetTargets::Labels { classes, labels }
        }
        Head::L2Regression => {
            let out = net.output_dim();
            if targets.len() != n * out {
                return Err(PyValueError::new_err(format!("expected {} target values", n * out)));
            }
            DatasetTargets::Values { dim: out, values: targets }
        }
    };
    Ok(Dataset { dim, inputs, targets })
}

#[pymethods]
impl PyNetwork {
    /// A dense network with the given layer widths. `levels=None` keeps the
    /// hidden activations smooth.
    #[new]
    #[pyo3(signature = (dims, activation = "tanhd", levels = Some(32), classifier = false, seed = 0))]
    fn new(dims: Vec<usize>, activation: &str, levels: Option<usize>, classifier: bool, seed: u64) -> PyResult<Self> {
        let kind: ActivationKind = parse(activation)?;
        let act = match levels {
            Some(l) => Activation::Quantized(ActivationSpec::new(kind, l).map_err(py_err)?),
            None => Activation::Smooth(kind),
        };
        let head = if classifier { Head::SoftmaxCrossEntropy } else { Head::L2Regression };
        let net = DenseNet::new(&dims, act, head, seed).map_err(py_err)?;
        Ok(Self { net, codebook: None })
    }

    /// The built-in network of `task` ("mnist", "parabola" or "autoenc").
    #[staticmethod]
    #[pyo3(signature = (task, hidden = None, activation = "tanhd", levels = Some(32), input_levels = None, seed = 0))]
    fn for_task(
        task: &str,
        hidden: Option<Vec<usize>>,
        activation: &str,
        levels: Option<usize>,
        input_levels: Option<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let task: Task = parse(task)?;
        let hidden = hidden.unwrap_or_else(|| task.default_hidden());
        let input_levels = input_levels.unwrap_or_else(|| task.default_input_levels());
        let net = task
            .network(&hidden, parse(activation)?, levels, input_levels, seed)
            .map_err(py_err)?;
        Ok(Self { net, codebook: None })
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.net.dims()
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.net.parameter_count()
    }

    #[getter]
    fn distinct_parameters(&self) -> usize {
        self.net.distinct_parameters()
    }

    fn parameters(&self) -> Vec<f64> {
        self.net.parameters()
    }

    /// Codebook centers, if the network has been clustered.
    #[getter]
    fn codebook(&self) -> Option<Vec<f64>> {
        self.codebook.as_ref().map(|c| c.centers().to_vec())
    }

    fn predict(&self, inputs: Vec<f64>) -> PyResult<Vec<f64>> {
        self.net.predict(&inputs).map_err(py_err)
    }

    /// Trains in place and returns the metric history as a list of dicts.
    /// For classifiers `targets` holds one label per sample.
    #[pyo3(signature = (
        inputs, targets, steps = 1000, lr = 1e-3, batch_size = 32, weights = None,
        cluster_method = "kmeans", cluster_every = 1000, subsample = 1.0, seed = 0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train<'py>(
        &mut self,
        py: Python<'py>,
        inputs: Vec<f64>,
        targets: Vec<f64>,
        steps: usize,
        lr: f64,
        batch_size: usize,
        weights: Option<usize>,
        cluster_method: &str,
        cluster_every: usize,
        subsample: f64,
        seed: u64,
    ) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let data = build_dataset(&self.net, inputs, targets)?;
        let method: ClusterMethod = parse(cluster_method)?;
        let config = TrainConfig {
            lr: LrSchedule::constant(lr),
            batch_size,
            steps,
            clustering: weights.map(|size| ClusterConfig {
                every: cluster_every,
                subsample,
                ..ClusterConfig::new(method, size)
            }),
            eval_every: steps.clamp(1, 1000),
            seed,
            ..TrainConfig::default()
        };
        let out = py
            .allow_threads(|| train_loop(self.net.clone(), &data, None, &config))
            .map_err(py_err)?;
        self.net = out.net;
        self.codebook = out.codebook;
        out.history
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("step", r.step)?;
                d.set_item("train_loss", r.train_loss)?;
                d.set_item("eval_metric", r.eval_metric)?;
                d.set_item("distinct_weights", r.distinct_weights)?;
                d.set_item("w_max", r.w_max)?;
                Ok(d)
            })
            .collect()
    }

    #[pyo3(signature = (acc_bits = 64, guard_bits = 8, table_len = None))]
    fn compile(&self, acc_bits: u32, guard_bits: u32, table_len: Option<usize>) -> PyResult<PyLutModel> {
        let cb = self
            .codebook
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("network has no codebook; train with weights=N"))?;
        let options = CompileOptions {
            table_len,
            acc_bits,
            guard_bits,
        };
        let model = compile_model(&self.net, cb, &options).map_err(py_err)?;
        Ok(PyLutModel { model })
    }

    #[pyo3(signature = (path, encoding = "raw"))]
    fn save(&self, path: &str, encoding: &str) -> PyResult<()> {
        let ckpt = Checkpoint {
            net: self.net.clone(),
            codebook: self.codebook.clone(),
        };
        save_model(&ModelFile::Checkpoint(ckpt), path, parse(encoding)?).map_err(py_err)
    }
}

/// An integer-only lookup-table model.
#[pyclass(name = "LutModel", module = "lutnet_py")]
struct PyLutModel {
    model: LutModel,
}

#[pymethods]
impl PyLutModel {
    #[getter]
    fn levels(&self) -> usize {
        self.model.levels_count()
    }

    #[getter]
    fn codebook_len(&self) -> usize {
        self.model.codebook_len()
    }

    #[getter]
    fn scale_shift(&self) -> u32 {
        self.model.s
    }

    #[getter]
    fn parameter_count(&self) -> usize {
        self.model.parameter_count()
    }

    /// Integer forward pass on one raw sample. Returns `{"class", "sums"}`
    /// for classifiers and `{"outputs", "sums"}` for regression.
    fn infer<'py>(&self, py: Python<'py>, raw: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let rows = self.model.quantize_input(&raw).map_err(py_err)?;
        let d = PyDict::new(py);
        match forward_int(&self.model, &rows).map_err(py_err)? {
            LutOutput::Class { class, sums } => {
                d.set_item("class", class)?;
                d.set_item("sums", sums)?;
            }
            LutOutput::Fixed { sums, .. } => {
                let unit = self.model.output_unit();
                let outputs: Vec<f64> = sums.iter().map(|&s| s as f64 * unit).collect();
                d.set_item("outputs", outputs)?;
                d.set_item("sums", sums)?;
            }
        }
        Ok(d)
    }

    /// Compares the integer engine against the float reference.
    fn conformance<'py>(&self, py: Python<'py>, inputs: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let r = conformance(&self.model, &inputs).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("samples", r.samples)?;
        d.set_item("unit_agreement", r.unit_agreement())?;
        d.set_item("max_deviation", r.max_deviation)?;
        d.set_item("out_of_band", r.out_of_band)?;
        d.set_item("argmax_agreement", r.argmax_agreement())?;
        d.set_item("max_output_error", r.max_output_error)?;
        Ok(d)
    }

    #[pyo3(signature = (encoding = "raw"))]
    fn storage<'py>(&self, py: Python<'py>, encoding: &str) -> PyResult<Bound<'py, PyDict>> {
        let r = estimate_storage(&self.model, parse(encoding)?).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("total_bytes", r.total_bytes)?;
        d.set_item("index_bytes", r.index_bytes)?;
        d.set_item("table_bytes", r.table_bytes)?;
        d.set_item("header_bytes", r.header_bytes)?;
        d.set_item("bits_per_index", r.bits_per_index)?;
        d.set_item("entropy_bits", r.entropy_bits)?;
        d.set_item("ratio_vs_float32", r.ratio_vs_float32)?;
        Ok(d)
    }

    #[pyo3(signature = (path, encoding = "raw"))]
    fn save(&self, path: &str, encoding: &str) -> PyResult<()> {
        save_model(&ModelFile::Compiled(self.model.clone()), path, parse(encoding)?).map_err(py_err)
    }
}

/// Reads a model file, returning a `Network` or a `LutModel`.
#[pyfunction]
fn load(py: Python<'_>, path: &str) -> PyResult<PyObject> {
    Ok(match load_model(path).map_err(py_err)? {
        ModelFile::Checkpoint(c) => Py::new(
            py,
            PyNetwork {
                net: c.net,
                codebook: c.codebook,
            },
        )?
        .into_any(),
        ModelFile::Compiled(model) => Py::new(py, PyLutModel { model })?.into_any(),
    })
}

/// Positive closed-form Laplacian levels for N codebook entries, unit scale.
#[pyfunction]
fn laplacian_levels(n: usize) -> PyResult<Vec<f64>> {
    levels_closed_form(n).map_err(py_err)
}

/// Sorted 1-D k-means centers.
#[pyfunction]
#[pyo3(signature = (values, k, max_iters = 100))]
fn kmeans(values: Vec<f64>, k: usize, max_iters: usize) -> PyResult<Vec<f64>> {
    Ok(kmeans_1d(&values, k, max_iters).map_err(py_err)?.centers().to_vec())
}

/// `(xs, ys)` with `ys = xs²` and `xs` uniform in [-1, 1].
#[pyfunction]
#[pyo3(signature = (n, seed = 0))]
fn parabola(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let d = gen_parabola(n, seed);
    let ys = match d.targets {
        DatasetTargets::Values { values, .. } => values,
        DatasetTargets::Labels { .. } => unreachable!("parabola is a regression set"),
    };
    (d.inputs, ys)
}

#[pymodule]
fn lutnet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyActivationSpec>()?;
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyLutModel>()?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(laplacian_levels, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(parabola, m)?)?;
    Ok(())
}
