//! Python bindings for the surrogate toolkit: dataset generation, the exact
//! solvers, model templates, training, sparsification and growth. Data
//! crosses the boundary as plain lists of floats.

use ndarray::Array2;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use dynsurr::nn::{read_checkpoint, write_checkpoint, Layer, LayerSpec, Model, Phase};
use dynsurr::sampling::{
    generate_dataset as gen_ds, normalize as norm, CaseId, Dataspace, Direction, NormStats,
    ResponseKind, Split,
};
use dynsurr::sparsify::{
    build_conv_dense_template, build_sparse_template, insert_bn_conv, sparsity_mask,
    structured_mask, two_phase_train, GrowthPlan, StructuredMaskKind,
};
use dynsurr::train::{train as train_fn, DataPair, TrainConfig};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_array(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    if rows.is_empty() {
        return Err(PyValueError::new_err("empty matrix"));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(PyValueError::new_err("ragged matrix"));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((flat.len() / ncols, ncols), flat).map_err(err)
}

fn to_rows(a: &Array2<f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn parse_response(text: &str) -> PyResult<ResponseKind> {
    match text {
        "displacement" => Ok(ResponseKind::Displacement),
        "acceleration" => Ok(ResponseKind::Acceleration),
        other => Err(PyValueError::new_err(format!(
            "response must be displacement or acceleration, got {other}"
        ))),
    }
}

fn parse_split(text: &str) -> PyResult<Split> {
    match text {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        other => Err(PyValueError::new_err(format!(
            "split must be train, val or test, got {other}"
        ))),
    }
}

fn space(case: u32, response: &str, cubic_ratio: f64) -> PyResult<Dataspace> {
    Dataspace::standard(
        CaseId::from_number(case).map_err(err)?,
        parse_response(response)?,
        cubic_ratio,
    )
    .map_err(err)
}

/// Samples loads from a standard dataspace and solves the system for each,
/// returning (inputs, outputs) as row lists.
#[pyfunction]
#[pyo3(signature = (case, response, split, seed, size, cubic_ratio = 0.0))]
fn generate_dataset(
    case: u32,
    response: &str,
    split: &str,
    seed: u64,
    size: usize,
    cubic_ratio: f64,
) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let space = space(case, response, cubic_ratio)?;
    let ds = gen_ds(&space, parse_split(split)?, seed, Some(size)).map_err(err)?;
    Ok((to_rows(&ds.x), to_rows(&ds.y)))
}

/// Per-column means and biased variances, the statistics used by
/// `normalize`/`denormalize`.
#[pyfunction]
#[pyo3(signature = (data, epsilon = 1e-8))]
fn column_stats(data: Vec<Vec<f64>>, epsilon: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let a = to_array(data)?;
    let stats = NormStats::from_columns(&a, epsilon);
    Ok((stats.mean.to_vec(), stats.var.to_vec()))
}

#[pyfunction]
#[pyo3(signature = (data, mean, var, epsilon = 1e-8, inverse = false))]
fn normalize(
    data: Vec<Vec<f64>>,
    mean: Vec<f64>,
    var: Vec<f64>,
    epsilon: f64,
    inverse: bool,
) -> PyResult<Vec<Vec<f64>>> {
    let a = to_array(data)?;
    let stats = NormStats {
        mean: mean.into(),
        var: var.into(),
        epsilon,
    };
    let dir = if inverse {
        Direction::Inverse
    } else {
        Direction::Forward
    };
    Ok(to_rows(&norm(&a, &stats, dir).map_err(err)?))
}

/// Response of a standard case to one explicit harmonic load, as
/// (displacement, acceleration) series on the observation grid.
#[pyfunction]
#[pyo3(signature = (case, response, amplitudes, frequencies, phases, cubic_ratio = 0.0))]
fn solve_load(
    case: u32,
    response: &str,
    amplitudes: Vec<f64>,
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    cubic_ratio: f64,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let space = space(case, response, cubic_ratio)?;
    let load =
        dynsurr::dynamics::HarmonicLoad::new(amplitudes, frequencies, phases).map_err(err)?;
    let series = dynsurr::sampling::solve_response(&space, &load).map_err(err)?;
    Ok((series.displacement, series.acceleration))
}

fn parse_structure(text: &str, band_width: Option<usize>) -> PyResult<StructuredMaskKind> {
    match (text, band_width) {
        ("lower", None) => Ok(StructuredMaskKind::LowerTriangular),
        ("banded", Some(w)) => Ok(StructuredMaskKind::BandedLower { band_width: w }),
        _ => Err(PyValueError::new_err(
            "structure must be 'lower', or 'banded' with band_width",
        )),
    }
}

/// A trainable surrogate network.
#[pyclass]
struct Surrogate {
    inner: Model,
}

#[pymethods]
impl Surrogate {
    /// Conv front end plus fully connected tail; n_l = 0 gives a pure
    /// dense model.
    #[staticmethod]
    #[pyo3(signature = (n, n_l, n_c, n_fc, seed = 0))]
    fn conv_dense(n: usize, n_l: usize, n_c: usize, n_fc: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: build_conv_dense_template(n, n_l, n_c, n_fc, seed).map_err(err)?,
        })
    }

    /// Conv front end closed by a masked (sparsely connected) output layer.
    #[staticmethod]
    #[pyo3(signature = (n, n_l, n_c, structure = "lower", band_width = None, seed = 0))]
    fn sparse(
        n: usize,
        n_l: usize,
        n_c: usize,
        structure: &str,
        band_width: Option<usize>,
        seed: u64,
    ) -> PyResult<Self> {
        let mask = structured_mask(parse_structure(structure, band_width)?, n).map_err(err)?;
        Ok(Self {
            inner: build_sparse_template(n, n_l, n_c, mask, None, seed).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let spec_path = std::path::Path::new(path).with_extension("json");
        let text = std::fs::read_to_string(spec_path).map_err(err)?;
        let specs: Vec<LayerSpec> = serde_json::from_str(&text).map_err(err)?;
        let mut inner = Model::from_specs(&specs, 0).map_err(err)?;
        read_checkpoint(&mut inner, std::path::Path::new(path)).map_err(err)?;
        Ok(Self { inner })
    }

    /// Writes the weights next to a JSON architecture description.
    fn save(&mut self, path: &str) -> PyResult<()> {
        let path = std::path::Path::new(path);
        write_checkpoint(&mut self.inner, path).map_err(err)?;
        let text = serde_json::to_string_pretty(&self.inner.specs()).map_err(err)?;
        std::fs::write(path.with_extension("json"), text).map_err(err)?;
        Ok(())
    }

    fn spec_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner.specs()).map_err(err)
    }

    /// (trainable, including frozen batch statistics)
    fn param_count(&self) -> (usize, usize) {
        let c = self.inner.param_count();
        (c.trainable, c.with_statistics)
    }

    fn forward(&mut self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let a = to_array(x)?;
        Ok(to_rows(&self.inner.forward(&a, Phase::Eval).map_err(err)?))
    }

    /// Trains with Adam and returns (train_loss, val_loss) per epoch.
    #[pyo3(signature = (
        x, y, x_val, y_val,
        epochs = 300, batch_size = 1024, learning_rate = 1e-3, reg_weight = 1e-4,
        seed = 0, frozen_params = vec![]
    ))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        &mut self,
        x: Vec<Vec<f64>>,
        y: Vec<Vec<f64>>,
        x_val: Vec<Vec<f64>>,
        y_val: Vec<Vec<f64>>,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        reg_weight: f64,
        seed: u64,
        frozen_params: Vec<String>,
    ) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (xa, ya, xv, yv) = (to_array(x)?, to_array(y)?, to_array(x_val)?, to_array(y_val)?);
        let cfg = TrainConfig {
            epochs,
            batch_size,
            learning_rate,
            reg_weight,
            seed,
            frozen_params,
            ..TrainConfig::default()
        };
        let history = train_fn(
            &mut self.inner,
            DataPair { x: &xa, y: &ya },
            DataPair { x: &xv, y: &yv },
            &cfg,
        )
        .map_err(err)?;
        Ok((history.train_loss, history.val_loss))
    }

    /// Thresholds the first dense layer at `ratio` of its largest weight
    /// magnitude and reports (threshold, surviving count, lower-triangular
    /// fraction, fitted band width).
    #[pyo3(signature = (ratio = 0.05))]
    fn analyze_sparsity(&self, ratio: f64) -> PyResult<(f64, usize, f64, usize)> {
        let fc = self
            .inner
            .layers
            .iter()
            .find_map(|l| match l {
                Layer::Fc(fc) if fc.mask.is_none() => Some(fc),
                _ => None,
            })
            .ok_or_else(|| PyValueError::new_err("model has no dense layer"))?;
        let (_, rep) = sparsity_mask(&fc.w, ratio).map_err(err)?;
        Ok((rep.threshold, rep.nnz, rep.lower_fraction, rep.band_width))
    }

    /// Inserts a fresh BN + conv block after the first BN layer and runs
    /// two-phase training: new layers alone, then everything. Returns the
    /// concatenated (train_loss, val_loss) history.
    #[pyo3(signature = (
        x, y, x_val, y_val, n_c,
        phase1_epochs, phase2_epochs,
        batch_size = 1024, learning_rate = 1e-3, reg_weight = 1e-4, seed = 0
    ))]
    #[allow(clippy::too_many_arguments)]
    fn grow(
        &mut self,
        x: Vec<Vec<f64>>,
        y: Vec<Vec<f64>>,
        x_val: Vec<Vec<f64>>,
        y_val: Vec<Vec<f64>>,
        n_c: usize,
        phase1_epochs: usize,
        phase2_epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        reg_weight: f64,
        seed: u64,
    ) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let (xa, ya, xv, yv) = (to_array(x)?, to_array(y)?, to_array(x_val)?, to_array(y_val)?);
        let new_names = insert_bn_conv(&mut self.inner, n_c, seed).map_err(err)?;
        let cfg = TrainConfig {
            batch_size,
            learning_rate,
            reg_weight,
            seed,
            ..TrainConfig::default()
        };
        let plan = GrowthPlan {
            n_c,
            phase1_epochs,
            phase2_epochs,
        };
        let history = two_phase_train(
            &mut self.inner,
            &new_names,
            DataPair { x: &xa, y: &ya },
            DataPair { x: &xv, y: &yv },
            &cfg,
            &plan,
        )
        .map_err(err)?;
        Ok((history.train_loss, history.val_loss))
    }
}

#[pymodule]
fn dynsurr_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Surrogate>()?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(column_stats, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(solve_load, m)?)?;
    Ok(())
}
