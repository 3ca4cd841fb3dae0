//! C interface: signal synthesis, dataset files and checkpoint inference.
//!
//! Every function returns a [`MamcStatus`]. On failure a description is
//! available from [`mamc_last_error`] on the same thread until the next call.
//! Handles are opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use multiamc::archs::{ArchError, Model};
use multiamc::autodiff::Tensor;
use multiamc::dataset::{load_dataset, save_dataset, Dataset, DatasetError};
use multiamc::harness::{load_or_generate, Config, HarnessError};
use multiamc::modem::{synthesize, ModemConfig, ModulationScheme};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MamcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Model = 5,
    Panic = 6,
}

/// A loaded or generated dataset.
pub struct MamcDataset {
    inner: Dataset,
}

/// A trained model restored from a checkpoint, float32.
pub struct MamcModel {
    inner: Model<f32>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MamcStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(MamcStatus::NullPointer, format!("{what} is null"))
    }

    fn invalid(msg: impl Into<String>) -> Self {
        Failure(MamcStatus::InvalidArgument, msg.into())
    }
}

impl From<DatasetError> for Failure {
    fn from(e: DatasetError) -> Self {
        let status = match e {
            DatasetError::Io { .. } => MamcStatus::Io,
            DatasetError::Format { .. } => MamcStatus::Format,
            _ => MamcStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<ArchError> for Failure {
    fn from(e: ArchError) -> Self {
        let status = match e {
            ArchError::Io { .. } => MamcStatus::Io,
            ArchError::Autodiff(multiamc::autodiff::AutodiffError::Format { .. }) => MamcStatus::Format,
            _ => MamcStatus::Model,
        };
        Failure(status, e.to_string())
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Dataset(d) => d.into(),
            HarnessError::Arch(a) => a.into(),
            HarnessError::Io { .. } => Failure(MamcStatus::Io, e.to_string()),
            other => Failure(MamcStatus::InvalidArgument, other.to_string()),
        }
    }
}

fn set_error(msg: Option<String>) {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = msg.map(|m| CString::new(m.replace('\0', " ")).expect("no interior nul"));
    });
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MamcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            MamcStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(_) => {
            set_error(Some("internal panic".into()));
            MamcStatus::Panic
        }
    }
}

unsafe fn path_arg(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{what} is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn mamc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Number of modulation classes; valid scheme indices are below it.
#[no_mangle]
pub extern "C" fn mamc_num_classes() -> u32 {
    ModulationScheme::ALL.len() as u32
}

/// Synthesizes `num_samples` unit-power baseband samples of scheme
/// `scheme_index` with the default modem settings. `out_iq` receives
/// `2 * num_samples` values, interleaved I then Q.
///
/// # Safety
/// `out_iq` must point to `2 * num_samples` writable floats.
#[no_mangle]
pub unsafe extern "C" fn mamc_synthesize(scheme_index: u32, num_samples: usize, seed: u64, out_iq: *mut f64) -> MamcStatus {
    guard(|| {
        if out_iq.is_null() {
            return Err(Failure::null("out_iq"));
        }
        let scheme = ModulationScheme::from_class_index(scheme_index as usize)
            .ok_or_else(|| Failure::invalid(format!("scheme index {scheme_index} out of range")))?;
        if num_samples == 0 {
            return Err(Failure::invalid("num_samples must be >= 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let signal = synthesize(scheme, num_samples, &ModemConfig::default(), &mut rng)
            .map_err(|e| Failure::invalid(e.to_string()))?;
        let out = std::slice::from_raw_parts_mut(out_iq, 2 * num_samples);
        for (pair, s) in out.chunks_exact_mut(2).zip(&signal.samples) {
            pair[0] = s.re;
            pair[1] = s.im;
        }
        Ok(())
    })
}

/// Generates the dataset described by a configuration file, or the desk
/// defaults when `config_path` is null.
///
/// # Safety
/// `config_path` must be null or a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mamc_dataset_generate(config_path: *const c_char, out: *mut *mut MamcDataset) -> MamcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let mut config = if config_path.is_null() {
            Config::default()
        } else {
            Config::load(path_arg(config_path, "config_path")?)?
        };
        config.dataset_path = None;
        let inner = load_or_generate(&config)?;
        *out = Box::into_raw(Box::new(MamcDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mamc_dataset_load(path: *const c_char, out: *mut *mut MamcDataset) -> MamcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = load_dataset(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(MamcDataset { inner }));
        Ok(())
    })
}

/// # Safety
/// `dataset` must be a live handle; `path` a nul-terminated string.
#[no_mangle]
pub unsafe extern "C" fn mamc_dataset_save(dataset: *const MamcDataset, path: *const c_char) -> MamcStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| Failure::null("dataset"))?;
        save_dataset(&d.inner, path_arg(path, "path")?)?;
        Ok(())
    })
}

/// Example count and per-example tensor shape `n_antennas x 2 x frame_len`.
///
/// # Safety
/// `dataset` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mamc_dataset_shape(
    dataset: *const MamcDataset,
    len: *mut usize,
    n_antennas: *mut u32,
    frame_len: *mut u32,
) -> MamcStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| Failure::null("dataset"))?;
        *out_arg(len, "len")? = d.inner.len();
        *out_arg(n_antennas, "n_antennas")? = d.inner.header.n_antennas;
        *out_arg(frame_len, "frame_len")? = d.inner.header.frame_len;
        Ok(())
    })
}

/// Copies example `index` into `tensor` (`capacity` floats available) and
/// writes its label and SNR.
///
/// # Safety
/// `dataset` must be a live handle; `tensor` must hold `capacity` floats;
/// `label` and `snr_db` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mamc_dataset_get_example(
    dataset: *const MamcDataset,
    index: usize,
    tensor: *mut f32,
    capacity: usize,
    label: *mut u16,
    snr_db: *mut f32,
) -> MamcStatus {
    guard(|| {
        let d = dataset.as_ref().ok_or_else(|| Failure::null("dataset"))?;
        let ex = d
            .inner
            .examples
            .get(index)
            .ok_or_else(|| Failure::invalid(format!("index {index} out of range for {} examples", d.inner.len())))?;
        if tensor.is_null() {
            return Err(Failure::null("tensor"));
        }
        if capacity < ex.tensor.len() {
            return Err(Failure::invalid(format!("capacity {capacity} < {} values", ex.tensor.len())));
        }
        std::slice::from_raw_parts_mut(tensor, ex.tensor.len()).copy_from_slice(&ex.tensor);
        *out_arg(label, "label")? = ex.label;
        *out_arg(snr_db, "snr_db")? = ex.snr_db;
        Ok(())
    })
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mamc_dataset_free(dataset: *mut MamcDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mamc_model_load(path: *const c_char, out: *mut *mut MamcModel) -> MamcStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let inner = Model::<f32>::load(path_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(MamcModel { inner }));
        Ok(())
    })
}

/// Input shape `n_antennas x 2 x frame_len` per example, and the class count.
///
/// # Safety
/// `model` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn mamc_model_shape(
    model: *const MamcModel,
    n_antennas: *mut u32,
    frame_len: *mut u32,
    n_classes: *mut u32,
) -> MamcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| Failure::null("model"))?;
        let c = m.inner.config();
        *out_arg(n_antennas, "n_antennas")? = c.n_antennas as u32;
        *out_arg(frame_len, "frame_len")? = c.frame_len as u32;
        *out_arg(n_classes, "n_classes")? = c.n_classes as u32;
        Ok(())
    })
}

/// Eval-mode class probabilities and decisions for `batch` examples laid out
/// as `batch x n_antennas x 2 x frame_len` floats. `probabilities` may be
/// null; otherwise it receives `batch x n_classes` values.
///
/// # Safety
/// `model` must be a live handle, `input` must hold the full batch,
/// `decisions` must hold `batch` values and `probabilities` (if non-null)
/// `batch * n_classes`.
#[no_mangle]
pub unsafe extern "C" fn mamc_model_predict(
    model: *const MamcModel,
    input: *const f32,
    batch: usize,
    probabilities: *mut f32,
    decisions: *mut u32,
) -> MamcStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| Failure::null("model"))?;
        if input.is_null() {
            return Err(Failure::null("input"));
        }
        if decisions.is_null() {
            return Err(Failure::null("decisions"));
        }
        if batch == 0 {
            return Err(Failure::invalid("batch must be >= 1"));
        }
        let c = m.inner.config();
        let n = batch * c.n_antennas * 2 * c.frame_len;
        let data = std::slice::from_raw_parts(input, n).to_vec();
        let x = Tensor::new([batch, c.n_antennas, 2, c.frame_len], data)
            .map_err(|e| Failure::invalid(e.to_string()))?;
        let pred = m.inner.predict(&x)?;
        let out = std::slice::from_raw_parts_mut(decisions, batch);
        for (o, &d) in out.iter_mut().zip(&pred.decisions) {
            *o = d as u32;
        }
        if !probabilities.is_null() {
            std::slice::from_raw_parts_mut(probabilities, batch * c.n_classes).copy_from_slice(pred.probabilities.data());
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mamc_model_free(model: *mut MamcModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
