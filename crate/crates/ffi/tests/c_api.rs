use std::ffi::{CStr, CString};
use std::ptr;

use multiamc::archs::{ArchConfig, ArchKind, Model, ViewPool};
use multiamc::autodiff::Tensor;
use multiamc_ffi::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cstr(p: &std::path::Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = mamc_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

#[test]
fn synthesize_writes_unit_power_iq() {
    let mut iq = vec![0.0f64; 2 * 256];
    let status = unsafe { mamc_synthesize(1, 256, 9, iq.as_mut_ptr()) };
    assert_eq!(status, MamcStatus::Ok);
    assert!(mamc_last_error().is_null());
    let power = iq.iter().map(|v| v * v).sum::<f64>() / 256.0;
    assert!((power - 1.0).abs() < 1e-9, "{power}");

    let status = unsafe { mamc_synthesize(mamc_num_classes(), 256, 9, iq.as_mut_ptr()) };
    assert_eq!(status, MamcStatus::InvalidArgument);
    assert!(last_error().contains("out of range"));
    assert_eq!(unsafe { mamc_synthesize(0, 4, 1, ptr::null_mut()) }, MamcStatus::NullPointer);
}

#[test]
fn dataset_round_trip_through_handles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.cfg");
    std::fs::write(
        &cfg,
        "[dataset]\nschemes = BPSK, FM\nsnr_grid_db = 0\nn_antennas = 2\nframe_len = 64\nexamples_per_cell = 3\n",
    )
    .unwrap();
    let mut ds = ptr::null_mut();
    assert_eq!(unsafe { mamc_dataset_generate(cstr(&cfg).as_ptr(), &mut ds) }, MamcStatus::Ok);
    let (mut len, mut nr, mut n) = (0usize, 0u32, 0u32);
    assert_eq!(unsafe { mamc_dataset_shape(ds, &mut len, &mut nr, &mut n) }, MamcStatus::Ok);
    assert_eq!((len, nr, n), (6, 2, 64));

    let file = dir.path().join("d.mamc");
    assert_eq!(unsafe { mamc_dataset_save(ds, cstr(&file).as_ptr()) }, MamcStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { mamc_dataset_load(cstr(&file).as_ptr(), &mut back) }, MamcStatus::Ok);

    let mut a = vec![0f32; 256];
    let mut b = vec![0f32; 256];
    let (mut la, mut lb, mut sa, mut sb) = (0u16, 0u16, 0f32, 0f32);
    for i in 0..len {
        unsafe {
            assert_eq!(mamc_dataset_get_example(ds, i, a.as_mut_ptr(), a.len(), &mut la, &mut sa), MamcStatus::Ok);
            assert_eq!(mamc_dataset_get_example(back, i, b.as_mut_ptr(), b.len(), &mut lb, &mut sb), MamcStatus::Ok);
        }
        assert_eq!((la, sa.to_bits()), (lb, sb.to_bits()));
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    let status = unsafe { mamc_dataset_get_example(ds, len, a.as_mut_ptr(), a.len(), &mut la, &mut sa) };
    assert_eq!(status, MamcStatus::InvalidArgument);
    let status = unsafe { mamc_dataset_get_example(ds, 0, a.as_mut_ptr(), 10, &mut la, &mut sa) };
    assert_eq!(status, MamcStatus::InvalidArgument);
    assert!(last_error().contains("capacity"));
    unsafe {
        mamc_dataset_free(ds);
        mamc_dataset_free(back);
        mamc_dataset_free(ptr::null_mut());
    }
}

#[test]
fn missing_files_report_the_path() {
    let mut ds = ptr::null_mut();
    let path = CString::new("/nonexistent/x.mamc").unwrap();
    assert_eq!(unsafe { mamc_dataset_load(path.as_ptr(), &mut ds) }, MamcStatus::Io);
    assert!(ds.is_null());
    assert!(last_error().contains("/nonexistent/x.mamc"));
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { mamc_model_load(path.as_ptr(), &mut m) }, MamcStatus::Io);
    assert_eq!(unsafe { mamc_model_load(ptr::null(), &mut m) }, MamcStatus::NullPointer);
}

#[test]
fn model_predictions_match_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let config = ArchConfig {
        kind: ArchKind::Wlcnn,
        n_antennas: 2,
        frame_len: 64,
        n_classes: 20,
        width_multiplier: 0.125,
        view_pool: ViewPool::Max,
    };
    let mut model = Model::<f32>::new(config, &mut rng).unwrap();
    let batch = 3;
    let data: Vec<f32> = (0..batch * 2 * 2 * 64).map(|_| rng.random_range(-1.0..1.0)).collect();
    let x = Tensor::new([batch, 2, 2, 64], data.clone()).unwrap();
    model.warm_up(&x).unwrap();
    let expected = model.predict(&x).unwrap();
    let file = dir.path().join("m.ckpt");
    model.save(&file).unwrap();

    let mut handle = ptr::null_mut();
    assert_eq!(unsafe { mamc_model_load(cstr(&file).as_ptr(), &mut handle) }, MamcStatus::Ok);
    let (mut nr, mut n, mut k) = (0, 0, 0);
    assert_eq!(unsafe { mamc_model_shape(handle, &mut nr, &mut n, &mut k) }, MamcStatus::Ok);
    assert_eq!((nr, n, k), (2, 64, 20));
    let mut probs = vec![0f32; batch * 20];
    let mut decisions = vec![0u32; batch];
    let status = unsafe { mamc_model_predict(handle, data.as_ptr(), batch, probs.as_mut_ptr(), decisions.as_mut_ptr()) };
    assert_eq!(status, MamcStatus::Ok);
    assert_eq!(probs, expected.probabilities.data());
    assert_eq!(decisions, expected.decisions.iter().map(|&d| d as u32).collect::<Vec<_>>());
    let status = unsafe { mamc_model_predict(handle, data.as_ptr(), batch, ptr::null_mut(), decisions.as_mut_ptr()) };
    assert_eq!(status, MamcStatus::Ok);
    unsafe { mamc_model_free(handle) };
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/multiamc.h")).unwrap();
    for name in [
        "typedef struct MamcDataset MamcDataset",
        "typedef struct MamcModel MamcModel",
        "MAMC_STATUS_OK = 0",
        "mamc_last_error",
        "mamc_synthesize",
        "mamc_dataset_generate",
        "mamc_dataset_get_example",
        "mamc_model_predict",
        "mamc_model_free",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
