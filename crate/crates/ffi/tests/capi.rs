use std::ffi::{CStr, CString};
use std::ptr;

use uav_height_ffi::*;

fn last_error() -> String {
    let p = uh_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn generate(bs: f64, build: f64, seed: u64) -> *mut UhTopology {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { uh_topology_generate(bs, build, seed, &mut t) }, UhStatus::Ok);
    assert!(!t.is_null());
    t
}

#[test]
fn topology_lifecycle() {
    let t = generate(5.0, 500.0, 3);
    let mut n = 0usize;
    assert_eq!(unsafe { uh_topology_bs_count(t, &mut n) }, UhStatus::Ok);
    assert!(n > 50 && n < 250, "{n}");
    let mut b = 0usize;
    assert_eq!(unsafe { uh_topology_building_count(t, &mut b) }, UhStatus::Ok);
    assert!(b > 10_000);

    let mut json = ptr::null_mut();
    assert_eq!(unsafe { uh_topology_to_json(t, &mut json) }, UhStatus::Ok);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { uh_string_free(json) };
    let back = uav_height::topology::CityTopology::from_json(&text).unwrap();
    assert_eq!(back.bss.len(), n);

    unsafe { uh_topology_free(t) };
    unsafe { uh_topology_free(ptr::null_mut()) };
}

#[test]
fn sinr_matches_library() {
    let t = generate(5.0, 500.0, 9);
    let mut serving = 0usize;
    assert_eq!(unsafe { uh_nearest_bs(t, 10.0, 0.0, &mut serving) }, UhStatus::Ok);
    let mut s = 0.0;
    assert_eq!(unsafe { uh_sinr(t, 10.0, 0.0, 120.0, serving, &mut s) }, UhStatus::Ok);
    let topo = uav_height::topology::CityTopology::generate(
        &uav_height::topology::TopologyParams { bs_density_km2: 5.0, build_density_km2: 500.0, ..Default::default() },
        9,
    )
    .unwrap();
    let want = uav_height::radio::sinr(
        &topo,
        uav_height::topology::Point3::new(10.0, 0.0, 120.0),
        serving,
        &Default::default(),
    )
    .unwrap();
    assert_eq!(s, want);
    assert_eq!(uh_spectral_efficiency(3.0), 2.0);
    let mut blocked = true;
    assert_eq!(unsafe { uh_is_blocked(t, 10.0, 0.0, 120.0, serving, &mut blocked) }, UhStatus::Ok);
    unsafe { uh_topology_free(t) };
}

#[test]
fn errors_set_status_and_message() {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { uh_topology_generate(-1.0, 500.0, 1, &mut t) }, UhStatus::InvalidArgument);
    assert!(t.is_null());
    assert!(last_error().contains("invalid parameter"));

    let mut n = 0usize;
    assert_eq!(unsafe { uh_topology_bs_count(ptr::null(), &mut n) }, UhStatus::NullPointer);
    assert_eq!(last_error(), "topology is null");

    let t = generate(5.0, 100.0, 1);
    let mut s = 0.0;
    assert_eq!(unsafe { uh_sinr(t, 0.0, 0.0, 100.0, 1_000_000, &mut s) }, UhStatus::OutOfRange);
    unsafe { uh_topology_free(t) };

    let policy = CString::new("constant").unwrap();
    let mut buf = [0.0; 2];
    let st = unsafe { uh_run_cell(policy.as_ptr(), ptr::null(), 5.0, 500.0, 1, 0, 3, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(st, UhStatus::BufferTooSmall);
    let bogus = CString::new("hover").unwrap();
    let st = unsafe { uh_run_cell(bogus.as_ptr(), ptr::null(), 5.0, 500.0, 1, 0, 2, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(st, UhStatus::InvalidArgument);
    assert!(last_error().contains("hover"));
}

#[test]
fn run_cell_matches_harness() {
    let policy = CString::new("random").unwrap();
    let mut buf = [0.0; 4];
    let st = unsafe { uh_run_cell(policy.as_ptr(), ptr::null(), 5.0, 500.0, 11, 2, 4, buf.as_mut_ptr(), buf.len()) };
    assert_eq!(st, UhStatus::Ok);
    let cfg = uav_height::harness::ExperimentConfig {
        episodes: 4,
        summary_window: (1, 4),
        master_seed: 11,
        ..Default::default()
    };
    let spec = uav_height::harness::CellSpec {
        bs_density_km2: 5.0,
        build_density_km2: 500.0,
        policy: uav_height::agent::PolicyKind::Random,
        variant: None,
        replicate: 2,
    };
    let r = uav_height::harness::run_cell(&cfg, &spec).unwrap();
    let want: Vec<f64> = r.episodes.iter().map(|e| e.throughput_bits_hz).collect();
    assert_eq!(buf.to_vec(), want);
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(uh_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
